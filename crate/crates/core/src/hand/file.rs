//! Hand model document: joint tree, skin weights and a template OBJ path
//! resolved relative to the document.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::skin::SkinnedHand;
use super::tree::KinematicTree;
use crate::error::Result;
use crate::geom::{read_obj, write_obj};
use crate::io::{check_schema, read_json, write_json};

pub const HAND_MODEL_SCHEMA: &str = "cpf.hand_model/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandModelDoc {
    pub schema: String,
    pub template_obj: String,
    pub up: Vector3<f64>,
    pub tree: KinematicTree,
    /// Per template vertex: `[joint, weight]` pairs.
    pub skin_weights: Vec<Vec<(usize, f64)>>,
}

pub fn load_hand_model(path: &Path) -> Result<SkinnedHand> {
    let doc: HandModelDoc = read_json(path)?;
    check_schema(HAND_MODEL_SCHEMA, &doc.schema)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let template = read_obj(base.join(&doc.template_obj))?;
    SkinnedHand::new(doc.tree, template, doc.skin_weights, doc.up)
}

/// Writes the document to `path` and the template next to it as `template_obj`.
pub fn save_hand_model(path: &Path, hand: &SkinnedHand, template_obj: &str) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    write_obj(base.join(template_obj), &hand.template)?;
    let doc = HandModelDoc {
        schema: HAND_MODEL_SCHEMA.to_string(),
        template_obj: template_obj.to_string(),
        up: hand.up,
        tree: hand.tree.clone(),
        skin_weights: hand.weights.clone(),
    };
    write_json(path, &doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::{synth_hand, HandParams};

    #[test]
    fn roundtrip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let h = synth_hand(&HandParams::default()).unwrap();
        let p = dir.path().join("hand.json");
        save_hand_model(&p, &h, "hand.obj").unwrap();
        let back = load_hand_model(&p).unwrap();
        assert_eq!(back.template.vertices, h.template.vertices);
        assert_eq!(back.template.faces, h.template.faces);
        assert_eq!(back.tree, h.tree);
        assert_eq!(back.weights, h.weights);
    }

    #[test]
    fn wrong_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let h = synth_hand(&HandParams::default()).unwrap();
        let p = dir.path().join("hand.json");
        save_hand_model(&p, &h, "hand.obj").unwrap();
        let text = std::fs::read_to_string(&p)
            .unwrap()
            .replace(HAND_MODEL_SCHEMA, "cpf.hand_model/9");
        std::fs::write(&p, text).unwrap();
        assert!(load_hand_model(&p).is_err());
    }
}
