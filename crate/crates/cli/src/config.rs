use std::path::{Path, PathBuf};

use cpf::cpf::CpfParams;
use cpf::io::{check_schema, read_json};
use cpf::metrics::SIV_RESOLUTION;
use cpf::optim::{GeoConfig, Mode};
use cpf::scene::SphereGraspSpec;
use serde::{Deserialize, Serialize};

pub const PIPELINE_SCHEMA: &str = "cpf.pipeline/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schema: String,
    /// Hand model for `frames` and `anchors`; the built-in synthetic hand when unset.
    pub hand_model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cpf: CpfParams,
    /// Annotation distance scale, mm.
    pub annotation_scale: f64,
    pub geo: GeoConfig,
    pub mode: Mode,
    pub seed: u64,
    /// Number of scenes `synth` emits, seeds `seed..seed + count`.
    pub count: usize,
    pub synth: SphereGraspSpec,
    pub siv_resolution: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema: PIPELINE_SCHEMA.into(),
            hand_model: None,
            out: None,
            cpf: CpfParams::default(),
            annotation_scale: 20.0,
            geo: GeoConfig::default(),
            mode: Mode::HandAlone,
            seed: 0,
            count: 1,
            synth: SphereGraspSpec::default(),
            siv_resolution: SIV_RESOLUTION,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> cpf::Result<Self> {
        let c: Self = read_json(path)?;
        check_schema(PIPELINE_SCHEMA, &c.schema)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.cpf.validate().map_err(|e| e.to_string())?;
        if !(self.annotation_scale.is_finite() && self.annotation_scale > 0.0) {
            return Err(format!(
                "annotation_scale must be positive, got {}",
                self.annotation_scale
            ));
        }
        if self.siv_resolution == 0 || self.count == 0 {
            return Err("siv_resolution and count must be positive".into());
        }
        self.geo.validate().map_err(|e| e.to_string())
    }
}
