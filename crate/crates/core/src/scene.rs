//! Synthetic sphere-grasp scenes and the pose and scene documents shared by
//! the pipeline stages.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::anchors::{assign_subregions, build_control_points, derive_anchors, AnchorSet, ControlPoint, SubregionMap};
use crate::error::{Error, Result};
use crate::geom::{read_obj, write_obj, Mesh, RigidPose, Rotation};
use crate::hand::{load_hand_model, save_hand_model, synth_hand, HandParams, HandPose, SkinnedHand, JOINT_COUNT};
use crate::io::{check_schema, read_json, write_json};

pub const POSE_SCHEMA: &str = "cpf.pose/1";
pub const SCENE_SCHEMA: &str = "cpf.scene/1";

/// Object pose plus hand pose; used for ground truth, initial and refined states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub schema: String,
    pub object: RigidPose,
    pub hand: HandPose,
}

impl PoseRecord {
    pub fn new(object: RigidPose, hand: HandPose) -> Self {
        Self {
            schema: POSE_SCHEMA.into(),
            object,
            hand,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r: Self = read_json(path)?;
        check_schema(POSE_SCHEMA, &r.schema)?;
        r.hand.validate()?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Derived per-hand data every stage needs.
#[derive(Debug, Clone)]
pub struct HandAssets {
    pub hand: SkinnedHand,
    pub control_points: Vec<ControlPoint>,
    pub subregions: SubregionMap,
    pub anchors: AnchorSet,
}

impl HandAssets {
    pub fn new(hand: SkinnedHand) -> Result<Self> {
        let control_points = build_control_points(&hand)?;
        let subregions = assign_subregions(&hand, &control_points);
        let anchors = derive_anchors(&hand, &control_points, &subregions)?;
        Ok(Self {
            hand,
            control_points,
            subregions,
            anchors,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereGraspSpec {
    pub radius: f64,
    /// Sphere centre along the finger direction; it sits under the palm.
    pub center_x: f64,
    pub center_z: f64,
    pub subdivisions: usize,
    /// Gap left between each curled finger and the sphere, mm.
    pub clearance: f64,
    /// Largest flexion tried per joint, rad.
    pub max_bend: f64,
    pub wrist_translation: f64,
    pub wrist_rotation_deg: f64,
    pub object_translation: f64,
    pub object_rotation_deg: f64,
    pub seed: u64,
}

impl Default for SphereGraspSpec {
    fn default() -> Self {
        Self {
            radius: 70.0,
            center_x: 70.0,
            center_z: 0.0,
            subdivisions: 4,
            clearance: 2.0,
            max_bend: 1.4,
            wrist_translation: 15.0,
            wrist_rotation_deg: 10.0,
            object_translation: 0.0,
            object_rotation_deg: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub assets: HandAssets,
    /// Object surface in its own frame.
    pub object: Mesh,
    pub gt: PoseRecord,
    pub initial: PoseRecord,
}

impl SyntheticScene {
    pub fn hand(&self) -> &SkinnedHand {
        &self.assets.hand
    }
}

/// Sphere resting against the palm with fingers curled onto it, then a
/// seeded rigid perturbation of the wrist (and optionally the object).
pub fn sphere_grasp(spec: &SphereGraspSpec) -> Result<SyntheticScene> {
    sphere_grasp_with(HandAssets::new(synth_hand(&HandParams::default())?)?, spec)
}

pub fn sphere_grasp_with(assets: HandAssets, spec: &SphereGraspSpec) -> Result<SyntheticScene> {
    if !(spec.radius > 0.0 && spec.clearance >= 0.0 && spec.max_bend > 0.0) {
        return Err(Error::Invalid("sphere grasp dimensions must be positive".into()));
    }
    let hand = &assets.hand;
    let palm_side = hand
        .template
        .vertices
        .iter()
        .map(|v| v.dot(&hand.up))
        .fold(f64::INFINITY, f64::min);
    let center = Vector3::new(spec.center_x, 0.0, spec.center_z) + hand.up * (palm_side - spec.radius);
    let object = Mesh::icosphere(Vector3::zeros(), spec.radius, spec.subdivisions)?;
    let gt_hand = curl_onto_sphere(hand, &center, spec.radius, spec.clearance, spec.max_bend)?;
    let gt = PoseRecord::new(RigidPose::from_translation(center), gt_hand);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let wrist = perturbation(&mut rng, spec.wrist_translation, spec.wrist_rotation_deg);
    let obj = perturbation(&mut rng, spec.object_translation, spec.object_rotation_deg);
    let initial = PoseRecord::new(
        obj.compose(&gt.object),
        HandPose {
            wrist: wrist.compose(&gt.hand.wrist),
            joint_rotations: gt.hand.joint_rotations.clone(),
        },
    );
    Ok(SyntheticScene {
        assets,
        object,
        gt,
        initial,
    })
}

/// Rigid motion with translation length `mm` and rotation angle `deg`, both
/// along uniformly drawn directions.
pub fn perturbation(rng: &mut ChaCha8Rng, mm: f64, deg: f64) -> RigidPose {
    let t: [f64; 3] = UnitSphere.sample(rng);
    let a: [f64; 3] = UnitSphere.sample(rng);
    RigidPose::new(
        Rotation::from_axis_angle(&Vector3::from(a), deg.to_radians()),
        Vector3::from(t) * mm,
    )
}

/// Flexes each finger joint in chain order until the finger first comes within
/// `clearance` of the sphere. Joints that cannot reach it within `max_bend`
/// stay straight.
pub fn curl_onto_sphere(
    hand: &SkinnedHand,
    center: &Vector3<f64>,
    radius: f64,
    clearance: f64,
    max_bend: f64,
) -> Result<HandPose> {
    const SCAN: usize = 64;
    const BISECT: usize = 40;
    let mut pose = HandPose::default();
    let owner: Vec<usize> = (0..hand.vertex_count()).map(|i| hand.dominant_joint(i)).collect();
    for j in 1..JOINT_COUNT {
        let sub = hand.tree.subtree_mask(j);
        let gap = |pose: &HandPose| -> Result<f64> {
            let v = hand.forward(pose)?.vertices;
            Ok(v.iter()
                .zip(&owner)
                .filter(|(_, &k)| sub[k])
                .map(|(p, _)| (p - center).norm() - radius)
                .fold(f64::INFINITY, f64::min))
        };
        let at = |theta: f64| {
            let mut p = pose.clone();
            p.joint_rotations[j - 1] = Rotation::new(Vector3::new(0.0, 0.0, -theta));
            p
        };
        if gap(&pose)? <= clearance {
            continue;
        }
        let mut lo = 0.0;
        let mut hi = None;
        for s in 1..=SCAN {
            let th = max_bend * s as f64 / SCAN as f64;
            if gap(&at(th))? <= clearance {
                hi = Some(th);
                break;
            }
            lo = th;
        }
        let theta = match hi {
            None => 0.0,
            Some(mut hi) => {
                for _ in 0..BISECT {
                    let mid = 0.5 * (lo + hi);
                    if gap(&at(mid))? <= clearance {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                lo
            }
        };
        pose = at(theta);
    }
    Ok(pose)
}

/// Relative file names of one scene directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema: String,
    pub hand_model: String,
    pub object: String,
    pub gt_pose: String,
    pub initial_pose: String,
    pub anchors: String,
    #[serde(default)]
    pub annotation: Option<String>,
    #[serde(default)]
    pub labels: Option<String>,
    pub spec: Option<SphereGraspSpec>,
}

impl Default for SceneManifest {
    fn default() -> Self {
        Self {
            schema: SCENE_SCHEMA.into(),
            hand_model: "hand_model.json".into(),
            object: "object.obj".into(),
            gt_pose: "gt_pose.json".into(),
            initial_pose: "initial_pose.json".into(),
            anchors: "anchors.json".into(),
            annotation: None,
            labels: None,
            spec: None,
        }
    }
}

/// A scene read back from disk; paths are resolved against the manifest.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub dir: PathBuf,
    pub manifest: SceneManifest,
    pub hand: SkinnedHand,
    pub anchors: AnchorSet,
    pub object: Mesh,
    pub gt: PoseRecord,
    pub initial: PoseRecord,
}

impl LoadedScene {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Writes the scene directory and returns the manifest path.
pub fn save_scene(dir: &Path, scene: &SyntheticScene, spec: Option<SphereGraspSpec>) -> Result<PathBuf> {
    let m = SceneManifest {
        spec,
        ..SceneManifest::default()
    };
    save_hand_model(&dir.join(&m.hand_model), &scene.assets.hand, "hand_template.obj")?;
    write_obj(dir.join(&m.object), &scene.object)?;
    scene.gt.save(&dir.join(&m.gt_pose))?;
    scene.initial.save(&dir.join(&m.initial_pose))?;
    scene.assets.anchors.save(&dir.join(&m.anchors))?;
    let path = dir.join("scene.json");
    write_json(&path, &m)?;
    Ok(path)
}

pub fn load_scene(manifest_path: &Path) -> Result<LoadedScene> {
    let manifest: SceneManifest = read_json(manifest_path)?;
    check_schema(SCENE_SCHEMA, &manifest.schema)?;
    let dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let hand = load_hand_model(&dir.join(&manifest.hand_model))?;
    let anchors = AnchorSet::load(&dir.join(&manifest.anchors))?;
    if anchors.vertex_count != hand.vertex_count() {
        return Err(Error::size(
            "anchor hand vertices",
            hand.vertex_count(),
            anchors.vertex_count,
        ));
    }
    let object = read_obj(dir.join(&manifest.object))?;
    let gt = PoseRecord::load(&dir.join(&manifest.gt_pose))?;
    let initial = PoseRecord::load(&dir.join(&manifest.initial_pose))?;
    Ok(LoadedScene {
        dir,
        manifest,
        hand,
        anchors,
        object,
        gt,
        initial,
    })
}
