//! Gradient-based pose refinement against a contact term.

mod adam;
mod cost;

pub use adam::Adam;
pub use cost::{
    anatomical_cost, non_finite_term, offset_cost, pose_points, ContactTerm, CostTerms, Evaluation, Problem,
    VariableGradient, Variables, Weights, ANATOMICAL_WEIGHT,
};

use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::cpf::SpringSystem;
use crate::error::{Error, Result};
use crate::geom::{Mesh, RigidPose, Rotation};
use crate::hand::{HandPose, SkinnedHand, ROTATION_COUNT};

pub const TRACE_SCHEMA: &str = "cpf.energy_trace/1";

/// Parameter count: object pose, wrist pose, joint rotations.
const PARAMS: usize = 12 + 3 * ROTATION_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeoConfig {
    pub iterations: usize,
    pub lr: f64,
    pub patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weights: Weights,
    /// Millimeters per optimizer unit of translation.
    pub translation_unit: f64,
    /// Attraction radius of the vanilla contact term, mm.
    pub vanilla_gate: f64,
    /// Rebuild repulsive pairs from the current pose at every iteration.
    pub requery_repulsion: bool,
    /// Descend on `ln(cost)`: same minimizers, gradients rescaled by `1/cost`.
    pub log_cost: bool,
    /// Recorded in the trace; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            iterations: 400,
            lr: 1e-2,
            patience: 20,
            plateau_factor: 0.5,
            min_lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weights: Weights::default(),
            translation_unit: 60.0,
            vanilla_gate: 20.0,
            requery_repulsion: true,
            log_cost: true,
            seed: 0,
        }
    }
}

impl GeoConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let ok = self.iterations > 0
            && self.lr > 0.0
            && self.lr.is_finite()
            && self.plateau_factor > 0.0
            && self.plateau_factor <= 1.0
            && self.min_lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.translation_unit > 0.0
            && self.vanilla_gate >= 0.0
            && [w.elastic, w.anatomical, w.offset_hand, w.offset_object]
                .iter()
                .all(|x| x.is_finite() && *x >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("optimizer config out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Object pose fixed at its input value.
    HandAlone,
    HandObject,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hand_alone" | "hand-alone" => Ok(Mode::HandAlone),
            "hand_object" | "hand-object" => Ok(Mode::HandObject),
            _ => Err(Error::Invalid(format!("unknown mode `{s}`"))),
        }
    }
}

/// Which variable blocks the solver may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frozen {
    pub object_rotation: bool,
    pub object_translation: bool,
    pub wrist_rotation: bool,
    pub wrist_translation: bool,
    pub joints: bool,
}

impl Frozen {
    pub fn none() -> Self {
        Self {
            object_rotation: false,
            object_translation: false,
            wrist_rotation: false,
            wrist_translation: false,
            joints: false,
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::HandAlone => Self {
                object_rotation: true,
                object_translation: true,
                ..Self::none()
            },
            Mode::HandObject => Self::none(),
        }
    }

    fn active(&self) -> [bool; PARAMS] {
        let mut a = [true; PARAMS];
        let blocks = [
            (0..3, self.object_rotation),
            (3..6, self.object_translation),
            (6..9, self.wrist_rotation),
            (9..12, self.wrist_translation),
            (12..PARAMS, self.joints),
        ];
        for (r, frozen) in blocks {
            a[r].iter_mut().for_each(|x| *x = !frozen);
        }
        a
    }
}

/// Current values of every optimized variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimVariables {
    pub object_pose: RigidPose,
    pub hand_pose: HandPose,
}

/// Hand and object as handed to the solver; the object mesh is in its own frame.
#[derive(Debug, Clone, Copy)]
pub struct RefineScene<'a> {
    pub hand: &'a SkinnedHand,
    pub anchors: &'a AnchorSet,
    pub object: &'a Mesh,
    pub object_pose: &'a RigidPose,
    pub hand_pose: &'a HandPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub total: f64,
    pub contact: f64,
    pub anatomical: f64,
    pub offset_hand: f64,
    pub offset_object: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub schema: String,
    pub seed: u64,
    /// Index into `entries` of the returned iterate.
    pub best: usize,
    pub entries: Vec<TraceEntry>,
}

impl EnergyTrace {
    pub fn initial_cost(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.total)
    }

    pub fn best_cost(&self) -> f64 {
        self.entries.get(self.best).map_or(0.0, |e| e.total)
    }
}

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub variables: OptimVariables,
    pub hand_mesh: Mesh,
    /// Object surface at the refined pose.
    pub object_mesh: Mesh,
    pub trace: EnergyTrace,
}

/// Minimizes the weighted elastic, anatomical and offset costs.
pub fn refine(scene: RefineScene<'_>, springs: &SpringSystem, cfg: &GeoConfig, mode: Mode) -> Result<RefineResult> {
    let contact = ContactTerm::Elastic {
        springs,
        requery: cfg.requery_repulsion,
    };
    solve(scene, contact, cfg, Frozen::for_mode(mode))
}

/// As [`refine`], attracting fingertip anchors to their nearest object vertex instead.
pub fn vanilla_contact_refine(scene: RefineScene<'_>, cfg: &GeoConfig, mode: Mode) -> Result<RefineResult> {
    let anchors = scene.anchors.tip_anchors();
    if anchors.is_empty() {
        return Err(Error::Invalid("anchor set has no fingertip anchors".into()));
    }
    let contact = ContactTerm::Vanilla {
        anchors,
        gate: cfg.vanilla_gate,
    };
    solve(scene, contact, cfg, Frozen::for_mode(mode))
}

/// Solver loop shared by every contact term. Returns the lowest-cost iterate.
pub fn solve(
    scene: RefineScene<'_>,
    contact: ContactTerm<'_>,
    cfg: &GeoConfig,
    frozen: Frozen,
) -> Result<RefineResult> {
    cfg.validate()?;
    scene.hand_pose.validate()?;
    if !scene.object_pose.is_finite() {
        return Err(Error::Invalid("object pose has non-finite components".into()));
    }
    let initial = Variables {
        object: scene.object_pose,
        hand: scene.hand_pose,
    };
    let problem = Problem::new(scene.hand, scene.anchors, scene.object, contact, cfg.weights, initial)?;
    let codec = Codec {
        base: OptimVariables {
            object_pose: *scene.object_pose,
            hand_pose: scene.hand_pose.clone(),
        },
        unit: cfg.translation_unit,
    };
    let active = frozen.active();
    let mut x = codec.encode(&codec.base);
    let mut adam = Adam::new(PARAMS, cfg.beta1, cfg.beta2, cfg.eps);
    let mut lr = cfg.lr;
    let mut entries = Vec::with_capacity(cfg.iterations);
    let mut best = (f64::INFINITY, 0usize, x);
    let mut stale = 0;
    let mut previous = f64::INFINITY;

    for it in 0..cfg.iterations {
        let vars = codec.decode(&x);
        let ev = problem.evaluate(Variables {
            object: &vars.object_pose,
            hand: &vars.hand_pose,
        })?;
        if let Some(term) = non_finite_term(&ev.terms) {
            return Err(Error::NonFinite { term, iteration: it });
        }
        let mut g = codec.encode_grad(&ev.grad);
        if cfg.log_cost && ev.total > 0.0 {
            g.iter_mut().for_each(|v| *v /= ev.total);
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: "gradient",
                iteration: it,
            });
        }
        entries.push(TraceEntry {
            iteration: it,
            total: ev.total,
            contact: ev.terms.contact,
            anatomical: ev.terms.anatomical,
            offset_hand: ev.terms.offset_hand,
            offset_object: ev.terms.offset_object,
            lr,
        });
        if ev.total < best.0 {
            best = (ev.total, it, x);
        }
        // Plateau: the cost failed to drop below the previous iterate's
        // `patience` times in a row.
        if ev.total < previous {
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                lr = (lr * cfg.plateau_factor).max(cfg.min_lr);
                stale = 0;
            }
        }
        previous = ev.total;
        if it + 1 < cfg.iterations {
            adam.step(&mut x, &g, lr, &active);
        }
    }

    let variables = codec.decode(&best.2);
    let hand_mesh = scene.hand.forward(&variables.hand_pose)?.mesh(scene.hand);
    let object_mesh = scene.object.transformed(&variables.object_pose);
    Ok(RefineResult {
        variables,
        hand_mesh,
        object_mesh,
        trace: EnergyTrace {
            schema: TRACE_SCHEMA.into(),
            seed: cfg.seed,
            best: best.1,
            entries,
        },
    })
}

/// Flat parameter layout: object rotation, object translation, wrist rotation,
/// wrist translation, joint rotations. Translations are stored as offsets from
/// their initial value in `unit` mm, so an untouched block decodes bit-exactly.
struct Codec {
    base: OptimVariables,
    unit: f64,
}

impl Codec {
    fn encode(&self, v: &OptimVariables) -> [f64; PARAMS] {
        let mut x = [0.0; PARAMS];
        x[0..3].copy_from_slice(v.object_pose.rotation.axis_angle.as_slice());
        x[3..6]
            .copy_from_slice(((v.object_pose.translation - self.base.object_pose.translation) / self.unit).as_slice());
        x[6..9].copy_from_slice(v.hand_pose.wrist.rotation.axis_angle.as_slice());
        x[9..12].copy_from_slice(
            ((v.hand_pose.wrist.translation - self.base.hand_pose.wrist.translation) / self.unit).as_slice(),
        );
        for (j, r) in v.hand_pose.joint_rotations.iter().enumerate() {
            x[12 + 3 * j..15 + 3 * j].copy_from_slice(r.axis_angle.as_slice());
        }
        x
    }

    fn decode(&self, x: &[f64; PARAMS]) -> OptimVariables {
        let v3 = |i: usize| Vector3::new(x[i], x[i + 1], x[i + 2]);
        let shift = |base: &Vector3<f64>, i: usize| {
            let d = v3(i);
            if d == Vector3::zeros() {
                *base
            } else {
                base + d * self.unit
            }
        };
        OptimVariables {
            object_pose: RigidPose::new(Rotation::new(v3(0)), shift(&self.base.object_pose.translation, 3)),
            hand_pose: HandPose {
                wrist: RigidPose::new(Rotation::new(v3(6)), shift(&self.base.hand_pose.wrist.translation, 9)),
                joint_rotations: (0..ROTATION_COUNT).map(|j| Rotation::new(v3(12 + 3 * j))).collect(),
            },
        }
    }

    fn encode_grad(&self, g: &VariableGradient) -> [f64; PARAMS] {
        let mut x = [0.0; PARAMS];
        x[0..3].copy_from_slice(g.object_rotation.as_slice());
        x[3..6].copy_from_slice((g.object_translation * self.unit).as_slice());
        x[6..9].copy_from_slice(g.hand.wrist_rotation.as_slice());
        x[9..12].copy_from_slice((g.hand.wrist_translation * self.unit).as_slice());
        for (j, r) in g.hand.joints.iter().enumerate() {
            x[12 + 3 * j..15 + 3 * j].copy_from_slice(r.as_slice());
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpf::{AttractiveSpring, CpfParams};
    use crate::scene::{sphere_grasp, SphereGraspSpec, SyntheticScene};

    fn small_scene() -> SyntheticScene {
        sphere_grasp(&SphereGraspSpec {
            subdivisions: 2,
            seed: 3,
            ..SphereGraspSpec::default()
        })
        .unwrap()
    }

    fn scene_ref(s: &SyntheticScene) -> RefineScene<'_> {
        RefineScene {
            hand: s.hand(),
            anchors: &s.assets.anchors,
            object: &s.object,
            object_pose: &s.initial.object,
            hand_pose: &s.initial.hand,
        }
    }

    #[test]
    fn codec_round_trip_is_exact() {
        let s = small_scene();
        let codec = Codec {
            base: OptimVariables {
                object_pose: s.initial.object,
                hand_pose: s.initial.hand.clone(),
            },
            unit: 60.0,
        };
        let x = codec.encode(&codec.base);
        assert!(x[3..6].iter().chain(&x[9..12]).all(|v| *v == 0.0));
        assert_eq!(codec.decode(&x), codec.base);
    }

    #[test]
    fn frozen_masks() {
        let a = Frozen::for_mode(Mode::HandAlone).active();
        assert!(a[..6].iter().all(|x| !x));
        assert!(a[6..].iter().all(|x| *x));
        assert!(Frozen::for_mode(Mode::HandObject).active().iter().all(|x| *x));
        assert_eq!("hand-object".parse::<Mode>().unwrap(), Mode::HandObject);
        assert!("both".parse::<Mode>().is_err());
    }

    #[test]
    fn empty_problem_leaves_poses_unchanged() {
        let s = small_scene();
        let springs = SpringSystem::empty(&CpfParams::default());
        let mut cfg = GeoConfig {
            iterations: 30,
            ..GeoConfig::default()
        };
        cfg.weights.anatomical = 0.0;
        cfg.weights.offset_hand = 0.0;
        cfg.weights.offset_object = 0.0;
        let r = refine(scene_ref(&s), &springs, &cfg, Mode::HandObject).unwrap();
        assert_eq!(r.variables.object_pose, s.initial.object);
        assert_eq!(r.variables.hand_pose, s.initial.hand);
        assert!(r.trace.entries.iter().all(|e| e.total == 0.0));
    }

    #[test]
    fn single_spring_pulls_wrist_onto_target() {
        let s = small_scene();
        let mut springs = SpringSystem::empty(&CpfParams::default());
        springs.attractive.push(AttractiveSpring {
            anchor: 0,
            object_vertex: 7,
            k: 1.0,
        });
        let mut cfg = GeoConfig {
            iterations: 4000,
            ..GeoConfig::default()
        };
        cfg.weights.offset_hand = 0.0;
        cfg.weights.offset_object = 0.0;
        let frozen = Frozen {
            wrist_translation: false,
            ..Frozen {
                object_rotation: true,
                object_translation: true,
                wrist_rotation: true,
                wrist_translation: true,
                joints: true,
            }
        };
        let contact = ContactTerm::Elastic {
            springs: &springs,
            requery: true,
        };
        let r = solve(scene_ref(&s), contact, &cfg, frozen).unwrap();
        let a = crate::anchors::interpolate_anchors(&s.assets.anchors, &r.hand_mesh.vertices).unwrap()[0];
        let target = r.object_mesh.vertices[7];
        assert!((a - target).norm() < 1e-3, "{}", (a - target).norm());
        assert_eq!(r.variables.hand_pose.joint_rotations, s.initial.hand.joint_rotations);
        assert_eq!(r.variables.hand_pose.wrist.rotation, s.initial.hand.wrist.rotation);
    }

    #[test]
    fn hand_alone_keeps_object_and_is_deterministic() {
        let s = small_scene();
        let mut springs = SpringSystem::empty(&CpfParams::default());
        for (i, j) in [(0, 3), (5, 40), (9, 80)] {
            springs.attractive.push(AttractiveSpring {
                anchor: i,
                object_vertex: j,
                k: 0.5,
            });
        }
        springs.repelling = (0..s.object.vertex_count()).collect();
        let cfg = GeoConfig {
            iterations: 40,
            ..GeoConfig::default()
        };
        let a = refine(scene_ref(&s), &springs, &cfg, Mode::HandAlone).unwrap();
        let b = refine(scene_ref(&s), &springs, &cfg, Mode::HandAlone).unwrap();
        assert_eq!(a.variables.object_pose, s.initial.object);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.variables, b.variables);
        assert!(a.trace.best_cost() <= a.trace.initial_cost());
        assert!(a.trace.entries.len() <= cfg.iterations);
    }

    #[test]
    fn non_finite_cost_names_the_term() {
        let mut s = small_scene();
        s.object.vertices[0].x = f64::NAN;
        let mut springs = SpringSystem::empty(&CpfParams::default());
        springs.attractive.push(AttractiveSpring {
            anchor: 0,
            object_vertex: 0,
            k: 1.0,
        });
        let e = refine(scene_ref(&s), &springs, &GeoConfig::default(), Mode::HandAlone).unwrap_err();
        assert!(
            matches!(
                e,
                Error::NonFinite {
                    term: "contact",
                    iteration: 0
                }
            ),
            "{e}"
        );
    }

    #[test]
    fn invalid_config_is_rejected() {
        let s = small_scene();
        let springs = SpringSystem::empty(&CpfParams::default());
        let cfg = GeoConfig {
            lr: 0.0,
            ..GeoConfig::default()
        };
        assert!(refine(scene_ref(&s), &springs, &cfg, Mode::HandAlone).is_err());
    }
    fn vanilla_cfg(iterations: usize) -> GeoConfig {
        GeoConfig {
            iterations,
            ..GeoConfig::default()
        }
    }

    #[test]
    fn vanilla_on_touching_tips_costs_nothing() {
        let s = small_scene();
        let posed = s.hand().forward(&s.initial.hand).unwrap();
        let all = crate::anchors::interpolate_anchors(&s.assets.anchors, &posed.vertices).unwrap();
        let tips: Vec<_> = s.assets.anchors.tip_anchors().iter().map(|&i| all[i]).collect();
        let object = Mesh::new(tips, vec![[0, 1, 2]]).unwrap();
        let scene = RefineScene {
            object: &object,
            object_pose: &RigidPose::identity(),
            ..scene_ref(&s)
        };
        let r = vanilla_contact_refine(scene, &vanilla_cfg(5), Mode::HandAlone).unwrap();
        assert!(r.trace.entries[0].contact < 1e-20, "{}", r.trace.entries[0].contact);
    }

    #[test]
    fn vanilla_ignores_far_objects() {
        let s = small_scene();
        let far = RigidPose::from_translation(s.initial.object.translation + Vector3::new(0.0, 500.0, 0.0));
        let scene = RefineScene {
            object_pose: &far,
            ..scene_ref(&s)
        };
        let r = vanilla_contact_refine(scene, &vanilla_cfg(20), Mode::HandAlone).unwrap();
        assert!(r.trace.entries.iter().all(|e| e.contact == 0.0));
    }

    #[test]
    fn vanilla_does_not_increase_disjointedness() {
        for seed in 0..3 {
            let s = sphere_grasp(&SphereGraspSpec {
                seed,
                ..SphereGraspSpec::default()
            })
            .unwrap();
            let r = vanilla_contact_refine(scene_ref(&s), &vanilla_cfg(150), Mode::HandAlone).unwrap();
            let before = s.hand().forward(&s.initial.hand).unwrap().mesh(s.hand());
            let object = s.object.transformed(&s.initial.object);
            let dd = |h: &Mesh| crate::metrics::disjointedness(h, &s.assets.subregions, &object).unwrap();
            assert!(dd(&r.hand_mesh) <= dd(&before) + 1e-9, "seed {seed}");
        }
    }
}
