use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::anchors::{interpolate_anchors, scatter_anchor_gradient, AnchorSet};
use crate::cpf::{elastic_energy_grad, SpringSystem};
use crate::error::{Error, Result};
use crate::geom::{right_jacobian, Mesh, RigidPose, Rotation};
use crate::hand::{pose_backward, HandPose, PoseGradient, SkinnedHand, BEND_DOMINANCE};

/// Rotations shorter than this contribute nothing to the anatomical cost.
const ANAT_MIN_ANGLE: f64 = 1e-12;

/// Axial-constraint cost over local joint rotations and its gradient.
///
/// Per joint: `|twist component|` of the unit axis, `|splay component|` for
/// non-knuckle joints, and `max(bend angle − π/2, 0)`. `knuckles[j]` refers to
/// joint `j`, so `rotations[j - 1]` pairs with `knuckles[j]`.
pub fn anatomical_cost(rotations: &[Rotation], knuckles: &[bool]) -> Result<(f64, Vec<Vector3<f64>>)> {
    if rotations.len() + 1 != knuckles.len() {
        return Err(Error::size("knuckle flags", rotations.len() + 1, knuckles.len()));
    }
    let mut total = 0.0;
    let mut grad = vec![Vector3::zeros(); rotations.len()];
    for (i, r) in rotations.iter().enumerate() {
        let v = r.axis_angle;
        let th = v.norm();
        if th < ANAT_MIN_ANGLE {
            continue;
        }
        let c = v / th;
        // d(c_a)/dv = (e_a − c_a c) / θ
        let dc = |a: usize| {
            let mut e = -c * c[a];
            e[a] += 1.0;
            e / th
        };
        total += c.x.abs();
        grad[i] += c.x.signum() * dc(0);
        if !knuckles[i + 1] {
            total += c.y.abs();
            grad[i] += c.y.signum() * dc(1);
        }
        let (phi, dphi) = if c.z.abs() > BEND_DOMINANCE {
            (th, c)
        } else {
            (v.z.abs(), Vector3::z() * v.z.signum())
        };
        if phi > FRAC_PI_2 {
            total += phi - FRAC_PI_2;
            grad[i] += dphi;
        }
    }
    Ok((total, grad))
}

/// Mean squared displacement and its gradient `2(v − v₀)/N`.
pub fn offset_cost(current: &[Vector3<f64>], initial: &[Vector3<f64>]) -> Result<(f64, Vec<Vector3<f64>>)> {
    if current.len() != initial.len() {
        return Err(Error::size("offset vertices", initial.len(), current.len()));
    }
    if current.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = current.len() as f64;
    let mut sum = 0.0;
    let grad = current
        .iter()
        .zip(initial)
        .map(|(v, v0)| {
            let d = v - v0;
            sum += d.norm_squared();
            d * (2.0 / n)
        })
        .collect();
    Ok((sum / n, grad))
}

pub const ANATOMICAL_WEIGHT: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub elastic: f64,
    /// The anatomical cost is dimensionless while elastic energy is in k·mm²,
    /// so this weight carries the scale between them.
    pub anatomical: f64,
    pub offset_hand: f64,
    pub offset_object: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            elastic: 1.0,
            anatomical: ANATOMICAL_WEIGHT,
            offset_hand: 1.0,
            offset_object: 1.0,
        }
    }
}

/// Contact term driving the refinement.
#[derive(Debug, Clone)]
pub enum ContactTerm<'a> {
    /// With `requery`, repulsive pairs are rebuilt from the current vertices
    /// at every evaluation.
    Elastic { springs: &'a SpringSystem, requery: bool },
    /// Each listed anchor attracted to its nearest object vertex when within `gate` mm.
    Vanilla { anchors: Vec<usize>, gate: f64 },
}

/// Values of the individual cost terms, unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub contact: f64,
    pub anatomical: f64,
    pub offset_hand: f64,
    pub offset_object: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variables<'p> {
    pub object: &'p RigidPose,
    pub hand: &'p HandPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableGradient {
    pub object_rotation: Vector3<f64>,
    pub object_translation: Vector3<f64>,
    pub hand: PoseGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub total: f64,
    pub terms: CostTerms,
    pub grad: VariableGradient,
}

/// Everything the total cost depends on besides the variables.
pub struct Problem<'a> {
    pub hand: &'a SkinnedHand,
    pub anchors: &'a AnchorSet,
    /// Object surface in its own frame.
    pub object: &'a Mesh,
    pub contact: ContactTerm<'a>,
    pub weights: Weights,
    pub initial_hand: Vec<Vector3<f64>>,
    pub initial_object: Vec<Vector3<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(
        hand: &'a SkinnedHand,
        anchors: &'a AnchorSet,
        object: &'a Mesh,
        contact: ContactTerm<'a>,
        weights: Weights,
        initial: Variables<'_>,
    ) -> Result<Self> {
        let initial_hand = hand.forward(initial.hand)?.vertices;
        let initial_object = pose_points(initial.object, &object.vertices);
        if anchors.vertex_count != hand.vertex_count() {
            return Err(Error::size(
                "anchor hand vertices",
                hand.vertex_count(),
                anchors.vertex_count,
            ));
        }
        Ok(Self {
            hand,
            anchors,
            object,
            contact,
            weights,
            initial_hand,
            initial_object,
        })
    }

    /// Weighted total cost, per-term values and the gradient for every variable.
    pub fn evaluate(&self, vars: Variables<'_>) -> Result<Evaluation> {
        let posed = self.hand.forward(vars.hand)?;
        let ro = vars.object.rotation.to_matrix();
        let obj_v = pose_points(vars.object, &self.object.vertices);
        let obj_n: Vec<Vector3<f64>> = self.object.normals.iter().map(|n| ro * n).collect();
        let anchors = interpolate_anchors(self.anchors, &posed.vertices)?;
        let w = self.weights;

        let mut g_hand = vec![Vector3::zeros(); posed.vertices.len()];
        let mut g_ov = vec![Vector3::zeros(); obj_v.len()];
        let mut g_on = vec![Vector3::zeros(); obj_v.len()];
        let mut terms = CostTerms::default();

        match &self.contact {
            ContactTerm::Elastic { springs, requery } => {
                let owned;
                let sys = if *requery {
                    let mut s = SpringSystem {
                        schema: String::new(),
                        attractive: springs.attractive.clone(),
                        repulsive: Vec::new(),
                        t_rpl: springs.t_rpl,
                        t_vc: springs.t_vc,
                        k_rpl: springs.k_rpl,
                        lambda: springs.lambda,
                        repelling: springs.repelling.clone(),
                    };
                    s.requery_repulsion(&posed.vertices, &obj_v);
                    owned = s;
                    &owned
                } else {
                    *springs
                };
                let (e, g) = elastic_energy_grad(sys, &anchors, &posed.vertices, &obj_v, &obj_n)?;
                terms.contact = e;
                let mut ga = g.anchors;
                ga.iter_mut().for_each(|x| *x *= w.elastic);
                scatter_anchor_gradient(self.anchors, &ga, &mut g_hand);
                axpy(&mut g_hand, w.elastic, &g.hand);
                axpy(&mut g_ov, w.elastic, &g.object_vertices);
                axpy(&mut g_on, w.elastic, &g.object_normals);
            }
            ContactTerm::Vanilla { anchors: tips, gate } => {
                let mut ga = vec![Vector3::zeros(); anchors.len()];
                for &i in tips {
                    let a = anchors[i];
                    let (j, d2) = nearest_vertex(&obj_v, &a);
                    if d2 <= gate * gate {
                        let d = a - obj_v[j];
                        terms.contact += 0.5 * d.norm_squared();
                        ga[i] += w.elastic * d;
                        g_ov[j] -= w.elastic * d;
                    }
                }
                scatter_anchor_gradient(self.anchors, &ga, &mut g_hand);
            }
        }

        let (anat, g_anat) = anatomical_cost(&vars.hand.joint_rotations, &self.hand.tree.knuckles)?;
        terms.anatomical = anat;
        let (oh, g_oh) = offset_cost(&posed.vertices, &self.initial_hand)?;
        terms.offset_hand = oh;
        axpy(&mut g_hand, w.offset_hand, &g_oh);
        let (oo, g_oo) = offset_cost(&obj_v, &self.initial_object)?;
        terms.offset_object = oo;
        axpy(&mut g_ov, w.offset_object, &g_oo);

        let mut hand_grad = pose_backward(self.hand, &posed, &g_hand)?;
        for (g, a) in hand_grad.joints.iter_mut().zip(&g_anat) {
            *g += w.anatomical * a;
        }

        // v = R y + t, n = R m
        let rt = ro.transpose();
        let mut moment = Vector3::zeros();
        let mut t_grad = Vector3::zeros();
        for i in 0..obj_v.len() {
            moment += self.object.vertices[i].cross(&(rt * g_ov[i]));
            moment += self.object.normals[i].cross(&(rt * g_on[i]));
            t_grad += g_ov[i];
        }
        let object_rotation = right_jacobian(&vars.object.rotation.axis_angle).transpose() * moment;

        let total = w.elastic * terms.contact
            + w.anatomical * terms.anatomical
            + w.offset_hand * terms.offset_hand
            + w.offset_object * terms.offset_object;
        Ok(Evaluation {
            total,
            terms,
            grad: VariableGradient {
                object_rotation,
                object_translation: t_grad,
                hand: hand_grad,
            },
        })
    }
}

/// Name of the first non-finite term, if any.
pub fn non_finite_term(terms: &CostTerms) -> Option<&'static str> {
    [
        ("contact", terms.contact),
        ("anatomical", terms.anatomical),
        ("hand offset", terms.offset_hand),
        ("object offset", terms.offset_object),
    ]
    .into_iter()
    .find(|(_, v)| !v.is_finite())
    .map(|(n, _)| n)
}

pub fn pose_points(pose: &RigidPose, pts: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let r = pose.rotation.to_matrix();
    pts.iter().map(|p| r * p + pose.translation).collect()
}

fn axpy(acc: &mut [Vector3<f64>], a: f64, x: &[Vector3<f64>]) {
    for (y, x) in acc.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// Nearest point by index order on ties.
pub(crate) fn nearest_vertex(pts: &[Vector3<f64>], q: &Vector3<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, p) in pts.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::JOINT_COUNT;
    use std::f64::consts::PI;

    fn knuckles() -> Vec<bool> {
        let mut k = vec![false; JOINT_COUNT];
        for j in [1, 4, 7, 10, 13] {
            k[j] = true;
        }
        k
    }

    #[test]
    fn flat_pose_costs_nothing() {
        let (c, g) = anatomical_cost(&vec![Rotation::identity(); 15], &knuckles()).unwrap();
        assert_eq!(c, 0.0);
        assert!(g.iter().all(|v| *v == Vector3::zeros()));
    }

    #[test]
    fn pure_bend_by_pi() {
        let mut r = vec![Rotation::identity(); 15];
        r[1] = Rotation::new(Vector3::new(0.0, 0.0, PI));
        let (c, _) = anatomical_cost(&r, &knuckles()).unwrap();
        assert!((c - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn pure_twist_costs_one() {
        for a in [0.1, 1.0, 2.5] {
            let mut r = vec![Rotation::identity(); 15];
            r[5] = Rotation::new(Vector3::new(a, 0.0, 0.0));
            assert_eq!(anatomical_cost(&r, &knuckles()).unwrap().0, 1.0);
        }
    }

    #[test]
    fn knuckles_may_splay() {
        let mut r = vec![Rotation::identity(); 15];
        r[0] = Rotation::new(Vector3::new(0.0, 0.3, 0.0));
        assert_eq!(anatomical_cost(&r, &knuckles()).unwrap().0, 0.0);
        r[1] = Rotation::new(Vector3::new(0.0, 0.3, 0.0));
        assert_eq!(anatomical_cost(&r, &knuckles()).unwrap().0, 1.0);
    }

    #[test]
    fn offset_values() {
        let a = vec![Vector3::new(1.0, 2.0, 3.0); 4];
        assert_eq!(offset_cost(&a, &a).unwrap().0, 0.0);
        let b: Vec<_> = a.iter().map(|v| v + Vector3::new(0.0, 1.0, 0.0)).collect();
        let (c, g) = offset_cost(&b, &a).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(g[0], Vector3::new(0.0, 0.5, 0.0));
        assert!(offset_cost(&b[1..], &a).is_err());
    }

    #[test]
    fn anatomical_gradient_matches_differences() {
        let r: Vec<Rotation> = (0..15)
            .map(|i| {
                let t = i as f64;
                Rotation::new(Vector3::new(
                    0.3 * (t * 1.7 + 0.5).sin(),
                    0.4 * (t * 0.9).cos(),
                    1.2 + 0.1 * t,
                ))
            })
            .collect();
        let (_, g) = anatomical_cost(&r, &knuckles()).unwrap();
        let h = 1e-6;
        for i in 0..15 {
            for a in 0..3 {
                let mut p = r.clone();
                let mut m = r.clone();
                p[i].axis_angle[a] += h;
                m[i].axis_angle[a] -= h;
                let fd = (anatomical_cost(&p, &knuckles()).unwrap().0 - anatomical_cost(&m, &knuckles()).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[i][a]).abs() < 1e-6, "joint {i} axis {a}: {fd} vs {}", g[i][a]);
            }
        }
    }
}
