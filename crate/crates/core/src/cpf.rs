//! Contact potential field: attractive and repulsive springs between hand and
//! object, their recovery from per-vertex contact labels, and the summed
//! elastic energy with its gradient.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::anchors::{AnchorSet, REGION_COUNT};
use crate::error::{Error, Result};
use crate::geom::{Mesh, MeshIndex};
use crate::io::check_schema;

pub const LABELS_SCHEMA: &str = "cpf.contact_labels/1";
pub const SPRINGS_SCHEMA: &str = "cpf.springs/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpfParams {
    /// Contact probability gate.
    pub t_vc: f64,
    /// Repulsion radius in mm.
    pub t_rpl: f64,
    pub k_rpl: f64,
    /// Length scale of the repulsive exponent in mm.
    pub lambda: f64,
    /// Attach repulsion to every object vertex instead of only gated ones.
    pub repel_all: bool,
}

impl Default for CpfParams {
    fn default() -> Self {
        Self {
            t_vc: 0.8,
            t_rpl: 20.0,
            k_rpl: 1e-3,
            lambda: 1.0,
            repel_all: false,
        }
    }
}

impl CpfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_vc > 0.0 && self.t_vc < 1.0) {
            return Err(Error::Invalid(format!("t_vc = {} must lie in (0, 1)", self.t_vc)));
        }
        for (name, v) in [("t_rpl", self.t_rpl), ("k_rpl", self.k_rpl), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Per-object-vertex contact probability, region distribution and elasticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactLabels {
    pub schema: String,
    pub vc: Vec<f64>,
    pub cr: Vec<[f64; REGION_COUNT]>,
    pub ae: Vec<f64>,
}

impl ContactLabels {
    pub fn new(vc: Vec<f64>, cr: Vec<[f64; REGION_COUNT]>, ae: Vec<f64>) -> Result<Self> {
        let l = Self {
            schema: LABELS_SCHEMA.to_string(),
            vc,
            cr,
            ae,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn len(&self) -> usize {
        self.vc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vc.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(LABELS_SCHEMA, &self.schema)?;
        let n = self.vc.len();
        if self.cr.len() != n {
            return Err(Error::size("cr rows", n, self.cr.len()));
        }
        if self.ae.len() != n {
            return Err(Error::size("ae entries", n, self.ae.len()));
        }
        for j in 0..n {
            if !(0.0..=1.0).contains(&self.vc[j]) || !(0.0..=1.0).contains(&self.ae[j]) {
                return Err(Error::Invalid(format!("vertex {j}: vc and ae must lie in [0, 1]")));
            }
            let s: f64 = self.cr[j].iter().sum();
            if (s - 1.0).abs() > 1e-6 || self.cr[j].iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::Invalid(format!("vertex {j}: cr row sums to {s}")));
            }
        }
        Ok(())
    }

    /// Most likely region; ties go to the lower id.
    pub fn region(&self, j: usize) -> usize {
        argmax(&self.cr[j])
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractiveSpring {
    pub anchor: usize,
    pub object_vertex: usize,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsiveSpring {
    pub hand_vertex: usize,
    pub object_vertex: usize,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringSystem {
    pub schema: String,
    pub attractive: Vec<AttractiveSpring>,
    pub repulsive: Vec<RepulsiveSpring>,
    pub t_rpl: f64,
    pub t_vc: f64,
    pub k_rpl: f64,
    pub lambda: f64,
    /// Object vertices that carry repulsion, ascending.
    pub repelling: Vec<usize>,
}

impl SpringSystem {
    pub fn empty(params: &CpfParams) -> Self {
        Self {
            schema: SPRINGS_SCHEMA.to_string(),
            attractive: Vec::new(),
            repulsive: Vec::new(),
            t_rpl: params.t_rpl,
            t_vc: params.t_vc,
            k_rpl: params.k_rpl,
            lambda: params.lambda,
            repelling: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.attractive.is_empty() && self.repulsive.is_empty()
    }

    /// Rebuilds the repulsive springs: one per (repelling object vertex, hand
    /// vertex within `t_rpl`) pair, ordered by object vertex then hand vertex.
    pub fn requery_repulsion(&mut self, hand: &[Vector3<f64>], object: &[Vector3<f64>]) {
        self.repulsive.clear();
        let r2 = self.t_rpl * self.t_rpl;
        for &j in &self.repelling {
            let vo = object[j];
            for (i, vh) in hand.iter().enumerate() {
                if (vh - vo).norm_squared() <= r2 {
                    self.repulsive.push(RepulsiveSpring {
                        hand_vertex: i,
                        object_vertex: j,
                        k: self.k_rpl,
                    });
                }
            }
        }
    }
}

/// `½ k ‖a − v‖²`.
pub fn attractive_energy(anchor: &Vector3<f64>, vertex: &Vector3<f64>, k: f64) -> f64 {
    0.5 * k * (anchor - vertex).norm_squared()
}

/// `½ k e^{−2Δl/λ}` with `Δl = (v_h − v_o)·n_o`, negative when penetrating.
pub fn repulsive_energy(hand: &Vector3<f64>, object: &Vector3<f64>, normal: &Vector3<f64>, k: f64, lambda: f64) -> f64 {
    let dl = (hand - object).dot(normal);
    0.5 * k * (-2.0 * dl / lambda).exp()
}

/// Springs for every object vertex whose contact probability exceeds `t_vc`.
///
/// Each gated vertex gets one attractive spring per anchor of its most likely
/// region, all with elasticity `ae[j]`, and one repulsive spring per hand
/// vertex within `t_rpl`. Order: object vertex, then anchor or hand vertex.
pub fn recover_springs(
    object: &Mesh,
    hand: &Mesh,
    anchors: &AnchorSet,
    labels: &ContactLabels,
    params: &CpfParams,
) -> Result<SpringSystem> {
    params.validate()?;
    labels.validate()?;
    if labels.len() != object.vertex_count() {
        return Err(Error::size("contact labels", object.vertex_count(), labels.len()));
    }
    if hand.vertex_count() != anchors.vertex_count {
        return Err(Error::size("hand vertices", anchors.vertex_count, hand.vertex_count()));
    }
    let by_region = anchors.by_region();
    let mut sys = SpringSystem::empty(params);
    for j in 0..object.vertex_count() {
        let gated = labels.vc[j] > params.t_vc;
        if gated {
            for &i in &by_region[labels.region(j)] {
                sys.attractive.push(AttractiveSpring {
                    anchor: i,
                    object_vertex: j,
                    k: labels.ae[j],
                });
            }
        }
        if gated || params.repel_all {
            sys.repelling.push(j);
        }
    }
    sys.requery_repulsion(&hand.vertices, &object.vertices);
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticEnergy {
    pub total: f64,
    pub attractive: Vec<f64>,
    pub repulsive: Vec<f64>,
}

/// Gradients of the elastic energy with respect to every position it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticGradient {
    pub anchors: Vec<Vector3<f64>>,
    pub hand: Vec<Vector3<f64>>,
    pub object_vertices: Vec<Vector3<f64>>,
    pub object_normals: Vec<Vector3<f64>>,
}

fn check_indices(sys: &SpringSystem, anchors: usize, hand: usize, object: usize, normals: usize) -> Result<()> {
    if normals != object {
        return Err(Error::size("object normals", object, normals));
    }
    for s in &sys.attractive {
        if s.anchor >= anchors || s.object_vertex >= object {
            return Err(Error::Invalid(format!(
                "attractive spring ({}, {}) out of range",
                s.anchor, s.object_vertex
            )));
        }
    }
    if let Some(j) = sys.repelling.iter().find(|&&j| j >= object) {
        return Err(Error::Invalid(format!("repelling object vertex {j} out of range")));
    }
    for s in &sys.repulsive {
        if s.hand_vertex >= hand || s.object_vertex >= object {
            return Err(Error::Invalid(format!(
                "repulsive spring ({}, {}) out of range",
                s.hand_vertex, s.object_vertex
            )));
        }
    }
    Ok(())
}

/// Summed spring energy with a per-spring breakdown.
pub fn elastic_energy(
    sys: &SpringSystem,
    anchors: &[Vector3<f64>],
    hand: &[Vector3<f64>],
    object: &[Vector3<f64>],
    normals: &[Vector3<f64>],
) -> Result<ElasticEnergy> {
    check_indices(sys, anchors.len(), hand.len(), object.len(), normals.len())?;
    let attractive: Vec<f64> = sys
        .attractive
        .iter()
        .map(|s| attractive_energy(&anchors[s.anchor], &object[s.object_vertex], s.k))
        .collect();
    let repulsive: Vec<f64> = sys
        .repulsive
        .iter()
        .map(|s| {
            let j = s.object_vertex;
            repulsive_energy(&hand[s.hand_vertex], &object[j], &normals[j], s.k, sys.lambda)
        })
        .collect();
    let total = attractive.iter().sum::<f64>() + repulsive.iter().sum::<f64>();
    Ok(ElasticEnergy {
        total,
        attractive,
        repulsive,
    })
}

/// Energy and its gradient.
pub fn elastic_energy_grad(
    sys: &SpringSystem,
    anchors: &[Vector3<f64>],
    hand: &[Vector3<f64>],
    object: &[Vector3<f64>],
    normals: &[Vector3<f64>],
) -> Result<(f64, ElasticGradient)> {
    check_indices(sys, anchors.len(), hand.len(), object.len(), normals.len())?;
    let mut g = ElasticGradient {
        anchors: vec![Vector3::zeros(); anchors.len()],
        hand: vec![Vector3::zeros(); hand.len()],
        object_vertices: vec![Vector3::zeros(); object.len()],
        object_normals: vec![Vector3::zeros(); object.len()],
    };
    let mut total = 0.0;
    for s in &sys.attractive {
        let d = anchors[s.anchor] - object[s.object_vertex];
        total += 0.5 * s.k * d.norm_squared();
        g.anchors[s.anchor] += s.k * d;
        g.object_vertices[s.object_vertex] -= s.k * d;
    }
    let mut rep = 0.0;
    for s in &sys.repulsive {
        let j = s.object_vertex;
        let d = hand[s.hand_vertex] - object[j];
        let e = 0.5 * s.k * (-2.0 * d.dot(&normals[j]) / sys.lambda).exp();
        rep += e;
        let de = -2.0 / sys.lambda * e;
        g.hand[s.hand_vertex] += de * normals[j];
        g.object_vertices[j] -= de * normals[j];
        g.object_normals[j] += de * d;
    }
    Ok((total + rep, g))
}

/// Minimizer `d*` of `½ k_a d² + ½ k_r e^{−2d/λ}`: the root of
/// `k_a d = (k_r/λ) e^{−2d/λ}`, always positive.
pub fn equilibrium_distance(k_a: f64, k_r: f64, lambda: f64) -> Result<f64> {
    if !(k_a > 0.0 && k_r > 0.0 && lambda > 0.0) {
        return Err(Error::Invalid(
            "spring constants and length scale must be positive".into(),
        ));
    }
    // The derivative is increasing and concave, so Newton from d = 0 rises
    // monotonically to the root.
    let mut d = 0.0f64;
    for _ in 0..200 {
        let e = (k_r / lambda) * (-2.0 * d / lambda).exp();
        let g = k_a * d - e;
        let h = k_a + 2.0 / lambda * e;
        let step = g / h;
        d -= step;
        if step.abs() <= 1e-15 * d.abs().max(1e-300) {
            break;
        }
    }
    Ok(d)
}

/// Fails when more than 10% of sampled vertices have normals that do not point
/// out of the mesh.
pub fn check_outward_normals(mesh: &Mesh) -> Result<()> {
    let index = MeshIndex::new(mesh);
    let bb = mesh.bounding_box();
    let eps = 1e-3 * bb.extent().norm();
    let stride = (mesh.vertex_count() / 200).max(1);
    let mut checked = 0;
    let mut bad = 0;
    for i in (0..mesh.vertex_count()).step_by(stride) {
        let (v, n) = (mesh.vertices[i], mesh.normals[i]);
        checked += 1;
        if index.is_inside(&(v + n * eps))? || !index.is_inside(&(v - n * eps))? {
            bad += 1;
        }
    }
    if bad * 10 > checked {
        return Err(Error::InvalidMesh(format!(
            "{bad} of {checked} sampled vertex normals do not point outward"
        )));
    }
    Ok(())
}
