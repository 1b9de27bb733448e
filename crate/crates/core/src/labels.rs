//! Ground-truth contact annotation and the label losses.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::anchors::{interpolate_anchors, AnchorSet, REGION_COUNT};
use crate::cpf::ContactLabels;
use crate::error::{Error, Result};
use crate::geom::Mesh;
use crate::io::check_schema;

pub const ANNOTATION_SCHEMA: &str = "cpf.annotation/1";
/// Floor applied inside every logarithm.
pub const PROB_EPS: f64 = 1e-7;

/// Elasticity for an anchor-vertex pair `d` mm apart: a raised cosine that is 1
/// at contact and reaches 0 at `s`.
pub fn annotation_k(d: f64, s: f64) -> f64 {
    let d = d.abs();
    if d < s {
        0.5 * (PI * d / s).cos() + 0.5
    } else {
        0.0
    }
}

/// Per object vertex: its nearest anchor on the ground-truth hand and the
/// elasticity derived from their distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityAnnotation {
    pub schema: String,
    pub s: f64,
    pub in_contact: Vec<bool>,
    /// Region of the paired anchor; `None` when not in contact.
    pub region: Vec<Option<usize>>,
    pub k: Vec<f64>,
    pub distance: Vec<f64>,
    pub anchor: Vec<usize>,
}

impl AffinityAnnotation {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn contact_count(&self) -> usize {
        self.in_contact.iter().filter(|&&c| c).count()
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(ANNOTATION_SCHEMA, &self.schema)?;
        let n = self.k.len();
        for (what, len) in [
            ("in_contact", self.in_contact.len()),
            ("region", self.region.len()),
            ("distance", self.distance.len()),
            ("anchor", self.anchor.len()),
        ] {
            if len != n {
                return Err(Error::size(what, n, len));
            }
        }
        Ok(())
    }

    /// `vc` is 1 or 0, `cr` one-hot on the paired region (uniform when not in
    /// contact), `ae` the annotated elasticity.
    pub fn to_labels(&self) -> Result<ContactLabels> {
        self.validate()?;
        let cr = self
            .region
            .iter()
            .map(|r| match r {
                Some(r) => {
                    let mut row = [0.0; REGION_COUNT];
                    row[*r] = 1.0;
                    row
                }
                None => [1.0 / REGION_COUNT as f64; REGION_COUNT],
            })
            .collect();
        let vc = self.in_contact.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
        ContactLabels::new(vc, cr, self.k.clone())
    }
}

/// Pairs every object vertex with its nearest anchor (lowest index on ties).
pub fn annotate(hand: &Mesh, object: &Mesh, anchors: &AnchorSet, s: f64) -> Result<AffinityAnnotation> {
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("annotation scale s = {s} must be positive")));
    }
    let pts = interpolate_anchors(anchors, &hand.vertices)?;
    if pts.is_empty() {
        return Err(Error::Invalid("anchor set is empty".into()));
    }
    let n = object.vertex_count();
    let mut out = AffinityAnnotation {
        schema: ANNOTATION_SCHEMA.to_string(),
        s,
        in_contact: Vec::with_capacity(n),
        region: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        distance: Vec::with_capacity(n),
        anchor: Vec::with_capacity(n),
    };
    for v in &object.vertices {
        let (i, d2) = nearest(&pts, v);
        let d = d2.sqrt();
        let k = annotation_k(d, s);
        out.in_contact.push(k > 0.0);
        out.region.push((k > 0.0).then_some(anchors.anchors[i].region));
        out.k.push(k);
        out.distance.push(d);
        out.anchor.push(i);
    }
    Ok(out)
}

fn nearest(pts: &[Vector3<f64>], v: &Vector3<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in pts.iter().enumerate() {
        let d = (p - v).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Per-vertex flags gating the losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMask {
    pub in_image: Vec<bool>,
    pub vc_positive: Vec<bool>,
}

impl LossMask {
    /// Every vertex counts as visible; `vc_positive` from ground truth.
    pub fn all_visible(vc_positive: Vec<bool>) -> Self {
        Self {
            in_image: vec![true; vc_positive.len()],
            vc_positive,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.in_image.len() != n {
            return Err(Error::size("in-image mask", n, self.in_image.len()));
        }
        if self.vc_positive.len() != n {
            return Err(Error::size("contact mask", n, self.vc_positive.len()));
        }
        Ok(())
    }
}

/// Pinhole camera; points are in camera coordinates with +z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

/// `true` for points in front of the camera that project inside the image.
pub fn pinhole_mask(points: &[Vector3<f64>], k: &Intrinsics) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            if !(p.z > 0.0) {
                return false;
            }
            let u = k.fx * p.x / p.z + k.cx;
            let v = k.fy * p.y / p.z + k.cy;
            (0.0..k.width).contains(&u) && (0.0..k.height).contains(&v)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// `N / N_class` over the visible vertices, clamped to `[1e-3, 1e3]`.
    InverseFrequency,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub gamma: f64,
    pub alpha: AlphaMode,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: AlphaMode::InverseFrequency,
        }
    }
}

fn ln_clamped(p: f64) -> f64 {
    p.max(PROB_EPS).ln()
}

/// Binary focal loss over visible vertices, summed.
pub fn vc_focal_loss(probs: &[f64], gt: &[bool], in_image: &[bool], params: &FocalParams) -> Result<f64> {
    let n = probs.len();
    if gt.len() != n {
        return Err(Error::size("contact targets", n, gt.len()));
    }
    if in_image.len() != n {
        return Err(Error::size("in-image mask", n, in_image.len()));
    }
    if !(params.gamma >= 0.0) {
        return Err(Error::Invalid(format!("gamma = {} must be non-negative", params.gamma)));
    }
    let (alpha_pos, alpha_neg) = match params.alpha {
        AlphaMode::Constant(a) => (a, a),
        AlphaMode::InverseFrequency => {
            let visible = in_image.iter().filter(|&&m| m).count() as f64;
            let pos = (0..n).filter(|&j| in_image[j] && gt[j]).count() as f64;
            let inv = |c: f64| (visible / c).clamp(1e-3, 1e3);
            (inv(pos), inv(visible - pos))
        }
    };
    let mut loss = 0.0;
    for j in 0..n {
        if !in_image[j] {
            continue;
        }
        let p = probs[j].clamp(0.0, 1.0);
        let (f, a) = if gt[j] { (p, alpha_pos) } else { (1.0 - p, alpha_neg) };
        loss -= a * (1.0 - f).powf(params.gamma) * ln_clamped(f);
    }
    Ok(loss)
}

/// Multi-class focal loss over visible, ground-truth-contact vertices.
pub fn cr_focal_loss(
    pred: &[[f64; REGION_COUNT]],
    gt_onehot: &[[f64; REGION_COUNT]],
    mask: &LossMask,
    gamma: f64,
) -> Result<f64> {
    let n = pred.len();
    if gt_onehot.len() != n {
        return Err(Error::size("region targets", n, gt_onehot.len()));
    }
    mask.check(n)?;
    let mut loss = 0.0;
    for j in 0..n {
        let s: f64 = pred[j].iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!("predicted region row {j} sums to {s}")));
        }
        if !(mask.in_image[j] && mask.vc_positive[j]) {
            continue;
        }
        let m: f64 = pred[j].iter().zip(&gt_onehot[j]).map(|(p, t)| p * t).sum();
        loss -= (1.0 - m).max(0.0).powf(gamma) * ln_clamped(m);
    }
    Ok(loss)
}

/// `−[q ln p + (1 − q) ln(1 − p)]`.
pub fn bce(p: f64, q: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let mut l = 0.0;
    if q > 0.0 {
        l -= q * ln_clamped(p);
    }
    if q < 1.0 {
        l -= (1.0 - q) * ln_clamped(1.0 - p);
    }
    l
}

/// Binary cross-entropy of predicted elasticities over visible, contact vertices.
pub fn ae_bce_loss(pred: &[f64], gt: &[f64], mask: &LossMask) -> Result<f64> {
    let n = pred.len();
    if gt.len() != n {
        return Err(Error::size("elasticity targets", n, gt.len()));
    }
    mask.check(n)?;
    Ok((0..n)
        .filter(|&j| mask.in_image[j] && mask.vc_positive[j])
        .map(|j| bce(pred[j], gt[j].clamp(0.0, 1.0)))
        .sum())
}
