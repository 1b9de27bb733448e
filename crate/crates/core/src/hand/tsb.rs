use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::tree::{KinematicTree, JOINT_COUNT};
use crate::error::{Error, Result};
use crate::geom::Rotation;

/// Dominance threshold above which a rotation counts as a pure bend.
pub const BEND_DOMINANCE: f64 = 0.9;

/// Twist-splay-bend triad of one joint in the canonical pose.
///
/// `(twist, splay, bend)` is right-handed: `twist × splay = bend`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsbFrame {
    pub twist: Vector3<f64>,
    pub splay: Vector3<f64>,
    pub bend: Vector3<f64>,
}

impl TsbFrame {
    /// Columns are twist, splay, bend; maps frame-local vectors to canonical coordinates.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.twist, self.splay, self.bend])
    }

    /// Local axis-angle (twist, splay, bend components) to the canonical frame.
    pub fn to_canonical(&self, local: &Rotation) -> Rotation {
        Rotation::new(self.matrix() * local.axis_angle)
    }

    pub fn to_local(&self, canonical: &Rotation) -> Rotation {
        Rotation::new(self.matrix().transpose() * canonical.axis_angle)
    }

    /// `|t·s| + |t·b| + |s·b|`.
    pub fn orthogonality_defect(&self) -> f64 {
        self.twist.dot(&self.splay).abs() + self.twist.dot(&self.bend).abs() + self.splay.dot(&self.bend).abs()
    }
}

/// Frames for every joint: twist toward the joint's target, `bend = twist × up`,
/// `splay = bend × twist`.
pub fn derive_tsb_frames(tree: &KinematicTree, up: &Vector3<f64>) -> Result<Vec<TsbFrame>> {
    let up = up
        .try_normalize(0.0)
        .ok_or_else(|| Error::Invalid("up axis is zero".into()))?;
    (0..JOINT_COUNT)
        .map(|j| {
            let d = tree.twist_target(j) - tree.rest_positions[j];
            let twist = d
                .try_normalize(1e-9)
                .ok_or_else(|| Error::Degenerate(format!("joint {j} coincides with its twist target")))?;
            let bend = twist
                .cross(&up)
                .try_normalize(1e-9)
                .ok_or_else(|| Error::Degenerate(format!("joint {j} twist axis is parallel to the up axis")))?;
            let splay = bend.cross(&twist);
            Ok(TsbFrame { twist, splay, bend })
        })
        .collect()
}

/// Unit-axis components of a rotation in a joint frame, plus the bend angle
/// the anatomical cost penalizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsbComponents {
    pub twist: f64,
    pub splay: f64,
    pub bend: f64,
    /// Full angle when the bend component dominates, else angle × |bend component|.
    pub bend_angle: f64,
}

/// `r` is expressed in canonical coordinates.
pub fn decompose_rotation_tsb(r: &Rotation, frame: &TsbFrame) -> TsbComponents {
    decompose_local(&frame.to_local(r))
}

/// Same decomposition for a rotation already in frame coordinates.
pub fn decompose_local(local: &Rotation) -> TsbComponents {
    let angle = local.angle();
    let Some(axis) = local.axis() else {
        return TsbComponents {
            twist: 0.0,
            splay: 0.0,
            bend: 0.0,
            bend_angle: 0.0,
        };
    };
    let bend_angle = if axis.z.abs() > BEND_DOMINANCE {
        angle
    } else {
        angle * axis.z.abs()
    };
    TsbComponents {
        twist: axis.x,
        splay: axis.y,
        bend: axis.z,
        bend_angle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame_x() -> TsbFrame {
        TsbFrame {
            twist: Vector3::x(),
            splay: Vector3::y(),
            bend: Vector3::z(),
        }
    }

    #[test]
    fn pure_bend() {
        let c = decompose_rotation_tsb(&Rotation::new(Vector3::new(0.0, 0.0, 0.7)), &frame_x());
        assert_eq!((c.twist, c.splay, c.bend), (0.0, 0.0, 1.0));
        assert!((c.bend_angle - 0.7).abs() < 1e-15);
    }

    #[test]
    fn pure_twist() {
        let c = decompose_rotation_tsb(&Rotation::new(Vector3::new(1.3, 0.0, 0.0)), &frame_x());
        assert_eq!(c.twist, 1.0);
        assert_eq!(c.bend_angle, 0.0);
    }

    #[test]
    fn zero_rotation_has_no_components() {
        let c = decompose_rotation_tsb(&Rotation::identity(), &frame_x());
        assert_eq!((c.twist, c.splay, c.bend, c.bend_angle), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mixed_axis_uses_projected_angle() {
        let axis = Vector3::new(0.6, 0.0, 0.8);
        let c = decompose_local(&Rotation::new(axis * 2.0));
        assert!((c.bend_angle - 1.6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn components_form_unit_axis_and_ignore_angle(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            a in 0.01f64..3.1, b in 0.01f64..3.1,
        ) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let frame = TsbFrame {
                twist: Vector3::new(1.0, 1.0, 0.0).normalize(),
                splay: Vector3::new(-1.0, 1.0, 0.0).normalize(),
                bend: Vector3::z(),
            };
            let ca = decompose_rotation_tsb(&Rotation::from_axis_angle(&v, a), &frame);
            let cb = decompose_rotation_tsb(&Rotation::from_axis_angle(&v, b), &frame);
            prop_assert!((ca.twist.powi(2) + ca.splay.powi(2) + ca.bend.powi(2) - 1.0).abs() < 1e-12);
            prop_assert!((ca.twist - cb.twist).abs() < 1e-12);
            prop_assert!((ca.splay - cb.splay).abs() < 1e-12);
            prop_assert!((ca.bend - cb.bend).abs() < 1e-12);
        }
    }
}
