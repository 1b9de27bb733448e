use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINT_COUNT: usize = 16;
pub const ROTATION_COUNT: usize = JOINT_COUNT - 1;
pub const FINGER_COUNT: usize = 5;
pub const WRIST: usize = 0;

/// Finger order used for joints, regions and control points; the thumb is last.
pub const FINGER_NAMES: [&str; FINGER_COUNT] = ["index", "middle", "ring", "little", "thumb"];

/// Joint `1 + 3f + k` is the `k`-th joint (proximal first) of finger `f`.
pub fn finger_joint(finger: usize, k: usize) -> usize {
    1 + 3 * finger + k
}

/// `(finger, k)` for a non-wrist joint.
pub fn joint_finger(joint: usize) -> Option<(usize, usize)> {
    (1..JOINT_COUNT)
        .contains(&joint)
        .then(|| ((joint - 1) / 3, (joint - 1) % 3))
}

/// Wrist-rooted joint tree in the canonical flat pose.
///
/// Parents precede children. `tips` holds the end point of each finger's distal
/// bone, which a leaf joint uses as its twist target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicTree {
    pub parents: Vec<Option<usize>>,
    pub rest_positions: Vec<Vector3<f64>>,
    pub knuckles: Vec<bool>,
    pub tips: Vec<Vector3<f64>>,
}

impl KinematicTree {
    pub fn new(
        parents: Vec<Option<usize>>,
        rest_positions: Vec<Vector3<f64>>,
        knuckles: Vec<bool>,
        tips: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let t = Self {
            parents,
            rest_positions,
            knuckles,
            tips,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parents.len() != JOINT_COUNT {
            return Err(Error::size("joint parents", JOINT_COUNT, self.parents.len()));
        }
        if self.rest_positions.len() != JOINT_COUNT {
            return Err(Error::size("joint positions", JOINT_COUNT, self.rest_positions.len()));
        }
        if self.knuckles.len() != JOINT_COUNT {
            return Err(Error::size("knuckle flags", JOINT_COUNT, self.knuckles.len()));
        }
        if self.tips.len() != FINGER_COUNT {
            return Err(Error::size("fingertips", FINGER_COUNT, self.tips.len()));
        }
        if self.parents[WRIST].is_some() {
            return Err(Error::Invalid("joint 0 (wrist) must be the root".into()));
        }
        for (j, p) in self.parents.iter().enumerate().skip(1) {
            match p {
                None => {
                    return Err(Error::Invalid(format!(
                        "joint {j} has no parent; only the wrist may be a root"
                    )))
                }
                Some(p) if *p >= j => {
                    return Err(Error::Invalid(format!(
                        "joint {j} has parent {p}; parents must precede children"
                    )))
                }
                _ => {}
            }
        }
        let knuckles = self.knuckles.iter().filter(|&&k| k).count();
        if knuckles != FINGER_COUNT {
            return Err(Error::Invalid(format!("expected 5 knuckle joints, found {knuckles}")));
        }
        if self
            .rest_positions
            .iter()
            .chain(&self.tips)
            .any(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::Invalid("non-finite joint position".into()));
        }
        if self.leaves().len() != FINGER_COUNT {
            return Err(Error::Invalid(format!(
                "expected 5 leaf joints (one per fingertip), found {}",
                self.leaves().len()
            )));
        }
        Ok(())
    }

    pub fn children(&self, j: usize) -> Vec<usize> {
        (0..JOINT_COUNT).filter(|&c| self.parents[c] == Some(j)).collect()
    }

    /// Leaf joints in index order; the `i`-th leaf ends at `tips[i]`.
    pub fn leaves(&self) -> Vec<usize> {
        (0..JOINT_COUNT).filter(|&j| self.children(j).is_empty()).collect()
    }

    /// Point the joint's twist axis aims at: its only child, the mean of several
    /// children, or the fingertip for a leaf.
    pub fn twist_target(&self, j: usize) -> Vector3<f64> {
        let ch = self.children(j);
        if ch.is_empty() {
            let leaf = self.leaves().iter().position(|&l| l == j).unwrap_or(0);
            return self.tips[leaf];
        }
        ch.iter().map(|&c| self.rest_positions[c]).sum::<Vector3<f64>>() / ch.len() as f64
    }

    /// `true` for `j` itself and every joint below it.
    pub fn subtree_mask(&self, j: usize) -> [bool; JOINT_COUNT] {
        let mut m = [false; JOINT_COUNT];
        m[j] = true;
        for k in j + 1..JOINT_COUNT {
            if let Some(p) = self.parents[k] {
                m[k] = m[p];
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> KinematicTree {
        KinematicTree {
            parents: self.parents.clone(),
            rest_positions: self.rest_positions.iter().map(|p| p * s).collect(),
            knuckles: self.knuckles.clone(),
            tips: self.tips.iter().map(|p| p * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_tree() -> KinematicTree {
        let mut parents = vec![None];
        let mut pos = vec![Vector3::zeros()];
        let mut knuckles = vec![false];
        let mut tips = Vec::new();
        for f in 0..FINGER_COUNT {
            for k in 0..3 {
                parents.push(Some(if k == 0 { 0 } else { finger_joint(f, k - 1) }));
                pos.push(Vector3::new(50.0 + 20.0 * k as f64, 0.0, 20.0 * f as f64));
                knuckles.push(k == 0);
            }
            tips.push(Vector3::new(110.0, 0.0, 20.0 * f as f64));
        }
        KinematicTree::new(parents, pos, knuckles, tips).unwrap()
    }

    #[test]
    fn joint_numbering_roundtrips() {
        for j in 1..JOINT_COUNT {
            let (f, k) = joint_finger(j).unwrap();
            assert_eq!(finger_joint(f, k), j);
        }
        assert!(joint_finger(0).is_none());
    }

    #[test]
    fn leaf_twist_targets_are_tips() {
        let t = chain_tree();
        assert_eq!(t.leaves(), vec![3, 6, 9, 12, 15]);
        assert_eq!(t.twist_target(6), t.tips[1]);
        assert_eq!(t.twist_target(4), t.rest_positions[5]);
    }

    #[test]
    fn subtree_of_knuckle_is_its_finger() {
        let m = chain_tree().subtree_mask(4);
        let set: Vec<usize> = (0..JOINT_COUNT).filter(|&j| m[j]).collect();
        assert_eq!(set, vec![4, 5, 6]);
    }

    #[test]
    fn cycles_and_second_roots_rejected() {
        let mut t = chain_tree();
        t.parents[5] = Some(6);
        assert!(t.validate().is_err());
        let mut t = chain_tree();
        t.parents[7] = None;
        assert!(t.validate().is_err());
        let mut t = chain_tree();
        t.knuckles[2] = true;
        assert!(t.validate().is_err());
    }
}
