use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::tree::{KinematicTree, JOINT_COUNT, ROTATION_COUNT};
use super::tsb::{derive_tsb_frames, TsbFrame};
use crate::error::{Error, Result};
use crate::geom::{right_jacobian, rotation_to_matrix, Mesh, RigidPose, Rotation};

/// Sparse `(joint, weight)` list for one vertex.
pub type VertexWeights = Vec<(usize, f64)>;

/// Wrist pose plus one rotation per non-wrist joint, each in that joint's
/// twist-splay-bend coordinates. `joint_rotations[j - 1]` drives joint `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub wrist: RigidPose,
    pub joint_rotations: Vec<Rotation>,
}

impl Default for HandPose {
    fn default() -> Self {
        Self::flat(RigidPose::identity())
    }
}

impl HandPose {
    pub fn flat(wrist: RigidPose) -> Self {
        Self {
            wrist,
            joint_rotations: vec![Rotation::identity(); ROTATION_COUNT],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.joint_rotations.len() != ROTATION_COUNT {
            return Err(Error::size(
                "joint rotations",
                ROTATION_COUNT,
                self.joint_rotations.len(),
            ));
        }
        if !self.wrist.is_finite() || !self.joint_rotations.iter().all(Rotation::is_finite) {
            return Err(Error::Invalid("hand pose has non-finite components".into()));
        }
        Ok(())
    }
}

/// Linear-blend-skinned hand in its canonical flat pose.
#[derive(Debug, Clone)]
pub struct SkinnedHand {
    pub tree: KinematicTree,
    pub template: Mesh,
    pub weights: Vec<VertexWeights>,
    pub up: Vector3<f64>,
    frames: Vec<TsbFrame>,
}

impl SkinnedHand {
    /// Zero weights are dropped; frames are derived from `up`.
    pub fn new(tree: KinematicTree, template: Mesh, weights: Vec<VertexWeights>, up: Vector3<f64>) -> Result<Self> {
        tree.validate()?;
        if weights.len() != template.vertex_count() {
            return Err(Error::size("skin weight rows", template.vertex_count(), weights.len()));
        }
        let mut normalized = Vec::with_capacity(weights.len());
        for (i, row) in weights.into_iter().enumerate() {
            let mut sum = 0.0;
            for &(j, w) in &row {
                if j >= JOINT_COUNT {
                    return Err(Error::Invalid(format!("vertex {i} weights joint {j}")));
                }
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Invalid(format!("vertex {i} has weight {w}")));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Invalid(format!("vertex {i} weights sum to {sum}")));
            }
            normalized.push(row.into_iter().filter(|&(_, w)| w > 0.0).collect());
        }
        let frames = derive_tsb_frames(&tree, &up)?;
        Ok(Self {
            tree,
            template,
            weights: normalized,
            up,
            frames,
        })
    }

    pub fn frames(&self) -> &[TsbFrame] {
        &self.frames
    }

    pub fn vertex_count(&self) -> usize {
        self.template.vertex_count()
    }

    /// Joint carrying the largest weight (lowest index on ties).
    pub fn dominant_joint(&self, vertex: usize) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for &(j, w) in &self.weights[vertex] {
            if w > best.1 || (w == best.1 && j < best.0) {
                best = (j, w);
            }
        }
        best.0
    }

    pub fn forward(&self, pose: &HandPose) -> Result<PosedHand> {
        pose.validate()?;
        Ok(forward_kinematics(self, pose))
    }
}

/// Intermediate values of one forward pass, reused by the backward pass.
///
/// Joint quantities are in the hand's own frame, before the wrist pose.
#[derive(Debug, Clone)]
pub struct PosedHand {
    /// Axis-angle of each joint in canonical coordinates; zero for the wrist.
    pub axes: [Vector3<f64>; JOINT_COUNT],
    /// Accumulated joint rotations `M_k`.
    pub rotations: [Matrix3<f64>; JOINT_COUNT],
    /// Posed joint position minus rest position.
    pub offsets: [Vector3<f64>; JOINT_COUNT],
    pub wrist_rotation: Matrix3<f64>,
    pub wrist: RigidPose,
    /// Skinned vertices before the wrist pose.
    pub local: Vec<Vector3<f64>>,
    /// Final vertices.
    pub vertices: Vec<Vector3<f64>>,
}

impl PosedHand {
    fn joint_local(&self, hand: &SkinnedHand, k: usize) -> Vector3<f64> {
        hand.tree.rest_positions[k] + self.offsets[k]
    }

    /// Posed joint positions after the wrist pose.
    pub fn joint_positions(&self, hand: &SkinnedHand) -> Vec<Vector3<f64>> {
        (0..JOINT_COUNT)
            .map(|k| self.wrist_rotation * self.joint_local(hand, k) + self.wrist.translation)
            .collect()
    }

    /// Posed fingertip end points after the wrist pose, in leaf order.
    pub fn tip_positions(&self, hand: &SkinnedHand) -> Vec<Vector3<f64>> {
        hand.tree
            .leaves()
            .iter()
            .zip(&hand.tree.tips)
            .map(|(&k, tip)| {
                let g = self.transform_point(hand, k, tip);
                self.wrist_rotation * g + self.wrist.translation
            })
            .collect()
    }

    /// `G_k(x) = x + (M_k − I)(x − p_k) + d_k`; exact at the identity pose.
    fn transform_point(&self, hand: &SkinnedHand, k: usize, x: &Vector3<f64>) -> Vector3<f64> {
        let p = hand.tree.rest_positions[k];
        x + (self.rotations[k] - Matrix3::identity()) * (x - p) + self.offsets[k]
    }

    pub fn mesh(&self, hand: &SkinnedHand) -> Mesh {
        Mesh::new(self.vertices.clone(), hand.template.faces.clone()).expect("template topology is valid")
    }
}

fn forward_kinematics(hand: &SkinnedHand, pose: &HandPose) -> PosedHand {
    let tree = &hand.tree;
    let mut axes = [Vector3::zeros(); JOINT_COUNT];
    let mut rotations = [Matrix3::identity(); JOINT_COUNT];
    let mut offsets = [Vector3::zeros(); JOINT_COUNT];
    for k in 1..JOINT_COUNT {
        let par = tree.parents[k].expect("validated tree");
        axes[k] = hand.frames[k].matrix() * pose.joint_rotations[k - 1].axis_angle;
        let q = rotation_to_matrix(&Rotation::new(axes[k]));
        let bone = tree.rest_positions[k] - tree.rest_positions[par];
        offsets[k] = (rotations[par] - Matrix3::identity()) * bone + offsets[par];
        rotations[k] = rotations[par] * q;
    }
    let wrist_rotation = pose.wrist.rotation.to_matrix();
    let mut posed = PosedHand {
        axes,
        rotations,
        offsets,
        wrist_rotation,
        wrist: pose.wrist,
        local: Vec::with_capacity(hand.vertex_count()),
        vertices: Vec::with_capacity(hand.vertex_count()),
    };
    for (x, row) in hand.template.vertices.iter().zip(&hand.weights) {
        let mut u = *x;
        for &(k, w) in row {
            u += w * (posed.transform_point(hand, k, x) - x);
        }
        posed.local.push(u);
        posed.vertices.push(wrist_rotation * u + pose.wrist.translation);
    }
    posed
}

/// Gradient of a scalar with respect to every hand pose parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGradient {
    /// With respect to the wrist axis-angle vector.
    pub wrist_rotation: Vector3<f64>,
    pub wrist_translation: Vector3<f64>,
    /// With respect to each local joint axis-angle vector.
    pub joints: Vec<Vector3<f64>>,
}

impl PoseGradient {
    pub fn zeros() -> Self {
        Self {
            wrist_rotation: Vector3::zeros(),
            wrist_translation: Vector3::zeros(),
            joints: vec![Vector3::zeros(); ROTATION_COUNT],
        }
    }
}

/// Pulls `dL/dv` (one entry per final vertex) back to the pose parameters.
pub fn pose_backward(hand: &SkinnedHand, posed: &PosedHand, grad_v: &[Vector3<f64>]) -> Result<PoseGradient> {
    if grad_v.len() != posed.vertices.len() {
        return Err(Error::size("vertex gradients", posed.vertices.len(), grad_v.len()));
    }
    let rt = posed.wrist_rotation.transpose();
    let mut s = [Vector3::zeros(); JOINT_COUNT];
    let mut h = [Vector3::zeros(); JOINT_COUNT];
    let mut wrist_moment = Vector3::zeros();
    let mut t_grad = Vector3::zeros();
    for (i, g) in grad_v.iter().enumerate() {
        t_grad += g;
        let hi = rt * g;
        wrist_moment += posed.local[i].cross(&hi);
        let x = &hand.template.vertices[i];
        for &(k, w) in &hand.weights[i] {
            s[k] += w * posed.transform_point(hand, k, x).cross(&hi);
            h[k] += w * hi;
        }
    }
    // Subtree sums; parents precede children.
    for k in (1..JOINT_COUNT).rev() {
        let p = hand.tree.parents[k].expect("validated tree");
        let (sk, hk) = (s[k], h[k]);
        s[p] += sk;
        h[p] += hk;
    }
    let mut joints = Vec::with_capacity(ROTATION_COUNT);
    for j in 1..JOINT_COUNT {
        let pj = posed.joint_local(hand, j);
        let omega = posed.rotations[j].transpose() * (s[j] - pj.cross(&h[j]));
        let da = right_jacobian(&posed.axes[j]).transpose() * omega;
        joints.push(hand.frames[j].matrix().transpose() * da);
    }
    Ok(PoseGradient {
        wrist_rotation: right_jacobian(&posed.wrist.rotation.axis_angle).transpose() * wrist_moment,
        wrist_translation: t_grad,
        joints,
    })
}

/// Posed hand surface; the wrist pose is applied after the joint chain.
pub fn pose_hand(hand: &SkinnedHand, pose: &HandPose) -> Result<Mesh> {
    Ok(hand.forward(pose)?.mesh(hand))
}
