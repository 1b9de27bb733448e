//! Skinned kinematic hand: joint tree, twist-splay-bend frames, forward and
//! reverse-mode skinning, and the procedural template.

mod file;
mod skin;
mod synth;
mod tree;
mod tsb;

pub use file::{load_hand_model, save_hand_model, HandModelDoc, HAND_MODEL_SCHEMA};
pub use skin::{pose_backward, pose_hand, HandPose, PoseGradient, PosedHand, SkinnedHand, VertexWeights};
pub use synth::{synth_hand, HandParams};
pub use tree::{
    finger_joint, joint_finger, KinematicTree, FINGER_COUNT, FINGER_NAMES, JOINT_COUNT, ROTATION_COUNT, WRIST,
};
pub use tsb::{decompose_local, decompose_rotation_tsb, derive_tsb_frames, TsbComponents, TsbFrame, BEND_DOMINANCE};
