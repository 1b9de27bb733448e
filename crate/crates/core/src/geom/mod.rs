//! Rotations, rigid poses, triangle meshes and the spatial queries built on them.

pub mod bvh;
pub mod mesh;
pub mod obj;
pub mod query;
pub mod rotation;
pub mod voxel;

pub use mesh::{Aabb, Mesh};
pub use obj::{parse_obj, read_obj, to_obj_string, write_obj};
pub use query::{is_inside, nearest_surface_point, ray_cast, MeshIndex, RayHit, Strategy, SurfacePoint};
pub use rotation::{right_jacobian, rotation_to_matrix, skew, RigidPose, Rotation};
pub use voxel::{voxelize, voxelize_indexed, VoxelGrid};
