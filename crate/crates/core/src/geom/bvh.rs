//! Axis-aligned bounding volume hierarchy over mesh triangles.

use nalgebra::Vector3;

use super::mesh::{Aabb, Mesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Leaf { bb: Aabb, start: usize, len: usize },
    Inner { bb: Aabb, left: usize, right: usize },
}

impl Node {
    pub(crate) fn bb(&self) -> &Aabb {
        match self {
            Node::Leaf { bb, .. } | Node::Inner { bb, .. } => bb,
        }
    }
}

/// Immutable BVH; `faces` holds triangle indices in leaf order.
#[derive(Debug, Clone)]
pub struct Bvh {
    pub(crate) nodes: Vec<Node>,
    pub(crate) faces: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Bvh {
        let boxes: Vec<Aabb> = (0..mesh.face_count())
            .map(|f| {
                let mut bb = Aabb::empty();
                for v in mesh.triangle(f) {
                    bb.grow(&v);
                }
                bb
            })
            .collect();
        let centroids: Vec<Vector3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut faces: Vec<usize> = (0..mesh.face_count()).collect();
        let mut nodes = Vec::with_capacity(2 * faces.len() / LEAF_SIZE + 1);
        if !faces.is_empty() {
            let n = faces.len();
            build_node(&mut nodes, &mut faces, 0, n, &boxes, &centroids);
        }
        Bvh { nodes, faces }
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    faces: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vector3<f64>],
) -> usize {
    let slice = &mut faces[start..end];
    let bb = slice.iter().fold(Aabb::empty(), |acc, &f| acc.merge(&boxes[f]));
    let me = nodes.len();
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            bb,
            start,
            len: slice.len(),
        });
        return me;
    }
    let mut cb = Aabb::empty();
    for &f in slice.iter() {
        cb.grow(&centroids[f]);
    }
    let ext = cb.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    nodes.push(Node::Inner { bb, left: 0, right: 0 });
    let left = build_node(nodes, faces, start, start + mid, boxes, centroids);
    let right = build_node(nodes, faces, start + mid, end, boxes, centroids);
    nodes[me] = Node::Inner { bb, left, right };
    me
}
