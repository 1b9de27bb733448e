//! Occupancy grids over a mesh's bounding box.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::mesh::Mesh;
use super::query::MeshIndex;
use crate::error::{Error, Result};

/// Cell `(i, j, k)` covers `origin + [i, i+1) * cell_size.x` (etc.); occupancy is
/// stored with `i` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vector3<f64>,
    /// Per-axis edge length; cells are cubes only when the bounding box is.
    pub cell_size: Vector3<f64>,
    pub resolution: [usize; 3],
    pub occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(
                (i as f64 + 0.5) * self.cell_size.x,
                (j as f64 + 0.5) * self.cell_size.y,
                (k as f64 + 0.5) * self.cell_size.z,
            )
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_size.x * self.cell_size.y * self.cell_size.z
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Occupied volume in mm³.
    pub fn volume(&self) -> f64 {
        self.occupied_count() as f64 * self.cell_volume()
    }

    /// Centres of occupied cells in storage order.
    pub fn occupied_centers(&self) -> Vec<Vector3<f64>> {
        let [nx, ny, nz] = self.resolution;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.occupancy[self.index(i, j, k)] {
                        out.push(self.cell_center(i, j, k));
                    }
                }
            }
        }
        out
    }
}

/// Voxelizes `mesh` with `resolution` cells per axis; a cell is occupied iff its
/// centre is inside the mesh.
pub fn voxelize(mesh: &Mesh, resolution: usize) -> Result<VoxelGrid> {
    voxelize_indexed(&MeshIndex::new(mesh), resolution)
}

pub fn voxelize_indexed(index: &MeshIndex<'_>, resolution: usize) -> Result<VoxelGrid> {
    if resolution == 0 {
        return Err(Error::Invalid("voxel resolution must be at least 1".into()));
    }
    index.require_watertight()?;
    let bb = index.mesh().bounding_box();
    let ext = bb.extent();
    if ext.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Degenerate(format!(
            "bounding box has a zero-width axis (extent {:?})",
            ext.as_slice()
        )));
    }
    let n = resolution;
    let cell = ext / n as f64;
    let mut grid = VoxelGrid {
        origin: bb.min,
        cell_size: cell,
        resolution: [n; 3],
        occupancy: vec![false; n * n * n],
    };
    let xs: Vec<f64> = (0..n).map(|i| bb.min.x + (i as f64 + 0.5) * cell.x).collect();
    let rows: Vec<Vec<bool>> = (0..n * n)
        .into_par_iter()
        .map(|row| {
            let (j, k) = (row % n, row / n);
            let y = bb.min.y + (j as f64 + 0.5) * cell.y;
            let z = bb.min.z + (k as f64 + 0.5) * cell.z;
            index.inside_along_x(y, z, &xs)
        })
        .collect::<Result<_>>()?;
    for (row, cells) in rows.into_iter().enumerate() {
        grid.occupancy[row * n..(row + 1) * n].copy_from_slice(&cells);
    }
    Ok(grid)
}
