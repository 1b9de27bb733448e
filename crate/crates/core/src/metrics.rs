//! Grasp-quality measures over posed hand and object surfaces.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::SubregionMap;
use crate::error::{Error, Result};
use crate::geom::{voxelize_indexed, Mesh, MeshIndex};

pub const METRICS_SCHEMA: &str = "cpf.metrics/1";
pub const SIV_RESOLUTION: usize = 80;
const MM3_PER_CM3: f64 = 1000.0;

/// Mean Euclidean distance between corresponding vertices, mm.
pub fn mpvpe(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::size("vertices", gt.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::Invalid("no vertices to compare".into()));
    }
    let sum: f64 = pred.iter().zip(gt).map(|(a, b)| (a - b).norm()).sum();
    Ok(sum / pred.len() as f64)
}

/// Largest distance from a hand vertex inside the object to the object surface; 0 if none is inside.
pub fn penetration_depth(hand: &Mesh, object: &Mesh) -> Result<f64> {
    let index = MeshIndex::new(object);
    index.require_watertight()?;
    let depths = hand
        .vertices
        .par_iter()
        .map(|v| {
            if index.is_inside(v)? {
                Ok(index.nearest(v)?.distance)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(depths.into_iter().fold(0.0, f64::max))
}

/// Volume of object voxels whose centers fall inside the hand, cm³.
pub fn intersection_volume(hand: &Mesh, object: &Mesh, resolution: usize) -> Result<f64> {
    let hand_index = MeshIndex::new(hand);
    hand_index.require_watertight()?;
    let grid = voxelize_indexed(&MeshIndex::new(object), resolution)?;
    let hb = hand.bounding_box();
    let [nx, ny, nz] = grid.resolution;
    let rows: Vec<(usize, usize)> = (0..nz).flat_map(|k| (0..ny).map(move |j| (j, k))).collect();
    let counts = rows
        .par_iter()
        .map(|&(j, k)| {
            let c = grid.cell_center(0, j, k);
            if c.y < hb.min.y || c.y > hb.max.y || c.z < hb.min.z || c.z > hb.max.z {
                return Ok(0usize);
            }
            let xs: Vec<f64> = (0..nx)
                .filter(|&i| grid.occupancy[grid.index(i, j, k)])
                .map(|i| grid.cell_center(i, j, k).x)
                .collect();
            if xs.is_empty() {
                return Ok(0);
            }
            Ok(hand_index
                .inside_along_x(c.y, c.z, &xs)?
                .into_iter()
                .filter(|&b| b)
                .count())
        })
        .collect::<Result<Vec<usize>>>()?;
    let n: usize = counts.into_iter().sum();
    Ok(n as f64 * grid.cell_volume() / MM3_PER_CM3)
}

/// Mean distance from fingertip-region hand vertices to the object surface,
/// counting vertices inside the object as 0, mm.
pub fn disjointedness(hand: &Mesh, subregions: &SubregionMap, object: &Mesh) -> Result<f64> {
    if subregions.region_of_vertex.len() != hand.vertex_count() {
        return Err(Error::size(
            "subregion map",
            hand.vertex_count(),
            subregions.region_of_vertex.len(),
        ));
    }
    let tips = subregions.tip_vertices();
    if tips.is_empty() {
        return Err(Error::Invalid("fingertip regions are empty".into()));
    }
    let index = MeshIndex::new(object);
    index.require_watertight()?;
    let d = tips
        .par_iter()
        .map(|&i| {
            let v = &hand.vertices[i];
            if index.is_inside(v)? {
                Ok(0.0)
            } else {
                Ok(index.nearest(v)?.distance)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub hand_mpvpe: f64,
    pub object_mpvpe: f64,
    pub penetration_depth: f64,
    pub intersection_volume: f64,
    pub disjointedness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub name: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Posed prediction and ground truth for one sample.
pub struct EvalInput<'a> {
    pub hand: &'a Mesh,
    pub object: &'a Mesh,
    pub gt_hand: &'a Mesh,
    pub gt_object: &'a Mesh,
    pub subregions: &'a SubregionMap,
}

pub fn evaluate(input: &EvalInput<'_>, resolution: usize) -> Result<Metrics> {
    Ok(Metrics {
        hand_mpvpe: mpvpe(&input.hand.vertices, &input.gt_hand.vertices)?,
        object_mpvpe: mpvpe(&input.object.vertices, &input.gt_object.vertices)?,
        penetration_depth: penetration_depth(input.hand, input.object)?,
        intersection_volume: intersection_volume(input.hand, input.object, resolution)?,
        disjointedness: disjointedness(input.hand, input.subregions, input.object)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub samples: Vec<SampleMetrics>,
    pub mean: Metrics,
    /// Physics-simulated displacement is not computed.
    pub simulation_displacement: Option<f64>,
    pub note: String,
}

impl MetricsReport {
    pub fn new(samples: Vec<SampleMetrics>) -> Self {
        let n = samples.len().max(1) as f64;
        let mut mean = Metrics::default();
        for s in &samples {
            let m = &s.metrics;
            mean.hand_mpvpe += m.hand_mpvpe / n;
            mean.object_mpvpe += m.object_mpvpe / n;
            mean.penetration_depth += m.penetration_depth / n;
            mean.intersection_volume += m.intersection_volume / n;
            mean.disjointedness += m.disjointedness / n;
        }
        Self {
            schema: METRICS_SCHEMA.into(),
            samples,
            mean,
            simulation_displacement: None,
            note: "simulation displacement requires a physics simulator and is not computed".into(),
        }
    }

    /// One row per sample plus a mean row; SD is left empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "sample,hand_mpvpe_mm,object_mpvpe_mm,penetration_depth_mm,intersection_volume_cm3,disjointedness_mm,simulation_displacement_mm\n",
        );
        let rows = self.samples.iter().map(|r| (r.name.as_str(), &r.metrics));
        for (name, m) in rows.chain(std::iter::once(("mean", &self.mean))) {
            let _ = writeln!(
                s,
                "{name},{:.6},{:.6},{:.6},{:.6},{:.6},",
                m.hand_mpvpe, m.object_mpvpe, m.penetration_depth, m.intersection_volume, m.disjointedness
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::RigidPose;
    use proptest::prelude::*;

    fn cube(min: [f64; 3], max: [f64; 3], n: usize) -> Mesh {
        Mesh::cuboid(Vector3::from(min), Vector3::from(max), n).unwrap()
    }

    #[test]
    fn mpvpe_shift() {
        let m = cube([0.0; 3], [1.0; 3], 2);
        let s = m.translated(&Vector3::new(0.0, 3.0, 0.0));
        assert_eq!(mpvpe(&m.vertices, &m.vertices).unwrap(), 0.0);
        assert!((mpvpe(&s.vertices, &m.vertices).unwrap() - 3.0).abs() < 1e-12);
        assert!(mpvpe(&s.vertices[1..], &m.vertices).is_err());
    }

    proptest! {
        #[test]
        fn mpvpe_matches_resummed(pairs in prop::collection::vec(prop::array::uniform6(-50.0f64..50.0), 1..60)) {
            let a: Vec<_> = pairs.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect();
            let b: Vec<_> = pairs.iter().map(|p| Vector3::new(p[3], p[4], p[5])).collect();
            let mut oracle = 0.0;
            for i in 0..a.len() {
                let d = [a[i].x - b[i].x, a[i].y - b[i].y, a[i].z - b[i].z];
                oracle += (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            }
            oracle /= a.len() as f64;
            prop_assert!((mpvpe(&a, &b).unwrap() - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_meshes_have_no_penetration() {
        let a = cube([0.0; 3], [10.0; 3], 2);
        let b = cube([20.0; 3], [30.0; 3], 2);
        assert_eq!(penetration_depth(&a, &b).unwrap(), 0.0);
        assert_eq!(intersection_volume(&a, &b, 20).unwrap(), 0.0);
    }

    #[test]
    fn deepest_vertex_wins() {
        let object = cube([-50.0; 3], [50.0; 3], 4);
        let mut hand = cube([0.0; 3], [1.0; 3], 1).translated(&Vector3::new(0.0, 0.0, 60.0));
        hand.vertices[0] = Vector3::new(0.0, 0.0, 50.0 - 2.5);
        hand.vertices[1] = Vector3::new(0.0, 0.0, 50.0 - 0.75);
        assert!((penetration_depth(&hand, &object).unwrap() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn overlapping_boxes_volume() {
        let a = cube([0.0; 3], [40.0; 3], 2);
        let b = cube([20.0, 0.0, 0.0], [60.0, 40.0, 40.0], 2);
        let analytic = 20.0 * 40.0 * 40.0 / 1000.0;
        let v = intersection_volume(&a, &b, SIV_RESOLUTION).unwrap();
        assert!((v - analytic).abs() / analytic < 0.05, "{v}");
    }

    #[test]
    fn object_inside_hand() {
        let hand = cube([-30.0; 3], [30.0; 3], 2);
        let object = Mesh::icosphere(Vector3::zeros(), 20.0, 3).unwrap();
        let v = intersection_volume(&hand, &object, SIV_RESOLUTION).unwrap();
        let vol = object.signed_volume() / 1000.0;
        assert!((v - vol).abs() / vol < 0.05);
    }

    #[test]
    fn report_csv_order() {
        let r = MetricsReport::new(vec![SampleMetrics {
            name: "a".into(),
            metrics: Metrics {
                hand_mpvpe: 1.0,
                object_mpvpe: 2.0,
                penetration_depth: 3.0,
                intersection_volume: 4.0,
                disjointedness: 5.0,
            },
        }]);
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert!(lines[0].starts_with("sample,hand_mpvpe_mm,object_mpvpe_mm,penetration_depth_mm"));
        assert_eq!(lines[1], "a,1.000000,2.000000,3.000000,4.000000,5.000000,");
        assert_eq!(lines[2], "mean,1.000000,2.000000,3.000000,4.000000,5.000000,");
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["simulation_displacement"].is_null());
    }

    #[test]
    fn rigid_pose_shift_is_mpvpe() {
        let m = cube([0.0; 3], [5.0; 3], 2);
        let t = m.transformed(&RigidPose::from_translation(Vector3::new(1.0, 2.0, 2.0)));
        assert!((mpvpe(&t.vertices, &m.vertices).unwrap() - 3.0).abs() < 1e-12);
    }
}
