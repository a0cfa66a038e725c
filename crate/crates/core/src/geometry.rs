//! Slice geometry per series: normal, projected offsets, orientation class and
//! the overlap-derived 4D flag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::{InstanceMetadata, SeriesRecord};

/// Slices closer than this along the normal (mm) are treated as the same position.
pub const DEFAULT_OVERLAP_TOL: f64 = 0.01;
/// Minimum dominant direction cosine for a non-oblique orientation.
pub const DEFAULT_OBLIQUE_THRESHOLD: f64 = 0.9;

const DEGENERATE_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrientationClass {
    Axial,
    Sagittal,
    Coronal,
    Oblique,
    Unknown,
}

impl OrientationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            OrientationClass::Axial => "Axial",
            OrientationClass::Sagittal => "Sagittal",
            OrientationClass::Coronal => "Coronal",
            OrientationClass::Oblique => "Oblique",
            OrientationClass::Unknown => "Unknown",
        }
    }
}

impl std::fmt::Display for OrientationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OrientationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "axial" => Ok(OrientationClass::Axial),
            "sagittal" => Ok(OrientationClass::Sagittal),
            "coronal" => Ok(OrientationClass::Coronal),
            "oblique" => Ok(OrientationClass::Oblique),
            "unknown" => Ok(OrientationClass::Unknown),
            other => Err(format!("unknown orientation class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate image orientation {0:?}")]
    DegenerateOrientation([f64; 6]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesGeometry {
    /// Unit slice normal, when the series carries a usable orientation.
    pub normal: Option<[f64; 3]>,
    /// Projected position per instance, in instance order.
    pub offsets: Vec<Option<f64>>,
    /// Spatial position cluster per instance, numbered in ascending offset.
    pub position_index: Vec<Option<usize>>,
    pub orientation_class: OrientationClass,
    pub is4d: bool,
    pub distinct_positions: usize,
}

pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(v: &[f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit normal from row and column direction cosines.
pub fn slice_normal(orientation: &[f64; 6]) -> Result<[f64; 3], GeometryError> {
    let row = [orientation[0], orientation[1], orientation[2]];
    let col = [orientation[3], orientation[4], orientation[5]];
    let (rn, cn) = (norm(&row), norm(&col));
    if !(rn > DEGENERATE_NORM && cn > DEGENERATE_NORM) {
        return Err(GeometryError::DegenerateOrientation(*orientation));
    }
    let row = row.map(|v| v / rn);
    let col = col.map(|v| v / cn);
    let n = cross(&row, &col);
    let nn = norm(&n);
    if !(nn >= DEGENERATE_NORM) {
        return Err(GeometryError::DegenerateOrientation(*orientation));
    }
    Ok(n.map(|v| v / nn))
}

/// Normal of the first instance with a usable orientation.
pub fn series_normal(instances: &[InstanceMetadata]) -> Option<[f64; 3]> {
    instances
        .iter()
        .filter_map(|i| i.image_orientation_patient.as_ref())
        .find_map(|o| slice_normal(o).ok())
}

pub fn classify_orientation(normal: &[f64; 3]) -> OrientationClass {
    classify_orientation_with(normal, DEFAULT_OBLIQUE_THRESHOLD)
}

/// The dominant absolute component picks the plane; below `oblique_threshold`
/// the orientation is oblique.
pub fn classify_orientation_with(normal: &[f64; 3], oblique_threshold: f64) -> OrientationClass {
    let a = normal.map(f64::abs);
    if a.iter().any(|v| !v.is_finite()) {
        return OrientationClass::Unknown;
    }
    let (axis, max) = a.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, &v)| if v > best.1 { (i, v) } else { best },
    );
    if max < oblique_threshold {
        return OrientationClass::Oblique;
    }
    match axis {
        0 => OrientationClass::Sagittal,
        1 => OrientationClass::Coronal,
        _ => OrientationClass::Axial,
    }
}

/// Single-linkage clustering of scalar offsets: sorted, with a new cluster
/// whenever the gap to the previous offset exceeds `tol`. Returns clusters of
/// input indices in ascending offset order.
pub fn cluster_offsets(offsets: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..offsets.len()).collect();
    order.sort_by(|&a, &b| offsets[a].total_cmp(&offsets[b]).then(a.cmp(&b)));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut prev: Option<f64> = None;
    for i in order {
        let o = offsets[i];
        match (prev, clusters.last_mut()) {
            (Some(p), Some(last)) if (o - p).abs() <= tol => last.push(i),
            _ => clusters.push(vec![i]),
        }
        prev = Some(o);
    }
    clusters
}

/// Derives the geometry of a series. Total: missing or degenerate geometry
/// yields `Unknown` / not-4D rather than an error. Negative tolerances are
/// treated as zero.
pub fn compute_geometry(series: &SeriesRecord, overlap_tol: f64) -> SeriesGeometry {
    let tol = overlap_tol.max(0.0);
    let n = series.instances.len();
    let normal = series_normal(&series.instances);
    let orientation_class = normal.as_ref().map_or(OrientationClass::Unknown, classify_orientation);

    let offsets: Vec<Option<f64>> = series
        .instances
        .iter()
        .map(|inst| {
            let nrm = normal?;
            let p = inst.image_position_patient?;
            let o = dot(&nrm, &p);
            o.is_finite().then_some(o)
        })
        .collect();

    let present: Vec<usize> = (0..n).filter(|&i| offsets[i].is_some()).collect();
    let values: Vec<f64> = present.iter().map(|&i| offsets[i].unwrap_or_default()).collect();
    let clusters = cluster_offsets(&values, tol);

    let mut position_index = vec![None; n];
    for (ci, members) in clusters.iter().enumerate() {
        for &m in members {
            position_index[present[m]] = Some(ci);
        }
    }
    let is4d = clusters.iter().any(|c| c.len() >= 2);
    // Instances without a position each count as their own position.
    let distinct_positions = clusters.len() + (n - present.len());

    SeriesGeometry {
        normal,
        offsets,
        position_index,
        orientation_class,
        is4d,
        distinct_positions,
    }
}
