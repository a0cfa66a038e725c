//! Model image input: center-slice selection, align-corners bilinear
//! resampling and per-slice min-max normalization.

use thiserror::Error;

use crate::dicom::{read_pixels, DicomError, SeriesRecord};
use crate::geometry::SeriesGeometry;

pub const MODEL_IMAGE_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("series has no instance with pixel data")]
    NoPixelData,
    #[error(transparent)]
    Dicom(#[from] DicomError),
}

/// Row-major scalar grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<ImageMatrix, ImagingError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(ImagingError::EmptyImage);
        }
        Ok(ImageMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<ImageMatrix, ImagingError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ImagingError::EmptyImage);
        }
        ImageMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> ImageMatrix {
        ImageMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Normalized model input, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSlice {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ImageSlice {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }
}

/// Index of the instance used as the series' center slice.
///
/// Only instances with pixel data are candidates. 3D series take index
/// `floor(n/2)` in (offset, temporal position) order; 4D series take the
/// middle spatial position and, within it, the earliest temporal position.
pub fn center_instance_index(series: &SeriesRecord, geometry: &SeriesGeometry) -> Option<usize> {
    let with_pixels: Vec<usize> = (0..series.instances.len())
        .filter(|&i| series.instances[i].pixel_payload.is_some())
        .collect();
    if with_pixels.is_empty() {
        return None;
    }
    let offset = |i: usize| geometry.offsets.get(i).copied().flatten();
    let temporal = |i: usize| series.instances[i].temporal_position;
    let key = |&a: &usize, &b: &usize| {
        let oa = offset(a).unwrap_or(f64::INFINITY);
        let ob = offset(b).unwrap_or(f64::INFINITY);
        oa.total_cmp(&ob)
            .then_with(|| temporal(a).unwrap_or(i64::MAX).cmp(&temporal(b).unwrap_or(i64::MAX)))
            .then_with(|| {
                series.instances[a]
                    .sop_instance_uid
                    .cmp(&series.instances[b].sop_instance_uid)
            })
            .then(a.cmp(&b))
    };

    if geometry.is4d {
        let mut positions: Vec<usize> = with_pixels
            .iter()
            .filter_map(|&i| geometry.position_index.get(i).copied().flatten())
            .collect();
        positions.sort_unstable();
        positions.dedup();
        if !positions.is_empty() {
            let middle = positions[positions.len() / 2];
            let mut members: Vec<usize> = with_pixels
                .iter()
                .copied()
                .filter(|&i| geometry.position_index.get(i).copied().flatten() == Some(middle))
                .collect();
            members.sort_by(key);
            return members.first().copied();
        }
    }
    let mut ordered = with_pixels;
    ordered.sort_by(key);
    Some(ordered[ordered.len() / 2])
}

pub fn center_slice(series: &SeriesRecord, geometry: &SeriesGeometry) -> Result<ImageMatrix, ImagingError> {
    let idx = center_instance_index(series, geometry).ok_or(ImagingError::NoPixelData)?;
    Ok(read_pixels(&series.instances[idx])?)
}

fn source_coord(i: usize, in_size: usize, out_size: usize) -> f64 {
    if out_size == 1 {
        (in_size - 1) as f64 / 2.0
    } else {
        (i * (in_size - 1)) as f64 / (out_size - 1) as f64
    }
}

/// Align-corners bilinear resampling. An input already at the target size is
/// returned unchanged.
pub fn resample_bilinear(img: &ImageMatrix, out_h: usize, out_w: usize) -> Result<ImageMatrix, ImagingError> {
    if img.rows == 0 || img.cols == 0 || out_h == 0 || out_w == 0 {
        return Err(ImagingError::EmptyImage);
    }
    if img.rows == out_h && img.cols == out_w {
        return Ok(img.clone());
    }
    let xs: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|x| {
            let sx = source_coord(x, img.cols, out_w);
            let x0 = (sx.floor() as usize).min(img.cols - 1);
            let x1 = (x0 + 1).min(img.cols - 1);
            (x0, x1, sx - x0 as f64)
        })
        .collect();
    let mut data = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        let sy = source_coord(y, img.rows, out_h);
        let y0 = (sy.floor() as usize).min(img.rows - 1);
        let y1 = (y0 + 1).min(img.rows - 1);
        let fy = sy - y0 as f64;
        for &(x0, x1, fx) in &xs {
            let top = lerp(img.get(y0, x0), img.get(y0, x1), fx);
            let bottom = lerp(img.get(y1, x0), img.get(y1, x1), fx);
            data.push(lerp(top, bottom, fy));
        }
    }
    Ok(ImageMatrix {
        rows: out_h,
        cols: out_w,
        data,
    })
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

/// Per-slice min-max normalization; a constant image maps to all zeros.
pub fn normalize01(img: &ImageMatrix) -> ImageSlice {
    let (min, max) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = max - min;
    let values = if range > 0.0 && range.is_finite() {
        img.data.iter().map(|&v| ((v - min) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; img.data.len()]
    };
    ImageSlice {
        height: img.rows,
        width: img.cols,
        values,
    }
}

/// Center slice, resampled to `size`×`size` and normalized.
pub fn preprocess(series: &SeriesRecord, geometry: &SeriesGeometry, size: usize) -> Result<ImageSlice, ImagingError> {
    let raw = center_slice(series, geometry)?;
    Ok(normalize01(&resample_bilinear(&raw, size, size)?))
}

/// Binary PGM (P5, 8-bit) rendering of a normalized slice.
pub fn to_pgm(slice: &ImageSlice, comment: Option<&str>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", slice.width, slice.height).as_bytes());
    out.extend(slice.values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}
