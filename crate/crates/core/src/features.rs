//! Metadata feature vectors: robust per-series attributes, z-score scaling
//! fitted on training data, scanning-sequence flags and the 4D flag.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::SeriesRecord;
use crate::geometry::SeriesGeometry;

pub const FEATURE_LEN: usize = 10;
pub const SCALER_VERSION: u32 = 1;

/// Scanning sequence codes with a dedicated presence flag, in vector order.
pub const SEQUENCE_CODES: [&str; 5] = ["SE", "GR", "EP", "IR", "RM"];

pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "tr_scaled",
    "te_scaled",
    "fa_scaled",
    "has_se",
    "has_gr",
    "has_ep",
    "has_ir",
    "has_rm",
    "contrast_present",
    "is4d",
];

const NUMERIC_NAMES: [&str; 3] = ["RepetitionTime", "EchoTime", "FlipAngle"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("cannot fit a scaler on an empty training set")]
    EmptyTrainingSet,
    #[error("unsupported scaler version {0}")]
    UnsupportedVersion(u32),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawMetadata {
    pub repetition_time: Option<f64>,
    pub echo_time: Option<f64>,
    pub flip_angle: Option<f64>,
    pub scanning_sequence: Vec<String>,
    pub contrast_present: bool,
    pub is4d: bool,
}

impl RawMetadata {
    fn numeric(&self) -> [Option<f64>; 3] {
        [self.repetition_time, self.echo_time, self.flip_angle]
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.scanning_sequence
            .iter()
            .any(|c| c.trim().eq_ignore_ascii_case(code))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScale {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Stand-in for a missing value; the training mean, so it scales to 0.
    pub fill: f64,
    /// No usable spread in training (absent or constant); std fell back to 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub version: u32,
    pub attributes: Vec<AttributeScale>,
}

impl ScalingParams {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scaler serializes")
    }

    pub fn from_json(text: &str) -> Result<ScalingParams, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.version != SCALER_VERSION {
            return Err(FeatureError::UnsupportedVersion(self.version));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    values.retain(|v| v.is_finite());
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn agent_present(agent: &Option<String>) -> bool {
    match agent.as_deref().map(str::trim) {
        Some(a) => !a.is_empty() && !a.eq_ignore_ascii_case("NONE"),
        None => false,
    }
}

/// Series-level attributes: numeric values are medians over the instances
/// that carry them, sequence codes are unioned, contrast is "any instance".
pub fn extract_raw(series: &SeriesRecord, geometry: &SeriesGeometry) -> RawMetadata {
    let collect =
        |f: fn(&crate::dicom::InstanceMetadata) -> Option<f64>| median(series.instances.iter().filter_map(f).collect());
    let mut codes: Vec<String> = Vec::new();
    for inst in &series.instances {
        for code in &inst.scanning_sequence {
            let code = code.trim().to_ascii_uppercase();
            if !code.is_empty() && !codes.contains(&code) {
                codes.push(code);
            }
        }
    }
    codes.sort();
    RawMetadata {
        repetition_time: collect(|i| i.repetition_time),
        echo_time: collect(|i| i.echo_time),
        flip_angle: collect(|i| i.flip_angle),
        scanning_sequence: codes,
        contrast_present: series.instances.iter().any(|i| agent_present(&i.contrast_bolus_agent)),
        is4d: geometry.is4d,
    }
}

/// Per-attribute mean and population standard deviation over present values.
pub fn fit_scaler(train: &[RawMetadata]) -> Result<ScalingParams, FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let attributes = (0..3)
        .map(|k| {
            let values: Vec<f64> = train
                .iter()
                .filter_map(|r| r.numeric()[k])
                .filter(|v| v.is_finite())
                .collect();
            let name = NUMERIC_NAMES[k].to_string();
            if values.is_empty() {
                return AttributeScale {
                    name,
                    mean: 0.0,
                    std: 1.0,
                    fill: 0.0,
                    degenerate: true,
                };
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            let degenerate = !(std > 1e-12 * mean.abs().max(1.0));
            AttributeScale {
                name,
                mean,
                std: if degenerate { 1.0 } else { std },
                fill: mean,
                degenerate,
            }
        })
        .collect();
    Ok(ScalingParams {
        version: SCALER_VERSION,
        attributes,
    })
}

/// Fixed-order feature vector. Total: any input gives finite values.
pub fn vectorize(raw: &RawMetadata, scaler: &ScalingParams) -> FeatureVector {
    let mut v = [0.0; FEATURE_LEN];
    for (k, value) in raw.numeric().into_iter().enumerate() {
        let Some(a) = scaler.attributes.get(k) else { continue };
        let x = value.filter(|x| x.is_finite()).unwrap_or(a.fill);
        let z = (x - a.mean) / a.std;
        v[k] = if z.is_finite() { z } else { 0.0 };
    }
    for (j, code) in SEQUENCE_CODES.iter().enumerate() {
        v[3 + j] = f64::from(u8::from(raw.has_code(code)));
    }
    v[8] = f64::from(u8::from(raw.contrast_present));
    v[9] = f64::from(u8::from(raw.is4d));
    FeatureVector(v)
}

/// Row of the feature table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub series_uid: String,
    pub label: String,
    pub tr_scaled: f64,
    pub te_scaled: f64,
    pub fa_scaled: f64,
    pub has_se: f64,
    pub has_gr: f64,
    pub has_ep: f64,
    pub has_ir: f64,
    pub has_rm: f64,
    pub contrast_present: f64,
    pub is4d: f64,
}

impl FeatureRow {
    pub fn new(series_uid: &str, label: &str, fv: &FeatureVector) -> FeatureRow {
        let v = fv.0;
        FeatureRow {
            series_uid: series_uid.to_string(),
            label: label.to_string(),
            tr_scaled: v[0],
            te_scaled: v[1],
            fa_scaled: v[2],
            has_se: v[3],
            has_gr: v[4],
            has_ep: v[5],
            has_ir: v[6],
            has_rm: v[7],
            contrast_present: v[8],
            is4d: v[9],
        }
    }
}
