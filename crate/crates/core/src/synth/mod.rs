//! Deterministic synthetic DICOM series with class-typed metadata and
//! textures, a Part-10 writer, and metadata distribution plots.

mod plot;
pub mod texture;
mod writer;

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plot::{export_distribution_plot, DistributionPlot, PlotRow, CLASS_PALETTE};
pub use texture::{TextureKind, TextureSpec};
pub use writer::{serialize_part10, serialize_part10_with, IMPLEMENTATION_CLASS_UID, MR_IMAGE_STORAGE};

use crate::dicom::{InstanceMetadata, SeriesRecord};
use crate::geometry::OrientationClass;
use crate::{seed, SeqClass};

const UID_ROOT: &str = "1.2.826.0.1.3680043.9.7433.2";
const SLICE_SPACING_MM: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    BadProfile(String),
    #[error("feature table is empty")]
    EmptyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: SeqClass,
    pub tr_ms: [f64; 2],
    pub te_ms: [f64; 2],
    pub fa_deg: [f64; 2],
    pub scanning_sequence: Vec<String>,
    pub contrast_agent: String,
    pub contrast_probability: f64,
    pub is4d_probability: f64,
    pub slice_count: [usize; 2],
    /// Instances per position when the series is drawn 4D.
    pub repeats_4d: usize,
    pub texture: TextureSpec,
    pub orientation: OrientationClass,
    pub descriptions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtraKind {
    Localizer,
    SagittalT2,
    CalculatedB,
}

/// Series a curator should exclude, added to a fraction of patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraProfile {
    pub kind: ExtraKind,
    pub fraction: f64,
    pub descriptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    /// Collection name; also the top-level directory on disk.
    pub name: String,
    pub image_size: usize,
    pub intensity_scale: f64,
    pub nonconforming_fraction: f64,
    pub nonconforming_descriptions: Vec<String>,
    pub classes: Vec<ClassProfile>,
    pub extras: Vec<ExtraProfile>,
}

/// Knobs that move the DWI/ADC metadata toward each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftKnobs {
    /// 0 keeps the ADC TR/TE ranges apart from DWI; 1 makes them identical.
    pub dwi_adc_overlap: f64,
    /// Probability that a DWI series is acquired without overlapping slices.
    pub is4d_noise: f64,
}

impl ShiftKnobs {
    pub const SEPARABLE: ShiftKnobs = ShiftKnobs {
        dwi_adc_overlap: 0.0,
        is4d_noise: 0.0,
    };
}

fn lerp_range(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

struct Base {
    tr: [[f64; 2]; 4],
    te: [[f64; 2]; 4],
    adc_tr: [f64; 2],
    adc_te: [f64; 2],
    texture_noise: f64,
    vocab: [&'static [&'static str]; 4],
}

fn build(name: &str, image_size: usize, intensity_scale: f64, base: Base, knobs: ShiftKnobs) -> ProfileSet {
    let overlap = knobs.dwi_adc_overlap.clamp(0.0, 1.0);
    let noise = knobs.is4d_noise.clamp(0.0, 1.0);
    let tex = |kind, contrast, frequency| TextureSpec {
        kind,
        contrast,
        noise: base.texture_noise,
        frequency,
    };
    let classes = vec![
        ClassProfile {
            class: SeqClass::T2W,
            tr_ms: base.tr[0],
            te_ms: base.te[0],
            fa_deg: [120.0, 160.0],
            scanning_sequence: strings(&["SE"]),
            contrast_agent: String::new(),
            contrast_probability: 0.0,
            is4d_probability: 0.0,
            slice_count: [8, 12],
            repeats_4d: 1,
            texture: tex(TextureKind::Ellipse, 1.0, 0.0),
            orientation: OrientationClass::Axial,
            descriptions: strings(base.vocab[0]),
        },
        ClassProfile {
            class: SeqClass::DWI,
            tr_ms: base.tr[1],
            te_ms: base.te[1],
            fa_deg: [90.0, 90.0],
            scanning_sequence: strings(&["SE", "EP"]),
            contrast_agent: String::new(),
            contrast_probability: 0.0,
            is4d_probability: 1.0 - noise,
            slice_count: [6, 9],
            repeats_4d: 3,
            texture: tex(TextureKind::Speckle, 1.0, 0.35),
            orientation: OrientationClass::Axial,
            descriptions: strings(base.vocab[1]),
        },
        ClassProfile {
            class: SeqClass::ADC,
            tr_ms: lerp_range(base.adc_tr, base.tr[1], overlap),
            te_ms: lerp_range(base.adc_te, base.te[1], overlap),
            fa_deg: [90.0, 90.0],
            scanning_sequence: strings(&["SE", "EP"]),
            contrast_agent: String::new(),
            contrast_probability: 0.0,
            is4d_probability: 0.0,
            slice_count: [6, 9],
            repeats_4d: 1,
            texture: tex(TextureKind::Smooth, 1.0, 0.0),
            orientation: OrientationClass::Axial,
            descriptions: strings(base.vocab[2]),
        },
        ClassProfile {
            class: SeqClass::DCE,
            tr_ms: base.tr[3],
            te_ms: base.te[3],
            fa_deg: [10.0, 15.0],
            scanning_sequence: strings(&["GR"]),
            contrast_agent: "GADOBUTROL".into(),
            contrast_probability: 0.9,
            is4d_probability: 1.0,
            slice_count: [4, 6],
            repeats_4d: 4,
            texture: tex(TextureKind::Stripes, 1.0, 6.0),
            orientation: OrientationClass::Axial,
            descriptions: strings(base.vocab[3]),
        },
    ];
    ProfileSet {
        name: name.to_string(),
        image_size,
        intensity_scale,
        nonconforming_fraction: 0.1,
        nonconforming_descriptions: strings(&[
            "series 7",
            "mr prostate",
            "pelvis research",
            "protocol x",
            "unnamed",
            "",
        ]),
        classes,
        extras: vec![
            ExtraProfile {
                kind: ExtraKind::Localizer,
                fraction: 0.04,
                descriptions: strings(&["localizer", "3-plane loc", "survey"]),
            },
            ExtraProfile {
                kind: ExtraKind::SagittalT2,
                fraction: 0.04,
                descriptions: strings(&["t2_tse_sag", "T2 SAG"]),
            },
            ExtraProfile {
                kind: ExtraKind::CalculatedB,
                fraction: 0.02,
                descriptions: strings(&["calc_b1400", "b1500 calculated"]),
            },
        ],
    }
}

/// Collection used for training and internal testing.
pub fn internal_profiles(knobs: ShiftKnobs) -> ProfileSet {
    build(
        "SYNTH-INT",
        48,
        1000.0,
        Base {
            tr: [[3500.0, 6000.0], [2600.0, 4000.0], [0.0; 2], [3.0, 6.0]],
            te: [[90.0, 120.0], [60.0, 75.0], [0.0; 2], [1.2, 2.5]],
            adc_tr: [4500.0, 6000.0],
            adc_te: [85.0, 100.0],
            texture_noise: 0.05,
            vocab: [
                &["t2_tse_tra", "T2 AX", "t2w axial", "TSE T2 prostate"],
                &["ep2d_diff_tra", "DWI axial", "diffusion trace", "dwi_tra"],
                &["ep2d_diff_tra_ADC", "ADC map", "apparent diffusion coefficient"],
                &["t1_vibe_dyn", "DCE axial", "twist_dynamic", "perfusion"],
            ],
        },
        knobs,
    )
}

/// Shifted acquisition ranges, a different matrix size and new description
/// wording, standing in for an external site.
pub fn external_profiles(knobs: ShiftKnobs) -> ProfileSet {
    build(
        "SYNTH-EXT",
        56,
        1800.0,
        Base {
            tr: [[4500.0, 7500.0], [3200.0, 4800.0], [0.0; 2], [4.0, 7.0]],
            te: [[100.0, 135.0], [65.0, 82.0], [0.0; 2], [1.5, 3.0]],
            adc_tr: [5200.0, 7000.0],
            adc_te: [90.0, 110.0],
            texture_noise: 0.08,
            vocab: [
                &["Ax T2 FRFSE", "T2 PROPELLER ax", "ax t2 fse"],
                &["DIFF TRACE ax", "dwi_focus", "Ax DWI"],
                &["Apparent Diffusion Coefficient (mm2/s)", "adc_focus"],
                &["dyn_thrive", "contrast dynamic", "DCE ax"],
            ],
        },
        knobs,
    )
}

impl ProfileSet {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadProfile(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("collection name {:?}", self.name));
        }
        if self.image_size < 2 || self.image_size > 1024 {
            return bad(format!("image size {}", self.image_size));
        }
        if !(self.intensity_scale > 0.0 && self.intensity_scale <= f64::from(u16::MAX)) {
            return bad("intensity scale".into());
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.nonconforming_fraction) {
            return bad("nonconforming fraction".into());
        }
        if self.nonconforming_fraction > 0.0 && self.nonconforming_descriptions.is_empty() {
            return bad("no nonconforming descriptions".into());
        }
        let classes: BTreeSet<SeqClass> = self.classes.iter().map(|c| c.class).collect();
        if classes.len() != self.classes.len() || self.classes.is_empty() {
            return bad("each class needs exactly one profile".into());
        }
        for c in &self.classes {
            let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && r[0] >= 0.0;
            if !(range_ok(c.tr_ms) && range_ok(c.te_ms) && range_ok(c.fa_deg)) {
                return bad(format!("{} ranges", c.class));
            }
            if !(prob(c.contrast_probability) && prob(c.is4d_probability)) {
                return bad(format!("{} probabilities", c.class));
            }
            if c.slice_count[0] == 0 || c.slice_count[0] > c.slice_count[1] || c.repeats_4d == 0 {
                return bad(format!("{} slice counts", c.class));
            }
            if c.is4d_probability > 0.0 && c.repeats_4d < 2 {
                return bad(format!("{} can be 4D but repeats_4d < 2", c.class));
            }
            if c.descriptions.is_empty() {
                return bad(format!("{} has no descriptions", c.class));
            }
        }
        for e in &self.extras {
            if !prob(e.fraction) || e.descriptions.is_empty() {
                return bad(format!("extra {:?}", e.kind));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profiles serialize")
    }

    pub fn from_json(text: &str) -> Result<ProfileSet, SynthError> {
        let p: ProfileSet = serde_json::from_str(text).map_err(|e| SynthError::BadProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    fn profile(&self, class: SeqClass) -> Option<&ClassProfile> {
        self.classes.iter().find(|c| c.class == class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    Class(SeqClass),
    Extra(ExtraKind),
}

impl Truth {
    pub fn class(self) -> Option<SeqClass> {
        match self {
            Truth::Class(c) => Some(c),
            Truth::Extra(_) => None,
        }
    }

    pub fn as_string(self) -> String {
        match self {
            Truth::Class(c) => c.to_string(),
            Truth::Extra(ExtraKind::Localizer) => "Excluded:localizer".into(),
            Truth::Extra(ExtraKind::SagittalT2) => "Excluded:orientation".into(),
            Truth::Extra(ExtraKind::CalculatedB) => "Excluded:calculated".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub collection: String,
    pub record: SeriesRecord,
    pub truth: Truth,
    /// Whether the generator drew overlapping positions for this series.
    pub is4d_drawn: bool,
    pub nonconforming: bool,
}

fn draw(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Rounds to two decimals so values survive DS text unchanged.
fn ds(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn collection_code(name: &str) -> u64 {
    seed::derive(0, name, 0) % 100_000
}

struct SeriesPlan<'a> {
    profile: &'a ClassProfile,
    truth: Truth,
    description: String,
    orientation: OrientationClass,
    nonconforming: bool,
    slices: Option<usize>,
}

fn make_series(
    set: &ProfileSet,
    patient_id: &str,
    series_uid: &str,
    plan: &SeriesPlan<'_>,
    seed_v: u64,
) -> SyntheticSeries {
    let p = plan.profile;
    let mut rng = seed::rng(seed_v, "series", 0);
    let tr = ds(draw(&mut rng, p.tr_ms));
    let te = ds(draw(&mut rng, p.te_ms));
    let fa = ds(draw(&mut rng, p.fa_deg));
    let contrast = rng.gen_bool(p.contrast_probability);
    let is4d = rng.gen_bool(p.is4d_probability);
    let n_pos = plan
        .slices
        .unwrap_or_else(|| rng.gen_range(p.slice_count[0]..=p.slice_count[1]));
    let repeats = if is4d { p.repeats_4d } else { 1 };
    let origin = [
        ds(rng.gen_range(-20.0..20.0)),
        ds(rng.gen_range(-20.0..20.0)),
        ds(rng.gen_range(-40.0..-10.0)),
    ];
    let orientation = match plan.orientation {
        OrientationClass::Sagittal => [0.0, 1.0, 0.0, 0.0, 0.0, -1.0],
        OrientationClass::Coronal => [1.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        _ => [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };
    let axis = match plan.orientation {
        OrientationClass::Sagittal => 0,
        OrientationClass::Coronal => 1,
        _ => 2,
    };
    let size = set.image_size;
    let mut instances = Vec::with_capacity(n_pos * repeats);
    for pos in 0..n_pos {
        for t in 0..repeats {
            let idx = instances.len();
            let mut position = origin;
            position[axis] = ds(origin[axis] + pos as f64 * SLICE_SPACING_MM);
            let mut tex_rng = seed::rng(seed_v, "texture", idx as u64);
            let pixels = texture::render(&p.texture, size, &mut tex_rng);
            instances.push(InstanceMetadata {
                sop_instance_uid: format!("{series_uid}.{}", idx + 1),
                series_instance_uid: series_uid.to_string(),
                patient_id: patient_id.to_string(),
                series_description: plan.description.clone(),
                repetition_time: Some(tr),
                echo_time: Some(te),
                flip_angle: Some(fa),
                scanning_sequence: p.scanning_sequence.clone(),
                contrast_bolus_agent: contrast.then(|| p.contrast_agent.clone()).filter(|a| !a.is_empty()),
                image_position_patient: Some(position),
                image_orientation_patient: Some(orientation),
                rows: Some(size as u16),
                cols: Some(size as u16),
                pixel_spacing: Some([0.8, 0.8]),
                temporal_position: is4d.then_some(t as i64 + 1),
                pixel_payload: Some(texture::to_pixel_bytes(&pixels, set.intensity_scale)),
            });
        }
    }
    SyntheticSeries {
        collection: set.name.clone(),
        record: SeriesRecord {
            series_instance_uid: series_uid.to_string(),
            patient_id: patient_id.to_string(),
            series_description: plan.description.clone(),
            instances,
        },
        truth: plan.truth,
        is4d_drawn: is4d,
        nonconforming: plan.nonconforming,
    }
}

/// Exactly `round(fraction · n)` indices of `0..n`, chosen by `label`'s stream.
fn pick(n: usize, fraction: f64, seed_v: u64, label: &str) -> BTreeSet<usize> {
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed_v, label, 0));
    idx.into_iter().take(k).collect()
}

/// One series per class per patient, plus excluded extras for a fraction of
/// patients. Exactly `round(nonconforming_fraction · class series)` class
/// series get a description no rule matches.
pub fn generate_dataset(set: &ProfileSet, n_patients: usize, seed_v: u64) -> Result<Vec<SyntheticSeries>, SynthError> {
    set.validate()?;
    let n_classes = set.classes.len();
    let nonconforming = pick(
        n_patients * n_classes,
        set.nonconforming_fraction,
        seed_v,
        &format!("{}:nonconforming", set.name),
    );
    let extras: Vec<BTreeSet<usize>> = set
        .extras
        .iter()
        .map(|e| {
            pick(
                n_patients,
                e.fraction,
                seed_v,
                &format!("{}:extra:{:?}", set.name, e.kind),
            )
        })
        .collect();
    let code = collection_code(&set.name);

    let per_patient: Vec<Vec<SyntheticSeries>> = (0..n_patients)
        .into_par_iter()
        .map(|pi| {
            let patient_id = format!("{}-{:03}", set.name, pi + 1);
            let mut rng = seed::rng(seed_v, &format!("{}:patient", set.name), pi as u64);
            let mut plans = Vec::new();
            for (ci, profile) in set.classes.iter().enumerate() {
                let odd = nonconforming.contains(&(pi * n_classes + ci));
                let pool = if odd {
                    &set.nonconforming_descriptions
                } else {
                    &profile.descriptions
                };
                let description = pool.choose(&mut rng).cloned().unwrap_or_default();
                plans.push(SeriesPlan {
                    profile,
                    truth: Truth::Class(profile.class),
                    description,
                    orientation: profile.orientation,
                    nonconforming: odd,
                    slices: None,
                });
            }
            for (extra, chosen) in set.extras.iter().zip(&extras) {
                if !chosen.contains(&pi) {
                    continue;
                }
                let base = match extra.kind {
                    ExtraKind::CalculatedB => set.profile(SeqClass::DWI),
                    _ => set.profile(SeqClass::T2W),
                }
                .unwrap_or(&set.classes[0]);
                plans.push(SeriesPlan {
                    profile: base,
                    truth: Truth::Extra(extra.kind),
                    description: extra.descriptions.choose(&mut rng).cloned().unwrap_or_default(),
                    orientation: if extra.kind == ExtraKind::SagittalT2 {
                        OrientationClass::Sagittal
                    } else {
                        OrientationClass::Axial
                    },
                    nonconforming: false,
                    slices: (extra.kind == ExtraKind::Localizer).then_some(3),
                });
            }
            plans
                .iter()
                .enumerate()
                .map(|(si, plan)| {
                    let uid = format!("{UID_ROOT}.{code}.{}.{}", pi + 1, si + 1);
                    let s = seed::derive(seed_v, &format!("{}:series", set.name), (pi * 64 + si) as u64);
                    make_series(set, &patient_id, &uid, plan, s)
                })
                .collect()
        })
        .collect();
    Ok(per_patient.into_iter().flatten().collect())
}

/// One line of the generator's truth manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub collection: String,
    pub patient_id: String,
    pub series_uid: String,
    pub truth: String,
    pub description: String,
    pub instances: usize,
    pub is4d_drawn: bool,
    pub nonconforming: bool,
}

impl SyntheticSeries {
    pub fn truth_row(&self) -> TruthRow {
        TruthRow {
            collection: self.collection.clone(),
            patient_id: self.record.patient_id.clone(),
            series_uid: self.record.series_instance_uid.clone(),
            truth: self.truth.as_string(),
            description: self.record.series_description.clone(),
            instances: self.record.instances.len(),
            is4d_drawn: self.is4d_drawn,
            nonconforming: self.nonconforming,
        }
    }
}

/// Writes `root/<collection>/<patient>/<series uid>/<nnnn>.dcm`.
pub fn write_dataset(series: &[SyntheticSeries], root: &Path) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for s in series {
        let dir = root
            .join(&s.collection)
            .join(&s.record.patient_id)
            .join(&s.record.series_instance_uid);
        fs::create_dir_all(&dir)?;
        for (i, inst) in s.record.instances.iter().enumerate() {
            let path = dir.join(format!("{:04}.dcm", i + 1));
            fs::write(&path, serialize_part10(inst))?;
            written.push(path);
        }
    }
    Ok(written)
}
