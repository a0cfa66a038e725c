//! Patient-wise splitting, k-fold training with early stopping, and
//! probability-averaging fold ensembles.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::argmax;
use crate::features::{fit_scaler, vectorize, FeatureError, FeatureVector, RawMetadata, ScalingParams};
use crate::forest::{fit_forest, predict_forest, ForestConfig, ForestError, RandomForest};
use crate::imaging::ImageSlice;
use crate::nn::{
    load_model, loss_scce, mean_loss, save_model, train_epoch, AdamConfig, AdamState, ArchConfig, Example,
    FusionCnnModel, Mode, NnError,
};
use crate::provenance::Provenance;
use crate::{seed, NUM_CLASSES};

pub const SPLIT_PLAN_VERSION: u32 = 1;
pub const ENSEMBLE_VERSION: u32 = 1;
pub const ENSEMBLE_MANIFEST: &str = "ensemble.json";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("split fractions must be nonnegative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("{found} patients in the pool, need at least {needed}")]
    TooFewPatients { needed: usize, found: usize },
    #[error("input does not match a {0} ensemble")]
    ModeMismatch(Method),
    #[error("series {0} has no image")]
    MissingImage(String),
    #[error("training set for fold {0} has a single class or no examples")]
    DegenerateFold(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Io(String),
    #[error("ensemble format: {0}")]
    Format(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Metadata,
    Images,
    Fusion,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Metadata, Method::Images, Method::Fusion];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Metadata => "metadata",
            Method::Images => "images",
            Method::Fusion => "fusion",
        }
    }

    pub fn needs_image(self) -> bool {
        self != Method::Metadata
    }

    pub fn needs_metadata(self) -> bool {
        self != Method::Images
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "metadata" => Ok(Method::Metadata),
            "images" | "image" => Ok(Method::Images),
            "fusion" => Ok(Method::Fusion),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Splitting

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectionSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub version: u32,
    pub seed: u64,
    pub fractions: [f64; 3],
    pub collections: BTreeMap<String, CollectionSplit>,
}

/// Whole-unit sizes by largest remainder. Leftover units go to the largest
/// fractional parts; equal remainders are served in train, val, test order.
pub fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    // Remainders compared after rounding off float noise (0.6·7 = 4.199999…).
    let rem = |i: usize| ((exact[i] - exact[i].floor()) * 1e9).round() as i64;
    order.sort_by(|&a, &b| rem(b).cmp(&rem(a)).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Splits patients per collection. `patients` pairs a patient id with its
/// collection; duplicates are collapsed, and a patient listed under several
/// collections is kept under the lexicographically first.
pub fn split_patients<'a, I>(patients: I, fractions: [f64; 3], seed: u64) -> Result<SplitPlan, HarnessError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(HarnessError::BadFractions(fractions));
    }
    let mut home: BTreeMap<&str, &str> = BTreeMap::new();
    for (p, c) in patients {
        home.entry(p).and_modify(|e| *e = (*e).min(c)).or_insert(c);
    }
    let mut by_collection: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (p, c) in home {
        by_collection.entry(c).or_default().push(p.to_string());
    }
    let mut collections = BTreeMap::new();
    for (c, mut ids) in by_collection {
        let mut rng = seed::rng(seed, &format!("split:{c}"), 0);
        ids.shuffle(&mut rng);
        let [a, b, _] = largest_remainder(ids.len(), fractions);
        let mut train = ids[..a].to_vec();
        let mut val = ids[a..a + b].to_vec();
        let mut test = ids[a + b..].to_vec();
        train.sort();
        val.sort();
        test.sort();
        collections.insert(c.to_string(), CollectionSplit { train, val, test });
    }
    Ok(SplitPlan {
        version: SPLIT_PLAN_VERSION,
        seed,
        fractions,
        collections,
    })
}

impl SplitPlan {
    pub fn assignment(&self, patient: &str) -> Option<SplitName> {
        self.collections.values().find_map(|c| {
            if c.train.iter().any(|p| p == patient) {
                Some(SplitName::Train)
            } else if c.val.iter().any(|p| p == patient) {
                Some(SplitName::Val)
            } else if c.test.iter().any(|p| p == patient) {
                Some(SplitName::Test)
            } else {
                None
            }
        })
    }

    pub fn patients(&self, split: SplitName) -> BTreeSet<&str> {
        self.collections
            .values()
            .flat_map(|c| match split {
                SplitName::Train => &c.train,
                SplitName::Val => &c.val,
                SplitName::Test => &c.test,
            })
            .map(String::as_str)
            .collect()
    }

    /// True when no patient appears in two splits (or twice in one).
    pub fn is_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.collections
            .values()
            .flat_map(|c| c.train.iter().chain(&c.val).chain(&c.test))
            .all(|p| seen.insert(p))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<SplitPlan, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Format(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Training

/// One labeled series as seen by the trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub patient_id: String,
    pub series_uid: String,
    pub label: usize,
    pub raw: RawMetadata,
    pub image: Option<ImageSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub max_epochs: usize,
    pub min_delta: f64,
    pub patience: usize,
    pub batch_size: usize,
    pub image_size: usize,
    pub adam: AdamConfig,
    pub forest: ForestConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 4,
            max_epochs: 10,
            min_delta: 1e-4,
            patience: 2,
            batch_size: crate::nn::DEFAULT_BATCH_SIZE,
            image_size: crate::imaging::MODEL_IMAGE_SIZE,
            adam: AdamConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without an improvement of at
/// least `min_delta` over the best loss so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub min_delta: f64,
    pub patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(min_delta: f64, patience: usize) -> EarlyStopping {
        EarlyStopping {
            min_delta,
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if self.best_epoch.is_none() || loss <= self.best - self.min_delta {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub method: Method,
    pub fold: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Member {
    Cnn(FusionCnnModel),
    Forest {
        forest: RandomForest,
        scaler: ScalingParams,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldEnsemble {
    pub method: Method,
    pub seed: u64,
    pub members: Vec<Member>,
    /// Best validation loss per fold.
    pub val_losses: Vec<f64>,
    /// Validation patients per fold.
    pub folds: Vec<Vec<String>>,
    pub log: Vec<EpochLog>,
}

/// Inputs for one prediction; exactly the parts the method uses must be set.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub raw: Option<&'a RawMetadata>,
    pub image: Option<&'a ImageSlice>,
}

impl Sample {
    pub fn input_for(&self, method: Method) -> ModelInput<'_> {
        ModelInput {
            raw: method.needs_metadata().then_some(&self.raw),
            image: if method.needs_image() {
                self.image.as_ref()
            } else {
                None
            },
        }
    }
}

/// Unique patients, sorted, shuffled by seed, dealt round-robin into `k` folds.
pub fn assign_folds(patients: &[&str], k: usize, seed: u64) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut unique: Vec<&str> = patients.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if k == 0 || unique.len() < k {
        return Err(HarnessError::TooFewPatients {
            needed: k.max(1),
            found: unique.len(),
        });
    }
    unique.shuffle(&mut seed::rng(seed, "folds", 0));
    let mut folds = vec![Vec::new(); k];
    for (i, p) in unique.into_iter().enumerate() {
        folds[i % k].push(p.to_string());
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

struct FoldResult {
    member: Member,
    val_loss: f64,
    log: Vec<EpochLog>,
}

fn forest_xy(samples: &[&Sample], scaler: &ScalingParams) -> (Vec<[f64; crate::features::FEATURE_LEN]>, Vec<usize>) {
    samples.iter().map(|s| (vectorize(&s.raw, scaler).0, s.label)).unzip()
}

fn train_forest_fold(
    fold: usize,
    train: &[&Sample],
    val: &[&Sample],
    config: &TrainConfig,
    seed: u64,
) -> Result<FoldResult, HarnessError> {
    let raws: Vec<RawMetadata> = train.iter().map(|s| s.raw.clone()).collect();
    let scaler = fit_scaler(&raws)?;
    let (x, y) = forest_xy(train, &scaler);
    let forest = fit_forest(&x, &y, &config.forest, seed::derive(seed, "fold-forest", fold as u64))?;
    let loss = |set: &[&Sample]| -> Result<f64, HarnessError> {
        if set.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for s in set {
            total += loss_scce(&predict_forest(&forest, &vectorize(&s.raw, &scaler).0), s.label)?;
        }
        Ok(total / set.len() as f64)
    };
    let (train_loss, val_loss) = (loss(train)?, loss(val)?);
    Ok(FoldResult {
        member: Member::Forest { forest, scaler },
        val_loss,
        log: vec![EpochLog {
            method: Method::Metadata,
            fold,
            epoch: 1,
            train_loss,
            val_loss,
        }],
    })
}

fn examples<'a>(set: &[&'a Sample], fv: &'a [Option<FeatureVector>]) -> Result<Vec<Example<'a>>, HarnessError> {
    set.iter()
        .zip(fv)
        .map(|(s, v)| {
            let image = s
                .image
                .as_ref()
                .ok_or_else(|| HarnessError::MissingImage(s.series_uid.clone()))?;
            Ok(Example {
                image,
                metadata: v.as_ref(),
                label: s.label,
            })
        })
        .collect()
}

fn train_cnn_fold(
    method: Method,
    fold: usize,
    train: &[&Sample],
    val: &[&Sample],
    config: &TrainConfig,
    seed: u64,
) -> Result<FoldResult, HarnessError> {
    let mode = if method == Method::Fusion {
        Mode::Fusion
    } else {
        Mode::ImageOnly
    };
    let scaler = if mode == Mode::Fusion {
        let raws: Vec<RawMetadata> = train.iter().map(|s| s.raw.clone()).collect();
        Some(fit_scaler(&raws)?)
    } else {
        None
    };
    let vectors = |set: &[&Sample]| -> Vec<Option<FeatureVector>> {
        set.iter()
            .map(|s| scaler.as_ref().map(|sc| vectorize(&s.raw, sc)))
            .collect()
    };
    let (train_fv, val_fv) = (vectors(train), vectors(val));
    let train_ex = examples(train, &train_fv)?;
    let val_ex = examples(val, &val_fv)?;

    let arch = ArchConfig {
        input_size: config.image_size,
        ..ArchConfig::standard(mode)
    };
    let mut model = FusionCnnModel::new(arch, seed::derive(seed, "fold-cnn", fold as u64))?;
    model.scaler = scaler.clone();
    let mut adam = AdamState::new(model.params(), config.adam);
    let mut rng = seed::rng(seed, "fold-shuffle", fold as u64);
    let mut stopper = EarlyStopping::new(config.min_delta, config.patience);
    let mut best = model.clone();
    let mut log = Vec::new();
    for epoch in 1..=config.max_epochs.max(1) {
        let train_loss = train_epoch(&mut model, &mut adam, &train_ex, config.batch_size, &mut rng)?;
        let val_loss = if val_ex.is_empty() {
            train_loss
        } else {
            mean_loss(&model, &val_ex)?
        };
        log.push(EpochLog {
            method,
            fold,
            epoch,
            train_loss,
            val_loss,
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    best.round_to_f32();
    Ok(FoldResult {
        member: Member::Cnn(best),
        val_loss: stopper.best_loss(),
        log,
    })
}

/// Trains one member per fold, folds in parallel. Fold `i` validates on the
/// patients of fold `i` and trains on the rest.
pub fn kfold_train(
    pool: &[Sample],
    method: Method,
    config: &TrainConfig,
    seed: u64,
) -> Result<FoldEnsemble, HarnessError> {
    let patients: Vec<&str> = pool.iter().map(|s| s.patient_id.as_str()).collect();
    let folds = assign_folds(&patients, config.k, seed)?;
    if let Some(s) = pool.iter().find(|s| s.label >= NUM_CLASSES) {
        return Err(HarnessError::Format(format!("label {} out of range", s.label)));
    }
    let results: Vec<FoldResult> = (0..config.k)
        .into_par_iter()
        .map(|i| {
            let val_set: BTreeSet<&str> = folds[i].iter().map(String::as_str).collect();
            let (val, train): (Vec<&Sample>, Vec<&Sample>) =
                pool.iter().partition(|s| val_set.contains(s.patient_id.as_str()));
            if train.is_empty() || train.iter().all(|s| s.label == train[0].label) {
                return Err(HarnessError::DegenerateFold(i));
            }
            match method {
                Method::Metadata => train_forest_fold(i, &train, &val, config, seed),
                _ => train_cnn_fold(method, i, &train, &val, config, seed),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut ensemble = FoldEnsemble {
        method,
        seed,
        members: Vec::with_capacity(config.k),
        val_losses: Vec::with_capacity(config.k),
        folds,
        log: Vec::new(),
    };
    for r in results {
        ensemble.members.push(r.member);
        ensemble.val_losses.push(r.val_loss);
        ensemble.log.extend(r.log);
    }
    Ok(ensemble)
}

// ---------------------------------------------------------------------------
// Prediction

/// Arithmetic mean of member probability vectors and its argmax (ties to the
/// lowest class index).
pub fn mean_probabilities(members: &[Vec<f64>]) -> (Vec<f64>, usize) {
    let width = members.first().map_or(NUM_CLASSES, Vec::len);
    let mut mean = vec![0.0; width];
    for m in members {
        for (a, v) in mean.iter_mut().zip(m) {
            *a += v;
        }
    }
    if !members.is_empty() {
        let k = members.len() as f64;
        mean.iter_mut().for_each(|a| *a /= k);
    }
    let class = argmax(&mean);
    (mean, class)
}

impl Member {
    pub fn predict(&self, input: ModelInput<'_>) -> Result<Vec<f64>, HarnessError> {
        match self {
            Member::Forest { forest, scaler } => {
                let raw = input.raw.ok_or(HarnessError::ModeMismatch(Method::Metadata))?;
                Ok(predict_forest(forest, &vectorize(raw, scaler).0))
            }
            Member::Cnn(model) => {
                let image = input.image.ok_or(HarnessError::MissingImage(String::new()))?;
                let fv = match (&model.scaler, input.raw) {
                    (Some(sc), Some(raw)) => Some(vectorize(raw, sc)),
                    _ => None,
                };
                Ok(model.predict(image, fv.as_ref())?)
            }
        }
    }
}

impl FoldEnsemble {
    pub fn mode_matches(&self, input: &ModelInput<'_>) -> bool {
        input.raw.is_some() == self.method.needs_metadata() && input.image.is_some() == self.method.needs_image()
    }

    /// Per-member probabilities, in member order.
    pub fn member_probabilities(&self, input: ModelInput<'_>) -> Result<Vec<Vec<f64>>, HarnessError> {
        if !self.mode_matches(&input) {
            return Err(HarnessError::ModeMismatch(self.method));
        }
        self.members.iter().map(|m| m.predict(input)).collect()
    }
}

pub fn ensemble_predict(ensemble: &FoldEnsemble, input: ModelInput<'_>) -> Result<(Vec<f64>, usize), HarnessError> {
    Ok(mean_probabilities(&ensemble.member_probabilities(input)?))
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub version: u32,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub member_files: Vec<String>,
    pub val_losses: Vec<f64>,
    pub folds: Vec<Vec<String>>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ForestMemberFile {
    provenance: Option<Provenance>,
    scaler: ScalingParams,
    forest: RandomForest,
}

/// Writes member files and `ensemble.json` into `dir`.
pub fn save_ensemble(
    ensemble: &FoldEnsemble,
    dir: &Path,
    provenance: Option<&Provenance>,
) -> Result<EnsembleManifest, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut member_files = Vec::new();
    for (i, m) in ensemble.members.iter().enumerate() {
        let name = match m {
            Member::Cnn(model) => {
                let name = format!("fold{i}.mrsqcnn");
                fs::write(dir.join(&name), save_model(model, provenance))?;
                name
            }
            Member::Forest { forest, scaler } => {
                let name = format!("fold{i}.forest.json");
                let file = ForestMemberFile {
                    provenance: provenance.cloned(),
                    scaler: scaler.clone(),
                    forest: forest.clone(),
                };
                fs::write(
                    dir.join(&name),
                    serde_json::to_string(&file).expect("forest serializes"),
                )?;
                name
            }
        };
        member_files.push(name);
    }
    let manifest = EnsembleManifest {
        version: ENSEMBLE_VERSION,
        method: ensemble.method,
        k: ensemble.members.len(),
        seed: ensemble.seed,
        member_files,
        val_losses: ensemble.val_losses.clone(),
        folds: ensemble.folds.clone(),
        provenance: provenance.cloned(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(ENSEMBLE_MANIFEST), text + "\n")?;
    Ok(manifest)
}

pub fn load_ensemble(dir: &Path) -> Result<FoldEnsemble, HarnessError> {
    let text = fs::read_to_string(dir.join(ENSEMBLE_MANIFEST))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text).map_err(|e| HarnessError::Format(e.to_string()))?;
    if manifest.version != ENSEMBLE_VERSION {
        return Err(HarnessError::Format(format!(
            "unsupported ensemble version {}",
            manifest.version
        )));
    }
    if manifest.member_files.is_empty() || manifest.member_files.len() != manifest.k {
        return Err(HarnessError::Format("member count disagrees with k".into()));
    }
    let mut members = Vec::new();
    for name in &manifest.member_files {
        if name.contains('/') || name.contains('\\') || name.starts_with('.') {
            return Err(HarnessError::Format(format!(
                "member file {name:?} outside the ensemble directory"
            )));
        }
        let path = dir.join(name);
        let member = if manifest.method == Method::Metadata {
            let file: ForestMemberFile =
                serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| HarnessError::Format(e.to_string()))?;
            file.scaler.validate()?;
            // Re-validate the tree structure.
            let forest = RandomForest::from_json(&file.forest.to_json())?;
            Member::Forest {
                forest,
                scaler: file.scaler,
            }
        } else {
            let (model, _) = load_model(&fs::read(&path)?)?;
            let expected = if manifest.method == Method::Fusion {
                Mode::Fusion
            } else {
                Mode::ImageOnly
            };
            if model.mode() != expected || (expected == Mode::Fusion) != model.scaler.is_some() {
                return Err(HarnessError::Format(format!(
                    "{name} does not match method {}",
                    manifest.method
                )));
            }
            Member::Cnn(model)
        };
        members.push(member);
    }
    Ok(FoldEnsemble {
        method: manifest.method,
        seed: manifest.seed,
        members,
        val_losses: manifest.val_losses,
        folds: manifest.folds,
        log: Vec::new(),
    })
}
