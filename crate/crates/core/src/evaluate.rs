//! Confusion matrices, per-class F-beta and report rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{ensemble_predict, FoldEnsemble, HarnessError, ModelInput};
use crate::{SeqClass, NUM_CLASSES};

pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("label {0} outside the class range")]
    BadLabel(usize),
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("{truths} truths for {inputs} inputs")]
    Misaligned { truths: usize, inputs: usize },
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Rows are truth, columns are prediction.
pub type Confusion = [[u64; NUM_CLASSES]; NUM_CLASSES];

pub fn confusion_matrix(pairs: &[(usize, usize)]) -> Result<Confusion, EvalError> {
    let mut m = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for &(t, p) in pairs {
        if t >= NUM_CLASSES {
            return Err(EvalError::BadLabel(t));
        }
        if p >= NUM_CLASSES {
            return Err(EvalError::BadLabel(p));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Precision, recall and F-beta for `class`. Any zero denominator along the
/// way makes that quantity (and F) 0.
pub fn class_metrics(conf: &Confusion, class: usize, beta: f64) -> ClassMetrics {
    let tp = conf[class][class];
    let predicted: u64 = (0..NUM_CLASSES).map(|t| conf[t][class]).sum();
    let actual: u64 = conf[class].iter().sum();
    let p = ratio(tp, predicted);
    let r = ratio(tp, actual);
    let b2 = beta * beta;
    let f = match (p, r) {
        (Some(p), Some(r)) if b2 * p + r > 0.0 => (1.0 + b2) * p * r / (b2 * p + r),
        _ => 0.0,
    };
    ClassMetrics {
        precision: p.unwrap_or(0.0),
        recall: r.unwrap_or(0.0),
        f_beta: f,
        support: actual,
    }
}

pub fn f_beta(conf: &Confusion, class: usize, beta: f64) -> f64 {
    class_metrics(conf, class, beta).f_beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub split: String,
    pub beta: f64,
    pub confusion: Confusion,
    pub per_class: Vec<ClassMetrics>,
    /// Mean over ensemble members of each member's own F-beta, when known.
    pub fold_mean_f_beta: Option<Vec<f64>>,
}

impl EvaluationReport {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn f_beta(&self, class: SeqClass) -> f64 {
        self.per_class[class.index()].f_beta
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        SeqClass::ALL
            .iter()
            .map(|&c| {
                let m = &self.per_class[c.index()];
                ReportRow {
                    method: self.method.clone(),
                    split: self.split.clone(),
                    class: c.as_str().to_string(),
                    f_beta: m.f_beta,
                    precision: m.precision,
                    recall: m.recall,
                    support: m.support,
                    fold_mean_f_beta: self.fold_mean_f_beta.as_ref().map(|v| v[c.index()]),
                }
            })
            .collect()
    }

    pub fn confusion_rows(&self) -> Vec<ConfusionRow> {
        SeqClass::ALL
            .iter()
            .map(|&t| {
                let r = &self.confusion[t.index()];
                ConfusionRow {
                    method: self.method.clone(),
                    split: self.split.clone(),
                    truth: t.as_str().to_string(),
                    pred_t2w: r[0],
                    pred_dwi: r[1],
                    pred_adc: r[2],
                    pred_dce: r[3],
                }
            })
            .collect()
    }
}

/// One line of the per-class report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub split: String,
    pub class: String,
    pub f_beta: f64,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
    pub fold_mean_f_beta: Option<f64>,
}

pub const REPORT_HEADER: &[&str] = &[
    "method",
    "split",
    "class",
    "f_beta",
    "precision",
    "recall",
    "support",
    "fold_mean_f_beta",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub method: String,
    pub split: String,
    pub truth: String,
    pub pred_t2w: u64,
    pub pred_dwi: u64,
    pub pred_adc: u64,
    pub pred_dce: u64,
}

pub const CONFUSION_HEADER: &[&str] = &[
    "method", "split", "truth", "pred_t2w", "pred_dwi", "pred_adc", "pred_dce",
];

fn check_beta(beta: f64) -> Result<(), EvalError> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(EvalError::BadBeta(beta))
    }
}

/// Report from (truth, prediction) pairs.
pub fn report_from_pairs(
    method: &str,
    split: &str,
    pairs: &[(usize, usize)],
    beta: f64,
) -> Result<EvaluationReport, EvalError> {
    check_beta(beta)?;
    let confusion = confusion_matrix(pairs)?;
    Ok(EvaluationReport {
        method: method.to_string(),
        split: split.to_string(),
        beta,
        per_class: (0..NUM_CLASSES).map(|c| class_metrics(&confusion, c, beta)).collect(),
        confusion,
        fold_mean_f_beta: None,
    })
}

/// Runs the ensemble over `inputs` and scores the averaged prediction; each
/// member is also scored alone and the per-class mean recorded.
pub fn report(
    truths: &[usize],
    inputs: &[ModelInput<'_>],
    ensemble: &FoldEnsemble,
    split: &str,
    beta: f64,
) -> Result<EvaluationReport, EvalError> {
    if truths.len() != inputs.len() {
        return Err(EvalError::Misaligned {
            truths: truths.len(),
            inputs: inputs.len(),
        });
    }
    let k = ensemble.members.len();
    let mut ensemble_pairs = Vec::with_capacity(truths.len());
    let mut member_pairs = vec![Vec::with_capacity(truths.len()); k];
    for (&t, input) in truths.iter().zip(inputs) {
        let per = ensemble.member_probabilities(*input)?;
        for (i, p) in per.iter().enumerate() {
            member_pairs[i].push((t, crate::class::argmax(p)));
        }
        let (_, class) = crate::harness::mean_probabilities(&per);
        ensemble_pairs.push((t, class));
    }
    let mut rep = report_from_pairs(ensemble.method.as_str(), split, &ensemble_pairs, beta)?;
    if k > 0 {
        let mut mean = vec![0.0; NUM_CLASSES];
        for pairs in &member_pairs {
            let conf = confusion_matrix(pairs)?;
            for (c, m) in mean.iter_mut().enumerate() {
                *m += f_beta(&conf, c, beta) / k as f64;
            }
        }
        rep.fold_mean_f_beta = Some(mean);
    }
    Ok(rep)
}

/// Single-input convenience wrapper over [`ensemble_predict`].
pub fn predict_class(ensemble: &FoldEnsemble, input: ModelInput<'_>) -> Result<usize, EvalError> {
    Ok(ensemble_predict(ensemble, input)?.1)
}
