//! Ground-truth assignment from SeriesDescription through an ordered regex
//! rule table, after geometry-based exclusion.

use std::collections::HashMap;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::SeqClass;
use crate::dicom::SeriesRecord;
use crate::geometry::{OrientationClass, SeriesGeometry};

/// Rule table shipped with the tool.
pub const DEFAULT_RULES: &str = include_str!("../rules/default_rules.csv");

pub const ORIENTATION_REASON: &str = "orientation";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("line {line}: bad pattern: {message}")]
    BadPattern { line: usize, message: String },
    #[error("line {line}: duplicate priority {priority}")]
    DuplicatePriority { line: usize, priority: i64 },
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleTarget {
    Class(SeqClass),
    Excluded,
}

#[derive(Debug, Clone)]
pub struct LabelRule {
    pub pattern: Regex,
    pub target: RuleTarget,
    pub priority: i64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Class(SeqClass),
    Excluded(String),
    Unmatched,
}

/// Parses a rule table: `priority,target,pattern` per line, `#` comments and
/// blank lines ignored. Rules come back sorted by priority.
pub fn load_rules(text: &str) -> Result<Vec<LabelRule>, LabelError> {
    let mut rules: Vec<LabelRule> = Vec::new();
    let mut seen: HashMap<i64, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.splitn(3, ',');
        let (Some(priority), Some(target), Some(pattern)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(LabelError::BadLine {
                line,
                message: "expected priority,target,pattern".into(),
            });
        };
        let priority: i64 = priority.trim().parse().map_err(|_| LabelError::BadLine {
            line,
            message: format!("bad priority {priority:?}"),
        })?;
        let (target, note) = parse_target(target.trim()).ok_or_else(|| LabelError::BadLine {
            line,
            message: format!("unknown target {target:?}"),
        })?;
        let pattern = RegexBuilder::new(pattern.trim())
            .case_insensitive(true)
            .build()
            .map_err(|e| LabelError::BadPattern {
                line,
                message: e.to_string(),
            })?;
        if seen.insert(priority, line).is_some() {
            return Err(LabelError::DuplicatePriority { line, priority });
        }
        rules.push(LabelRule {
            pattern,
            target,
            priority,
            note,
        });
    }
    rules.sort_by_key(|r| r.priority);
    Ok(rules)
}

fn parse_target(s: &str) -> Option<(RuleTarget, String)> {
    let (head, note) = match s.split_once(':') {
        Some((h, n)) => (h.trim(), n.trim().to_string()),
        None => (s, String::new()),
    };
    if head.eq_ignore_ascii_case("excluded") {
        let note = if note.is_empty() { "excluded".to_string() } else { note };
        return Some((RuleTarget::Excluded, note));
    }
    head.parse::<SeqClass>().ok().map(|c| (RuleTarget::Class(c), note))
}

pub fn default_rules() -> Vec<LabelRule> {
    load_rules(DEFAULT_RULES).expect("shipped rule table is valid")
}

/// First rule (by priority) whose pattern matches the description.
pub fn matching_rule<'r>(description: &str, rules: &'r [LabelRule]) -> Option<&'r LabelRule> {
    rules.iter().find(|r| r.pattern.is_match(description))
}

fn assign(description: &str, orientation: OrientationClass, rules: &[LabelRule]) -> (Label, Option<i64>) {
    if matches!(orientation, OrientationClass::Sagittal | OrientationClass::Coronal) {
        return (Label::Excluded(ORIENTATION_REASON.into()), None);
    }
    if description.trim().is_empty() {
        return (Label::Unmatched, None);
    }
    match matching_rule(description, rules) {
        Some(rule) => {
            let label = match rule.target {
                RuleTarget::Class(c) => Label::Class(c),
                RuleTarget::Excluded => Label::Excluded(rule.note.clone()),
            };
            (label, Some(rule.priority))
        }
        None => (Label::Unmatched, None),
    }
}

/// Geometry exclusion first, then the first matching rule. Empty descriptions
/// are never guessed.
pub fn assign_label(description: &str, geometry: &SeriesGeometry, rules: &[LabelRule]) -> Label {
    assign(description, geometry.orientation_class, rules).0
}

/// Anything that can be curated: a series UID, its description and orientation.
pub trait CurationInput {
    fn series_uid(&self) -> &str;
    fn description(&self) -> &str;
    fn orientation(&self) -> OrientationClass;
}

impl CurationInput for (SeriesRecord, SeriesGeometry) {
    fn series_uid(&self) -> &str {
        &self.0.series_instance_uid
    }
    fn description(&self) -> &str {
        &self.0.series_description
    }
    fn orientation(&self) -> OrientationClass {
        self.1.orientation_class
    }
}

impl<T: CurationInput> CurationInput for &T {
    fn series_uid(&self) -> &str {
        (*self).series_uid()
    }
    fn description(&self) -> &str {
        (*self).description()
    }
    fn orientation(&self) -> OrientationClass {
        (*self).orientation()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSeries {
    pub series_uid: String,
    pub class: SeqClass,
    pub rule_priority: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedSeries {
    pub series_uid: String,
    pub reason: String,
    pub rule_priority: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationResult {
    pub labeled: Vec<LabeledSeries>,
    pub excluded: Vec<ExcludedSeries>,
    pub unmatched: Vec<String>,
    /// `|labeled| / total`, 0 for empty input.
    pub coverage_fraction: f64,
}

impl CurationResult {
    pub fn total(&self) -> usize {
        self.labeled.len() + self.excluded.len() + self.unmatched.len()
    }

    pub fn class_of(&self, uid: &str) -> Option<SeqClass> {
        self.labeled.iter().find(|l| l.series_uid == uid).map(|l| l.class)
    }

    /// One row per series, sorted by UID.
    pub fn report_rows(&self) -> Vec<CurationRow> {
        let mut rows: Vec<CurationRow> = self
            .labeled
            .iter()
            .map(|l| CurationRow {
                series_uid: l.series_uid.clone(),
                disposition: "labeled".into(),
                value: l.class.to_string(),
                rule_priority: Some(l.rule_priority),
            })
            .chain(self.excluded.iter().map(|e| CurationRow {
                series_uid: e.series_uid.clone(),
                disposition: "excluded".into(),
                value: e.reason.clone(),
                rule_priority: e.rule_priority,
            }))
            .chain(self.unmatched.iter().map(|u| CurationRow {
                series_uid: u.clone(),
                disposition: "unmatched".into(),
                value: String::new(),
                rule_priority: None,
            }))
            .collect();
        rows.sort_by(|a, b| a.series_uid.cmp(&b.series_uid));
        rows
    }
}

/// Row of the curation report CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationRow {
    pub series_uid: String,
    pub disposition: String,
    pub value: String,
    pub rule_priority: Option<i64>,
}

pub const CURATION_HEADER: &[&str] = &["series_uid", "disposition", "value", "rule_priority"];

/// Labels every series. Output lists are sorted by UID.
pub fn curate<T: CurationInput>(series: &[T], rules: &[LabelRule]) -> CurationResult {
    let mut order: Vec<&T> = series.iter().collect();
    order.sort_by(|a, b| a.series_uid().cmp(b.series_uid()));
    let mut labeled = Vec::new();
    let mut excluded = Vec::new();
    let mut unmatched = Vec::new();
    for s in order {
        let uid = s.series_uid().to_string();
        match assign(s.description(), s.orientation(), rules) {
            (Label::Class(class), Some(p)) => labeled.push(LabeledSeries {
                series_uid: uid,
                class,
                rule_priority: p,
            }),
            (Label::Class(_), None) => unreachable!("class labels always come from a rule"),
            (Label::Excluded(reason), p) => excluded.push(ExcludedSeries {
                series_uid: uid,
                reason,
                rule_priority: p,
            }),
            (Label::Unmatched, _) => unmatched.push(uid),
        }
    }
    let total = labeled.len() + excluded.len() + unmatched.len();
    let coverage_fraction = if total == 0 {
        0.0
    } else {
        labeled.len() as f64 / total as f64
    };
    CurationResult {
        labeled,
        excluded,
        unmatched,
        coverage_fraction,
    }
}
