use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 4;

/// Prostate MRI sequence type. The discriminant is the model's class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeqClass {
    T2W = 0,
    DWI = 1,
    ADC = 2,
    DCE = 3,
}

impl SeqClass {
    pub const ALL: [SeqClass; NUM_CLASSES] = [SeqClass::T2W, SeqClass::DWI, SeqClass::ADC, SeqClass::DCE];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SeqClass> {
        SeqClass::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeqClass::T2W => "T2W",
            SeqClass::DWI => "DWI",
            SeqClass::ADC => "ADC",
            SeqClass::DCE => "DCE",
        }
    }
}

impl fmt::Display for SeqClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeqClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T2W" | "T2" | "T2AX" => Ok(SeqClass::T2W),
            "DWI" => Ok(SeqClass::DWI),
            "ADC" => Ok(SeqClass::ADC),
            "DCE" => Ok(SeqClass::DCE),
            other => Err(format!("unknown class {other:?}")),
        }
    }
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
