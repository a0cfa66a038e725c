//! Prostate MRI series classification (T2W / DWI / ADC / DCE) from DICOM
//! metadata, center-slice images, or both.
//!
//! The pipeline: [`dicom`] ingest → [`geometry`] → [`labeling`] for ground
//! truth → [`features`] and [`imaging`] for model inputs → [`forest`] or
//! [`nn`] models trained by [`harness`] → [`evaluate`]. [`synth`] generates
//! class-typed synthetic DICOM series for testing the whole chain.

// `!(a <= b)` is deliberate where NaN must take the negated branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod class;
pub mod dicom;
pub mod evaluate;
pub mod features;
pub mod forest;
pub mod geometry;
pub mod harness;
pub mod imaging;
pub mod labeling;
pub mod nn;
pub mod provenance;
pub mod seed;
pub mod synth;

pub use class::{SeqClass, NUM_CLASSES};
