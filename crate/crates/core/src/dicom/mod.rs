//! DICOM ingest: Part-10 and JSON-model readers over a fixed tag dictionary,
//! series grouping and native pixel access.

mod instance;
mod json;
mod part10;
mod pixels;
mod series;
pub mod tags;

use thiserror::Error;

pub use instance::{format_decimal, InstanceMetadata};
pub use json::{parse_json_instance, read_json_elements, to_json_instance};
pub use part10::{
    parse_part10, read_part10_elements, TransferSyntax, EXPLICIT_VR_LITTLE_ENDIAN, IMPLICIT_VR_LITTLE_ENDIAN,
};
pub use pixels::read_pixels;
pub use series::{group_series, sort_instances, SeriesRecord};
pub use tags::{DataElement, ElementValue, Tag, Vr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DicomError {
    #[error("malformed DICOM file: {0}")]
    MalformedFile(String),
    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),
    #[error("malformed DICOM JSON: {0}")]
    MalformedJson(String),
    #[error("missing required tag {0}")]
    MissingRequiredTag(Tag),
    #[error("invalid value {value:?} for {tag}")]
    InvalidValue { tag: Tag, value: String },
    #[error("series {series} maps to patients {first:?} and {second:?}")]
    ConflictingPatient {
        series: String,
        first: String,
        second: String,
    },
    #[error("instance has no pixel data")]
    NoPixelData,
    #[error("pixel data holds {actual} words, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
}
