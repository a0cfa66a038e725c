use serde::{Deserialize, Serialize};

use super::tags::{self, DataElement, ElementValue, Tag, Vr};
use super::DicomError;

/// The dictionary attributes of one single-frame instance.
///
/// Optional numeric attributes stay `None` when absent or empty; zero is a
/// legitimate value and is never used as a stand-in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub sop_instance_uid: String,
    pub series_instance_uid: String,
    pub patient_id: String,
    pub series_description: String,
    pub repetition_time: Option<f64>,
    pub echo_time: Option<f64>,
    pub flip_angle: Option<f64>,
    pub scanning_sequence: Vec<String>,
    pub contrast_bolus_agent: Option<String>,
    pub image_position_patient: Option<[f64; 3]>,
    pub image_orientation_patient: Option<[f64; 6]>,
    pub rows: Option<u16>,
    pub cols: Option<u16>,
    pub pixel_spacing: Option<[f64; 2]>,
    pub temporal_position: Option<i64>,
    /// Raw little-endian 16-bit grayscale words.
    #[serde(skip)]
    pub pixel_payload: Option<Vec<u8>>,
}

impl InstanceMetadata {
    /// Builds an instance from decoded dictionary elements. Element order does
    /// not matter; the last occurrence of a repeated tag wins.
    pub fn from_elements(elements: &[DataElement]) -> Result<InstanceMetadata, DicomError> {
        let mut out = InstanceMetadata::default();
        let mut have_series_uid = false;
        for el in elements {
            match el.tag {
                tags::SOP_INSTANCE_UID => out.sop_instance_uid = single_text(el),
                tags::SERIES_INSTANCE_UID => {
                    out.series_instance_uid = single_text(el);
                    have_series_uid = !out.series_instance_uid.is_empty();
                }
                tags::PATIENT_ID => out.patient_id = single_text(el),
                tags::SERIES_DESCRIPTION => out.series_description = single_text(el),
                tags::REPETITION_TIME => out.repetition_time = decimal(el)?,
                tags::ECHO_TIME => out.echo_time = decimal(el)?,
                tags::FLIP_ANGLE => out.flip_angle = decimal(el)?,
                tags::SCANNING_SEQUENCE => {
                    out.scanning_sequence = strings(el).iter().filter(|s| !s.is_empty()).cloned().collect()
                }
                tags::CONTRAST_BOLUS_AGENT => {
                    let agent = single_text(el);
                    out.contrast_bolus_agent = (!agent.is_empty()).then_some(agent);
                }
                tags::IMAGE_POSITION_PATIENT => out.image_position_patient = decimals(el)?,
                tags::IMAGE_ORIENTATION_PATIENT => out.image_orientation_patient = decimals(el)?,
                tags::PIXEL_SPACING => out.pixel_spacing = decimals(el)?,
                tags::ROWS => out.rows = unsigned16(el)?,
                tags::COLUMNS => out.cols = unsigned16(el)?,
                tags::TEMPORAL_POSITION_IDENTIFIER => out.temporal_position = integer(el)?,
                tags::PIXEL_DATA => {
                    out.pixel_payload = match &el.value {
                        ElementValue::Bytes(b) => Some(b.clone()),
                        ElementValue::Strings(_) => {
                            return Err(DicomError::InvalidValue {
                                tag: el.tag,
                                value: "pixel data is not binary".into(),
                            })
                        }
                    }
                }
                _ => {}
            }
        }
        if !have_series_uid {
            return Err(DicomError::MissingRequiredTag(tags::SERIES_INSTANCE_UID));
        }
        Ok(out)
    }

    /// Encodes the populated attributes as dictionary elements, sorted by tag.
    pub fn to_elements(&self) -> Vec<DataElement> {
        let mut out = Vec::new();
        let mut text = |tag: Tag, vr: Vr, values: Vec<String>| {
            out.push(DataElement {
                tag,
                vr,
                value: ElementValue::Strings(values),
            })
        };
        text(tags::SOP_INSTANCE_UID, Vr::UI, vec![self.sop_instance_uid.clone()]);
        if !self.series_description.is_empty() {
            text(tags::SERIES_DESCRIPTION, Vr::LO, vec![self.series_description.clone()]);
        }
        text(tags::PATIENT_ID, Vr::LO, vec![self.patient_id.clone()]);
        if let Some(agent) = &self.contrast_bolus_agent {
            text(tags::CONTRAST_BOLUS_AGENT, Vr::LO, vec![agent.clone()]);
        }
        if !self.scanning_sequence.is_empty() {
            text(tags::SCANNING_SEQUENCE, Vr::CS, self.scanning_sequence.clone());
        }
        for (tag, v) in [
            (tags::REPETITION_TIME, self.repetition_time),
            (tags::ECHO_TIME, self.echo_time),
            (tags::FLIP_ANGLE, self.flip_angle),
        ] {
            if let Some(v) = v {
                text(tag, Vr::DS, vec![format_decimal(v)]);
            }
        }
        text(
            tags::SERIES_INSTANCE_UID,
            Vr::UI,
            vec![self.series_instance_uid.clone()],
        );
        if let Some(p) = &self.image_position_patient {
            text(
                tags::IMAGE_POSITION_PATIENT,
                Vr::DS,
                p.iter().map(|v| format_decimal(*v)).collect(),
            );
        }
        if let Some(o) = &self.image_orientation_patient {
            text(
                tags::IMAGE_ORIENTATION_PATIENT,
                Vr::DS,
                o.iter().map(|v| format_decimal(*v)).collect(),
            );
        }
        if let Some(t) = self.temporal_position {
            text(tags::TEMPORAL_POSITION_IDENTIFIER, Vr::IS, vec![t.to_string()]);
        }
        if let Some(r) = self.rows {
            text(tags::ROWS, Vr::US, vec![r.to_string()]);
        }
        if let Some(c) = self.cols {
            text(tags::COLUMNS, Vr::US, vec![c.to_string()]);
        }
        if let Some(s) = &self.pixel_spacing {
            text(
                tags::PIXEL_SPACING,
                Vr::DS,
                s.iter().map(|v| format_decimal(*v)).collect(),
            );
        }
        if let Some(px) = &self.pixel_payload {
            out.push(DataElement {
                tag: tags::PIXEL_DATA,
                vr: Vr::OW,
                value: ElementValue::Bytes(px.clone()),
            });
        }
        out.sort_by_key(|e| e.tag);
        out
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_decimal(v: f64) -> String {
    let s = format!("{v}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn strings(el: &DataElement) -> &[String] {
    match &el.value {
        ElementValue::Strings(v) => v,
        ElementValue::Bytes(_) => &[],
    }
}

fn single_text(el: &DataElement) -> String {
    strings(el).join("\\")
}

fn parse_value<T: std::str::FromStr>(tag: Tag, s: &str) -> Result<T, DicomError> {
    s.trim().parse::<T>().map_err(|_| DicomError::InvalidValue {
        tag,
        value: s.to_string(),
    })
}

fn decimal(el: &DataElement) -> Result<Option<f64>, DicomError> {
    match strings(el).first() {
        Some(s) if !s.is_empty() => parse_value::<f64>(el.tag, s).map(Some),
        _ => Ok(None),
    }
}

/// Fixed-multiplicity decimal attribute; a wrong count is treated as absent.
fn decimals<const N: usize>(el: &DataElement) -> Result<Option<[f64; N]>, DicomError> {
    let values = strings(el);
    if values.len() != N || values.iter().any(|s| s.is_empty()) {
        return Ok(None);
    }
    let mut out = [0.0; N];
    for (slot, s) in out.iter_mut().zip(values) {
        *slot = parse_value::<f64>(el.tag, s)?;
    }
    Ok(Some(out))
}

fn integer(el: &DataElement) -> Result<Option<i64>, DicomError> {
    match strings(el).first() {
        Some(s) if !s.is_empty() => parse_value::<i64>(el.tag, s).map(Some),
        _ => Ok(None),
    }
}

fn unsigned16(el: &DataElement) -> Result<Option<u16>, DicomError> {
    match strings(el).first() {
        Some(s) if !s.is_empty() => parse_value::<u16>(el.tag, s).map(Some),
        _ => Ok(None),
    }
}
