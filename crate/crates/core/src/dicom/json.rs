//! DICOM JSON model: one instance per object, keyed by 8-hex-digit tags.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{Map, Value};

use super::instance::InstanceMetadata;
use super::tags::{self, DataElement, ElementValue, Tag, Vr};
use super::DicomError;

pub fn parse_json_instance(text: &str) -> Result<InstanceMetadata, DicomError> {
    let elements = read_json_elements(text)?;
    InstanceMetadata::from_elements(&elements)
}

pub fn read_json_elements(text: &str) -> Result<Vec<DataElement>, DicomError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DicomError::MalformedJson(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| DicomError::MalformedJson("top level is not an object".into()))?;
    let mut elements = Vec::new();
    for (key, attr) in obj {
        let tag = Tag::from_hex(key).ok_or_else(|| DicomError::MalformedJson(format!("bad tag key {key:?}")))?;
        let attr = attr
            .as_object()
            .ok_or_else(|| DicomError::MalformedJson(format!("attribute {key} is not an object")))?;
        let vr = attr
            .get("vr")
            .and_then(Value::as_str)
            .and_then(Vr::from_code)
            .ok_or_else(|| DicomError::MalformedJson(format!("attribute {key} lacks a valid vr")))?;
        if !tags::is_dictionary_tag(tag) {
            continue;
        }
        elements.push(decode_attribute(tag, vr, attr)?);
    }
    Ok(elements)
}

fn decode_attribute(tag: Tag, vr: Vr, attr: &Map<String, Value>) -> Result<DataElement, DicomError> {
    if let Some(b64) = attr.get("InlineBinary") {
        let b64 = b64
            .as_str()
            .ok_or_else(|| DicomError::MalformedJson(format!("{tag} InlineBinary is not a string")))?;
        let bytes = BASE64
            .decode(b64)
            .map_err(|e| DicomError::MalformedJson(format!("{tag} InlineBinary: {e}")))?;
        return Ok(DataElement {
            tag,
            vr,
            value: ElementValue::Bytes(bytes),
        });
    }
    let values = match attr.get("Value") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(tags::trim_padding(s).to_string()),
                Value::Number(n) => Ok(n.to_string()),
                Value::Null => Ok(String::new()),
                _ => Err(DicomError::MalformedJson(format!("{tag} has a non-scalar value"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(DicomError::MalformedJson(format!("{tag} Value is not an array"))),
    };
    Ok(DataElement {
        tag,
        vr,
        value: ElementValue::Strings(values),
    })
}

/// Writes the instance in the DICOM JSON model. Decimal values are emitted as
/// strings so they read back bit-exactly.
pub fn to_json_instance(instance: &InstanceMetadata) -> String {
    let mut obj = Map::new();
    for el in instance.to_elements() {
        let mut attr = Map::new();
        attr.insert("vr".into(), Value::String(el.vr.as_str().to_string()));
        match el.value {
            ElementValue::Strings(values) => {
                let values = values
                    .into_iter()
                    .map(|v| {
                        if el.vr == Vr::US {
                            v.parse::<u64>().map(Value::from).unwrap_or(Value::String(v))
                        } else {
                            Value::String(v)
                        }
                    })
                    .collect();
                attr.insert("Value".into(), Value::Array(values));
            }
            ElementValue::Bytes(bytes) => {
                attr.insert("InlineBinary".into(), Value::String(BASE64.encode(bytes)));
            }
        }
        obj.insert(el.tag.to_hex(), Value::Object(attr));
    }
    serde_json::to_string(&Value::Object(obj)).expect("JSON values always serialize")
}
