//! The fixed tag dictionary understood by the ingest path.
//!
//! Everything outside this table is skipped by length when reading.

use std::fmt;

/// A DICOM attribute tag, `(group,element)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl Tag {
    pub const fn group(self) -> u16 {
        self.0
    }

    pub const fn element(self) -> u16 {
        self.1
    }

    /// Parses the 8-hex-digit form used as keys by the DICOM JSON model.
    pub fn from_hex(s: &str) -> Option<Tag> {
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let group = u16::from_str_radix(&s[..4], 16).ok()?;
        let element = u16::from_str_radix(&s[4..], 16).ok()?;
        Some(Tag(group, element))
    }

    pub fn to_hex(self) -> String {
        format!("{:04X}{:04X}", self.0, self.1)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
pub const SOP_INSTANCE_UID: Tag = Tag(0x0008, 0x0018);
pub const SERIES_DESCRIPTION: Tag = Tag(0x0008, 0x103E);
pub const PATIENT_ID: Tag = Tag(0x0010, 0x0020);
pub const CONTRAST_BOLUS_AGENT: Tag = Tag(0x0018, 0x0010);
pub const SCANNING_SEQUENCE: Tag = Tag(0x0018, 0x0020);
pub const REPETITION_TIME: Tag = Tag(0x0018, 0x0080);
pub const ECHO_TIME: Tag = Tag(0x0018, 0x0081);
pub const FLIP_ANGLE: Tag = Tag(0x0018, 0x1314);
pub const SERIES_INSTANCE_UID: Tag = Tag(0x0020, 0x000E);
pub const IMAGE_POSITION_PATIENT: Tag = Tag(0x0020, 0x0032);
pub const IMAGE_ORIENTATION_PATIENT: Tag = Tag(0x0020, 0x0037);
pub const TEMPORAL_POSITION_IDENTIFIER: Tag = Tag(0x0020, 0x0100);
pub const ROWS: Tag = Tag(0x0028, 0x0010);
pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
pub const PIXEL_SPACING: Tag = Tag(0x0028, 0x0030);
pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

pub(crate) const ITEM: Tag = Tag(0xFFFE, 0xE000);
pub(crate) const ITEM_DELIMITATION: Tag = Tag(0xFFFE, 0xE00D);
pub(crate) const SEQUENCE_DELIMITATION: Tag = Tag(0xFFFE, 0xE0DD);

/// Two-letter value representation code.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Vr(pub [u8; 2]);

impl Vr {
    pub const CS: Vr = Vr(*b"CS");
    pub const DS: Vr = Vr(*b"DS");
    pub const IS: Vr = Vr(*b"IS");
    pub const LO: Vr = Vr(*b"LO");
    pub const OB: Vr = Vr(*b"OB");
    pub const OW: Vr = Vr(*b"OW");
    pub const SQ: Vr = Vr(*b"SQ");
    pub const TM: Vr = Vr(*b"TM");
    pub const UI: Vr = Vr(*b"UI");
    pub const UL: Vr = Vr(*b"UL");
    pub const UN: Vr = Vr(*b"UN");
    pub const US: Vr = Vr(*b"US");

    pub fn from_code(s: &str) -> Option<Vr> {
        let b = s.as_bytes();
        (b.len() == 2 && b.iter().all(u8::is_ascii_uppercase)).then(|| Vr([b[0], b[1]]))
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).unwrap_or("??")
    }

    /// VRs whose explicit-VR header carries two reserved bytes and a 32-bit length.
    pub fn has_long_length(self) -> bool {
        matches!(
            &self.0,
            b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR" | b"UT" | b"UV"
        )
    }

    pub fn is_binary(self) -> bool {
        matches!(&self.0, b"OB" | b"OW" | b"UN")
    }
}

impl fmt::Debug for Vr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// VR of a dictionary tag, used when the transfer syntax does not carry VRs.
pub fn dictionary_vr(tag: Tag) -> Option<Vr> {
    let vr = match tag {
        TRANSFER_SYNTAX_UID | SOP_INSTANCE_UID | SERIES_INSTANCE_UID => Vr::UI,
        SERIES_DESCRIPTION | PATIENT_ID | CONTRAST_BOLUS_AGENT => Vr::LO,
        SCANNING_SEQUENCE => Vr::CS,
        REPETITION_TIME
        | ECHO_TIME
        | FLIP_ANGLE
        | IMAGE_POSITION_PATIENT
        | IMAGE_ORIENTATION_PATIENT
        | PIXEL_SPACING => Vr::DS,
        TEMPORAL_POSITION_IDENTIFIER => Vr::IS,
        ROWS | COLUMNS => Vr::US,
        PIXEL_DATA => Vr::OW,
        _ => return None,
    };
    Some(vr)
}

pub fn is_dictionary_tag(tag: Tag) -> bool {
    dictionary_vr(tag).is_some()
}

/// Value payload of a decoded element.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementValue {
    /// Text values split on the backslash multiplicity delimiter, padding trimmed.
    /// Binary numeric VRs (US) are rendered into decimal text.
    Strings(Vec<String>),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataElement {
    pub tag: Tag,
    pub vr: Vr,
    pub value: ElementValue,
}

impl DataElement {
    /// Decodes a raw little-endian value field.
    pub fn from_raw(tag: Tag, vr: Vr, raw: &[u8]) -> DataElement {
        let value = if vr == Vr::US {
            ElementValue::Strings(
                raw.chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]).to_string())
                    .collect(),
            )
        } else if vr.is_binary() {
            ElementValue::Bytes(raw.to_vec())
        } else {
            let text = String::from_utf8_lossy(raw);
            ElementValue::Strings(split_values(&text))
        };
        DataElement { tag, vr, value }
    }
}

pub(crate) fn trim_padding(s: &str) -> &str {
    s.trim_matches(|c: char| c == ' ' || c == '\0')
}

pub(crate) fn split_values(text: &str) -> Vec<String> {
    if trim_padding(text).is_empty() {
        return Vec::new();
    }
    text.split('\\').map(|v| trim_padding(v).to_string()).collect()
}
