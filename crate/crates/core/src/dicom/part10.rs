//! Reader for uncompressed little-endian Part-10 streams.
//!
//! Only the dictionary tags of [`super::tags`] are decoded; everything else,
//! including whole sequences, is skipped by its declared length. Every length
//! is bounds-checked before use so truncated input fails with
//! [`DicomError::MalformedFile`].

use super::instance::InstanceMetadata;
use super::tags::{self, DataElement, Tag, Vr};
use super::DicomError;

pub const IMPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";

const PREAMBLE_LEN: usize = 128;
const MAGIC: &[u8; 4] = b"DICM";
const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;
const MAX_NESTING: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferSyntax {
    ImplicitVrLittleEndian,
    ExplicitVrLittleEndian,
}

impl TransferSyntax {
    pub fn uid(self) -> &'static str {
        match self {
            TransferSyntax::ImplicitVrLittleEndian => IMPLICIT_VR_LITTLE_ENDIAN,
            TransferSyntax::ExplicitVrLittleEndian => EXPLICIT_VR_LITTLE_ENDIAN,
        }
    }

    pub fn from_uid(uid: &str) -> Result<TransferSyntax, DicomError> {
        match uid {
            IMPLICIT_VR_LITTLE_ENDIAN => Ok(TransferSyntax::ImplicitVrLittleEndian),
            EXPLICIT_VR_LITTLE_ENDIAN => Ok(TransferSyntax::ExplicitVrLittleEndian),
            other => Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
        }
    }
}

/// Parses a Part-10 byte stream into instance metadata.
pub fn parse_part10(bytes: &[u8]) -> Result<InstanceMetadata, DicomError> {
    let (_, elements) = read_part10_elements(bytes)?;
    InstanceMetadata::from_elements(&elements)
}

/// Reads the file meta group and the dataset, returning the declared transfer
/// syntax and the dictionary elements of the top-level dataset.
pub fn read_part10_elements(bytes: &[u8]) -> Result<(TransferSyntax, Vec<DataElement>), DicomError> {
    let start = if bytes.len() >= PREAMBLE_LEN + MAGIC.len() && &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] == MAGIC {
        PREAMBLE_LEN + MAGIC.len()
    } else if bytes.len() >= 2 && bytes[..2] == [0x02, 0x00] {
        0
    } else if bytes.len() >= PREAMBLE_LEN + MAGIC.len() {
        return Err(malformed("missing DICM magic after preamble"));
    } else {
        return Err(malformed("file too short for a Part-10 header"));
    };

    let mut meta = Reader::new(bytes, start, true);
    let mut syntax_uid = None;
    let mut meta_end = None;
    while meta.remaining() >= 2 && meta.peek_group()? == 0x0002 {
        let header = meta.header()?;
        let value = meta.take(header.tag, header.length)?;
        match header.tag {
            Tag(0x0002, 0x0000) => {
                if value.len() != 4 {
                    return Err(malformed("bad meta group length"));
                }
                let len = u32::from_le_bytes([value[0], value[1], value[2], value[3]]) as usize;
                meta_end = Some(meta.pos + len);
            }
            tags::TRANSFER_SYNTAX_UID => {
                let text = String::from_utf8_lossy(value);
                syntax_uid = Some(tags::trim_padding(&text).to_string());
            }
            _ => {}
        }
    }
    if let Some(end) = meta_end {
        if end != meta.pos {
            return Err(malformed("file meta group length disagrees with its content"));
        }
    }
    let syntax = match syntax_uid {
        Some(uid) => TransferSyntax::from_uid(&uid)?,
        None => return Err(malformed("file meta group lacks a transfer syntax")),
    };

    let explicit = syntax == TransferSyntax::ExplicitVrLittleEndian;
    let mut reader = Reader::new(bytes, meta.pos, explicit);
    let mut elements = Vec::new();
    while reader.remaining() > 0 {
        if let Some(el) = reader.element(0)? {
            elements.push(el);
        }
    }
    Ok((syntax, elements))
}

fn malformed(msg: impl Into<String>) -> DicomError {
    DicomError::MalformedFile(msg.into())
}

struct Header {
    tag: Tag,
    vr: Option<Vr>,
    length: u32,
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    explicit: bool,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], pos: usize, explicit: bool) -> Self {
        Reader { data, pos, explicit }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8], DicomError> {
        if self.remaining() < n {
            return Err(malformed(format!("truncated {what} at offset {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, DicomError> {
        let b = self.bytes(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, DicomError> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn peek_group(&self) -> Result<u16, DicomError> {
        if self.remaining() < 2 {
            return Err(malformed("truncated tag"));
        }
        Ok(u16::from_le_bytes([self.data[self.pos], self.data[self.pos + 1]]))
    }

    fn peek_tag(&self) -> Option<Tag> {
        let b = self.data.get(self.pos..self.pos + 4)?;
        Some(Tag(u16::from_le_bytes([b[0], b[1]]), u16::from_le_bytes([b[2], b[3]])))
    }

    fn header(&mut self) -> Result<Header, DicomError> {
        let group = self.u16("tag")?;
        let element = self.u16("tag")?;
        let tag = Tag(group, element);
        if group == 0xFFFE {
            // Item and delimiter headers never carry a VR.
            let length = self.u32("item length")?;
            return Ok(Header { tag, vr: None, length });
        }
        if self.explicit {
            let code = self.bytes(2, "VR")?;
            if !code.iter().all(u8::is_ascii_uppercase) {
                return Err(malformed(format!("invalid VR bytes for {tag}")));
            }
            let vr = Vr([code[0], code[1]]);
            let length = if vr.has_long_length() {
                self.bytes(2, "reserved bytes")?;
                self.u32("element length")?
            } else {
                u32::from(self.u16("element length")?)
            };
            Ok(Header {
                tag,
                vr: Some(vr),
                length,
            })
        } else {
            let length = self.u32("element length")?;
            Ok(Header {
                tag,
                vr: tags::dictionary_vr(tag),
                length,
            })
        }
    }

    fn take(&mut self, tag: Tag, length: u32) -> Result<&'a [u8], DicomError> {
        if length == UNDEFINED_LENGTH {
            return Err(malformed(format!("undefined length on non-sequence {tag}")));
        }
        let n = length as usize;
        if self.remaining() < n {
            return Err(malformed(format!(
                "element {tag} declares {n} bytes but only {} remain",
                self.remaining()
            )));
        }
        self.bytes(n, "value")
    }

    /// Reads one element. Returns `None` for anything skipped (unknown tags,
    /// sequences).
    fn element(&mut self, depth: usize) -> Result<Option<DataElement>, DicomError> {
        let header = self.header()?;
        if header.tag.group() == 0xFFFE {
            return Err(malformed(format!("unexpected delimiter {} in dataset", header.tag)));
        }
        let is_sequence = header.vr == Some(Vr::SQ);
        if header.length == UNDEFINED_LENGTH {
            if header.tag == tags::PIXEL_DATA {
                return Err(malformed("encapsulated pixel data in a native transfer syntax"));
            }
            // Explicit UN with undefined length is encoded as implicit VR.
            let nested_explicit = self.explicit && header.vr != Some(Vr::UN);
            self.skip_undefined_sequence(depth + 1, nested_explicit)?;
            return Ok(None);
        }
        let raw = self.take(header.tag, header.length)?;
        if is_sequence || depth > 0 || !tags::is_dictionary_tag(header.tag) {
            return Ok(None);
        }
        let vr = header.vr.or_else(|| tags::dictionary_vr(header.tag)).unwrap_or(Vr::UN);
        Ok(Some(DataElement::from_raw(header.tag, vr, raw)))
    }

    fn skip_undefined_sequence(&mut self, depth: usize, explicit: bool) -> Result<(), DicomError> {
        if depth > MAX_NESTING {
            return Err(malformed("sequence nesting too deep"));
        }
        let outer_explicit = self.explicit;
        self.explicit = explicit;
        let result = self.skip_items(depth);
        self.explicit = outer_explicit;
        result
    }

    fn skip_items(&mut self, depth: usize) -> Result<(), DicomError> {
        loop {
            let header = self.header()?;
            match header.tag {
                tags::SEQUENCE_DELIMITATION => return Ok(()),
                tags::ITEM if header.length == UNDEFINED_LENGTH => loop {
                    if self.peek_tag() == Some(tags::ITEM_DELIMITATION) {
                        self.header()?;
                        break;
                    }
                    self.element(depth)?;
                },
                tags::ITEM => {
                    self.take(header.tag, header.length)?;
                }
                other => return Err(malformed(format!("expected sequence item, found {other}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit_element(out: &mut Vec<u8>, tag: Tag, vr: &[u8; 2], value: &[u8]) {
        out.extend_from_slice(&tag.0.to_le_bytes());
        out.extend_from_slice(&tag.1.to_le_bytes());
        out.extend_from_slice(vr);
        if Vr(*vr).has_long_length() {
            out.extend_from_slice(&[0, 0]);
            out.extend_from_slice(&(value.len() as u32).to_le_bytes());
        } else {
            out.extend_from_slice(&(value.len() as u16).to_le_bytes());
        }
        out.extend_from_slice(value);
    }

    fn file_with_syntax(uid: &str) -> Vec<u8> {
        let mut out = vec![0u8; 128];
        out.extend_from_slice(b"DICM");
        let mut uid = uid.as_bytes().to_vec();
        if uid.len() % 2 == 1 {
            uid.push(0);
        }
        explicit_element(&mut out, tags::TRANSFER_SYNTAX_UID, b"UI", &uid);
        out
    }

    #[test]
    fn preamble_without_magic_is_malformed() {
        let mut bytes = vec![0u8; 200];
        bytes[128..132].copy_from_slice(b"DICX");
        assert!(matches!(parse_part10(&bytes), Err(DicomError::MalformedFile(_))));
    }

    #[test]
    fn jpeg_transfer_syntax_is_unsupported() {
        let bytes = file_with_syntax("1.2.840.10008.1.2.4.50");
        assert_eq!(
            parse_part10(&bytes),
            Err(DicomError::UnsupportedTransferSyntax("1.2.840.10008.1.2.4.50".into()))
        );
    }

    #[test]
    fn big_endian_is_unsupported() {
        let bytes = file_with_syntax("1.2.840.10008.1.2.2");
        assert!(matches!(
            parse_part10(&bytes),
            Err(DicomError::UnsupportedTransferSyntax(_))
        ));
    }

    #[test]
    fn reads_tr_te_and_skips_sequences() {
        let mut bytes = file_with_syntax(EXPLICIT_VR_LITTLE_ENDIAN);
        explicit_element(&mut bytes, Tag(0x0008, 0x0060), b"CS", b"MR");
        // A defined-length sequence and an undefined-length one holding an
        // undefined-length item.
        explicit_element(
            &mut bytes,
            Tag(0x0008, 0x1140),
            b"SQ",
            &[0xFE, 0xFF, 0x00, 0xE0, 0, 0, 0, 0],
        );
        bytes.extend_from_slice(&[0x08, 0x00, 0x15, 0x11, b'S', b'Q', 0, 0, 0xFF, 0xFF, 0xFF, 0xFF]);
        bytes.extend_from_slice(&[0xFE, 0xFF, 0x00, 0xE0, 0xFF, 0xFF, 0xFF, 0xFF]);
        // A dictionary tag inside the item must not leak into the result.
        explicit_element(&mut bytes, tags::REPETITION_TIME, b"DS", b"1 ");
        bytes.extend_from_slice(&[0xFE, 0xFF, 0x0D, 0xE0, 0, 0, 0, 0]);
        bytes.extend_from_slice(&[0xFE, 0xFF, 0xDD, 0xE0, 0, 0, 0, 0]);
        explicit_element(&mut bytes, tags::REPETITION_TIME, b"DS", b"500 ");
        explicit_element(&mut bytes, tags::ECHO_TIME, b"DS", b"20");
        explicit_element(&mut bytes, tags::SERIES_INSTANCE_UID, b"UI", b"1.2.3\0");
        let inst = parse_part10(&bytes).unwrap();
        assert_eq!(inst.repetition_time, Some(500.0));
        assert_eq!(inst.echo_time, Some(20.0));
        assert_eq!(inst.series_instance_uid, "1.2.3");
    }

    #[test]
    fn overrun_length_is_malformed() {
        let mut bytes = file_with_syntax(EXPLICIT_VR_LITTLE_ENDIAN);
        bytes.extend_from_slice(&[0x18, 0x00, 0x80, 0x00, b'D', b'S', 0x10, 0x00, b'5']);
        assert!(matches!(parse_part10(&bytes), Err(DicomError::MalformedFile(_))));
    }

    #[test]
    fn implicit_dataset_without_preamble() {
        // File meta group directly at offset 0, followed by an implicit VR dataset.
        let mut bytes = Vec::new();
        let uid = b"1.2.840.10008.1.2\0";
        explicit_element(&mut bytes, tags::TRANSFER_SYNTAX_UID, b"UI", uid);
        for (tag, value) in [
            (tags::SERIES_INSTANCE_UID, &b"9.9"[..]),
            (tags::ROWS, &[4, 0][..]),
            (Tag(0x0019, 0x1000), &b"vendor"[..]),
        ] {
            bytes.extend_from_slice(&tag.0.to_le_bytes());
            bytes.extend_from_slice(&tag.1.to_le_bytes());
            bytes.extend_from_slice(&(value.len() as u32).to_le_bytes());
            bytes.extend_from_slice(value);
        }
        let inst = parse_part10(&bytes).unwrap();
        assert_eq!(inst.series_instance_uid, "9.9");
        assert_eq!(inst.rows, Some(4));
    }
}
