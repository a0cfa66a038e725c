//! Part-10 writer for the dictionary subset, used by the generator and by
//! parser round-trip tests.

use crate::dicom::tags::{self, DataElement, ElementValue, Tag, Vr};
use crate::dicom::{InstanceMetadata, TransferSyntax};

/// MR Image Storage.
pub const MR_IMAGE_STORAGE: &str = "1.2.840.10008.5.1.4.1.1.4";
pub const IMPLEMENTATION_CLASS_UID: &str = "1.2.826.0.1.3680043.9.7433.1";

fn padded(value: &[u8], vr: Vr) -> Vec<u8> {
    let mut v = value.to_vec();
    if v.len() % 2 == 1 {
        v.push(if vr == Vr::UI || vr.is_binary() { 0 } else { b' ' });
    }
    v
}

fn value_bytes(el: &DataElement) -> Vec<u8> {
    match &el.value {
        ElementValue::Bytes(b) => padded(b, el.vr),
        ElementValue::Strings(values) if el.vr == Vr::US => values
            .iter()
            .flat_map(|s| s.trim().parse::<u16>().unwrap_or(0).to_le_bytes())
            .collect(),
        ElementValue::Strings(values) => padded(values.join("\\").as_bytes(), el.vr),
    }
}

fn put_explicit(out: &mut Vec<u8>, tag: Tag, vr: Vr, value: &[u8]) {
    out.extend_from_slice(&tag.0.to_le_bytes());
    out.extend_from_slice(&tag.1.to_le_bytes());
    out.extend_from_slice(&vr.0);
    if vr.has_long_length() {
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(value.len() as u32).to_le_bytes());
    } else {
        out.extend_from_slice(&(value.len() as u16).to_le_bytes());
    }
    out.extend_from_slice(value);
}

fn put_implicit(out: &mut Vec<u8>, tag: Tag, value: &[u8]) {
    out.extend_from_slice(&tag.0.to_le_bytes());
    out.extend_from_slice(&tag.1.to_le_bytes());
    out.extend_from_slice(&(value.len() as u32).to_le_bytes());
    out.extend_from_slice(value);
}

fn meta_group(sop_instance_uid: &str, syntax: TransferSyntax) -> Vec<u8> {
    let mut body = Vec::new();
    put_explicit(&mut body, Tag(0x0002, 0x0001), Vr::OB, &[0, 1]);
    put_explicit(
        &mut body,
        Tag(0x0002, 0x0002),
        Vr::UI,
        &padded(MR_IMAGE_STORAGE.as_bytes(), Vr::UI),
    );
    put_explicit(
        &mut body,
        Tag(0x0002, 0x0003),
        Vr::UI,
        &padded(sop_instance_uid.as_bytes(), Vr::UI),
    );
    put_explicit(
        &mut body,
        tags::TRANSFER_SYNTAX_UID,
        Vr::UI,
        &padded(syntax.uid().as_bytes(), Vr::UI),
    );
    put_explicit(
        &mut body,
        Tag(0x0002, 0x0012),
        Vr::UI,
        &padded(IMPLEMENTATION_CLASS_UID.as_bytes(), Vr::UI),
    );
    let mut out = Vec::with_capacity(body.len() + 12);
    put_explicit(
        &mut out,
        Tag(0x0002, 0x0000),
        Vr::UL,
        &(body.len() as u32).to_le_bytes(),
    );
    out.extend_from_slice(&body);
    out
}

/// Preamble, "DICM", file meta group, then the dataset in the given syntax.
pub fn serialize_part10_with(instance: &InstanceMetadata, syntax: TransferSyntax) -> Vec<u8> {
    let mut out = vec![0u8; 128];
    out.extend_from_slice(b"DICM");
    out.extend_from_slice(&meta_group(&instance.sop_instance_uid, syntax));
    for el in instance.to_elements() {
        let value = value_bytes(&el);
        match syntax {
            TransferSyntax::ExplicitVrLittleEndian => put_explicit(&mut out, el.tag, el.vr, &value),
            TransferSyntax::ImplicitVrLittleEndian => put_implicit(&mut out, el.tag, &value),
        }
    }
    out
}

/// Explicit VR little endian.
pub fn serialize_part10(instance: &InstanceMetadata) -> Vec<u8> {
    serialize_part10_with(instance, TransferSyntax::ExplicitVrLittleEndian)
}
