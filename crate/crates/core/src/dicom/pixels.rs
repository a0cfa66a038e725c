use super::instance::InstanceMetadata;
use super::DicomError;
use crate::imaging::ImageMatrix;

/// Decodes the native 16-bit little-endian payload into a rows×cols grid.
pub fn read_pixels(instance: &InstanceMetadata) -> Result<ImageMatrix, DicomError> {
    let payload = instance.pixel_payload.as_deref().ok_or(DicomError::NoPixelData)?;
    let rows = usize::from(instance.rows.unwrap_or(0));
    let cols = usize::from(instance.cols.unwrap_or(0));
    let expected = rows * cols;
    let words = payload.len() / 2;
    if expected == 0 || words != expected {
        return Err(DicomError::SizeMismatch {
            expected,
            actual: words,
        });
    }
    let data = payload
        .chunks_exact(2)
        .map(|w| f64::from(u16::from_le_bytes([w[0], w[1]])))
        .collect();
    Ok(ImageMatrix::new(rows, cols, data).expect("dimensions checked above"))
}
