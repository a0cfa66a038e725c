//! Class-specific slice textures, values in `[0, 1]` before scaling to 16 bits.
//!
//! | kind      | content                                                       |
//! |-----------|---------------------------------------------------------------|
//! | Ellipse   | bright filled ellipse on a dark field, mild smooth noise      |
//! | Speckle   | dark field with per-pixel speckle and one small bright blob   |
//! | Smooth    | mid-gray linear ramp with a darker soft ellipse               |
//! | Stripes   | horizontal sinusoidal bands with a few bright vessel dots     |
//!
//! `contrast` scales the foreground/background gap and `noise` the amplitude
//! of the random component; `frequency` sets the stripe period for `Stripes`
//! and the speckle density for `Speckle`.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TextureKind {
    Ellipse,
    Speckle,
    Smooth,
    Stripes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    pub kind: TextureKind,
    pub contrast: f64,
    pub noise: f64,
    pub frequency: f64,
}

fn ellipse(r: f64, c: f64, cy: f64, cx: f64, ry: f64, rx: f64) -> f64 {
    ((r - cy) / ry).powi(2) + ((c - cx) / rx).powi(2)
}

/// Renders a `size`×`size` texture, row-major.
pub fn render<R: Rng>(spec: &TextureSpec, size: usize, rng: &mut R) -> Vec<f64> {
    let n = size as f64;
    let k = spec.contrast.clamp(0.0, 1.0);
    let noise = spec.noise.max(0.0);
    let mut img = vec![0.0; size * size];
    match spec.kind {
        TextureKind::Ellipse => {
            let (cy, cx) = (n * rng.gen_range(0.42..0.58), n * rng.gen_range(0.42..0.58));
            let (ry, rx) = (n * rng.gen_range(0.25..0.35), n * rng.gen_range(0.3..0.4));
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            for (i, v) in img.iter_mut().enumerate() {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                let inside = ellipse(r, c, cy, cx, ry, rx) <= 1.0;
                let smooth = noise * 0.5 * (1.0 + ((r + c) / n * 6.0 + phase).sin());
                *v = 0.1 + if inside { 0.7 * k } else { 0.0 } + smooth;
            }
        }
        TextureKind::Speckle => {
            let (cy, cx) = (n * rng.gen_range(0.35..0.65), n * rng.gen_range(0.35..0.65));
            let rad = n * rng.gen_range(0.08..0.14);
            let density = spec.frequency.clamp(0.0, 1.0);
            for (i, v) in img.iter_mut().enumerate() {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                let speck = if rng.gen_bool(density) {
                    rng.gen_range(0.0..0.35)
                } else {
                    0.0
                };
                let blob = if ellipse(r, c, cy, cx, rad, rad) <= 1.0 {
                    0.8 * k
                } else {
                    0.0
                };
                *v = 0.05 + speck + blob + noise * rng.gen::<f64>();
            }
        }
        TextureKind::Smooth => {
            let (cy, cx) = (n * rng.gen_range(0.4..0.6), n * rng.gen_range(0.4..0.6));
            let rad = n * rng.gen_range(0.25..0.32);
            let tilt = rng.gen_range(-0.1..0.1);
            for (i, v) in img.iter_mut().enumerate() {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                let d = ellipse(r, c, cy, cx, rad, rad);
                // Soft edge: full dip inside, fading out to 1.5 radii.
                let dip = ((1.5 - d.sqrt()) / 0.5).clamp(0.0, 1.0) * 0.3 * k;
                *v = 0.5 + tilt * (c / n - 0.5) - dip + noise * (rng.gen::<f64>() - 0.5);
            }
        }
        TextureKind::Stripes => {
            let period = spec.frequency.max(2.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let dots: Vec<(f64, f64)> = (0..rng.gen_range(3..6))
                .map(|_| (n * rng.gen_range(0.15..0.85), n * rng.gen_range(0.15..0.85)))
                .collect();
            let rad = (n / 24.0).max(1.0);
            for (i, v) in img.iter_mut().enumerate() {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                let band = 0.3 + 0.25 * k * (r / period * std::f64::consts::TAU + phase).sin();
                let vessel = dots.iter().any(|&(y, x)| ellipse(r, c, y, x, rad, rad) <= 1.0);
                *v = if vessel { 1.0 } else { band + noise * rng.gen::<f64>() };
            }
        }
    }
    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    img
}

/// 16-bit little-endian pixel words.
pub fn to_pixel_bytes(values: &[f64], scale: f64) -> Vec<u8> {
    values
        .iter()
        .flat_map(|v| ((v * scale).round().clamp(0.0, f64::from(u16::MAX)) as u16).to_le_bytes())
        .collect()
}
