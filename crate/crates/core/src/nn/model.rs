use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv3x3_backward, conv3x3_forward, dense_backward, dense_forward, maxpool2x2_backward, maxpool2x2_forward,
    relu_backward_inplace, relu_inplace, softmax,
};
use super::{NnError, Tensor};
use crate::features::{FeatureVector, ScalingParams, FEATURE_LEN};
use crate::imaging::{ImageSlice, MODEL_IMAGE_SIZE};
use crate::{seed, NUM_CLASSES};

/// Parameter tensor names, in storage and gradient order.
pub const PARAM_NAMES: [&str; 12] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
    "dense3.weight",
    "dense3.bias",
];

const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    ImageOnly,
    Fusion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Square input extent; must be divisible by 8 (three 2×2 pools).
    pub input_size: usize,
    pub conv_channels: [usize; 3],
    pub dense_units: [usize; 2],
    pub metadata_len: usize,
    pub num_classes: usize,
    pub mode: Mode,
}

impl ArchConfig {
    pub fn standard(mode: Mode) -> ArchConfig {
        ArchConfig {
            input_size: MODEL_IMAGE_SIZE,
            conv_channels: [8, 16, 32],
            dense_units: [128, 64],
            metadata_len: FEATURE_LEN,
            num_classes: NUM_CLASSES,
            mode,
        }
    }

    /// Same layer stack on 8×8 inputs, small enough for finite differences.
    pub fn tiny(mode: Mode) -> ArchConfig {
        ArchConfig {
            input_size: 8,
            ..ArchConfig::standard(mode)
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.input_size > 0
            && self.input_size.is_multiple_of(8)
            && self.conv_channels.iter().all(|&c| c > 0)
            && self.dense_units.iter().all(|&u| u > 0)
            && self.num_classes > 0
            && (self.mode == Mode::ImageOnly || self.metadata_len > 0);
        if ok {
            Ok(())
        } else {
            Err(NnError::ShapeMismatch(format!("invalid architecture {self:?}")))
        }
    }

    pub fn flatten_len(&self) -> usize {
        let s = self.input_size / 8;
        self.conv_channels[2] * s * s
    }

    pub fn dense_input_len(&self) -> usize {
        self.flatten_len()
            + match self.mode {
                Mode::Fusion => self.metadata_len,
                Mode::ImageOnly => 0,
            }
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let [c1, c2, c3] = self.conv_channels;
        let [d1, d2] = self.dense_units;
        vec![
            vec![c1, 1, 3, 3],
            vec![c1],
            vec![c2, c1, 3, 3],
            vec![c2],
            vec![c3, c2, 3, 3],
            vec![c3],
            vec![d1, self.dense_input_len()],
            vec![d1],
            vec![d2, d1],
            vec![d2],
            vec![self.num_classes, d2],
            vec![self.num_classes],
        ]
    }
}

/// Three conv/relu/pool blocks, then three dense layers; in fusion mode the
/// metadata vector is appended to the flattened features.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionCnnModel {
    config: ArchConfig,
    seed: u64,
    params: Vec<Tensor>,
    pub scaler: Option<ScalingParams>,
}

/// Activations kept from a forward pass for [`FusionCnnModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    config: ArchConfig,
    conv_inputs: Vec<Vec<f64>>,
    conv_acts: Vec<Vec<f64>>,
    pool_argmax: Vec<Vec<usize>>,
    dense_input: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `−ln(max(p[label], 1e-12))`.
pub fn loss_scce(probs: &[f64], label: usize) -> Result<f64, NnError> {
    let p = probs.get(label).ok_or(NnError::BadLabel(label))?;
    Ok(-p.max(PROB_FLOOR).ln())
}

impl FusionCnnModel {
    /// He-uniform weights (limit `sqrt(6 / fan_in)`), zero biases.
    pub fn new(config: ArchConfig, seed: u64) -> Result<FusionCnnModel, NnError> {
        config.validate()?;
        let mut rng = seed::rng(seed, "cnn-init", 0);
        let params = config
            .param_shapes()
            .into_iter()
            .map(|shape| {
                let n: usize = shape.iter().product();
                let values = if shape.len() == 1 {
                    vec![0.0; n]
                } else {
                    let fan_in: usize = shape[1..].iter().product();
                    let limit = (6.0 / fan_in as f64).sqrt();
                    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
                };
                Tensor::new(shape, values)
            })
            .collect::<Result<_, _>>()?;
        Ok(FusionCnnModel {
            config,
            seed,
            params,
            scaler: None,
        })
    }

    pub fn zeros(config: ArchConfig) -> Result<FusionCnnModel, NnError> {
        config.validate()?;
        let params = config.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Ok(FusionCnnModel {
            config,
            seed: 0,
            params,
            scaler: None,
        })
    }

    /// Builds a model from explicit tensors, checking every shape.
    pub fn from_parts(
        config: ArchConfig,
        seed: u64,
        params: Vec<Tensor>,
        scaler: Option<ScalingParams>,
    ) -> Result<FusionCnnModel, NnError> {
        config.validate()?;
        let shapes = config.param_shapes();
        if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, s)| p.shape() != s.as_slice()) {
            return Err(NnError::ShapeMismatch(
                "parameter shapes disagree with architecture".into(),
            ));
        }
        Ok(FusionCnnModel {
            config,
            seed,
            params,
            scaler,
        })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Rounds every parameter to the nearest `f32`, the precision of the model
    /// file, so in-memory and reloaded models predict identically.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in p.values_mut() {
                *v = f64::from(*v as f32);
            }
        }
    }

    pub fn forward(
        &self,
        image: &ImageSlice,
        metadata: Option<&FeatureVector>,
    ) -> Result<(Vec<f64>, ForwardCache), NnError> {
        let cfg = &self.config;
        match (cfg.mode, metadata.is_some()) {
            (Mode::ImageOnly, true) | (Mode::Fusion, false) => {
                return Err(NnError::ModeMismatch {
                    mode: cfg.mode,
                    metadata: metadata.is_some(),
                })
            }
            _ => {}
        }
        let s = cfg.input_size;
        if image.height != s || image.width != s || image.values.len() != s * s {
            return Err(NnError::ShapeMismatch(format!(
                "image {}x{} for a {s}x{s} model",
                image.height, image.width
            )));
        }
        if let Some(m) = metadata {
            if m.0.len() != cfg.metadata_len {
                return Err(NnError::ShapeMismatch("metadata length".into()));
            }
        }

        let p = &self.params;
        let mut conv_inputs = Vec::with_capacity(3);
        let mut conv_acts = Vec::with_capacity(3);
        let mut pool_argmax = Vec::with_capacity(3);
        let mut x = image.values.clone();
        let (mut c, mut h) = (1, s);
        for l in 0..3 {
            let co = cfg.conv_channels[l];
            let mut a = conv3x3_forward(&x, c, h, h, p[2 * l].values(), p[2 * l + 1].values(), co);
            relu_inplace(&mut a);
            let (pooled, arg) = maxpool2x2_forward(&a, co, h, h);
            conv_inputs.push(std::mem::replace(&mut x, pooled));
            conv_acts.push(a);
            pool_argmax.push(arg);
            c = co;
            h /= 2;
        }
        let mut dense_input = x;
        if let Some(m) = metadata {
            dense_input.extend_from_slice(m.as_slice());
        }
        let mut h1 = dense_forward(&dense_input, p[6].values(), p[7].values());
        relu_inplace(&mut h1);
        let mut h2 = dense_forward(&h1, p[8].values(), p[9].values());
        relu_inplace(&mut h2);
        let logits = dense_forward(&h2, p[10].values(), p[11].values());
        let probs = softmax(&logits);
        let cache = ForwardCache {
            config: cfg.clone(),
            conv_inputs,
            conv_acts,
            pool_argmax,
            dense_input,
            hidden: vec![h1, h2],
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    pub fn predict(&self, image: &ImageSlice, metadata: Option<&FeatureVector>) -> Result<Vec<f64>, NnError> {
        self.forward(image, metadata).map(|(p, _)| p)
    }

    /// Gradients of the SCCE loss for `label`, one tensor per parameter.
    pub fn backward(&self, cache: &ForwardCache, label: usize) -> Result<Vec<Tensor>, NnError> {
        let cfg = &self.config;
        if cache.config != *cfg || cache.conv_inputs.len() != 3 || cache.hidden.len() != 2 {
            return Err(NnError::CacheMismatch);
        }
        if label >= cfg.num_classes {
            return Err(NnError::BadLabel(label));
        }
        let p = &self.params;
        let mut grads: Vec<Tensor> = cfg.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        let (conv_grads, dense_grads) = grads.split_at_mut(6);

        let mut g: Vec<f64> = cache.probs.clone();
        g[label] -= 1.0;

        let (gw3, gb3) = pair(&mut dense_grads[4..6]);
        let mut g = dense_backward(&cache.hidden[1], p[10].values(), &g, gw3, gb3, true).unwrap_or_default();
        relu_backward_inplace(&mut g, &cache.hidden[1]);
        let (gw2, gb2) = pair(&mut dense_grads[2..4]);
        let mut g = dense_backward(&cache.hidden[0], p[8].values(), &g, gw2, gb2, true).unwrap_or_default();
        relu_backward_inplace(&mut g, &cache.hidden[0]);
        let (gw1, gb1) = pair(&mut dense_grads[0..2]);
        let mut g = dense_backward(&cache.dense_input, p[6].values(), &g, gw1, gb1, true).unwrap_or_default();
        // Metadata is an input, not a parameter; its gradient is dropped.
        g.truncate(cfg.flatten_len());

        for l in (0..3).rev() {
            let h = cfg.input_size >> l;
            let c_in = if l == 0 { 1 } else { cfg.conv_channels[l - 1] };
            let co = cfg.conv_channels[l];
            let mut ga = maxpool2x2_backward(&g, &cache.pool_argmax[l], cache.conv_acts[l].len());
            relu_backward_inplace(&mut ga, &cache.conv_acts[l]);
            let (gw, gb) = pair(&mut conv_grads[2 * l..2 * l + 2]);
            g = conv3x3_backward(
                &cache.conv_inputs[l],
                c_in,
                h,
                h,
                p[2 * l].values(),
                &ga,
                co,
                gw,
                gb,
                l > 0,
            )
            .unwrap_or_default();
        }
        Ok(grads)
    }
}

fn pair(ts: &mut [Tensor]) -> (&mut [f64], &mut [f64]) {
    let (a, b) = ts.split_at_mut(1);
    (a[0].values_mut(), b[0].values_mut())
}

/// `into += from`, tensor by tensor.
pub fn accumulate(into: &mut [Tensor], from: &[Tensor]) -> Result<(), NnError> {
    if into.len() != from.len() || into.iter().zip(from).any(|(a, b)| a.shape() != b.shape()) {
        return Err(NnError::ShapeMismatch("gradient sets differ".into()));
    }
    for (a, b) in into.iter_mut().zip(from) {
        for (x, y) in a.values_mut().iter_mut().zip(b.values()) {
            *x += y;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(s: usize) -> ImageSlice {
        ImageSlice {
            height: s,
            width: s,
            values: (0..s * s).map(|i| ((i * 37) % 17) as f64 / 16.0).collect(),
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = FusionCnnModel::zeros(ArchConfig::tiny(Mode::Fusion)).unwrap();
        let p = m.predict(&image(8), Some(&FeatureVector([3.0; FEATURE_LEN]))).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn mode_mismatch() {
        let m = FusionCnnModel::zeros(ArchConfig::tiny(Mode::ImageOnly)).unwrap();
        assert!(matches!(
            m.predict(&image(8), Some(&FeatureVector([0.0; FEATURE_LEN]))),
            Err(NnError::ModeMismatch { .. })
        ));
        let f = FusionCnnModel::zeros(ArchConfig::tiny(Mode::Fusion)).unwrap();
        assert!(matches!(f.predict(&image(8), None), Err(NnError::ModeMismatch { .. })));
    }

    #[test]
    fn standard_shapes() {
        let cfg = ArchConfig::standard(Mode::Fusion);
        assert_eq!(cfg.flatten_len(), 2048);
        assert_eq!(cfg.dense_input_len(), 2058);
        assert_eq!(ArchConfig::standard(Mode::ImageOnly).dense_input_len(), 2048);
        let m = FusionCnnModel::new(cfg, 1).unwrap();
        let p = m.predict(&image(64), Some(&FeatureVector([0.5; FEATURE_LEN]))).unwrap();
        assert_eq!(p.len(), 4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scce_values() {
        assert_eq!(loss_scce(&[1.0, 0.0, 0.0, 0.0], 0).unwrap(), 0.0);
        assert!((loss_scce(&[0.25; 4], 2).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(loss_scce(&[0.25; 4], 7), Err(NnError::BadLabel(7)));
        assert!((loss_scce(&[0.0, 1.0, 0.0, 0.0], 0).unwrap() - 1e12f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cache_from_other_architecture_is_rejected() {
        let a = FusionCnnModel::new(ArchConfig::tiny(Mode::ImageOnly), 1).unwrap();
        let b = FusionCnnModel::new(ArchConfig::tiny(Mode::Fusion), 1).unwrap();
        let (_, cache) = a.forward(&image(8), None).unwrap();
        assert!(matches!(b.backward(&cache, 0), Err(NnError::CacheMismatch)));
        assert!(matches!(a.backward(&cache, 4), Err(NnError::BadLabel(4))));
    }
}
