use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &[Tensor], config: AdamConfig) -> AdamState {
        AdamState {
            config,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Shapes are checked before anything changes.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() || state.v[i].len() != p.len() {
            return Err(NnError::ShapeMismatch(format!("parameter {i}")));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((w, &gv), mv), vv) in p
            .values_mut()
            .iter_mut()
            .zip(g.values())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &[Tensor::zeros(&[3])], &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = 1, v̂ = 1 after one step with g = 1: Δ = lr / (1 + eps).
        let mut p = vec![Tensor::new(vec![1], vec![0.0]).unwrap()];
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &[Tensor::new(vec![1], vec![1.0]).unwrap()], &mut s).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0].values()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn mismatched_shapes() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut s = AdamState::new(&p, AdamConfig::default());
        let r = adam_step(&mut p, &[Tensor::zeros(&[3])], &mut s);
        assert!(matches!(r, Err(NnError::ShapeMismatch(_))));
        assert_eq!(s.step(), 0);
        let mut other = AdamState::new(&[Tensor::zeros(&[5])], AdamConfig::default());
        assert!(adam_step(&mut p, &[Tensor::zeros(&[2])], &mut other).is_err());
    }
}
