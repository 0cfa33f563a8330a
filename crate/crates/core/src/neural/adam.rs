use super::{Gradients, Mlp, NeuralError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators and step counter for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn update(param: &mut f64, g: f64, m: &mut f64, v: &mut f64, cfg: &AdamConfig, c1: f64, c2: f64) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / c1;
    let v_hat = *v / c2;
    *param -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
}

/// One bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<(), NeuralError> {
    if !grads.matches(net) || !state.first.matches(net) {
        return Err(NeuralError::Shape(
            "gradients or optimizer state do not match the network".into(),
        ));
    }
    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);

    let layers = net.num_layers();
    for l in 0..layers {
        let w = &mut net.weights_mut()[l];
        ndarray::Zip::from(w)
            .and(&grads.weights[l])
            .and(&mut state.first.weights[l])
            .and(&mut state.second.weights[l])
            .for_each(|p, &g, m, v| update(p, g, m, v, &cfg, c1, c2));
        let b = &mut net.biases_mut()[l];
        ndarray::Zip::from(b)
            .and(&grads.biases[l])
            .and(&mut state.first.biases[l])
            .and(&mut state.second.biases[l])
            .for_each(|p, &g, m, v| update(p, g, m, v, &cfg, c1, c2));
    }
    Ok(())
}
