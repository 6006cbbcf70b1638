use serde::{Deserialize, Serialize};

use super::mlp::Mlp;

pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmsPropConfig {
    pub fn new(learning_rate: f64) -> Self {
        RmsPropConfig {
            learning_rate,
            decay: DEFAULT_DECAY,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// One RMSProp update over aligned slices; zeroes `grads` afterwards.
///
/// `acc ← decay·acc + (1−decay)·g²`, `p ← p − lr·g/(√acc + ε)`
pub fn rmsprop_update(cfg: &RmsPropConfig, acc: &mut [f64], params: &mut [f64], grads: &mut [f64]) {
    debug_assert!(acc.len() == params.len() && params.len() == grads.len());
    for ((a, p), g) in acc.iter_mut().zip(params.iter_mut()).zip(grads.iter_mut()) {
        *a = cfg.decay * *a + (1.0 - cfg.decay) * *g * *g;
        *p -= cfg.learning_rate * *g / (a.sqrt() + cfg.epsilon);
        *g = 0.0;
    }
}

/// RMSProp state for a single network. Accumulators are allocated on the
/// first step to mirror the network's parameter groups.
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    accumulators: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        RmsProp {
            config,
            accumulators: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp) {
        let groups = net.param_groups_mut();
        if self.accumulators.is_empty() {
            self.accumulators = groups.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
        }
        debug_assert_eq!(self.accumulators.len(), groups.len());
        for (acc, (params, grads)) in self.accumulators.iter_mut().zip(groups) {
            rmsprop_update(&self.config, acc, params, grads);
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accumulators
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_steps(g: f64, steps: usize) -> Vec<f64> {
        let cfg = RmsPropConfig::new(0.001);
        let mut acc = [0.0];
        let mut p = [0.0];
        let mut deltas = Vec::new();
        for _ in 0..steps {
            let before = p[0];
            let mut grad = [g];
            rmsprop_update(&cfg, &mut acc, &mut p, &mut grad);
            assert_eq!(grad[0], 0.0);
            deltas.push(p[0] - before);
        }
        deltas
    }

    #[test]
    fn zero_gradient_leaves_params() {
        assert_eq!(scalar_steps(0.0, 3), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn first_and_second_step_values() {
        // Oracle: acc1 = 0.1, Δ1 = −0.001/(√0.1 + 1e-8); acc2 = 0.19, Δ2 = −0.001/(√0.19 + 1e-8)
        let d = scalar_steps(1.0, 2);
        let d1 = -0.001 / (0.1f64.sqrt() + 1e-8);
        let d2 = -0.001 / (0.19f64.sqrt() + 1e-8);
        assert!((d[0] - d1).abs() < 1e-15);
        assert!((d[1] - d2).abs() < 1e-15);
        assert!((d[0] + 0.0031623).abs() < 1e-7);
        assert!((d[1] + 0.0022942).abs() < 1e-7);
        // The second step is smaller in magnitude.
        assert!(d[1].abs() < d[0].abs());
    }
}
