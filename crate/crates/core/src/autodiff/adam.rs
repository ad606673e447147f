use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tape::Gradients;
use crate::embed::{ParamSlot, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Adam moments keyed by parameter slot.
///
/// Only slots present in a gradient map are updated; bias correction uses
/// the global step count.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<ParamSlot, Moments>,
    skipped_non_finite: u64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Self {
        OptimizerState { config, ..Default::default() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Slots skipped so far because their gradient was not finite.
    pub fn non_finite_skips(&self) -> u64 {
        self.skipped_non_finite
    }
}

/// One bias-corrected Adam update. The pretrained table has no slot and
/// is never touched.
pub fn adam_step(params: &mut ParameterSet, grads: &Gradients, state: &mut OptimizerState) {
    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (slot, g) in grads.iter() {
        if g.iter().any(|x| !x.is_finite()) {
            state.skipped_non_finite += 1;
            continue;
        }
        let Some(values) = params.slot_mut(slot) else {
            continue;
        };
        if values.len() != g.len() {
            continue;
        }
        let m = state.moments.entry(slot).or_insert_with(|| Moments {
            first: vec![0.0; g.len()],
            second: vec![0.0; g.len()],
        });
        for i in 0..g.len() {
            m.first[i] = cfg.beta1 * m.first[i] + (1.0 - cfg.beta1) * g[i];
            m.second[i] = cfg.beta2 * m.second[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m.first[i] / c1;
            let v_hat = m.second[i] / c2;
            values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{MlpParams, VectorTable};

    fn params_with_rows(rows: &[&[f64]]) -> ParameterSet {
        let mut t = VectorTable::new(rows[0].len());
        for r in rows {
            t.push(r);
        }
        let d = t.dim();
        ParameterSet::from_parts(
            t,
            None,
            VectorTable::new(d),
            MlpParams::identity(d),
            VectorTable::new(d),
            MlpParams::identity(d),
        )
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = params_with_rows(&[&[0.5], &[-0.25]]);
        let before = p.clone();
        let mut g = Gradients::new();
        g.insert(ParamSlot::EntityRow(0), vec![0.0]);
        g.insert(ParamSlot::EntityRow(1), vec![0.0]);
        let mut st = OptimizerState::new(AdamConfig::default());
        adam_step(&mut p, &g, &mut st);
        assert_eq!(p, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1, so
        // the step is lr / (1 + eps).
        let mut p = params_with_rows(&[&[0.5]]);
        let mut g = Gradients::new();
        g.insert(ParamSlot::EntityRow(0), vec![1.0]);
        let mut st = OptimizerState::new(AdamConfig::default());
        adam_step(&mut p, &g, &mut st);
        let expected = 0.5 - 1e-3 / (1.0 + 1e-8);
        assert!((p.entity_table.row(0).unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_skips_slot() {
        let mut p = params_with_rows(&[&[0.5], &[0.5]]);
        let mut g = Gradients::new();
        g.insert(ParamSlot::EntityRow(0), vec![f64::NAN]);
        g.insert(ParamSlot::EntityRow(1), vec![2.0]);
        let mut st = OptimizerState::new(AdamConfig::default());
        adam_step(&mut p, &g, &mut st);
        assert_eq!(p.entity_table.row(0).unwrap()[0], 0.5);
        assert!(p.entity_table.row(1).unwrap()[0] < 0.5);
        assert_eq!(st.non_finite_skips(), 1);
    }
}
