use log::warn;

use super::{ParamGradients, TrainConfig};
use crate::error::{Error, Result};
use crate::filterbank::Filterbank;

const MIN_ORDER: f64 = 1.05;
const MIN_BANDWIDTH_SCALE: f64 = 0.02;

/// Adam moments over the flattened `[c, b, l]` parameters of every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(num_channels: usize) -> Self {
        Self {
            first_moment: vec![0.0; 3 * num_channels],
            second_moment: vec![0.0; 3 * num_channels],
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam step on chirp, bandwidth scale and order.
///
/// Center frequencies are not learned. Orders below 1.05 and bandwidth
/// scales below 0.02 are clamped; the number of clamped values is returned.
pub fn adam_update(
    bank: &mut Filterbank,
    grads: &ParamGradients,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<usize> {
    let k = bank.channels.len();
    if grads.num_channels() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            actual: grads.num_channels(),
        });
    }
    if state.first_moment.len() != 3 * k || state.second_moment.len() != 3 * k {
        return Err(Error::LengthMismatch {
            expected: 3 * k,
            actual: state.first_moment.len(),
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let bias1 = 1.0 - b1.powi(t);
    let bias2 = 1.0 - b2.powi(t);

    let flat = grads.to_flat();
    let mut clamped = 0;
    for (i, ch) in bank.channels.iter_mut().enumerate() {
        let targets = [&mut ch.chirp, &mut ch.bandwidth_scale, &mut ch.order];
        for (slot, param) in targets.into_iter().enumerate() {
            let idx = 3 * i + slot;
            let g = flat[idx];
            let m = &mut state.first_moment[idx];
            let v = &mut state.second_moment[idx];
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *param -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
        }
        if ch.order < MIN_ORDER {
            warn!("channel {i}: order {} clamped to {MIN_ORDER}", ch.order);
            ch.order = MIN_ORDER;
            clamped += 1;
        }
        if ch.bandwidth_scale < MIN_BANDWIDTH_SCALE {
            warn!(
                "channel {i}: bandwidth scale {} clamped to {MIN_BANDWIDTH_SCALE}",
                ch.bandwidth_scale
            );
            ch.bandwidth_scale = MIN_BANDWIDTH_SCALE;
            clamped += 1;
        }
    }
    Ok(clamped)
}
