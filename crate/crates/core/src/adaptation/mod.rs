//! Gradient-based adaptation of the gammachirp parameters.
//!
//! The LCA energy `E = ½‖D a_K − s‖² + λ·S(a_K)` after `K` Euler steps is
//! differentiated with respect to every channel's chirp, bandwidth scale and
//! order by reverse accumulation through the unrolled recursion
//!
//! ```text
//! u_t = α·[p − (DᵀD − I)·a_{t−1}] + (1 − α)·u_{t−1},   a_t = T_λ(u_t),   α = Δt/τ
//! ```
//!
//! Inside the recursion and in the reconstruction term the threshold is
//! differentiated exactly (its derivative is the active-set mask). In the
//! sparsity term the threshold derivative is replaced by one, so the cost
//! gradient `u_m` of every inactive neuron reaches the potentials instead of
//! being multiplied by zero.

mod adam;
mod corpus;
mod train;

pub use adam::{adam_update, AdamState};
pub use corpus::make_synthetic_corpus;
pub use train::{train, write_training_log, FlushRecord, TrainConfig, TrainOutcome};

use rayon::prelude::*;

use crate::dictionary::{axpy, dot, GramTable, StridedDictionary};
use crate::error::{Error, LearnedParam, Result};
use crate::filterbank::FilterGrads;
use crate::lca::{sparsity_cost, ForwardTrace, LcaConfig};

/// `½‖Da − s‖² + (λ²/2)·#active`.
pub fn loss(signal: &[f64], coefficients: &[f64], dict: &StridedDictionary, lambda: f64) -> Result<f64> {
    let recon = dict.synthesize_signal(coefficients)?;
    if recon.len() != signal.len() {
        return Err(Error::LengthMismatch {
            expected: recon.len(),
            actual: signal.len(),
        });
    }
    let residual: f64 = recon.iter().zip(signal).map(|(r, s)| (r - s) * (r - s)).sum();
    let active = coefficients.iter().filter(|&&a| a != 0.0).count();
    Ok(0.5 * residual + sparsity_cost(active, lambda))
}

/// `∂E/∂c_i`, `∂E/∂b_i`, `∂E/∂l_i` for every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub d_chirp: Vec<f64>,
    pub d_bandwidth: Vec<f64>,
    pub d_order: Vec<f64>,
}

impl ParamGradients {
    pub fn zeros(num_channels: usize) -> Self {
        Self {
            d_chirp: vec![0.0; num_channels],
            d_bandwidth: vec![0.0; num_channels],
            d_order: vec![0.0; num_channels],
        }
    }

    pub fn num_channels(&self) -> usize {
        self.d_chirp.len()
    }

    pub fn add_assign(&mut self, other: &ParamGradients) {
        for (a, b) in [
            (&mut self.d_chirp, &other.d_chirp),
            (&mut self.d_bandwidth, &other.d_bandwidth),
            (&mut self.d_order, &other.d_order),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in [&mut self.d_chirp, &mut self.d_bandwidth, &mut self.d_order] {
            v.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Flattened as `[c_0, b_0, l_0, c_1, b_1, l_1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        (0..self.num_channels())
            .flat_map(|i| [self.d_chirp[i], self.d_bandwidth[i], self.d_order[i]])
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        for channel in 0..self.num_channels() {
            for (param, v) in [
                (LearnedParam::Chirp, self.d_chirp[channel]),
                (LearnedParam::Bandwidth, self.d_bandwidth[channel]),
                (LearnedParam::Order, self.d_order[channel]),
            ] {
                if !v.is_finite() {
                    return Err(Error::NonFiniteGradient { channel, param });
                }
            }
        }
        Ok(())
    }
}

/// Which terms of the energy to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientPath {
    /// Reconstruction plus straight-through sparsity term.
    Full,
    /// `½‖Da − s‖²` only; exact, so it can be checked by finite differences.
    Reconstruction,
    /// `λ·S(a)` only, with the straight-through threshold derivative.
    Sparsity,
}

/// Parameter gradients of the energy for one encoded signal.
pub fn backward(
    signal: &[f64],
    trace: &ForwardTrace,
    dict: &StridedDictionary,
    gram: &GramTable,
    filter_grads: &[FilterGrads],
    config: &LcaConfig,
) -> Result<ParamGradients> {
    backward_path(signal, trace, dict, gram, filter_grads, config, GradientPath::Full)
}

/// [`backward`] restricted to one term of the energy.
pub fn backward_path(
    signal: &[f64],
    trace: &ForwardTrace,
    dict: &StridedDictionary,
    gram: &GramTable,
    filter_grads: &[FilterGrads],
    config: &LcaConfig,
    path: GradientPath,
) -> Result<ParamGradients> {
    let filter_grad = filter_gradient(signal, trace, dict, gram, config, path)?;
    if filter_grads.len() != dict.num_channels() {
        return Err(Error::LengthMismatch {
            expected: dict.num_channels(),
            actual: filter_grads.len(),
        });
    }
    let fl = dict.filter_len();
    let mut grads = ParamGradients::zeros(dict.num_channels());
    for (i, (fg, hbar)) in filter_grads.iter().zip(filter_grad.chunks_exact(fl)).enumerate() {
        grads.d_chirp[i] = dot(hbar, &fg.d_chirp);
        grads.d_bandwidth[i] = dot(hbar, &fg.d_bandwidth);
        grads.d_order[i] = dot(hbar, &fg.d_order);
    }
    grads.check_finite()?;
    Ok(grads)
}

/// Gradient of the energy with respect to the unit-norm filter samples,
/// row-major `k × F_l`.
pub fn filter_gradient(
    signal: &[f64],
    trace: &ForwardTrace,
    dict: &StridedDictionary,
    gram: &GramTable,
    config: &LcaConfig,
    path: GradientPath,
) -> Result<Vec<f64>> {
    config.validate()?;
    let iters = config.num_iters;
    if trace.activations.len() != iters {
        return Err(Error::IncompleteTrace {
            expected: iters,
            actual: trace.activations.len(),
        });
    }
    let n = dict.num_atoms();
    if signal.len() != dict.signal_len() {
        return Err(Error::LengthMismatch {
            expected: dict.signal_len(),
            actual: signal.len(),
        });
    }
    if trace.final_potentials.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: trace.final_potentials.len(),
        });
    }
    let (k, fl, r, shifts) = (
        dict.num_channels(),
        dict.filter_len(),
        dict.stride(),
        dict.shifts_per_channel(),
    );
    let rate = config.rate();
    let use_recon = path != GradientPath::Sparsity;
    let use_sparsity = path != GradientPath::Reconstruction;

    let mut hbar = vec![0.0; k * fl];
    let final_active = &trace.activations[iters - 1];

    // adjoint of u_K
    let mut ubar = vec![0.0; n];
    if use_sparsity {
        // λ ∂S/∂a = u on inactive neurons, 0 on active ones; ∂a/∂u taken as 1
        ubar.copy_from_slice(&trace.final_potentials);
        for &(m, _) in final_active {
            ubar[m] = 0.0;
        }
    }
    if use_recon {
        let mut residual = dict.synthesize_sparse(final_active)?;
        residual.iter_mut().zip(signal).for_each(|(e, s)| *e -= s);
        for &(m, a) in final_active {
            let (i, j) = dict.split_index(m);
            let window = &residual[j * r..j * r + fl];
            // masked Dᵀe on the active set
            ubar[m] += dot(dict.filters().filter(i), window);
            // direct dependence of D·a on the filters
            axpy(a, window, &mut hbar[i * fl..(i + 1) * fl]);
        }
    }

    let mut ubar_sum = vec![0.0; n];
    let mut prev_recon = vec![0.0; dict.signal_len()];
    for t in (1..=iters).rev() {
        ubar_sum.iter_mut().zip(&ubar).for_each(|(w, u)| *w += u);
        if t == 1 {
            break;
        }
        let prev_active = &trace.activations[t - 2];
        if prev_active.is_empty() {
            ubar.iter_mut().for_each(|u| *u *= 1.0 - rate);
            continue;
        }
        // -α · ∂/∂D [ ūᵀ (DᵀD) a ] = -α · (ū ⊗ D a + a ⊗ D ū) folded onto filters
        dict.synthesize_sparse_into(prev_active, &mut prev_recon)?;
        let ubar_recon = synthesize_dense(dict, &ubar);
        hbar.par_chunks_mut(fl)
            .zip(ubar.par_chunks(shifts))
            .for_each(|(row, coeffs)| {
                for (j, &c) in coeffs.iter().enumerate() {
                    if c != 0.0 {
                        axpy(-rate * c, &prev_recon[j * r..j * r + fl], row);
                    }
                }
            });
        for &(m, a) in prev_active {
            let (i, j) = dict.split_index(m);
            axpy(-rate * a, &ubar_recon[j * r..j * r + fl], &mut hbar[i * fl..(i + 1) * fl]);
        }
        // through a_{t-1} = T_λ(u_{t-1}) with the exact mask
        let through_mask: Vec<f64> = prev_active
            .iter()
            .map(|&(m, _)| -rate * dict.inhibit_at(gram, &ubar, m))
            .collect();
        ubar.iter_mut().for_each(|u| *u *= 1.0 - rate);
        for (&(m, _), v) in prev_active.iter().zip(through_mask) {
            ubar[m] += v;
        }
    }

    // p = Dᵀs enters every step with weight α
    hbar.par_chunks_mut(fl)
        .zip(ubar_sum.par_chunks(shifts))
        .for_each(|(row, coeffs)| {
            for (j, &c) in coeffs.iter().enumerate() {
                if c != 0.0 {
                    axpy(rate * c, &signal[j * r..j * r + fl], row);
                }
            }
        });
    Ok(hbar)
}

/// `D x` for dense `x`, summing per-channel partials in channel order.
fn synthesize_dense(dict: &StridedDictionary, coeffs: &[f64]) -> Vec<f64> {
    let (fl, r, shifts, len) = (
        dict.filter_len(),
        dict.stride(),
        dict.shifts_per_channel(),
        dict.signal_len(),
    );
    let partials: Vec<Vec<f64>> = (0..dict.num_channels())
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; len];
            let filter = dict.filters().filter(i);
            for (j, &c) in coeffs[i * shifts..(i + 1) * shifts].iter().enumerate() {
                if c != 0.0 {
                    axpy(c, filter, &mut out[j * r..j * r + fl]);
                }
            }
            out
        })
        .collect();
    let mut total = vec![0.0; len];
    for p in &partials {
        total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
    }
    total
}
