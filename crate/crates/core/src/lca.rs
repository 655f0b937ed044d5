//! Locally Competitive Algorithm with hard thresholding.
//!
//! Membrane potentials follow the leaky, laterally inhibited dynamics
//! `τ du/dt = p − u − (DᵀD − I) a`, integrated with forward Euler:
//!
//! ```text
//! u ← (Δt/τ)·[p − (DᵀD − I)·a] + (1 − Δt/τ)·u
//! a ← T_λ(u)
//! ```
//!
//! where `p = Dᵀs` is computed once per signal and `T_λ` zeroes every
//! potential with `|u| < λ`. The reported energy is
//! `½‖Da − s‖² + (λ²/2)·#active`, the sparsity cost consistent with a hard
//! threshold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dictionary::{GramTable, StridedDictionary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcaConfig {
    /// Neuron time constant τ in seconds.
    pub tau: f64,
    /// Euler step Δt in seconds.
    pub dt: f64,
    pub num_iters: usize,
    /// Activation threshold λ.
    pub threshold: f64,
}

impl Default for LcaConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            dt: 0.0001,
            num_iters: 64,
            threshold: 0.1,
        }
    }
}

impl LcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt < self.tau) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt < tau, got dt = {}, tau = {}",
                self.dt, self.tau
            )));
        }
        if self.num_iters < 1 {
            return Err(Error::InvalidConfig("num_iters must be at least 1".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold {} must be non-negative",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Euler coefficient Δt/τ.
    pub fn rate(&self) -> f64 {
        self.dt / self.tau
    }
}

/// `0` if `|u| < λ`, otherwise `u`.
#[inline]
pub fn hard_threshold(u: f64, lambda: f64) -> f64 {
    if u.abs() < lambda {
        0.0
    } else {
        u
    }
}

/// `λ·S(a)` for the hard threshold: `λ²/2` per active neuron.
pub fn sparsity_cost(active_count: usize, lambda: f64) -> f64 {
    0.5 * lambda * lambda * active_count as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcaState {
    pub potentials: Vec<f64>,
    pub activations: Vec<f64>,
}

impl LcaState {
    pub fn rest(num_atoms: usize) -> Self {
        Self {
            potentials: vec![0.0; num_atoms],
            activations: vec![0.0; num_atoms],
        }
    }

    /// Nonzero activations in index order.
    pub fn active(&self) -> Vec<(usize, f64)> {
        sparse(&self.activations)
    }
}

fn sparse(dense: &[f64]) -> Vec<(usize, f64)> {
    dense
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(m, &a)| (m, a))
        .collect()
}

/// Advances potentials in place; returns `false` if any became non-finite.
fn euler_update(
    potentials: &mut [f64],
    activations: &mut [f64],
    projection: &[f64],
    inhibition: &[f64],
    rate: f64,
    lambda: f64,
) -> bool {
    let mut finite = true;
    for (((u, a), &p), &inh) in potentials
        .iter_mut()
        .zip(activations.iter_mut())
        .zip(projection)
        .zip(inhibition)
    {
        *u = rate * (p - inh) + (1.0 - rate) * *u;
        finite &= u.is_finite();
        *a = hard_threshold(*u, lambda);
    }
    finite
}

/// One Euler step of the dynamics.
pub fn step(
    state: &LcaState,
    projection: &[f64],
    dict: &StridedDictionary,
    gram: &GramTable,
    config: &LcaConfig,
) -> Result<LcaState> {
    let n = dict.num_atoms();
    for len in [projection.len(), state.potentials.len(), state.activations.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let inhibition = dict.inhibit(gram, &state.active())?;
    let mut next = state.clone();
    if !euler_update(
        &mut next.potentials,
        &mut next.activations,
        projection,
        &inhibition,
        config.rate(),
        config.threshold,
    ) {
        return Err(Error::Divergence { iteration: 1 });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeResult {
    /// Final activations `a`.
    pub coefficients: Vec<f64>,
    pub spike_count: usize,
    /// `‖Da − s‖² / T` at the final iteration.
    pub mse: f64,
    pub energy_trace: Vec<f64>,
    pub mse_trace: Vec<f64>,
    pub spike_trace: Vec<usize>,
}

impl EncodeResult {
    pub fn final_energy(&self) -> f64 {
        self.energy_trace.last().copied().unwrap_or(0.0)
    }
}

/// What reverse-mode differentiation needs from a forward run.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[t]` holds the sparse `a` after step `t + 1`.
    pub activations: Vec<Vec<(usize, f64)>>,
    pub final_potentials: Vec<f64>,
}

/// Runs `config.num_iters` steps from rest.
pub fn encode(
    signal: &[f64],
    dict: &StridedDictionary,
    gram: &GramTable,
    config: &LcaConfig,
) -> Result<EncodeResult> {
    run(signal, dict, gram, config, false).map(|(r, _)| r)
}

/// [`encode`] that also keeps every iteration's active set for [`crate::adaptation::backward`].
pub fn encode_traced(
    signal: &[f64],
    dict: &StridedDictionary,
    gram: &GramTable,
    config: &LcaConfig,
) -> Result<(EncodeResult, ForwardTrace)> {
    let (result, trace) = run(signal, dict, gram, config, true)?;
    Ok((result, trace.expect("trace requested")))
}

fn run(
    signal: &[f64],
    dict: &StridedDictionary,
    gram: &GramTable,
    config: &LcaConfig,
    keep_trace: bool,
) -> Result<(EncodeResult, Option<ForwardTrace>)> {
    config.validate()?;
    let projection = dict.analyze(signal)?;
    let n = dict.num_atoms();
    let len = signal.len() as f64;
    let lambda = config.threshold;

    let mut state = LcaState::rest(n);
    let mut active: Vec<(usize, f64)> = Vec::new();
    let mut inhibition = vec![0.0; n];
    let mut recon = vec![0.0; signal.len()];
    let mut energy_trace = Vec::with_capacity(config.num_iters);
    let mut mse_trace = Vec::with_capacity(config.num_iters);
    let mut spike_trace = Vec::with_capacity(config.num_iters);
    let mut history = Vec::with_capacity(if keep_trace { config.num_iters } else { 0 });

    for iteration in 1..=config.num_iters {
        if active.is_empty() {
            inhibition.iter_mut().for_each(|v| *v = 0.0);
        } else {
            dict.inhibit_into(gram, &active, &mut inhibition)?;
        }
        if !euler_update(
            &mut state.potentials,
            &mut state.activations,
            &projection,
            &inhibition,
            config.rate(),
            lambda,
        ) {
            return Err(Error::Divergence { iteration });
        }
        active = sparse(&state.activations);

        dict.synthesize_sparse_into(&active, &mut recon)?;
        let residual: f64 = recon
            .iter()
            .zip(signal)
            .map(|(r, s)| (r - s) * (r - s))
            .sum();
        energy_trace.push(0.5 * residual + sparsity_cost(active.len(), lambda));
        mse_trace.push(residual / len);
        spike_trace.push(active.len());
        if keep_trace {
            history.push(active.clone());
        }
    }

    let result = EncodeResult {
        spike_count: active.len(),
        mse: *mse_trace.last().expect("num_iters >= 1"),
        coefficients: state.activations,
        energy_trace,
        mse_trace,
        spike_trace,
    };
    let trace = keep_trace.then(|| ForwardTrace {
        activations: history,
        final_potentials: state.potentials,
    });
    Ok((result, trace))
}

/// One nonzero coefficient placed on the channel/time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub channel: usize,
    /// Start sample of the atom, `shift · stride`.
    pub time_index: usize,
    pub amplitude: f64,
}

/// Spikes sorted by channel, then time.
pub fn spikegram(result: &EncodeResult, dict: &StridedDictionary) -> Vec<Spike> {
    // channel-major flat layout is already (channel, time) order
    result
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(m, &amplitude)| {
            let (channel, shift) = dict.split_index(m);
            Spike {
                channel,
                time_index: shift * dict.stride(),
                amplitude,
            }
        })
        .collect()
}

/// Writes `channel,time_index,amplitude` rows.
pub fn write_spikegram_csv<W: Write>(mut out: W, spikes: &[Spike]) -> Result<()> {
    writeln!(out, "channel,time_index,amplitude")?;
    for s in spikes {
        writeln!(out, "{},{},{:e}", s.channel, s.time_index, s.amplitude)?;
    }
    Ok(())
}
