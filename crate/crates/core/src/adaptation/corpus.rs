//! Deterministic synthetic training/evaluation audio.
//!
//! Each clip mixes gammachirp-shaped bursts with positive chirp and broader
//! than gammatone bandwidth, one damped harmonic complex, one linear
//! frequency sweep, and low-level band-limited noise, all centered below
//! 2.4 kHz. The mix is then passed through a windowed-sinc low-pass so the
//! skirts of the broad bursts do not reach the top octave. Clip `i` depends
//! only on `(seed, i)`.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filterbank::erb;

const MAX_COMPONENT_HZ: f64 = 2_400.0;
const EVENT_SPAN_S: f64 = 0.08;
const TAPER_S: f64 = 0.005;
const LOWPASS_HZ: f64 = 3_000.0;
const LOWPASS_TAPS: usize = 255;

/// Blackman-windowed sinc with unit DC gain.
fn lowpass_kernel(cutoff_hz: f64, fs: f64) -> Vec<f64> {
    let m = (LOWPASS_TAPS - 1) as f64;
    let wc = 2.0 * cutoff_hz / fs;
    let mut h: Vec<f64> = (0..LOWPASS_TAPS)
        .map(|n| {
            let x = n as f64 - m / 2.0;
            let sinc = if x == 0.0 { wc } else { (PI * wc * x).sin() / (PI * x) };
            let w = 0.42 - 0.5 * (2.0 * PI * n as f64 / m).cos() + 0.08 * (4.0 * PI * n as f64 / m).cos();
            sinc * w
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Full linear convolution.
fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            out[i..i + h.len()].iter_mut().zip(h).for_each(|(o, &hk)| *o += xi * hk);
        }
    }
    out
}

fn add_gammachirp(out: &mut [f64], fs: f64, onset: usize, freq: f64, b: f64, c: f64, amp: f64) {
    let decay = 2.0 * PI * b * erb(freq).expect("positive frequency");
    for (n, v) in out[onset..].iter_mut().enumerate() {
        let t = (n + 1) as f64 / fs;
        let env = (3.0 * t.ln() - decay * t).exp();
        if env < 1e-30 && t > 3.0 / decay {
            break;
        }
        *v += amp * env * (2.0 * PI * freq * t + c * t.ln()).cos();
    }
}

fn peak_normalize(out: &mut [f64]) {
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
}

fn clip(rng: &mut ChaCha8Rng, fs: f64, len: usize) -> Vec<f64> {
    let mut signal = vec![0.0; len];
    let latest_onset = len.saturating_sub((EVENT_SPAN_S * fs) as usize).max(1);
    let mut component = vec![0.0; len];

    let add = |signal: &mut Vec<f64>, component: &mut Vec<f64>, amp: f64| {
        peak_normalize(component);
        signal.iter_mut().zip(component.iter()).for_each(|(s, c)| *s += amp * c);
        component.iter_mut().for_each(|v| *v = 0.0);
    };

    // chirped bursts
    for _ in 0..rng.gen_range(2..=4) {
        let freq = (rng.gen_range(300f64.ln()..MAX_COMPONENT_HZ.ln())).exp();
        let onset = rng.gen_range(0..latest_onset);
        add_gammachirp(
            &mut component,
            fs,
            onset,
            freq,
            rng.gen_range(1.2..2.0),
            rng.gen_range(0.5..2.5),
            1.0,
        );
        let amp = rng.gen_range(0.3..1.0);
        add(&mut signal, &mut component, amp);
    }

    // damped harmonic complex sharing one onset, chirp and bandwidth
    let f0 = rng.gen_range(110.0..220.0);
    let onset = rng.gen_range(0..latest_onset);
    let (b, c) = (rng.gen_range(1.2..2.0), rng.gen_range(0.5..2.5));
    let mut h = 2.0;
    while h * f0 <= 2_000.0 {
        add_gammachirp(&mut component, fs, onset, h * f0, b, c, 1.0 / h);
        h += 1.0;
    }
    let amp = rng.gen_range(0.4..1.0);
    add(&mut signal, &mut component, amp);

    // raised-cosine linear sweep
    let (f_a, f_b) = (rng.gen_range(300.0..800.0), rng.gen_range(1_200.0..MAX_COMPONENT_HZ));
    let (f_start, f_end) = if rng.gen_bool(0.5) { (f_a, f_b) } else { (f_b, f_a) };
    let span = rng.gen_range(0.04..EVENT_SPAN_S);
    let span_len = ((span * fs) as usize).min(len);
    let onset = rng.gen_range(0..=(len - span_len));
    for n in 0..span_len {
        let tau = n as f64 / fs;
        let phase = 2.0 * PI * (f_start * tau + 0.5 * (f_end - f_start) / span * tau * tau);
        let window = 0.5 - 0.5 * (2.0 * PI * n as f64 / span_len as f64).cos();
        component[onset + n] = window * phase.sin();
    }
    let amp = rng.gen_range(0.3..0.6);
    add(&mut signal, &mut component, amp);

    // low band-limited noise as a sum of random partials
    let partials = 24;
    for _ in 0..partials {
        let f = rng.gen_range(150.0..MAX_COMPONENT_HZ);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for (n, v) in component.iter_mut().enumerate() {
            *v += (2.0 * PI * f * n as f64 / fs + phase).sin();
        }
    }
    add(&mut signal, &mut component, 0.01);

    let taper = ((TAPER_S * fs) as usize).min(len / 2);
    for n in 0..taper {
        let w = 0.5 - 0.5 * (PI * n as f64 / taper as f64).cos();
        signal[n] *= w;
        signal[len - 1 - n] *= w;
    }
    signal
}

/// `count` peak-normalized clips of `duration_s` seconds.
pub fn make_synthetic_corpus(
    count: usize,
    seed: u64,
    sample_rate_hz: f64,
    duration_s: f64,
) -> Result<Vec<Vec<f64>>> {
    if count < 1 {
        return Err(Error::EmptyInput("corpus size must be at least 1".into()));
    }
    if !(sample_rate_hz > 2.0 * MAX_COMPONENT_HZ * 1.25) {
        return Err(Error::InvalidConfig(format!(
            "sample rate {sample_rate_hz} Hz too low for the synthetic corpus"
        )));
    }
    let len = (duration_s * sample_rate_hz).round() as usize;
    if len < (EVENT_SPAN_S * sample_rate_hz) as usize * 2 + LOWPASS_TAPS {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s too short for the synthetic corpus"
        )));
    }
    let kernel = lowpass_kernel(LOWPASS_HZ, sample_rate_hz);
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            // the full convolution restores the requested length
            let raw = clip(&mut rng, sample_rate_hz, len + 1 - LOWPASS_TAPS);
            let mut s = convolve(&raw, &kernel);
            peak_normalize(&mut s);
            s
        })
        .collect())
}
