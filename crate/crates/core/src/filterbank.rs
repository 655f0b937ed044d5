//! Sampled gammachirp impulse responses.
//!
//! Each channel is
//!
//! ```text
//! g(t) = t^(l-1) · exp(-2π·b·ERB(f)·t) · cos(2π·f·t + c·ln t)
//! ```
//!
//! sampled at `t_n = (n + 1) / fs` and scaled to unit ℓ2 norm. The chirp `c`,
//! bandwidth scale `b` and order `l` are learnable; `f` stays fixed. A chirp of
//! zero gives the plain gammatone.
//!
//! Partial derivatives are returned for the normalized samples, so they are
//! tangent to the unit sphere (orthogonal to the samples themselves).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ERB_INTERCEPT_HZ: f64 = 24.7;
const ERB_SLOPE: f64 = 0.108;
const MIN_NORM: f64 = 1e-300;

/// Equivalent rectangular bandwidth in Hz at `freq_hz`.
pub fn erb(freq_hz: f64) -> Result<f64> {
    if !(freq_hz >= 0.0) {
        return Err(Error::Domain(format!("ERB of negative frequency {freq_hz}")));
    }
    Ok(ERB_INTERCEPT_HZ + ERB_SLOPE * freq_hz)
}

/// Hz to ERB-rate (number of ERBs below `freq_hz`).
pub fn hz_to_erb_rate(freq_hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * freq_hz).log10()
}

pub fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 0.00437
}

/// Per-channel gammachirp parameters.
///
/// Serialized with the short names `f`, `l`, `b`, `c` used by parameter
/// files and training logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    #[serde(rename = "f")]
    pub center_freq_hz: f64,
    #[serde(rename = "l")]
    pub order: f64,
    #[serde(rename = "b")]
    pub bandwidth_scale: f64,
    #[serde(rename = "c")]
    pub chirp: f64,
}

impl ChannelParams {
    pub fn new(center_freq_hz: f64, order: f64, bandwidth_scale: f64, chirp: f64) -> Self {
        Self {
            center_freq_hz,
            order,
            bandwidth_scale,
            chirp,
        }
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let p = self;
        if !(p.center_freq_hz > 0.0 && p.center_freq_hz < sample_rate_hz / 2.0) {
            return Err(Error::InvalidParams(format!(
                "center frequency {} Hz outside (0, {})",
                p.center_freq_hz,
                sample_rate_hz / 2.0
            )));
        }
        if !(p.order > 1.0) {
            return Err(Error::InvalidParams(format!("order {} must exceed 1", p.order)));
        }
        if !(p.bandwidth_scale > 0.0) {
            return Err(Error::InvalidParams(format!(
                "bandwidth scale {} must be positive",
                p.bandwidth_scale
            )));
        }
        if !p.chirp.is_finite() {
            return Err(Error::InvalidParams(format!("chirp {} is not finite", p.chirp)));
        }
        Ok(())
    }
}

/// Fixed-parameter filter families used to initialize a bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// c = 0, b = 1, l = 4.
    Gammatone,
    /// Compressive gammachirp: c = 0.979, b = 1.14, l = 4.
    CompressiveGammachirp,
}

impl Preset {
    pub fn channel(self, center_freq_hz: f64) -> ChannelParams {
        match self {
            Preset::Gammatone => ChannelParams::new(center_freq_hz, 4.0, 1.0, 0.0),
            Preset::CompressiveGammachirp => ChannelParams::new(center_freq_hz, 4.0, 1.14, 0.979),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Gammatone => "gt",
            Preset::CompressiveGammachirp => "cgc",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gt" | "gammatone" => Ok(Preset::Gammatone),
            "cgc" | "gammachirp" => Ok(Preset::CompressiveGammachirp),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

/// Shape of the filterbank and of the strided dictionary built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterbankConfig {
    pub num_channels: usize,
    pub filter_len: usize,
    pub stride: usize,
    pub sample_rate_hz: f64,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
}

impl Default for FilterbankConfig {
    /// 16 channels of 1024 samples, stride 10, at 16 kHz. The range puts
    /// channel 4 at 734.4 Hz.
    fn default() -> Self {
        Self {
            num_channels: 16,
            filter_len: 1024,
            stride: 10,
            sample_rate_hz: 16_000.0,
            freq_min_hz: 234.0,
            freq_max_hz: 7_000.0,
        }
    }
}

impl FilterbankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_channels < 1 {
            return Err(Error::InvalidConfig("num_channels must be at least 1".into()));
        }
        if self.filter_len < 2 {
            return Err(Error::InvalidConfig("filter_len must be at least 2".into()));
        }
        if self.stride < 1 || self.stride > self.filter_len {
            return Err(Error::InvalidConfig(format!(
                "stride {} outside [1, filter_len = {}]",
                self.stride, self.filter_len
            )));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.freq_min_hz > 0.0
            && self.freq_min_hz < self.freq_max_hz
            && self.freq_max_hz < nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "frequency range [{}, {}] must satisfy 0 < min < max < {nyquist}",
                self.freq_min_hz, self.freq_max_hz
            )));
        }
        Ok(())
    }
}

/// Channel center frequencies equally spaced on the ERB-rate scale.
pub fn center_frequencies(config: &FilterbankConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let k = config.num_channels;
    if k == 1 {
        return Ok(vec![config.freq_min_hz]);
    }
    let lo = hz_to_erb_rate(config.freq_min_hz);
    let hi = hz_to_erb_rate(config.freq_max_hz);
    let step = (hi - lo) / (k - 1) as f64;
    let mut freqs: Vec<f64> = (0..k).map(|i| erb_rate_to_hz(lo + step * i as f64)).collect();
    // pin endpoints against round-off in the log/exp round trip
    freqs[0] = config.freq_min_hz;
    freqs[k - 1] = config.freq_max_hz;
    Ok(freqs)
}

/// One synthesized, unit-norm impulse response.
#[derive(Debug, Clone)]
pub struct Filter {
    pub samples: Vec<f64>,
    pub norm_factor: f64,
}

/// Normalized impulse response together with its partial derivatives.
#[derive(Debug, Clone)]
pub struct FilterGrads {
    pub samples: Vec<f64>,
    pub norm_factor: f64,
    pub d_chirp: Vec<f64>,
    pub d_bandwidth: Vec<f64>,
    pub d_order: Vec<f64>,
}

struct RawSample {
    value: f64,
    envelope: f64,
    phase: f64,
    ln_t: f64,
    t: f64,
}

fn raw_samples(
    params: &ChannelParams,
    config: &FilterbankConfig,
) -> Result<impl Iterator<Item = RawSample>> {
    params.validate(config.sample_rate_hz)?;
    let fs = config.sample_rate_hz;
    let f = params.center_freq_hz;
    let decay = 2.0 * PI * params.bandwidth_scale * erb(f)?;
    let (l, c) = (params.order, params.chirp);
    Ok((0..config.filter_len).map(move |n| {
        let t = (n + 1) as f64 / fs;
        let ln_t = t.ln();
        let envelope = ((l - 1.0) * ln_t - decay * t).exp();
        let phase = 2.0 * PI * f * t + c * ln_t;
        RawSample {
            value: envelope * phase.cos(),
            envelope,
            phase,
            ln_t,
            t,
        }
    }))
}

fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Samples one channel and normalizes it to unit ℓ2 norm.
pub fn synthesize(params: &ChannelParams, config: &FilterbankConfig) -> Result<Filter> {
    let mut samples: Vec<f64> = raw_samples(params, config)?.map(|s| s.value).collect();
    let norm = l2_norm(&samples);
    if !(norm >= MIN_NORM) || !norm.is_finite() {
        return Err(Error::DegenerateFilter { norm });
    }
    samples.iter_mut().for_each(|v| *v /= norm);
    Ok(Filter {
        samples,
        norm_factor: norm,
    })
}

/// Like [`synthesize`], plus derivatives of the normalized samples with
/// respect to chirp, bandwidth scale and order.
pub fn synthesize_with_grads(
    params: &ChannelParams,
    config: &FilterbankConfig,
) -> Result<FilterGrads> {
    let erb_f = erb(params.center_freq_hz)?;
    let len = config.filter_len;
    let mut g = Vec::with_capacity(len);
    let mut dc = Vec::with_capacity(len);
    let mut db = Vec::with_capacity(len);
    let mut dl = Vec::with_capacity(len);
    for s in raw_samples(params, config)? {
        g.push(s.value);
        dc.push(-s.envelope * s.phase.sin() * s.ln_t);
        db.push(-2.0 * PI * erb_f * s.t * s.value);
        dl.push(s.ln_t * s.value);
    }
    let norm = l2_norm(&g);
    if !(norm >= MIN_NORM) || !norm.is_finite() {
        return Err(Error::DegenerateFilter { norm });
    }
    g.iter_mut().for_each(|v| *v /= norm);
    // d(g/|g|) = (dg - h <h, dg>) / |g|
    for d in [&mut dc, &mut db, &mut dl] {
        let radial: f64 = g.iter().zip(d.iter()).map(|(h, v)| h * v).sum();
        for (v, h) in d.iter_mut().zip(&g) {
            *v = (*v - h * radial) / norm;
        }
    }
    Ok(FilterGrads {
        samples: g,
        norm_factor: norm,
        d_chirp: dc,
        d_bandwidth: db,
        d_order: dl,
    })
}

/// A bank of unit-norm impulse responses, stored row-major (`k × F_l`).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSet {
    samples: Vec<f64>,
    norm_factors: Vec<f64>,
    num_channels: usize,
    filter_len: usize,
}

impl FilterSet {
    /// Normalizes arbitrary rows; used for hand-built dictionaries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_channels = rows.len();
        if num_channels == 0 {
            return Err(Error::EmptyInput("filter set needs at least one row".into()));
        }
        let filter_len = rows[0].len();
        let mut samples = Vec::with_capacity(num_channels * filter_len);
        let mut norm_factors = Vec::with_capacity(num_channels);
        for row in rows {
            if row.len() != filter_len {
                return Err(Error::LengthMismatch {
                    expected: filter_len,
                    actual: row.len(),
                });
            }
            let norm = l2_norm(&row);
            if !(norm >= MIN_NORM) || !norm.is_finite() {
                return Err(Error::DegenerateFilter { norm });
            }
            samples.extend(row.iter().map(|v| v / norm));
            norm_factors.push(norm);
        }
        Ok(Self {
            samples,
            norm_factors,
            num_channels,
            filter_len,
        })
    }

    fn from_filters(filters: Vec<Filter>, filter_len: usize) -> Self {
        let num_channels = filters.len();
        let mut samples = Vec::with_capacity(num_channels * filter_len);
        let mut norm_factors = Vec::with_capacity(num_channels);
        for f in filters {
            samples.extend_from_slice(&f.samples);
            norm_factors.push(f.norm_factor);
        }
        Self {
            samples,
            norm_factors,
            num_channels,
            filter_len,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn filter(&self, channel: usize) -> &[f64] {
        let start = channel * self.filter_len;
        &self.samples[start..start + self.filter_len]
    }

    pub fn norm_factors(&self) -> &[f64] {
        &self.norm_factors
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.filter_len)
    }
}

/// Learnable filterbank state: the shape configuration plus one
/// [`ChannelParams`] per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filterbank {
    pub config: FilterbankConfig,
    pub channels: Vec<ChannelParams>,
}

impl Filterbank {
    pub fn new(config: FilterbankConfig, channels: Vec<ChannelParams>) -> Result<Self> {
        config.validate()?;
        if channels.len() != config.num_channels {
            return Err(Error::LengthMismatch {
                expected: config.num_channels,
                actual: channels.len(),
            });
        }
        for ch in &channels {
            ch.validate(config.sample_rate_hz)?;
        }
        Ok(Self { config, channels })
    }

    /// Uniform preset over ERB-rate spaced channels.
    pub fn from_preset(config: FilterbankConfig, preset: Preset) -> Result<Self> {
        let channels = center_frequencies(&config)?
            .into_iter()
            .map(|f| preset.channel(f))
            .collect();
        Self::new(config, channels)
    }

    pub fn filters(&self) -> Result<FilterSet> {
        let filters = self
            .channels
            .iter()
            .map(|p| synthesize(p, &self.config))
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterSet::from_filters(filters, self.config.filter_len))
    }

    pub fn filters_with_grads(&self) -> Result<Vec<FilterGrads>> {
        self.channels
            .iter()
            .map(|p| synthesize_with_grads(p, &self.config))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: Filterbank = serde_json::from_str(text)?;
        Self::new(bank.config, bank.channels)
    }
}
