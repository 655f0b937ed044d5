//! Evaluation summaries: box statistics over a corpus, filter magnitude
//! responses, and channel-level inhibition weights.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{GramTable, StridedDictionary};
use crate::error::{Error, Result};
use crate::filterbank::{FilterSet, Filterbank};
use crate::lca::{encode, EncodeResult, LcaConfig};

/// Median, quartiles (linear interpolation) and data extrema as whiskers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub n: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput("box statistics need at least one value".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in box statistics input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(BoxStats {
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
        lo_whisker: sorted[0],
        hi_whisker: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

/// Per-channel magnitude in dB on a log-spaced frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResponse {
    pub freqs_hz: Vec<f64>,
    /// `magnitude_db[channel][grid point]`.
    pub magnitude_db: Vec<Vec<f64>>,
}

/// Log grid of `grid_size` points from `lo_hz` to `hi_hz` inclusive.
pub fn log_grid(lo_hz: f64, hi_hz: f64, grid_size: usize) -> Vec<f64> {
    let (a, b) = (lo_hz.ln(), hi_hz.ln());
    (0..grid_size)
        .map(|i| (a + (b - a) * i as f64 / (grid_size - 1) as f64).exp())
        .collect()
}

/// Magnitude response on a 50 Hz … fs/2 log grid.
///
/// Evaluated as the discrete-time Fourier transform of each impulse
/// response, i.e. the limit of an arbitrarily zero-padded DFT.
pub fn magnitude_response(filters: &FilterSet, sample_rate_hz: f64, grid_size: usize) -> Result<FilterResponse> {
    if grid_size < 2 {
        return Err(Error::InvalidConfig("grid needs at least two points".into()));
    }
    let freqs_hz = log_grid(50.0, sample_rate_hz / 2.0, grid_size);
    let magnitude_db = filters
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|h| freqs_hz.iter().map(|&f| dtft_db(h, f / sample_rate_hz)).collect())
        .collect();
    Ok(FilterResponse {
        freqs_hz,
        magnitude_db,
    })
}

fn dtft_db(h: &[f64], normalized_freq: f64) -> f64 {
    let w = 2.0 * PI * normalized_freq;
    let (step_re, step_im) = (w.cos(), -w.sin());
    let (mut re, mut im) = (0.0, 0.0);
    let (mut c, mut s) = (1.0, 0.0);
    for (n, &x) in h.iter().enumerate() {
        if n % 64 == 0 {
            // resynchronize the rotating phasor
            c = (w * n as f64).cos();
            s = -(w * n as f64).sin();
        }
        re += x * c;
        im += x * s;
        let next_c = c * step_re - s * step_im;
        s = c * step_im + s * step_re;
        c = next_c;
    }
    20.0 * (re.hypot(im)).max(1e-300).log10()
}

/// `k × k` channel inhibition weights: the largest |cross-correlation| over
/// all lags for each channel pair. The diagonal (a channel with itself) is
/// zero.
pub fn inhibition_matrix(gram: &GramTable) -> Vec<Vec<f64>> {
    let k = gram.num_channels();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        gram.lags(i, j).iter().fold(0.0f64, |m, v| m.max(v.abs()))
                    }
                })
                .collect()
        })
        .collect()
}

/// Mean weight over pairs more than one channel apart.
pub fn mean_off_adjacent(matrix: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i.abs_diff(j) > 1 {
                sum += v;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Largest weight over pairs more than one channel apart.
pub fn max_off_adjacent(matrix: &[Vec<f64>]) -> f64 {
    matrix
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(move |(j, _)| i.abs_diff(*j) > 1))
        .fold(0.0f64, |m, (_, &v)| m.max(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip: String,
    pub dict: String,
    pub mse: f64,
    pub spikes: usize,
    pub final_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictSummary {
    pub mse: BoxStats,
    pub spikes: BoxStats,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Clip-major, in input order.
    pub records: Vec<ClipRecord>,
    pub summary: BTreeMap<String, DictSummary>,
}

/// A named, prepared signal.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSignal {
    pub name: String,
    pub samples: Vec<f64>,
}

/// Encodes every clip with every dictionary and summarizes MSE and spike
/// counts per dictionary. Clips that fail to encode are counted, not fatal.
pub fn evaluate_corpus(
    dicts: &[(String, Filterbank)],
    corpus: &[NamedSignal],
    lca: &LcaConfig,
) -> Result<Evaluation> {
    if dicts.is_empty() || corpus.is_empty() {
        return Err(Error::EmptyInput("need at least one clip and one dictionary".into()));
    }
    let prepared = dicts
        .iter()
        .map(|(name, bank)| {
            let filters = std::sync::Arc::new(bank.filters()?);
            let gram = GramTable::new(&filters, bank.config.stride);
            Ok((name.clone(), filters, bank.config.stride, gram))
        })
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Vec<Result<EncodeResult>>> = corpus
        .par_iter()
        .map(|clip| {
            prepared
                .iter()
                .map(|(_, filters, stride, gram)| {
                    let dict = StridedDictionary::new(filters.clone(), *stride, clip.samples.len())?;
                    encode(&clip.samples, &dict, gram, lca)
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    let mut summary = BTreeMap::new();
    for (d, (name, ..)) in prepared.iter().enumerate() {
        let mut mse = Vec::new();
        let mut spikes = Vec::new();
        let mut failures = 0;
        for (clip, results) in corpus.iter().zip(&outcomes) {
            match &results[d] {
                Ok(r) => {
                    mse.push(r.mse);
                    spikes.push(r.spike_count as f64);
                }
                Err(e) => {
                    warn!("{} with {name}: {e}", clip.name);
                    failures += 1;
                }
            }
        }
        if mse.is_empty() {
            return Err(Error::AllSkipped);
        }
        summary.insert(
            name.clone(),
            DictSummary {
                mse: box_stats(&mse)?,
                spikes: box_stats(&spikes)?,
                failures,
            },
        );
    }
    for (clip, results) in corpus.iter().zip(&outcomes) {
        for ((name, ..), r) in prepared.iter().zip(results) {
            if let Ok(r) = r {
                records.push(ClipRecord {
                    clip: clip.name.clone(),
                    dict: name.clone(),
                    mse: r.mse,
                    spikes: r.spike_count,
                    final_energy: r.final_energy(),
                });
            }
        }
    }
    Ok(Evaluation { records, summary })
}

/// `clip,dict,mse,spikes,final_energy` rows.
pub fn write_clip_csv<W: Write>(mut out: W, records: &[ClipRecord]) -> Result<()> {
    writeln!(out, "clip,dict,mse,spikes,final_energy")?;
    for r in records {
        writeln!(out, "{},{},{:e},{},{:e}", r.clip, r.dict, r.mse, r.spikes, r.final_energy)?;
    }
    Ok(())
}

pub fn write_summary_json<W: Write>(out: W, summary: &BTreeMap<String, DictSummary>) -> Result<()> {
    serde_json::to_writer_pretty(out, summary)?;
    Ok(())
}

/// `iter,mse,spikes,energy` rows, iterations counted from 1.
pub fn write_trace_csv<W: Write>(mut out: W, result: &EncodeResult) -> Result<()> {
    writeln!(out, "iter,mse,spikes,energy")?;
    for (i, ((mse, spikes), energy)) in result
        .mse_trace
        .iter()
        .zip(&result.spike_trace)
        .zip(&result.energy_trace)
        .enumerate()
    {
        writeln!(out, "{},{:e},{},{:e}", i + 1, mse, spikes, energy)?;
    }
    Ok(())
}

/// Frequency column followed by one column per channel.
pub fn write_response_csv<W: Write>(mut out: W, response: &FilterResponse) -> Result<()> {
    let k = response.magnitude_db.len();
    let header: Vec<String> = std::iter::once("freq_hz".to_string())
        .chain((0..k).map(|i| format!("ch{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (g, f) in response.freqs_hz.iter().enumerate() {
        write!(out, "{f}")?;
        for row in &response.magnitude_db {
            write!(out, ",{}", row[g])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(mut out: W, matrix: &[Vec<f64>]) -> Result<()> {
    for row in matrix {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// First iteration (1-based) whose MSE is at or below `target`.
pub fn iterations_to_reach(mse_trace: &[f64], target: f64) -> Option<usize> {
    mse_trace.iter().position(|&m| m <= target).map(|i| i + 1)
}
