use std::io::Write;
use std::sync::Arc;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_update, backward, AdamState, ParamGradients};
use crate::dictionary::{padded_len, GramTable, StridedDictionary};
use crate::error::{Error, Result};
use crate::filterbank::{ChannelParams, FilterSet, Filterbank};
use crate::lca::{encode_traced, ForwardTrace, LcaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Signals encoded together before their losses are pushed to the buffer.
    pub batch_size: usize,
    pub num_epochs: usize,
    /// Losses stacked before gradients are propagated and one update fires.
    pub buffer_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0002,
            batch_size: 8,
            num_epochs: 10,
            buffer_size: 8,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 || self.buffer_size < 1 {
            return Err(Error::InvalidConfig(
                "batch_size and buffer_size must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One line of the training log, written after every buffer flush.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlushRecord {
    pub flush_index: usize,
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_mse: f64,
    pub mean_spikes: f64,
    /// Parameters after the update.
    pub params: Vec<ChannelParams>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub filterbank: Filterbank,
    pub log: Vec<FlushRecord>,
    pub adam: AdamState,
    pub skipped: usize,
    pub clamped: usize,
}

struct Buffered {
    signal: usize,
    loss: f64,
    mse: f64,
    spikes: usize,
    trace: ForwardTrace,
}

struct Trainer<'a> {
    signals: Vec<Vec<f64>>,
    lca: &'a LcaConfig,
    config: &'a TrainConfig,
    bank: Filterbank,
    adam: AdamState,
    filters: Arc<FilterSet>,
    gram: GramTable,
    buffer: Vec<Buffered>,
    log: Vec<FlushRecord>,
    skipped: usize,
    clamped: usize,
}

impl Trainer<'_> {
    fn refresh(&mut self) -> Result<()> {
        self.filters = Arc::new(self.bank.filters()?);
        self.gram = GramTable::new(&self.filters, self.bank.config.stride);
        Ok(())
    }

    fn dictionary(&self, len: usize) -> Result<StridedDictionary> {
        StridedDictionary::new(Arc::clone(&self.filters), self.bank.config.stride, len)
    }

    fn encode_group(&mut self, group: &[usize]) -> Result<usize> {
        let results: Vec<Result<Buffered>> = group
            .par_iter()
            .map(|&idx| {
                let signal = &self.signals[idx];
                let dict = self.dictionary(signal.len())?;
                let (result, trace) = encode_traced(signal, &dict, &self.gram, self.lca)?;
                Ok(Buffered {
                    signal: idx,
                    loss: result.final_energy(),
                    mse: result.mse,
                    spikes: result.spike_count,
                    trace,
                })
            })
            .collect();
        let mut encoded = 0;
        for (idx, r) in group.iter().zip(results) {
            match r {
                Ok(b) => {
                    self.buffer.push(b);
                    encoded += 1;
                }
                Err(e) => {
                    warn!("skipping signal {idx}: {e}");
                    self.skipped += 1;
                }
            }
        }
        Ok(encoded)
    }

    fn flush(&mut self, epoch: usize) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let filter_grads = self.bank.filters_with_grads()?;
        let per_signal: Vec<Result<ParamGradients>> = self
            .buffer
            .par_iter()
            .map(|b| {
                let signal = &self.signals[b.signal];
                let dict = self.dictionary(signal.len())?;
                backward(signal, &b.trace, &dict, &self.gram, &filter_grads, self.lca)
            })
            .collect();
        let count = self.buffer.len() as f64;
        let mut total = ParamGradients::zeros(self.bank.channels.len());
        for g in per_signal {
            total.add_assign(&g?);
        }
        total.scale(1.0 / count);
        self.clamped += adam_update(&mut self.bank, &total, &mut self.adam, self.config)?;

        let record = FlushRecord {
            flush_index: self.log.len(),
            epoch,
            mean_loss: self.buffer.iter().map(|b| b.loss).sum::<f64>() / count,
            mean_mse: self.buffer.iter().map(|b| b.mse).sum::<f64>() / count,
            mean_spikes: self.buffer.iter().map(|b| b.spikes as f64).sum::<f64>() / count,
            params: self.bank.channels.clone(),
        };
        info!(
            "flush {} (epoch {epoch}): loss {:.6} mse {:.3e} spikes {:.1}",
            record.flush_index, record.mean_loss, record.mean_mse, record.mean_spikes
        );
        self.log.push(record);
        self.buffer.clear();
        self.refresh()
    }
}

/// Adapts chirp, bandwidth scale and order of every channel.
///
/// Each epoch visits the signals in an order shuffled by `rng_seed`. Signals
/// are encoded in groups of at most `batch_size` with the current filters
/// and their losses and forward traces are stacked in a buffer. When
/// `buffer_size` losses are stacked (or the epoch ends) the gradients of all
/// of them are propagated through their unrolled dynamics, averaged, and one
/// Adam update is applied.
pub fn train(
    dataset: &[Vec<f64>],
    initial: &Filterbank,
    lca: &LcaConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    lca.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    let (fl, stride) = (initial.config.filter_len, initial.config.stride);
    let signals: Vec<Vec<f64>> = dataset
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.resize(padded_len(s.len(), fl, stride), 0.0);
            s
        })
        .collect();
    let filters = Arc::new(initial.filters()?);
    let gram = GramTable::new(&filters, stride);
    let mut trainer = Trainer {
        signals,
        lca,
        config,
        bank: initial.clone(),
        adam: AdamState::new(initial.channels.len()),
        filters,
        gram,
        buffer: Vec::new(),
        log: Vec::new(),
        skipped: 0,
        clamped: 0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.num_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut rest = batch;
            let mut encoded = 0;
            while !rest.is_empty() {
                // never let a group straddle an update
                let room = config.buffer_size - trainer.buffer.len();
                let (group, tail) = rest.split_at(room.min(rest.len()));
                encoded += trainer.encode_group(group)?;
                if trainer.buffer.len() >= config.buffer_size {
                    trainer.flush(epoch)?;
                }
                rest = tail;
            }
            if encoded == 0 {
                return Err(Error::AllSkipped);
            }
        }
        trainer.flush(epoch)?;
    }

    Ok(TrainOutcome {
        filterbank: trainer.bank,
        log: trainer.log,
        adam: trainer.adam,
        skipped: trainer.skipped,
        clamped: trainer.clamped,
    })
}

/// JSON-lines training log, one [`FlushRecord`] per line.
pub fn write_training_log<W: Write>(mut out: W, log: &[FlushRecord]) -> Result<()> {
    for record in log {
        serde_json::to_writer(&mut out, record)?;
        writeln!(out)?;
    }
    Ok(())
}
