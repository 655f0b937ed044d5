//! Encode a WAV file (or a synthetic clip) into a spikegram with the
//! gammatone dictionary and print the first spikes.
//!
//! cargo run --release --example encode_spikegram -- [input.wav]

use std::sync::Arc;

use spikegram::adaptation::make_synthetic_corpus;
use spikegram::audio_io::{prepare, read_wav};
use spikegram::lca::spikegram;
use spikegram::{encode, Filterbank, FilterbankConfig, GramTable, LcaConfig, Preset, StridedDictionary};

fn main() -> spikegram::Result<()> {
    let cfg = FilterbankConfig::default();
    let raw = match std::env::args().nth(1) {
        Some(path) => read_wav(path, cfg.sample_rate_hz as u32)?.samples,
        None => make_synthetic_corpus(1, 3, cfg.sample_rate_hz, 0.25)?.remove(0),
    };
    let signal = prepare(&raw, cfg.filter_len, cfg.stride)?;

    let bank = Filterbank::from_preset(cfg, Preset::Gammatone)?;
    let filters = Arc::new(bank.filters()?);
    let gram = GramTable::new(&filters, cfg.stride);
    let dict = StridedDictionary::new(filters, cfg.stride, signal.len())?;
    let lca = LcaConfig::default();
    let result = encode(&signal, &dict, &gram, &lca)?;

    println!(
        "{} samples, {} atoms, {} spikes ({:.2} % active), mse {:.3e}",
        signal.len(),
        dict.num_atoms(),
        result.spike_count,
        100.0 * result.spike_count as f64 / dict.num_atoms() as f64,
        result.mse
    );
    println!("channel  time_index  amplitude");
    for spike in spikegram(&result, &dict).iter().take(12) {
        println!("{:>7}  {:>10}  {:>9.4}", spike.channel, spike.time_index, spike.amplitude);
    }
    Ok(())
}
