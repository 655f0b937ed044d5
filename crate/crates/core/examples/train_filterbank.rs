//! Adapt gammatone filters to a small synthetic corpus and print the
//! per-flush loss together with the learned channel parameters.
//!
//! cargo run --release --example train_filterbank -- [learning_rate]

use spikegram::adaptation::{make_synthetic_corpus, train, TrainConfig};
use spikegram::audio_io::prepare;
use spikegram::{Filterbank, FilterbankConfig, LcaConfig, Preset};

fn main() -> spikegram::Result<()> {
    let learning_rate = std::env::args()
        .nth(1)
        .map(|v| v.parse().expect("learning rate must be a number"))
        .unwrap_or(0.125);
    let cfg = FilterbankConfig::default();
    let corpus: Vec<Vec<f64>> = make_synthetic_corpus(16, 1, cfg.sample_rate_hz, 0.25)?
        .iter()
        .map(|clip| prepare(clip, cfg.filter_len, cfg.stride))
        .collect::<Result<_, _>>()?;

    let initial = Filterbank::from_preset(cfg, Preset::Gammatone)?;
    let config = TrainConfig {
        learning_rate,
        num_epochs: 2,
        ..TrainConfig::default()
    };
    let outcome = train(&corpus, &initial, &LcaConfig::default(), &config)?;

    for r in &outcome.log {
        println!(
            "flush {:>2} epoch {}  loss {:.4}  mse {:.3e}  spikes {:.1}",
            r.flush_index, r.epoch, r.mean_loss, r.mean_mse, r.mean_spikes
        );
    }
    println!("\nchannel  f_hz      order   bw_scale  chirp");
    for (i, p) in outcome.filterbank.channels.iter().enumerate() {
        println!(
            "{i:>7}  {:>8.1}  {:>6.3}  {:>8.3}  {:>6.3}",
            p.center_freq_hz, p.order, p.bandwidth_scale, p.chirp
        );
    }
    Ok(())
}
