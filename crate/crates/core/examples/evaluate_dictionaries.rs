//! Compare gammatone and compressive gammachirp dictionaries on held-out
//! synthetic clips: box statistics of MSE and spike counts.
//!
//! cargo run --release --example evaluate_dictionaries

use spikegram::adaptation::make_synthetic_corpus;
use spikegram::audio_io::prepare;
use spikegram::metrics::{evaluate_corpus, NamedSignal};
use spikegram::{Filterbank, FilterbankConfig, LcaConfig, Preset};

fn main() -> spikegram::Result<()> {
    let cfg = FilterbankConfig::default();
    let clips = make_synthetic_corpus(8, 2, cfg.sample_rate_hz, 0.25)?
        .iter()
        .enumerate()
        .map(|(i, clip)| {
            Ok(NamedSignal {
                name: format!("clip_{i}"),
                samples: prepare(clip, cfg.filter_len, cfg.stride)?,
            })
        })
        .collect::<spikegram::Result<Vec<_>>>()?;
    let dicts = [Preset::Gammatone, Preset::CompressiveGammachirp]
        .into_iter()
        .map(|p| Ok((p.name().to_string(), Filterbank::from_preset(cfg, p)?)))
        .collect::<spikegram::Result<Vec<_>>>()?;

    let eval = evaluate_corpus(&dicts, &clips, &LcaConfig::default())?;
    for (name, s) in &eval.summary {
        println!(
            "{name:>4}: mse median {:.3e} [q1 {:.3e}, q3 {:.3e}]  spikes median {} [{} .. {}]",
            s.mse.median, s.mse.q1, s.mse.q3, s.spikes.median, s.spikes.lo_whisker, s.spikes.hi_whisker
        );
    }
    Ok(())
}
