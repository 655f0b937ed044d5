//! Follow reconstruction error, energy and spike count across LCA
//! iterations for one clip, for two step sizes.
//!
//! cargo run --release --example convergence_trace

use std::sync::Arc;

use spikegram::adaptation::make_synthetic_corpus;
use spikegram::audio_io::prepare;
use spikegram::metrics::iterations_to_reach;
use spikegram::{encode, Filterbank, FilterbankConfig, GramTable, LcaConfig, Preset, StridedDictionary};

fn main() -> spikegram::Result<()> {
    let cfg = FilterbankConfig::default();
    let signal = prepare(
        &make_synthetic_corpus(1, 5, cfg.sample_rate_hz, 0.25)?[0],
        cfg.filter_len,
        cfg.stride,
    )?;
    let filters = Arc::new(Filterbank::from_preset(cfg, Preset::Gammatone)?.filters()?);
    let gram = GramTable::new(&filters, cfg.stride);
    let dict = StridedDictionary::new(filters, cfg.stride, signal.len())?;

    let short = encode(&signal, &dict, &gram, &LcaConfig::default())?;
    let target = *short.mse_trace.last().unwrap();
    for dt in [1e-4, 5e-4] {
        let lca = LcaConfig {
            dt,
            num_iters: 512,
            ..LcaConfig::default()
        };
        let r = encode(&signal, &dict, &gram, &lca)?;
        println!("dt {dt:e}: reaches mse {target:.3e} after {:?} iterations", iterations_to_reach(&r.mse_trace, target));
        for it in [0, 7, 63, 255, 511] {
            println!(
                "  iter {:>3}: mse {:.3e}  energy {:.4}  spikes {}",
                it + 1,
                r.mse_trace[it],
                r.energy_trace[it],
                r.spike_trace[it]
            );
        }
    }
    Ok(())
}
