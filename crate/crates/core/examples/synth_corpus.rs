//! Write a few synthetic clips as 16-bit WAV files.
//!
//! cargo run --release --example synth_corpus -- [out_dir]

use std::path::PathBuf;

use spikegram::adaptation::make_synthetic_corpus;
use spikegram::audio_io::{write_wav, AudioClip};

fn main() -> spikegram::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("spikegram_synth"));
    std::fs::create_dir_all(&dir)?;
    for (i, samples) in make_synthetic_corpus(4, 0, 16_000.0, 0.5)?.into_iter().enumerate() {
        let path = dir.join(format!("synth_{i:04}.wav"));
        let clip = AudioClip {
            samples,
            sample_rate_hz: 16_000,
            source_path: path.clone(),
        };
        let clipped = write_wav(&path, &clip)?;
        println!("{} ({} samples, {clipped} clipped)", path.display(), clip.samples.len());
    }
    Ok(())
}
