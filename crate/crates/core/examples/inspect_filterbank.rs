//! Print the peak of each channel's magnitude response and the
//! channel-level inhibition matrix of the gammatone bank.
//!
//! cargo run --release --example inspect_filterbank

use spikegram::metrics::{inhibition_matrix, magnitude_response, max_off_adjacent, mean_off_adjacent};
use spikegram::{Filterbank, FilterbankConfig, GramTable, Preset};

fn main() -> spikegram::Result<()> {
    let cfg = FilterbankConfig::default();
    let filters = Filterbank::from_preset(cfg, Preset::Gammatone)?.filters()?;
    let response = magnitude_response(&filters, cfg.sample_rate_hz, 512)?;
    for (i, row) in response.magnitude_db.iter().enumerate() {
        let (peak, db) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, db)| (response.freqs_hz[j], *db))
            .unwrap();
        println!("channel {i:>2}: peak {peak:>7.1} Hz at {db:>6.2} dB");
    }

    let matrix = inhibition_matrix(&GramTable::new(&filters, cfg.stride));
    println!("\ninhibition (x100):");
    for row in &matrix {
        let cells: Vec<String> = row.iter().map(|v| format!("{:>4.0}", 100.0 * v)).collect();
        println!("{}", cells.join(""));
    }
    println!(
        "off-adjacent: mean {:.4}, max {:.4}",
        mean_off_adjacent(&matrix),
        max_off_adjacent(&matrix)
    );
    Ok(())
}
