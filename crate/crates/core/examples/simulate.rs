//! A complete scenario: sequential and concurrent modes, metrics and a trace.
//!
//! Run with `cargo run --example simulate [scenario.toml]`; without an
//! argument the bundled `examples/scenario.toml` is used.

use std::path::PathBuf;

use cdma_bus::cli;
use cdma_bus::simulator::{self, AccessMode, JsonLinesSink};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/scenario.toml"));
    let mut config = cli::parse_config(&path)?;
    println!("scenario {}: {} transactions, S={}", path.display(), config.transactions, config.code_length);

    let trace_path = std::env::temp_dir().join("cdma-bus-trace.jsonl");
    let mut sink = JsonLinesSink::new(std::io::BufWriter::new(std::fs::File::create(&trace_path)?));
    let sequential = simulator::run_scenario_with(&config, &mut sink)?;
    drop(sink);
    println!("sequential metrics:\n{}", sequential.to_json());
    println!("trace written to {}", trace_path.display());

    config.mode = AccessMode::Concurrent;
    config.masters = config.masters.max(4);
    let concurrent = simulator::run_scenario_with(&config, &mut simulator::NullSink)?;
    println!(
        "{} masters concurrently: {} cycles on {} lines (sequential took {} cycles on {} lines)",
        config.masters,
        concurrent.total_chip_cycles,
        concurrent.lines_used,
        sequential.total_chip_cycles,
        sequential.lines_used
    );
    Ok(())
}
