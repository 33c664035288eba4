//! Corrupting channel sums and watching strict decoding catch it.
//!
//! Run with `cargo run --example fault_injection`.

use cdma_bus::channel::{self, ChannelConfig, ChannelError};
use cdma_bus::codebook;
use cdma_bus::codec::CodecError;
use cdma_bus::simulator::{self, NullSink, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let book = codebook::walsh_codebook(8)?;
    let codes: Vec<_> = book.codes().iter().collect();
    let frame = channel::transmit(&[true, false, true, true, false, false, true, false], &codes)?;

    let mut config = ChannelConfig::new(8, 8);
    config.error_rate = 0.25;
    let (mut caught, mut rounds) = (0, 0);
    for seed in 0..200 {
        config.rng_seed = seed;
        let noisy = channel::inject_errors(&frame, &config);
        if noisy.sums == frame.sums {
            continue;
        }
        rounds += 1;
        if let Err(ChannelError::Decode {
            source: CodecError::IntegrityViolation { .. },
            ..
        }) = channel::receive(&noisy, &codes, true)
        {
            caught += 1;
        }
    }
    println!("{caught} of {rounds} corrupted frames raised an integrity violation");

    // The same faults inside a full bus simulation are counted, not fatal.
    let mut scenario = ScenarioConfig::new(8, 500);
    scenario.error_rate = 0.01;
    scenario.halt_on_mismatch = false;
    let m = simulator::run_scenario_with(&scenario, &mut NullSink)?;
    println!(
        "simulation at 1% sum errors: {} completed, {} integrity violations, {} decode errors, {} mismatches",
        m.transactions_completed, m.integrity_violations, m.decode_errors, m.differential_mismatches
    );
    Ok(())
}
