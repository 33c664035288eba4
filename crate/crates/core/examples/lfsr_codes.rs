//! LFSR code generation: periods, orbits and the parallel-window code book.
//!
//! Run with `cargo run --example lfsr_codes`.

use cdma_bus::codebook::{self, LfsrConfig, ShiftDirection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (width, taps) in [(3, vec![2, 3]), (4, vec![3, 4]), (8, vec![1, 2, 3, 7])] {
        let cfg = LfsrConfig::new(width, taps.iter().copied())?;
        let orbit = codebook::lfsr_orbit(&cfg);
        println!(
            "width {width} taps {taps:?}: period {} (tail {}), maximal would be {}",
            orbit.period,
            orbit.tail,
            (1usize << width) - 1
        );
    }

    let cfg = LfsrConfig::new(8, [1, 2, 3, 7])?;
    let book = codebook::lfsr_parallel_codebook(&cfg, 8)?;
    println!("\nparallel-window book, code k = register R(k+1) over steps 1..8:");
    print!("{}", book.to_text());
    let report = codebook::validate(&book);
    println!("validation: {report}");

    // Same register, shifting the other way.
    let mirrored = cfg.clone().with_direction(ShiftDirection::Mirrored);
    println!("mirrored period: {}", codebook::lfsr_period(&mirrored));
    Ok(())
}
