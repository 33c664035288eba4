//! Line counts for the coded bus against the plain n-bit bus.
//!
//! Run with `cargo run --example table1`.

use cdma_bus::simulator;

fn main() {
    let table = simulator::table1_report();
    print!("{table}");
    println!("\nreduction for n=32:");
    for s in [2, 4, 8, 16, 32] {
        let lines = cdma_bus::bus_width(32, s).expect("S divides 32");
        println!("  S={s:>2}: {lines:>2} lines, {:>5.1}%", 100.0 * (1.0 - lines as f64 / 32.0));
    }
}
