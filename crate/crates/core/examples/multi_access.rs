//! Several senders sharing one channel, each separated by its own code.
//!
//! Run with `cargo run --example multi_access`.

use cdma_bus::channel;
use cdma_bus::codebook;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let book = codebook::walsh_codebook(8)?;

    // Code 0 is all zeros; it only works while every other code is in use.
    let codes = channel::assign_codes(&book, 5, true)?;
    let indices: Vec<usize> = codes.iter().map(|c| c.index()).collect();
    println!("5 users on codes {indices:?}");

    let bits = [true, false, true, true, false];
    let frame = channel::transmit(&bits, &codes)?;
    println!("channel sums: {:?} (active {})", frame.sums, frame.active_count);

    let got = channel::receive(&frame, &codes, true)?;
    println!("sent     {bits:?}\nreceived {got:?}");
    assert_eq!(got, bits);

    // A receiver that miscounts the senders shifts every code-0 correlation
    // by S and loses that user's bit.
    let all: Vec<_> = book.codes().iter().collect();
    let mut bits = [true; 8];
    bits[0] = false;
    let frame = channel::transmit(&bits, &all)?;
    let mut miscounted = frame.clone();
    miscounted.active_count = 7;
    println!(
        "code 0 with the right count: {:?}; with one sender missing from the count: {:?}",
        channel::receive(&frame, &all[..1], false)?,
        channel::receive(&miscounted, &all[..1], false)
    );
    Ok(())
}
