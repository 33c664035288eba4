//! Encoding a 32-bit word into per-batch sum frames and decoding it back.
//!
//! Run with `cargo run --example walsh_codec`.

use cdma_bus::codebook;
use cdma_bus::codec::{self, CodecError, SumFrame};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let book = codebook::walsh_codebook(8)?;
    println!("Walsh(8) code book:\n{}", book.to_text());

    let word = 0xDEAD_BEEF;
    let frame = codec::encode_word(word, 32, &book)?;
    for (i, group) in frame.groups().iter().enumerate() {
        println!("batch {i}: sums {:?}", group.sums());
    }
    println!(
        "{} lines instead of 32 ({} per batch)",
        codec::bus_width(32, 8)?,
        codec::sum_line_width(8)
    );

    let first = &frame.groups()[0];
    let corr: Vec<i64> = book.codes().iter().map(|c| codec::correlate(first, c, 8)).collect();
    println!("batch 0 correlations: {corr:?}");

    let back = codec::decode_word(&frame, &book, true)?;
    assert_eq!(back, word);
    println!("decoded {back:#010X}");

    // One bad sum: strict decoding refuses it instead of guessing.
    let mut sums = first.sums().to_vec();
    sums[3] = (sums[3] + 1) % 9;
    match codec::decode_group(&SumFrame::new(sums)?, &book, true) {
        Err(CodecError::IntegrityViolation { bit, correlation, expected }) => {
            println!("corrupted batch: bit {bit} correlates to {correlation}, expected +/-{expected}")
        }
        other => println!("corrupted batch: {other:?}"),
    }
    Ok(())
}
