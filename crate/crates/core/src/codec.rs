//! XOR-spread-and-sum encoding and correlation decoding.
//!
//! A group of `S` data bits is spread so that bit `k` is XORed with every
//! chip of code `k`; the `S` spread streams are then summed chip by chip.
//! The channel carries those per-chip sums, each on `⌈log2(S+1)⌉` lines.

use thiserror::Error;

use crate::codebook::{CodeBook, SpreadingCode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("incompatible geometry: word width {word_width}, code length {code_length}")]
    IncompatibleGeometry { word_width: usize, code_length: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    Geometry { expected: usize, actual: usize },
    #[error("ambiguous bit {0}: zero correlation")]
    AmbiguousBit(usize),
    #[error("integrity violation on bit {bit}: correlation {correlation}, expected ±{expected}")]
    IntegrityViolation {
        bit: usize,
        correlation: i64,
        expected: i64,
    },
    #[error("value {value} outside [0, {max}]")]
    Range { value: i64, max: i64 },
    #[error("word {word:#x} does not fit in {width} bits")]
    WordOverflow { word: u64, width: usize },
    #[error("batch {batch}: {source}")]
    InBatch {
        batch: usize,
        #[source]
        source: Box<CodecError>,
    },
}

impl CodecError {
    /// Strips batch tags down to the underlying error.
    pub fn root(&self) -> &CodecError {
        match self {
            CodecError::InBatch { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Lines needed to carry one per-chip sum for a group of `code_length` bits.
pub fn sum_line_width(code_length: usize) -> usize {
    (usize::BITS - code_length.leading_zeros()) as usize
}

/// Number of coded lines that replace an uncoded `word_width`-bit bus.
pub fn bus_width(word_width: usize, code_length: usize) -> Result<usize, CodecError> {
    if code_length < 2 || code_length > word_width || !word_width.is_multiple_of(code_length) {
        return Err(CodecError::IncompatibleGeometry {
            word_width,
            code_length,
        });
    }
    Ok(word_width / code_length * sum_line_width(code_length))
}

/// Per-chip sums for one group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SumFrame {
    sums: Vec<u32>,
}

impl SumFrame {
    pub fn new(sums: Vec<u32>) -> Result<Self, CodecError> {
        let max = sums.len() as u32;
        if let Some(&bad) = sums.iter().find(|&&v| v > max) {
            return Err(CodecError::Range {
                value: bad as i64,
                max: max as i64,
            });
        }
        Ok(Self { sums })
    }

    pub fn sums(&self) -> &[u32] {
        &self.sums
    }

    pub fn group_size(&self) -> usize {
        self.sums.len()
    }
}

/// A word as parallel groups, group 0 holding bits `0..S`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordFrame {
    groups: Vec<SumFrame>,
    word_width: usize,
}

impl WordFrame {
    pub fn new(groups: Vec<SumFrame>) -> Result<Self, CodecError> {
        let size = groups.first().map_or(0, SumFrame::group_size);
        if let Some(g) = groups.iter().find(|g| g.group_size() != size) {
            return Err(CodecError::Geometry {
                expected: size,
                actual: g.group_size(),
            });
        }
        Ok(Self {
            word_width: size * groups.len(),
            groups,
        })
    }

    pub fn groups(&self) -> &[SumFrame] {
        &self.groups
    }

    pub fn word_width(&self) -> usize {
        self.word_width
    }

    pub fn group_size(&self) -> usize {
        self.groups.first().map_or(0, SumFrame::group_size)
    }
}

fn check_len(expected: usize, actual: usize) -> Result<(), CodecError> {
    if expected == actual {
        Ok(())
    } else {
        Err(CodecError::Geometry { expected, actual })
    }
}

/// `sums[t] = Σ_k bits[k] ⊕ codes[k][t]`.
pub fn encode_group(bits: &[bool], book: &CodeBook) -> Result<SumFrame, CodecError> {
    let s = book.length();
    check_len(s, bits.len())?;
    let sums = (0..s)
        .map(|t| {
            bits.iter()
                .zip(book.codes())
                .filter(|(&d, code)| d ^ code.chips()[t])
                .count() as u32
        })
        .collect();
    Ok(SumFrame { sums })
}

/// Correlator over raw sums: chip `1` contributes `N - 2P`, chip `0`
/// contributes `2P - N`.
pub(crate) fn correlate_sums(sums: &[u32], chips: &[bool], users: usize) -> i64 {
    assert_eq!(sums.len(), chips.len(), "frame and code lengths differ");
    let n = users as i64;
    sums.iter()
        .zip(chips)
        .map(|(&p, &chip)| {
            let centered = 2 * p as i64 - n;
            if chip {
                -centered
            } else {
                centered
            }
        })
        .sum()
}

/// Despreads `frame` against one code assuming `users` concurrent senders.
///
/// Panics if the frame and code lengths differ.
pub fn correlate(frame: &SumFrame, code: &SpreadingCode, users: usize) -> i64 {
    correlate_sums(&frame.sums, code.chips(), users)
}

/// Maps a received sum back to its bipolar value, `2P - N`.
pub fn reconstruct_bipolar(sum: i64, users: i64) -> Result<i64, CodecError> {
    if sum < 0 || sum > users {
        return Err(CodecError::Range {
            value: sum,
            max: users,
        });
    }
    Ok(2 * sum - users)
}

/// Hard decision on a list of correlations.
///
/// In strict mode every `|corr|` must equal `expected`; that check runs
/// over all bits before the zero test so corruption is always reported as
/// an integrity violation.
pub(crate) fn decide(correlations: &[i64], expected: i64, strict: bool) -> Result<Vec<bool>, CodecError> {
    if strict {
        if let Some((bit, &correlation)) = correlations
            .iter()
            .enumerate()
            .find(|(_, c)| c.abs() != expected)
        {
            return Err(CodecError::IntegrityViolation {
                bit,
                correlation,
                expected,
            });
        }
    }
    correlations
        .iter()
        .enumerate()
        .map(|(k, &c)| match c {
            0 => Err(CodecError::AmbiguousBit(k)),
            c => Ok(c > 0),
        })
        .collect()
}

/// Recovers the `S` data bits of one group, with `N` bound to `S`.
pub fn decode_group(frame: &SumFrame, book: &CodeBook, strict: bool) -> Result<Vec<bool>, CodecError> {
    let s = book.length();
    check_len(s, frame.group_size())?;
    let correlations: Vec<i64> = book
        .codes()
        .iter()
        .map(|code| correlate_sums(&frame.sums, code.chips(), s))
        .collect();
    decide(&correlations, s as i64, strict)
}

/// Splits a `word_width`-bit word into batches of `S` bits, lowest bits
/// first, and encodes each with the same book.
pub fn encode_word(word: u64, word_width: usize, book: &CodeBook) -> Result<WordFrame, CodecError> {
    let s = book.length();
    bus_width(word_width, s)?;
    if word_width > 64 || (word_width < 64 && word >> word_width != 0) {
        return Err(CodecError::WordOverflow {
            word,
            width: word_width,
        });
    }
    let groups = (0..word_width / s)
        .map(|batch| {
            let bits: Vec<bool> = (0..s).map(|k| (word >> (batch * s + k)) & 1 == 1).collect();
            encode_group(&bits, book)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(WordFrame {
        groups,
        word_width,
    })
}

/// Decodes every batch and reassembles the word in batch order.
pub fn decode_word(frame: &WordFrame, book: &CodeBook, strict: bool) -> Result<u64, CodecError> {
    bus_width(frame.word_width, book.length())?;
    if frame.word_width > 64 {
        return Err(CodecError::IncompatibleGeometry {
            word_width: frame.word_width,
            code_length: book.length(),
        });
    }
    let s = book.length();
    let mut word = 0u64;
    for (batch, group) in frame.groups.iter().enumerate() {
        let bits = decode_group(group, book, strict).map_err(|e| CodecError::InBatch {
            batch,
            source: Box::new(e),
        })?;
        for (k, bit) in bits.into_iter().enumerate() {
            word |= (bit as u64) << (batch * s + k);
        }
    }
    Ok(word)
}
