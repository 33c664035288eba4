//! The shared summing medium.
//!
//! Every active user drives one spread chip per clock; the medium outputs
//! the count of asserted chips (a parallel counter). Receivers despread with
//! their own code and the number of users that drove the frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codebook::{CodeBook, SpreadingCode};
use crate::codec::{self, CodecError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("user {user} drives {actual} chips, expected {expected}")]
    Geometry {
        user: usize,
        expected: usize,
        actual: usize,
    },
    #[error("users {first} and {second} share code {code}")]
    CodeCollision {
        first: usize,
        second: usize,
        code: usize,
    },
    #[error("{users} users do not fit a book of {available} usable codes")]
    TooManyUsers { users: usize, available: usize },
    #[error("bit count {bits} does not match code count {codes}")]
    UserMismatch { bits: usize, codes: usize },
    #[error("user {user}: {source}")]
    Decode {
        user: usize,
        #[source]
        source: CodecError,
    },
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub max_users: usize,
    pub code_length: usize,
    pub error_rate: f64,
    pub rng_seed: u64,
    /// Leave the all-zero code unassigned when fewer than `S` users share
    /// the book.
    pub skip_zero_code: bool,
}

impl ChannelConfig {
    pub fn new(max_users: usize, code_length: usize) -> Self {
        Self {
            max_users,
            code_length,
            error_rate: 0.0,
            rng_seed: 0,
            skip_zero_code: true,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.max_users == 0 || self.max_users > self.code_length {
            return Err(ChannelError::InvalidConfig(format!(
                "max_users {} outside [1, {}]",
                self.max_users, self.code_length
            )));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(ChannelError::InvalidConfig(format!(
                "error_rate {} outside [0, 1]",
                self.error_rate
            )));
        }
        Ok(())
    }
}

/// Per-chip counts plus the number of users that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelFrame {
    pub sums: Vec<u32>,
    pub active_count: usize,
}

impl ChannelFrame {
    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }
}

/// Counts asserted chips per clock across all users.
pub fn superpose<C: AsRef<[bool]>>(code_length: usize, chips_per_user: &[C]) -> Result<ChannelFrame, ChannelError> {
    let mut sums = vec![0u32; code_length];
    for (user, chips) in chips_per_user.iter().enumerate() {
        let chips = chips.as_ref();
        if chips.len() != code_length {
            return Err(ChannelError::Geometry {
                user,
                expected: code_length,
                actual: chips.len(),
            });
        }
        for (sum, &chip) in sums.iter_mut().zip(chips) {
            *sum += chip as u32;
        }
    }
    Ok(ChannelFrame {
        sums,
        active_count: chips_per_user.len(),
    })
}

/// XORs one data bit onto every chip of a code.
pub fn spread(bit: bool, code: &SpreadingCode) -> Vec<bool> {
    code.chips().iter().map(|&c| c ^ bit).collect()
}

fn check_distinct(codes: &[&SpreadingCode]) -> Result<(), ChannelError> {
    for (i, a) in codes.iter().enumerate() {
        for (j, b) in codes.iter().enumerate().skip(i + 1) {
            if a.chips() == b.chips() {
                return Err(ChannelError::CodeCollision {
                    first: i,
                    second: j,
                    code: a.index(),
                });
            }
        }
    }
    Ok(())
}

/// Spreads each user's bit with its code and superposes the results.
pub fn transmit(bits: &[bool], codes: &[&SpreadingCode]) -> Result<ChannelFrame, ChannelError> {
    if bits.len() != codes.len() {
        return Err(ChannelError::UserMismatch {
            bits: bits.len(),
            codes: codes.len(),
        });
    }
    check_distinct(codes)?;
    let length = codes.first().map_or(0, |c| c.len());
    let spread: Vec<Vec<bool>> = bits.iter().zip(codes).map(|(&b, c)| spread(b, c)).collect();
    superpose(length, &spread)
}

/// Despreads every user's bit using `N = frame.active_count`.
///
/// In strict mode each correlation magnitude must equal the code length.
pub fn receive(frame: &ChannelFrame, codes: &[&SpreadingCode], strict: bool) -> Result<Vec<bool>, ChannelError> {
    let expected = frame.len() as i64;
    codes
        .iter()
        .enumerate()
        .map(|(user, code)| {
            if code.len() != frame.len() {
                return Err(ChannelError::Geometry {
                    user,
                    expected: frame.len(),
                    actual: code.len(),
                });
            }
            let corr = codec::correlate_sums(&frame.sums, code.chips(), frame.active_count);
            codec::decide(&[corr], expected, strict)
                .map(|bits| bits[0])
                .map_err(|source| ChannelError::Decode {
                    user,
                    source: relabel(source, user),
                })
        })
        .collect()
}

fn relabel(err: CodecError, user: usize) -> CodecError {
    match err {
        CodecError::AmbiguousBit(_) => CodecError::AmbiguousBit(user),
        CodecError::IntegrityViolation {
            correlation,
            expected,
            ..
        } => CodecError::IntegrityViolation {
            bit: user,
            correlation,
            expected,
        },
        other => other,
    }
}

/// One round of concurrent access: every user sends one bit and every
/// receiver recovers its sender's bit.
pub fn multi_access_round(bits: &[bool], codes: &[&SpreadingCode]) -> Result<Vec<bool>, ChannelError> {
    let frame = transmit(bits, codes)?;
    receive(&frame, codes, false)
}

/// Picks `users` distinct codes from a book, skipping the all-zero code
/// first when `skip_zero_code` is set and the book has room.
pub fn assign_codes(book: &CodeBook, users: usize, skip_zero_code: bool) -> Result<Vec<&SpreadingCode>, ChannelError> {
    let available = book.length();
    if users > available {
        return Err(ChannelError::TooManyUsers { users, available });
    }
    let skip = skip_zero_code && users < available;
    let picked: Vec<&SpreadingCode> = book
        .codes()
        .iter()
        .filter(|c| !(skip && c.is_all_zero()))
        .take(users)
        .collect();
    if picked.len() < users {
        return Err(ChannelError::TooManyUsers {
            users,
            available: picked.len(),
        });
    }
    Ok(picked)
}

/// Replaces each sum, with probability `error_rate`, by a uniform draw from
/// `[0, active_count]`.
pub fn inject_errors_with<R: Rng>(frame: &ChannelFrame, error_rate: f64, rng: &mut R) -> ChannelFrame {
    let mut out = frame.clone();
    if error_rate <= 0.0 {
        return out;
    }
    for sum in out.sums.iter_mut() {
        if rng.gen_bool(error_rate.min(1.0)) {
            *sum = rng.gen_range(0..=frame.active_count as u32);
        }
    }
    out
}

/// [`inject_errors_with`] driven by a generator seeded from the config.
pub fn inject_errors(frame: &ChannelFrame, config: &ChannelConfig) -> ChannelFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    inject_errors_with(frame, config.error_rate, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::walsh_codebook;
    use crate::codec::{decode_group, encode_group, SumFrame};
    use proptest::prelude::*;

    fn bits_of(v: u32, n: usize) -> Vec<bool> {
        (0..n).map(|k| (v >> k) & 1 == 1).collect()
    }

    #[test]
    fn superpose_counts() {
        let f = superpose(1, &[vec![true], vec![false], vec![true]]).unwrap();
        assert_eq!(f.sums, [2]);
        let empty: [Vec<bool>; 0] = [];
        let f = superpose(4, &empty).unwrap();
        assert_eq!(f, ChannelFrame { sums: vec![0; 4], active_count: 0 });
        let all = vec![vec![true; 8]; 8];
        assert_eq!(superpose(8, &all).unwrap().sums, [8; 8]);
        assert!(matches!(
            superpose(4, &[vec![true; 3]]),
            Err(ChannelError::Geometry { user: 0, expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn full_book_round() {
        let book = walsh_codebook(4).unwrap();
        let codes: Vec<&SpreadingCode> = book.codes().iter().collect();
        let bits = bits_of(0b0001, 4);
        let frame = transmit(&bits, &codes).unwrap();
        assert_eq!(frame.sums, [1, 3, 3, 3]);
        assert_eq!(multi_access_round(&bits, &codes).unwrap(), bits);
    }

    #[test]
    fn partial_round_without_zero_code() {
        let book = walsh_codebook(4).unwrap();
        let codes = [book.code(1), book.code(2)];
        for v in 0..4 {
            let bits = bits_of(v, 2);
            assert_eq!(multi_access_round(&bits, &codes).unwrap(), bits);
        }
        let frame = transmit(&[true, false], &codes).unwrap();
        assert_eq!(frame.active_count, 2);
        assert_eq!(frame.sums, [1, 0, 2, 1]);
    }

    #[test]
    fn collision_is_rejected() {
        let book = walsh_codebook(4).unwrap();
        assert_eq!(
            multi_access_round(&[true, false], &[book.code(1), book.code(1)]),
            Err(ChannelError::CodeCollision { first: 0, second: 1, code: 1 })
        );
    }

    #[test]
    fn miscounted_users_only_hurt_zero_code() {
        // With N = S instead of the true count, codes other than the
        // all-zero one still despread correctly.
        let book = walsh_codebook(4).unwrap();
        let codes = [book.code(0), book.code(2)];
        let frame = transmit(&[true, false], &codes).unwrap();
        let wrong = ChannelFrame { active_count: 4, ..frame.clone() };
        assert_eq!(receive(&frame, &codes, true).unwrap(), [true, false]);
        assert_eq!(receive(&wrong, &codes[1..], true).unwrap(), [false]);
        // r0 loses (4 - 2) per chip, 8 in total, and the bit flips silently
        assert_eq!(receive(&wrong, &codes[..1], true).unwrap(), [false]);
    }

    #[test]
    fn code_assignment() {
        let book = walsh_codebook(4).unwrap();
        let idx = |v: Vec<&SpreadingCode>| v.iter().map(|c| c.index()).collect::<Vec<_>>();
        assert_eq!(idx(assign_codes(&book, 2, true).unwrap()), [1, 2]);
        assert_eq!(idx(assign_codes(&book, 2, false).unwrap()), [0, 1]);
        assert_eq!(idx(assign_codes(&book, 4, true).unwrap()), [0, 1, 2, 3]);
        assert!(assign_codes(&book, 5, true).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(4, 4).validate().is_ok());
        assert!(ChannelConfig::new(5, 4).validate().is_err());
        assert!(ChannelConfig::new(0, 4).validate().is_err());
        let mut c = ChannelConfig::new(2, 4);
        c.error_rate = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn error_injection_contract() {
        let frame = ChannelFrame { sums: vec![1, 3, 3, 3, 0, 2, 4, 1], active_count: 4 };
        let mut cfg = ChannelConfig::new(4, 8);
        assert_eq!(inject_errors(&frame, &cfg), frame);
        cfg.error_rate = 1.0;
        cfg.rng_seed = 42;
        let a = inject_errors(&frame, &cfg);
        let b = inject_errors(&frame, &cfg);
        assert_eq!(a, b);
        assert!(a.sums.iter().all(|&v| v <= 4));
        assert_eq!(a.active_count, 4);
    }

    #[test]
    fn corruption_is_caught_in_strict_mode() {
        let book = walsh_codebook(8).unwrap();
        let mut cfg = ChannelConfig::new(8, 8);
        cfg.error_rate = 0.25;
        let mut checked = 0;
        for seed in 0..400u64 {
            cfg.rng_seed = seed;
            let d = bits_of((seed * 37 % 256) as u32, 8);
            let clean = encode_group(&d, &book).unwrap();
            let ch = ChannelFrame { sums: clean.sums().to_vec(), active_count: 8 };
            let bad = inject_errors(&ch, &cfg);
            if bad == ch {
                continue;
            }
            // brute-force magnitudes straight from the Hadamard rows
            let magnitude_changed = (0..8usize).any(|k| {
                let corr: i64 = (0..8)
                    .map(|t| {
                        let h = if (k & t).count_ones().is_multiple_of(2) { 1 } else { -1 };
                        h * (2 * bad.sums[t] as i64 - 8)
                    })
                    .sum();
                corr.abs() != 8
            });
            let frame = SumFrame::new(bad.sums.clone()).unwrap();
            let res = decode_group(&frame, &book, true);
            if magnitude_changed {
                assert!(matches!(res, Err(CodecError::IntegrityViolation { .. })));
            } else {
                assert!(res.is_ok());
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    proptest! {
        #[test]
        fn superpose_is_permutation_invariant_and_additive(
            users in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 8), 0..10),
            split in 0usize..10,
            rot in 0usize..10,
        ) {
            let whole = superpose(8, &users).unwrap();
            let mut shuffled = users.clone();
            if !shuffled.is_empty() {
                let r = rot % shuffled.len();
                shuffled.rotate_left(r);
                shuffled.reverse();
            }
            prop_assert_eq!(&superpose(8, &shuffled).unwrap(), &whole);
            let split = split.min(users.len());
            let a = superpose(8, &users[..split]).unwrap();
            let b = superpose(8, &users[split..]).unwrap();
            let summed: Vec<u32> = a.sums.iter().zip(&b.sums).map(|(x, y)| x + y).collect();
            prop_assert_eq!(summed, whole.sums);
        }
    }

    #[test]
    fn full_walsh_round_equals_group_codec() {
        for s in [4usize, 8] {
            let book = walsh_codebook(s).unwrap();
            let codes: Vec<&SpreadingCode> = book.codes().iter().collect();
            for v in 0..1u32 << s {
                let bits = bits_of(v, s);
                let frame = transmit(&bits, &codes).unwrap();
                let group = encode_group(&bits, &book).unwrap();
                assert_eq!(frame.sums, group.sums());
                assert_eq!(
                    multi_access_round(&bits, &codes).unwrap(),
                    decode_group(&group, &book, true).unwrap()
                );
            }
        }
    }

    #[test]
    fn every_subset_without_zero_code_decodes() {
        let book = walsh_codebook(4).unwrap();
        for mask in 1u32..16 {
            if mask & 1 == 1 {
                continue;
            }
            let codes: Vec<&SpreadingCode> =
                (0..4).filter(|k| mask >> k & 1 == 1).map(|k| book.code(k)).collect();
            for v in 0..1u32 << codes.len() {
                let bits = bits_of(v, codes.len());
                let frame = transmit(&bits, &codes).unwrap();
                assert_eq!(receive(&frame, &codes, true).unwrap(), bits);
            }
        }
    }
}
