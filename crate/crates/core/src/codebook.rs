//! Spreading-code families.
//!
//! Two generators are provided: an LFSR read out in parallel (one code per
//! register, SIPO style) and Sylvester Walsh–Hadamard rows. Every book
//! carries its bipolar Gram matrix so orthogonality can be checked rather
//! than assumed.
//!
//! Chip convention: binary chip `0` maps to bipolar `+1`, chip `1` to `-1`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec;

/// Exhaustive validation is used while `2^S` stays at or below this bound.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 16;
/// Number of random vectors checked when exhaustive validation is too large.
pub const SAMPLED_VECTORS: usize = 10_000;
const VALIDATION_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodebookError {
    #[error("invalid LFSR config: {0}")]
    InvalidConfig(String),
    #[error("LFSR state is all-zero")]
    InvalidState,
    #[error("register width {width} is smaller than code length {length}")]
    InsufficientWidth { width: usize, length: usize },
    #[error("unsupported code length {0}: must be a power of two >= 2")]
    UnsupportedLength(usize),
    #[error("malformed code book: {0}")]
    Malformed(String),
    #[error("code book parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown code book kind `{0}`")]
    UnknownKind(String),
}

/// Which end of the register the feedback enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftDirection {
    /// Feedback enters R1 and data moves towards R`width`.
    #[default]
    Forward,
    /// Feedback enters R`width` and data moves towards R1.
    Mirrored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrConfig {
    width: usize,
    taps: BTreeSet<usize>,
    seed: LfsrState,
    direction: ShiftDirection,
}

impl LfsrConfig {
    /// Builds a config with the all-ones seed and forward shifting.
    pub fn new(width: usize, taps: impl IntoIterator<Item = usize>) -> Result<Self, CodebookError> {
        if width < 2 {
            return Err(CodebookError::InvalidConfig(format!(
                "width must be >= 2, got {width}"
            )));
        }
        let taps: BTreeSet<usize> = taps.into_iter().collect();
        if taps.is_empty() {
            return Err(CodebookError::InvalidConfig("tap set is empty".into()));
        }
        if let Some(&bad) = taps.iter().find(|&&t| t == 0 || t > width) {
            return Err(CodebookError::InvalidConfig(format!(
                "tap {bad} outside [1, {width}]"
            )));
        }
        Ok(Self {
            width,
            taps,
            seed: LfsrState(vec![true; width]),
            direction: ShiftDirection::Forward,
        })
    }

    pub fn with_seed(mut self, seed: LfsrState) -> Result<Self, CodebookError> {
        if seed.width() != self.width {
            return Err(CodebookError::InvalidConfig(format!(
                "seed has {} bits, register has {}",
                seed.width(),
                self.width
            )));
        }
        if seed.is_zero() {
            return Err(CodebookError::InvalidState);
        }
        self.seed = seed;
        Ok(self)
    }

    pub fn with_direction(mut self, direction: ShiftDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn taps(&self) -> impl Iterator<Item = usize> + '_ {
        self.taps.iter().copied()
    }

    pub fn seed(&self) -> &LfsrState {
        &self.seed
    }

    pub fn direction(&self) -> ShiftDirection {
        self.direction
    }
}

/// Register contents, `registers[0]` is R1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LfsrState(Vec<bool>);

impl LfsrState {
    pub fn new(registers: Vec<bool>) -> Result<Self, CodebookError> {
        if registers.iter().any(|&b| b) {
            Ok(Self(registers))
        } else {
            Err(CodebookError::InvalidState)
        }
    }

    pub fn registers(&self) -> &[bool] {
        &self.0
    }

    /// Value of the 1-based register `R{index}`.
    pub fn register(&self, index: usize) -> bool {
        self.0[index - 1]
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    fn is_zero(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }
}

impl FromStr for LfsrState {
    type Err = CodebookError;

    /// Parses `R1..Rwidth` as a string of `0`/`1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = parse_bits(s).map_err(CodebookError::InvalidConfig)?;
        Self::new(bits)
    }
}

impl fmt::Display for LfsrState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.0))
    }
}

/// Advances the register by one clock.
pub fn lfsr_step(state: &LfsrState, config: &LfsrConfig) -> Result<LfsrState, CodebookError> {
    if state.is_zero() {
        return Err(CodebookError::InvalidState);
    }
    if state.width() != config.width {
        return Err(CodebookError::InvalidConfig(format!(
            "state has {} bits, register has {}",
            state.width(),
            config.width
        )));
    }
    let feedback = config
        .taps
        .iter()
        .fold(false, |acc, &t| acc ^ state.register(t));
    let regs = &state.0;
    let mut next = Vec::with_capacity(regs.len());
    match config.direction {
        ShiftDirection::Forward => {
            next.push(feedback);
            next.extend_from_slice(&regs[..regs.len() - 1]);
        }
        ShiftDirection::Mirrored => {
            next.extend_from_slice(&regs[1..]);
            next.push(feedback);
        }
    }
    // may be all-zero when the last register is untapped
    Ok(LfsrState(next))
}

/// Shape of the state sequence starting from the seed: `tail` steps before
/// the first state that lies on the cycle, then a cycle of `period` states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfsrOrbit {
    pub tail: usize,
    pub period: usize,
}

impl LfsrOrbit {
    /// True when the seed itself recurs.
    pub fn is_pure_cycle(&self) -> bool {
        self.tail == 0
    }
}

/// Walks the register from its seed until a state repeats.
pub fn lfsr_orbit(config: &LfsrConfig) -> LfsrOrbit {
    use std::collections::HashMap;

    let mut seen: HashMap<LfsrState, usize> = HashMap::new();
    let mut state = config.seed.clone();
    let mut step = 0usize;
    loop {
        if let Some(&first) = seen.get(&state) {
            return LfsrOrbit {
                tail: first,
                period: step - first,
            };
        }
        seen.insert(state.clone(), step);
        state = if state.is_zero() {
            // zero is a fixed point
            state
        } else {
            lfsr_step(&state, config).expect("config validated at construction")
        };
        step += 1;
    }
}

/// Length of the cycle the seed's orbit settles into.
///
/// When the taps include the last register the step map is a bijection and
/// this is the smallest `k >= 1` that returns the seed. Otherwise the seed
/// may sit on a tail; use [`lfsr_orbit`] to see it.
pub fn lfsr_period(config: &LfsrConfig) -> usize {
    lfsr_orbit(config).period
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeKind {
    Walsh,
    LfsrWindow,
    Custom,
}

impl CodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodeKind::Walsh => "walsh",
            CodeKind::LfsrWindow => "lfsr-window",
            CodeKind::Custom => "custom",
        }
    }
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeKind {
    type Err = CodebookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "walsh" => Ok(CodeKind::Walsh),
            "lfsr-window" => Ok(CodeKind::LfsrWindow),
            "custom" => Ok(CodeKind::Custom),
            other => Err(CodebookError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingCode {
    chips: Vec<bool>,
    index: usize,
}

impl SpreadingCode {
    pub fn new(chips: Vec<bool>, index: usize) -> Self {
        Self { chips, index }
    }

    pub fn chips(&self) -> &[bool] {
        &self.chips
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    /// True for the code whose chips are all `0` (bipolar all `+1`).
    pub fn is_all_zero(&self) -> bool {
        !self.chips.iter().any(|&c| c)
    }
}

impl fmt::Display for SpreadingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.chips))
    }
}

/// A square family of `S` codes of `S` chips each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    kind: CodeKind,
    codes: Vec<SpreadingCode>,
    gram: Vec<Vec<i64>>,
}

impl CodeBook {
    pub fn new(kind: CodeKind, codes: Vec<Vec<bool>>) -> Result<Self, CodebookError> {
        let length = codes.len();
        if length == 0 {
            return Err(CodebookError::Malformed("no codes".into()));
        }
        if let Some((i, c)) = codes.iter().enumerate().find(|(_, c)| c.len() != length) {
            return Err(CodebookError::Malformed(format!(
                "code {i} has {} chips, expected {length}",
                c.len()
            )));
        }
        let codes: Vec<SpreadingCode> = codes
            .into_iter()
            .enumerate()
            .map(|(i, chips)| SpreadingCode::new(chips, i))
            .collect();
        let gram = compute_gram(&codes);
        Ok(Self { kind, codes, gram })
    }

    /// Builds a custom book from `0`/`1` strings.
    pub fn from_strings<S: AsRef<str>>(rows: &[S]) -> Result<Self, CodebookError> {
        let codes = rows
            .iter()
            .map(|r| parse_bits(r.as_ref()).map_err(CodebookError::Malformed))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(CodeKind::Custom, codes)
    }

    /// Code length `S`, which is also the number of codes.
    pub fn length(&self) -> usize {
        self.codes.len()
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn codes(&self) -> &[SpreadingCode] {
        &self.codes
    }

    pub fn code(&self, index: usize) -> &SpreadingCode {
        &self.codes[index]
    }

    pub fn gram(&self) -> &[Vec<i64>] {
        &self.gram
    }

    /// Serializes to the text code book format.
    pub fn to_text(&self) -> String {
        let mut out = format!("S={} kind={}\n", self.length(), self.kind);
        for code in &self.codes {
            out.push_str(&code.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the text code book format. Only the exact layout produced by
    /// [`CodeBook::to_text`] is accepted.
    pub fn from_text(text: &str) -> Result<Self, CodebookError> {
        let body = text.strip_suffix('\n').ok_or(CodebookError::Parse {
            line: text.lines().count().max(1),
            msg: "missing trailing newline".into(),
        })?;
        let mut lines = body.split('\n');
        let header = lines.next().unwrap_or_default();
        let (length, kind) = parse_header(header)?;
        let rows: Vec<&str> = lines.collect();
        if rows.len() != length {
            return Err(CodebookError::Parse {
                line: 1,
                msg: format!("header declares S={length} but {} code lines follow", rows.len()),
            });
        }
        let mut codes = Vec::with_capacity(length);
        for (i, row) in rows.iter().enumerate() {
            let bits = parse_bits(row).map_err(|msg| CodebookError::Parse { line: i + 2, msg })?;
            if bits.len() != length {
                return Err(CodebookError::Parse {
                    line: i + 2,
                    msg: format!("expected {length} chips, found {}", bits.len()),
                });
            }
            codes.push(bits);
        }
        Self::new(kind, codes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_text(&text)?)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

fn parse_header(header: &str) -> Result<(usize, CodeKind), CodebookError> {
    let bad = |msg: &str| CodebookError::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    let mut parts = header.split(' ');
    let length = parts
        .next()
        .and_then(|p| p.strip_prefix("S="))
        .ok_or_else(|| bad("expected `S=<int>`"))?;
    let length: usize = length.parse().map_err(|_| bad("S is not an integer"))?;
    let kind = parts
        .next()
        .and_then(|p| p.strip_prefix("kind="))
        .ok_or_else(|| bad("expected `kind=<walsh|lfsr-window|custom>`"))?;
    if parts.next().is_some() {
        return Err(bad("trailing fields in header"));
    }
    let kind = kind.parse().map_err(|e: CodebookError| bad(&e.to_string()))?;
    if length == 0 {
        return Err(bad("S must be positive"));
    }
    Ok((length, kind))
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<bool>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("unexpected character {other:?}")),
        })
        .collect()
}

pub(crate) fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Reads code `k` as the time series of register `R{k}` over `length`
/// clocks, starting one step after the seed.
pub fn lfsr_parallel_codebook(config: &LfsrConfig, length: usize) -> Result<CodeBook, CodebookError> {
    if config.width < length {
        return Err(CodebookError::InsufficientWidth {
            width: config.width,
            length,
        });
    }
    let mut state = config.seed.clone();
    let mut codes = vec![Vec::with_capacity(length); length];
    for _ in 0..length {
        state = lfsr_step(&state, config)?;
        for (k, code) in codes.iter_mut().enumerate() {
            code.push(state.register(k + 1));
        }
    }
    CodeBook::new(CodeKind::LfsrWindow, codes)
}

/// Rows of the order-`length` Sylvester Hadamard matrix.
pub fn walsh_codebook(length: usize) -> Result<CodeBook, CodebookError> {
    if length < 2 || !length.is_power_of_two() {
        return Err(CodebookError::UnsupportedLength(length));
    }
    // H[j][t] = (-1)^popcount(j & t); the -1 entries are chip 1.
    let codes = (0..length)
        .map(|j| {
            (0..length)
                .map(|t| (j & t).count_ones() % 2 == 1)
                .collect()
        })
        .collect();
    CodeBook::new(CodeKind::Walsh, codes)
}

fn bipolar(chip: bool) -> i64 {
    if chip {
        -1
    } else {
        1
    }
}

fn compute_gram(codes: &[SpreadingCode]) -> Vec<Vec<i64>> {
    codes
        .iter()
        .map(|a| {
            codes
                .iter()
                .map(|b| {
                    a.chips
                        .iter()
                        .zip(&b.chips)
                        .map(|(&x, &y)| bipolar(x) * bipolar(y))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Bipolar inner products of every pair of codes.
pub fn gram_matrix(book: &CodeBook) -> Vec<Vec<i64>> {
    book.gram.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub orthogonal: bool,
    pub decodable: bool,
    pub worst_offdiag: i64,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "orthogonal={} decodable={} worst_offdiag={}",
            self.orthogonal, self.decodable, self.worst_offdiag
        )
    }
}

/// Checks orthogonality via the Gram matrix and decodability by round trip.
pub fn validate(book: &CodeBook) -> ValidationReport {
    let s = book.length();
    let worst_offdiag = book
        .gram
        .iter()
        .enumerate()
        .flat_map(|(j, row)| {
            row.iter()
                .enumerate()
                .filter(move |(k, _)| *k != j)
                .map(|(_, v)| v.abs())
        })
        .max()
        .unwrap_or(0);

    let round_trips = |bits: &[bool]| {
        codec::encode_group(bits, book)
            .and_then(|frame| codec::decode_group(&frame, book, false))
            .map(|decoded| decoded == bits)
            .unwrap_or(false)
    };

    let decodable = if s < 64 && (1u64 << s) <= EXHAUSTIVE_LIMIT {
        (0..1u64 << s).all(|v| {
            let bits: Vec<bool> = (0..s).map(|k| (v >> k) & 1 == 1).collect();
            round_trips(&bits)
        })
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        (0..SAMPLED_VECTORS).all(|_| {
            let bits: Vec<bool> = (0..s).map(|_| rng.gen()).collect();
            round_trips(&bits)
        })
    };

    ValidationReport {
        orthogonal: worst_offdiag == 0,
        decodable,
        worst_offdiag,
    }
}
