//! Memory-mapped master and slave wrappers.
//!
//! Address and data travel as CDMA sum streams on reduced line groups;
//! `read`, `write` and `waitrequest` pass through uncoded. A transaction
//! occupies `S` chip cycles for the request and, for reads, a further `S`
//! chip cycles for the response.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codebook::CodeBook;
use crate::codec::{self, CodecError, SumFrame, WordFrame};

pub const ADDRESS_WIDTH: usize = 32;
pub const DATA_WIDTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("unknown port prefix `{0}`")]
    UnknownPrefix(String),
    #[error("address {address:#010x} outside [{base:#010x}, {end:#010x})")]
    AddressOutOfRange { address: u32, base: u32, end: u64 },
    #[error("address {0:#010x} is not word aligned")]
    Misaligned(u32),
    #[error("cycle {cycle}: read and write must be exclusive and held for the whole window")]
    ControlConflict { cycle: usize },
    #[error("expected {expected} request cycles, got {actual}")]
    WindowLength { expected: usize, actual: usize },
    #[error("{field} decode failed at cycle {cycle}: {source}")]
    Decode {
        field: &'static str,
        cycle: usize,
        #[source]
        source: CodecError,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("invalid slave model: {0}")]
    InvalidSlave(String),
}

impl BusError {
    /// The codec error underneath a decode failure, if any.
    pub fn codec_root(&self) -> Option<&CodecError> {
        match self {
            BusError::Decode { source, .. } | BusError::Codec(source) => Some(source.root()),
            _ => None,
        }
    }
}

/// Port prefixes accepted in signal names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prefix {
    /// Memory-mapped slave.
    Avs,
    /// Memory-mapped master.
    Avm,
    /// Tristate slave.
    Ats,
    /// Tristate master.
    Atm,
    /// Clock output.
    Cso,
    /// Clock input.
    Csi,
}

impl Prefix {
    pub fn as_str(&self) -> &'static str {
        match self {
            Prefix::Avs => "avs",
            Prefix::Avm => "avm",
            Prefix::Ats => "ats",
            Prefix::Atm => "atm",
            Prefix::Cso => "cso",
            Prefix::Csi => "csi",
        }
    }
}

impl FromStr for Prefix {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "avs" => Prefix::Avs,
            "avm" => Prefix::Avm,
            "ats" => Prefix::Ats,
            "atm" => Prefix::Atm,
            "cso" => Prefix::Cso,
            "csi" => Prefix::Csi,
            other => return Err(BusError::UnknownPrefix(other.to_string())),
        })
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `<prefix>_<interface>_<signal>`, e.g. `avs_s1_waitrequest`.
pub fn signal_name(prefix: &str, interface: &str, signal: &str) -> Result<String, BusError> {
    let prefix: Prefix = prefix.parse()?;
    Ok(format!("{prefix}_{interface}_{signal}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransactionKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BusTransaction {
    pub kind: TransactionKind,
    pub address: u32,
    pub writedata: Option<u32>,
    pub readdata: Option<u32>,
}

impl BusTransaction {
    pub fn read(address: u32) -> Self {
        Self {
            kind: TransactionKind::Read,
            address,
            writedata: None,
            readdata: None,
        }
    }

    pub fn write(address: u32, data: u32) -> Self {
        Self {
            kind: TransactionKind::Write,
            address,
            writedata: Some(data),
            readdata: None,
        }
    }

    pub fn is_write(&self) -> bool {
        self.kind == TransactionKind::Write
    }
}

/// A bundle of coded lines: one `field_width`-bit field per group, group 0
/// in the least significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Lines {
    width: usize,
    value: u64,
}

impl Lines {
    pub fn idle(width: usize) -> Self {
        Self { width, value: 0 }
    }

    pub fn from_raw(width: usize, value: u64) -> Self {
        Self { width, value }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self, index: usize, field_width: usize) -> u32 {
        ((self.value >> (index * field_width)) & ((1u64 << field_width) - 1)) as u32
    }

    pub fn set_field(&mut self, index: usize, field_width: usize, v: u32) {
        let shift = index * field_width;
        let mask = ((1u64 << field_width) - 1) << shift;
        self.value = (self.value & !mask) | (((v as u64) << shift) & mask);
    }
}

impl fmt::LowerHex for Lines {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.value, f)
    }
}

/// Everything on the port during one chip cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PortSignals {
    pub read: bool,
    pub write: bool,
    pub waitrequest: bool,
    pub address_lines: Lines,
    pub writedata_lines: Lines,
    pub readdata_lines: Lines,
}

impl PortSignals {
    pub fn idle(width: usize) -> Self {
        Self {
            read: false,
            write: false,
            waitrequest: false,
            address_lines: Lines::idle(width),
            writedata_lines: Lines::idle(width),
            readdata_lines: Lines::idle(width),
        }
    }
}

/// Line count and field width for 32-bit words coded with `book`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineGeometry {
    pub code_length: usize,
    pub groups: usize,
    pub field_width: usize,
    pub lines: usize,
}

impl LineGeometry {
    pub fn for_book(book: &CodeBook) -> Result<Self, CodecError> {
        let code_length = book.length();
        let lines = codec::bus_width(DATA_WIDTH, code_length)?;
        Ok(Self {
            code_length,
            groups: DATA_WIDTH / code_length,
            field_width: codec::sum_line_width(code_length),
            lines,
        })
    }

    /// The lines driven during chip `chip` of a coded word.
    pub fn pack(&self, frame: &WordFrame, chip: usize) -> Lines {
        let mut lines = Lines::idle(self.lines);
        for (g, group) in frame.groups().iter().enumerate() {
            lines.set_field(g, self.field_width, group.sums()[chip]);
        }
        lines
    }

    /// Reassembles a word frame from `S` consecutive line samples.
    pub fn unpack<'a>(&self, samples: impl Iterator<Item = &'a Lines>) -> Result<WordFrame, CodecError> {
        let mut sums = vec![Vec::with_capacity(self.code_length); self.groups];
        for lines in samples {
            for (g, group) in sums.iter_mut().enumerate() {
                group.push(lines.field(g, self.field_width));
            }
        }
        let groups = sums
            .into_iter()
            .map(SumFrame::new)
            .collect::<Result<Vec<_>, _>>()?;
        WordFrame::new(groups)
    }
}

/// Drives one transaction onto the coded port for `S` chip cycles.
pub fn master_issue(txn: &BusTransaction, book: &CodeBook) -> Result<Vec<PortSignals>, BusError> {
    let geometry = LineGeometry::for_book(book)?;
    let address = codec::encode_word(txn.address as u64, ADDRESS_WIDTH, book)?;
    let data = match (txn.kind, txn.writedata) {
        (TransactionKind::Write, Some(d)) => Some(codec::encode_word(d as u64, DATA_WIDTH, book)?),
        (TransactionKind::Write, None) => Some(codec::encode_word(0, DATA_WIDTH, book)?),
        (TransactionKind::Read, _) => None,
    };
    Ok((0..geometry.code_length)
        .map(|chip| PortSignals {
            read: !txn.is_write(),
            write: txn.is_write(),
            waitrequest: true,
            address_lines: geometry.pack(&address, chip),
            writedata_lines: data
                .as_ref()
                .map_or(Lines::idle(geometry.lines), |d| geometry.pack(d, chip)),
            readdata_lines: Lines::idle(geometry.lines),
        })
        .collect())
}

/// Word-addressed register file, zero at reset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaveModel {
    base: u32,
    storage: Vec<u32>,
}

impl SlaveModel {
    pub fn new(base: u32, span: usize) -> Result<Self, BusError> {
        if !base.is_multiple_of(4) {
            return Err(BusError::InvalidSlave(format!("base {base:#x} is not word aligned")));
        }
        if span == 0 || base as u64 + 4 * span as u64 > 1 << 32 {
            return Err(BusError::InvalidSlave(format!(
                "span {span} words at {base:#x} does not fit the address space"
            )));
        }
        Ok(Self {
            base,
            storage: vec![0; span],
        })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn span(&self) -> usize {
        self.storage.len()
    }

    pub fn storage(&self) -> &[u32] {
        &self.storage
    }

    fn slot(&self, address: u32) -> Result<usize, BusError> {
        let end = self.base as u64 + 4 * self.storage.len() as u64;
        if address < self.base || address as u64 >= end {
            return Err(BusError::AddressOutOfRange {
                address,
                base: self.base,
                end,
            });
        }
        if !address.is_multiple_of(4) {
            return Err(BusError::Misaligned(address));
        }
        Ok(((address - self.base) / 4) as usize)
    }

    pub fn read(&self, address: u32) -> Result<u32, BusError> {
        Ok(self.storage[self.slot(address)?])
    }

    pub fn write(&mut self, address: u32, data: u32) -> Result<(), BusError> {
        let slot = self.slot(address)?;
        self.storage[slot] = data;
        Ok(())
    }

    /// Value at `address`, or `None` outside the span.
    pub fn peek(&self, address: u32) -> Option<u32> {
        self.slot(address).ok().map(|i| self.storage[i])
    }
}

/// The access a slave wrapper decoded and performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlaveAccess {
    pub kind: TransactionKind,
    pub address: u32,
    /// Written data for writes, data returned for reads.
    pub data: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaveResponse {
    pub access: SlaveAccess,
    /// `S` response cycles for reads, empty for writes.
    pub signals: Vec<PortSignals>,
}

/// Decodes a request window, performs it on `slave`, and for reads
/// serializes the coded read data over a further `S` chip cycles.
pub fn slave_execute(
    signals: &[PortSignals],
    book: &CodeBook,
    slave: &mut SlaveModel,
    strict: bool,
) -> Result<SlaveResponse, BusError> {
    let geometry = LineGeometry::for_book(book)?;
    if signals.len() != geometry.code_length {
        return Err(BusError::WindowLength {
            expected: geometry.code_length,
            actual: signals.len(),
        });
    }
    let first = &signals[0];
    for (cycle, s) in signals.iter().enumerate() {
        if s.read == s.write || s.read != first.read {
            return Err(BusError::ControlConflict { cycle });
        }
    }
    let last = signals.len() - 1;
    let decode = |field: &'static str, lines: &mut dyn Iterator<Item = &Lines>| {
        geometry
            .unpack(lines)
            .and_then(|frame| codec::decode_word(&frame, book, strict))
            .map(|w| w as u32)
            .map_err(|source| BusError::Decode {
                field,
                cycle: last,
                source,
            })
    };
    let address = decode("address", &mut signals.iter().map(|s| &s.address_lines))?;

    if first.write {
        let data = decode("writedata", &mut signals.iter().map(|s| &s.writedata_lines))?;
        slave.write(address, data)?;
        return Ok(SlaveResponse {
            access: SlaveAccess {
                kind: TransactionKind::Write,
                address,
                data,
            },
            signals: Vec::new(),
        });
    }

    let data = slave.read(address)?;
    let frame = codec::encode_word(data as u64, DATA_WIDTH, book)?;
    let response = (0..geometry.code_length)
        .map(|chip| PortSignals {
            read: true,
            write: false,
            waitrequest: true,
            address_lines: Lines::idle(geometry.lines),
            writedata_lines: Lines::idle(geometry.lines),
            readdata_lines: geometry.pack(&frame, chip),
        })
        .collect();
    Ok(SlaveResponse {
        access: SlaveAccess {
            kind: TransactionKind::Read,
            address,
            data,
        },
        signals: response,
    })
}

/// Master-side decode of the read data carried by a response window.
pub fn master_complete(response: &[PortSignals], book: &CodeBook, strict: bool) -> Result<u32, BusError> {
    let geometry = LineGeometry::for_book(book)?;
    if response.len() != geometry.code_length {
        return Err(BusError::WindowLength {
            expected: geometry.code_length,
            actual: response.len(),
        });
    }
    geometry
        .unpack(response.iter().map(|s| &s.readdata_lines))
        .and_then(|frame| codec::decode_word(&frame, book, strict))
        .map(|w| w as u32)
        .map_err(|source| BusError::Decode {
            field: "readdata",
            cycle: response.len() - 1,
            source,
        })
}

/// Uncoded bus wiring address and data straight through to a slave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceBus {
    pub slave: SlaveModel,
}

impl ReferenceBus {
    pub fn new(slave: SlaveModel) -> Self {
        Self { slave }
    }

    /// Returns the read data for reads, `None` for writes.
    pub fn execute(&mut self, txn: &BusTransaction) -> Result<Option<u32>, BusError> {
        match txn.kind {
            TransactionKind::Read => self.slave.read(txn.address).map(Some),
            TransactionKind::Write => {
                self.slave.write(txn.address, txn.writedata.unwrap_or(0))?;
                Ok(None)
            }
        }
    }
}
