//! Cycle-driven simulation of the coded bus.
//!
//! One tick is one chip cycle. Traffic is generated from a seed, driven
//! through the coded wrappers and, alongside, through an uncoded reference
//! bus; any divergence is reported against the transaction index.
//!
//! Two access modes exist:
//!
//! * `sequential`: masters take turns (round-robin, one transaction at a
//!   time), each word coded with the whole book, one bit per code.
//! * `concurrent`: up to `masters` transactions share the medium in one
//!   round. Each master owns one code; every bit lane of the word carries
//!   the superposition of all active masters' spread bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bus_interface::{
    self, BusError, BusTransaction, Lines, PortSignals, ReferenceBus, SlaveAccess, SlaveModel,
    TransactionKind, ADDRESS_WIDTH, DATA_WIDTH,
};
use crate::channel::{self, ChannelError, ChannelFrame};
use crate::codebook::{self, CodeBook, CodebookError, LfsrConfig, LfsrState};
use crate::codec::{self, CodecError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] CodecError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("differential mismatch at transaction {index}: {detail}")]
    DifferentialMismatch { index: usize, detail: String },
    #[error("trace output failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CodebookSpec {
    Walsh,
    LfsrWindow {
        width: usize,
        taps: Vec<usize>,
        /// `R1..Rwidth` as `0`/`1`; all ones when absent.
        seed: Option<String>,
    },
    Custom {
        codes: Vec<String>,
    },
}

impl CodebookSpec {
    pub fn build(&self, code_length: usize) -> Result<CodeBook, CodebookError> {
        let book = match self {
            CodebookSpec::Walsh => codebook::walsh_codebook(code_length)?,
            CodebookSpec::LfsrWindow { width, taps, seed } => {
                let mut cfg = LfsrConfig::new(*width, taps.iter().copied())?;
                if let Some(seed) = seed {
                    cfg = cfg.with_seed(seed.parse::<LfsrState>()?)?;
                }
                codebook::lfsr_parallel_codebook(&cfg, code_length)?
            }
            CodebookSpec::Custom { codes } => CodeBook::from_strings(codes)?,
        };
        if book.length() != code_length {
            return Err(CodebookError::Malformed(format!(
                "book has {} codes, scenario expects {code_length}",
                book.length()
            )));
        }
        Ok(book)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    #[default]
    Sequential,
    Concurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlaveSpec {
    pub base: u32,
    /// Size in 32-bit words.
    pub span: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub version: u32,
    pub masters: usize,
    pub word_width: usize,
    pub code_length: usize,
    pub codebook: CodebookSpec,
    pub transactions: usize,
    pub write_fraction: f64,
    pub slave: SlaveSpec,
    pub error_rate: f64,
    pub rng_seed: u64,
    pub extra_latency: u64,
    pub mode: AccessMode,
    pub strict: bool,
    pub skip_zero_code: bool,
    /// Abort on the first coded/reference divergence instead of counting it.
    pub halt_on_mismatch: bool,
}

impl ScenarioConfig {
    /// Defaults: one master, 32-bit words, Walsh codes, 64-word slave at 0.
    pub fn new(code_length: usize, transactions: usize) -> Self {
        Self {
            version: 1,
            masters: 1,
            word_width: DATA_WIDTH,
            code_length,
            codebook: CodebookSpec::Walsh,
            transactions,
            write_fraction: 0.5,
            slave: SlaveSpec { base: 0, span: 64 },
            error_rate: 0.0,
            rng_seed: 1,
            extra_latency: 0,
            mode: AccessMode::Sequential,
            strict: true,
            skip_zero_code: true,
            halt_on_mismatch: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        codec::bus_width(self.word_width, self.code_length)?;
        if self.word_width != DATA_WIDTH {
            return Err(SimError::Config(format!(
                "word_width {} unsupported: the modeled data path is {DATA_WIDTH} bits",
                self.word_width
            )));
        }
        if self.masters == 0 {
            return Err(SimError::Config("masters must be at least 1".into()));
        }
        if self.mode == AccessMode::Concurrent && self.masters > self.code_length {
            return Err(SimError::Config(format!(
                "{} concurrent masters exceed code length {}",
                self.masters, self.code_length
            )));
        }
        if !(0.0..=1.0).contains(&self.write_fraction) {
            return Err(SimError::Config("write_fraction outside [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return Err(SimError::Config("error_rate outside [0, 1]".into()));
        }
        SlaveModel::new(self.slave.base, self.slave.span)?;
        Ok(())
    }
}

/// Measured output of one run. Field names double as the metrics document
/// keys.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SimMetrics {
    pub total_chip_cycles: u64,
    pub transactions_completed: u64,
    pub bits_transferred: u64,
    pub lines_used: u64,
    pub lines_baseline: u64,
    pub reduction_percent: f64,
    /// Completion latency in chip cycles mapped to transaction count.
    pub latency_histogram: BTreeMap<u64, u64>,
    pub integrity_violations: u64,
    pub decode_errors: u64,
    pub differential_mismatches: u64,
}

impl SimMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub cycle: u64,
    pub signal: String,
    pub value: String,
}

impl TraceRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace record serialize")
    }
}

pub trait TraceSink {
    fn record(&mut self, record: TraceRecord) -> io::Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, record: TraceRecord) -> io::Result<()> {
        self.push(record);
        Ok(())
    }
}

/// Discards every record.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _: TraceRecord) -> io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON object per line: `{"cycle":..,"signal":..,"value":..}`.
pub struct JsonLinesSink<W: io::Write> {
    out: W,
}

impl<W: io::Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: io::Write> TraceSink for JsonLinesSink<W> {
    fn record(&mut self, record: TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &record)?;
        self.out.write_all(b"\n")
    }
}

/// Port signal names, in emission order.
pub const PORT_SIGNALS: [&str; 6] = ["read", "write", "waitrequest", "address", "writedata", "readdata"];

/// Trace names for the master wrapper port of master `m`.
pub fn master_port_names(m: usize) -> [String; 6] {
    PORT_SIGNALS.map(|s| bus_interface::signal_name("avm", &format!("m{m}"), s).expect("known prefix"))
}

/// Trace names for the slave wrapper port serving master `m`.
pub fn slave_port_names(m: usize) -> [String; 6] {
    PORT_SIGNALS.map(|s| bus_interface::signal_name("avs", &format!("s{m}"), s).expect("known prefix"))
}

/// Draws the workload: uniform word-aligned addresses over the slave span,
/// uniform data, writes with probability `write_fraction`.
pub fn generate_traffic(config: &ScenarioConfig) -> Vec<BusTransaction> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    (0..config.transactions)
        .map(|_| {
            let write = rng.gen_bool(config.write_fraction);
            let slot = rng.gen_range(0..config.slave.span) as u32;
            let address = config.slave.base + 4 * slot;
            if write {
                BusTransaction::write(address, rng.gen())
            } else {
                BusTransaction::read(address)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub metrics: SimMetrics,
    pub trace: Vec<TraceRecord>,
}

/// Runs a scenario and keeps the whole trace in memory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimReport, SimError> {
    let mut trace = Vec::new();
    let metrics = run_scenario_with(config, &mut trace)?;
    Ok(SimReport { metrics, trace })
}

/// Runs a scenario, streaming trace records into `sink`.
pub fn run_scenario_with(config: &ScenarioConfig, sink: &mut dyn TraceSink) -> Result<SimMetrics, SimError> {
    simulate(config, sink).map(|o| o.metrics)
}

/// What a run leaves behind apart from its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub metrics: SimMetrics,
    /// Coded-side slave storage after the last transaction.
    pub slave_memory: Vec<u32>,
    /// `(transaction index, word the master received)` for every completed read.
    pub read_results: Vec<(usize, u32)>,
}

/// Like [`run_scenario_with`], also returning the final slave state and
/// every delivered read.
pub fn simulate(config: &ScenarioConfig, sink: &mut dyn TraceSink) -> Result<SimOutcome, SimError> {
    config.validate()?;
    let book = config.codebook.build(config.code_length)?;
    let traffic = generate_traffic(config);
    let mut engine = Engine::new(config, &book, sink)?;
    match config.mode {
        AccessMode::Sequential => engine.run_sequential(&traffic)?,
        AccessMode::Concurrent => engine.run_concurrent(&traffic)?,
    }
    Ok(engine.finish())
}

/// Line counts and reduction for one coded field.
fn line_accounting(config: &ScenarioConfig) -> Result<(u64, u64), SimError> {
    let used = match config.mode {
        AccessMode::Sequential => codec::bus_width(config.word_width, config.code_length)?,
        AccessMode::Concurrent => config.word_width * codec::sum_line_width(config.masters),
    };
    Ok((used as u64, config.word_width as u64))
}

fn hex_bit(b: bool) -> String {
    if b { "0x1" } else { "0x0" }.to_string()
}

/// Packs `fields` (field 0 least significant) into a hex string.
fn hex_fields(fields: &[u32], field_width: usize) -> String {
    let total = fields.len() * field_width;
    let mut bits = vec![false; total.max(1)];
    for (i, &v) in fields.iter().enumerate() {
        for b in 0..field_width {
            bits[i * field_width + b] = (v >> b) & 1 == 1;
        }
    }
    let mut out = String::from("0x");
    let mut started = false;
    for nibble in (0..bits.len().div_ceil(4)).rev() {
        let v = (0..4)
            .filter(|&b| bits.get(nibble * 4 + b).copied().unwrap_or(false))
            .fold(0u8, |acc, b| acc | 1 << b);
        if v != 0 || started || nibble == 0 {
            started = true;
            write!(out, "{v:x}").unwrap();
        }
    }
    out
}

fn hex_lines(lines: &Lines) -> String {
    format!("{:#x}", lines)
}

fn classify(err: &BusError, metrics: &mut SimMetrics) {
    match err.codec_root() {
        Some(CodecError::IntegrityViolation { .. }) => metrics.integrity_violations += 1,
        _ => metrics.decode_errors += 1,
    }
}

/// One master's port state for a cycle, rendered for the trace.
#[derive(Clone)]
struct PortView {
    read: bool,
    write: bool,
    waitrequest: bool,
    address: String,
    writedata: String,
    readdata: String,
}

impl PortView {
    fn idle() -> Self {
        Self {
            read: false,
            write: false,
            waitrequest: false,
            address: "0x0".into(),
            writedata: "0x0".into(),
            readdata: "0x0".into(),
        }
    }

    fn from_signals(s: &PortSignals) -> Self {
        Self {
            read: s.read,
            write: s.write,
            waitrequest: s.waitrequest,
            address: hex_lines(&s.address_lines),
            writedata: hex_lines(&s.writedata_lines),
            readdata: hex_lines(&s.readdata_lines),
        }
    }

    fn values(self) -> [String; 6] {
        [
            hex_bit(self.read),
            hex_bit(self.write),
            hex_bit(self.waitrequest),
            self.address,
            self.writedata,
            self.readdata,
        ]
    }
}

struct Engine<'a> {
    config: &'a ScenarioConfig,
    book: &'a CodeBook,
    sink: &'a mut dyn TraceSink,
    master_names: Vec<[String; 6]>,
    slave_names: Vec<[String; 6]>,
    cycle: u64,
    slave: SlaveModel,
    reference: ReferenceBus,
    fault_rng: ChaCha8Rng,
    metrics: SimMetrics,
    read_results: Vec<(usize, u32)>,
}

impl<'a> Engine<'a> {
    fn new(config: &'a ScenarioConfig, book: &'a CodeBook, sink: &'a mut dyn TraceSink) -> Result<Self, SimError> {
        let slave = SlaveModel::new(config.slave.base, config.slave.span)?;
        let mut fault_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        fault_rng.set_stream(1);
        let (lines_used, lines_baseline) = line_accounting(config)?;
        let metrics = SimMetrics {
            lines_used,
            lines_baseline,
            reduction_percent: 100.0 * (1.0 - lines_used as f64 / lines_baseline as f64),
            ..SimMetrics::default()
        };
        Ok(Self {
            config,
            book,
            sink,
            master_names: (0..config.masters).map(master_port_names).collect(),
            slave_names: (0..config.masters).map(slave_port_names).collect(),
            cycle: 0,
            reference: ReferenceBus::new(slave.clone()),
            slave,
            fault_rng,
            metrics,
            read_results: Vec::new(),
        })
    }

    fn finish(mut self) -> SimOutcome {
        self.metrics.total_chip_cycles = self.cycle;
        SimOutcome {
            metrics: self.metrics,
            slave_memory: self.slave.storage().to_vec(),
            read_results: self.read_results,
        }
    }

    /// Emits every port of every master for the current cycle, then ticks.
    fn tick(&mut self, mut master: Vec<PortView>, mut slave: Vec<PortView>) -> Result<(), SimError> {
        for m in 0..self.config.masters {
            let mv = std::mem::replace(&mut master[m], PortView::idle()).values();
            for (name, value) in self.master_names[m].iter().zip(mv) {
                self.sink.record(TraceRecord {
                    cycle: self.cycle,
                    signal: name.clone(),
                    value,
                })?;
            }
            let sv = std::mem::replace(&mut slave[m], PortView::idle()).values();
            for (name, value) in self.slave_names[m].iter().zip(sv) {
                self.sink.record(TraceRecord {
                    cycle: self.cycle,
                    signal: name.clone(),
                    value,
                })?;
            }
        }
        self.cycle += 1;
        Ok(())
    }

    fn idle_views(&self) -> (Vec<PortView>, Vec<PortView>) {
        let n = self.config.masters;
        (
            (0..n).map(|_| PortView::idle()).collect(),
            (0..n).map(|_| PortView::idle()).collect(),
        )
    }

    /// Value substitution on every coded field of a line bundle.
    fn corrupt_lines(&mut self, lines: &Lines, geometry: &bus_interface::LineGeometry) -> Lines {
        if self.config.error_rate <= 0.0 {
            return *lines;
        }
        let mut out = *lines;
        for g in 0..geometry.groups {
            let frame = ChannelFrame {
                sums: vec![lines.field(g, geometry.field_width)],
                active_count: geometry.code_length,
            };
            let hit = channel::inject_errors_with(&frame, self.config.error_rate, &mut self.fault_rng);
            out.set_field(g, geometry.field_width, hit.sums[0]);
        }
        out
    }

    fn corrupt_signals(&mut self, signals: &[PortSignals], geometry: &bus_interface::LineGeometry) -> Vec<PortSignals> {
        signals
            .iter()
            .map(|s| PortSignals {
                address_lines: self.corrupt_lines(&s.address_lines, geometry),
                writedata_lines: if s.write {
                    self.corrupt_lines(&s.writedata_lines, geometry)
                } else {
                    s.writedata_lines
                },
                readdata_lines: if s.read {
                    self.corrupt_lines(&s.readdata_lines, geometry)
                } else {
                    s.readdata_lines
                },
                ..*s
            })
            .collect()
    }

    fn record_completion(&mut self, latency: u64) {
        self.metrics.transactions_completed += 1;
        self.metrics.bits_transferred += (ADDRESS_WIDTH + DATA_WIDTH) as u64;
        *self.metrics.latency_histogram.entry(latency).or_insert(0) += 1;
    }

    fn mismatch(&mut self, index: usize, detail: String) -> Result<(), SimError> {
        if self.config.halt_on_mismatch {
            return Err(SimError::DifferentialMismatch { index, detail });
        }
        self.metrics.differential_mismatches += 1;
        Ok(())
    }

    /// Checks the coded slave against the reference after one transaction.
    fn compare(
        &mut self,
        index: usize,
        txn: &BusTransaction,
        access: &SlaveAccess,
        readdata: Option<u32>,
    ) -> Result<(), SimError> {
        self.compare_readdata(index, txn, readdata)?;
        self.compare_storage(index, &[txn.address, access.address])
    }

    fn compare_readdata(&mut self, index: usize, txn: &BusTransaction, readdata: Option<u32>) -> Result<(), SimError> {
        let expected = self.reference.execute(txn)?;
        if let Some(v) = readdata {
            self.read_results.push((index, v));
        }
        if readdata != expected {
            return self.mismatch(
                index,
                format!("readdata {readdata:x?} differs from reference {expected:x?}"),
            );
        }
        Ok(())
    }

    fn compare_storage(&mut self, index: usize, addresses: &[u32]) -> Result<(), SimError> {
        for &address in addresses {
            let coded = self.slave.peek(address);
            let reference = self.reference.slave.peek(address);
            if coded != reference {
                return self.mismatch(
                    index,
                    format!("storage at {address:#x}: coded {coded:x?}, reference {reference:x?}"),
                );
            }
        }
        Ok(())
    }

    fn run_sequential(&mut self, traffic: &[BusTransaction]) -> Result<(), SimError> {
        let geometry = bus_interface::LineGeometry::for_book(self.book)?;
        let strict = self.config.strict;
        for (index, txn) in traffic.iter().enumerate() {
            let m = index % self.config.masters;
            let start = self.cycle;

            let request = bus_interface::master_issue(txn, self.book)?;
            let received = self.corrupt_signals(&request, &geometry);
            for (sent, got) in request.iter().zip(&received) {
                let (mut mv, mut sv) = self.idle_views();
                mv[m] = PortView::from_signals(sent);
                sv[m] = PortView::from_signals(got);
                self.tick(mv, sv)?;
            }
            self.pipeline_stall(m, txn)?;

            let response = match bus_interface::slave_execute(&received, self.book, &mut self.slave, strict) {
                Ok(r) => r,
                Err(e) => {
                    classify(&e, &mut self.metrics);
                    continue;
                }
            };

            let readdata = if txn.kind == TransactionKind::Read {
                let delivered = self.corrupt_signals(&response.signals, &geometry);
                for (sent, got) in response.signals.iter().zip(&delivered) {
                    let (mut mv, mut sv) = self.idle_views();
                    mv[m] = PortView::from_signals(got);
                    sv[m] = PortView::from_signals(sent);
                    self.tick(mv, sv)?;
                }
                match bus_interface::master_complete(&delivered, self.book, strict) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        classify(&e, &mut self.metrics);
                        // reads leave the slave untouched; keep the reference in step
                        self.reference.execute(txn)?;
                        continue;
                    }
                }
            } else {
                None
            };

            self.compare(index, txn, &response.access, readdata)?;
            self.record_completion(self.cycle - start);
        }
        Ok(())
    }

    /// `extra_latency` cycles between the request window and the slave
    /// decode, with control held and coded lines idle.
    fn pipeline_stall(&mut self, m: usize, txn: &BusTransaction) -> Result<(), SimError> {
        for _ in 0..self.config.extra_latency {
            let (mut mv, mut sv) = self.idle_views();
            let held = PortView {
                read: !txn.is_write(),
                write: txn.is_write(),
                waitrequest: true,
                ..PortView::idle()
            };
            mv[m] = held.clone();
            sv[m] = held;
            self.tick(mv, sv)?;
        }
        Ok(())
    }

    fn run_concurrent(&mut self, traffic: &[BusTransaction]) -> Result<(), SimError> {
        let book = self.book;
        let codes = channel::assign_codes(book, self.config.masters, self.config.skip_zero_code)?;
        let s = book.length();
        let field_width = codec::sum_line_width(self.config.masters);
        let strict = self.config.strict;

        for (round, batch) in traffic.chunks(self.config.masters).enumerate() {
            let base_index = round * self.config.masters;
            let start = self.cycle;
            let active: Vec<&_> = codes[..batch.len()].to_vec();

            // Address lanes carry every active master; writedata lanes only writers.
            let writers: Vec<usize> = (0..batch.len()).filter(|&u| batch[u].is_write()).collect();
            let addr_frames = self.lane_frames(
                &batch.iter().map(|t| t.address).collect::<Vec<_>>(),
                &active,
            )?;
            let data_frames = self.lane_frames(
                &writers.iter().map(|&u| batch[u].writedata.unwrap_or(0)).collect::<Vec<_>>(),
                &writers.iter().map(|&u| active[u]).collect::<Vec<_>>(),
            )?;

            for chip in 0..s {
                let (mut mv, mut sv) = self.idle_views();
                let addr_hex = lane_hex(&addr_frames, chip, field_width);
                let data_hex = lane_hex(&data_frames, chip, field_width);
                for (u, txn) in batch.iter().enumerate() {
                    for view in [&mut mv[u], &mut sv[u]] {
                        *view = PortView {
                            read: !txn.is_write(),
                            write: txn.is_write(),
                            waitrequest: true,
                            address: addr_hex.clone(),
                            writedata: data_hex.clone(),
                            readdata: "0x0".into(),
                        };
                    }
                }
                self.tick(mv, sv)?;
            }
            for _ in 0..self.config.extra_latency {
                let (mut mv, mut sv) = self.idle_views();
                for (u, txn) in batch.iter().enumerate() {
                    for view in [&mut mv[u], &mut sv[u]] {
                        *view = PortView {
                            read: !txn.is_write(),
                            write: txn.is_write(),
                            waitrequest: true,
                            ..PortView::idle()
                        };
                    }
                }
                self.tick(mv, sv)?;
            }

            // Slave side: despread each master's address (and data), then
            // execute in master order.
            let mut outcomes: Vec<Option<SlaveAccess>> = vec![None; batch.len()];
            let mut readers = Vec::new();
            for (u, txn) in batch.iter().enumerate() {
                let address = match despread_word(&addr_frames, active[u], strict) {
                    Ok(a) => a,
                    Err(e) => {
                        self.count_channel_error(&e);
                        continue;
                    }
                };
                let result = if txn.is_write() {
                    let data = match despread_word(&data_frames, active[u], strict) {
                        Ok(d) => d,
                        Err(e) => {
                            self.count_channel_error(&e);
                            continue;
                        }
                    };
                    self.slave.write(address, data).map(|_| SlaveAccess {
                        kind: TransactionKind::Write,
                        address,
                        data,
                    })
                } else {
                    self.slave.read(address).map(|data| SlaveAccess {
                        kind: TransactionKind::Read,
                        address,
                        data,
                    })
                };
                match result {
                    Ok(access) => {
                        if !txn.is_write() {
                            readers.push(u);
                        }
                        outcomes[u] = Some(access);
                    }
                    Err(e) => classify(&e, &mut self.metrics),
                }
            }

            // Response: the slave spreads each reader's data with that
            // reader's code over one more window.
            let mut readback: Vec<Option<u32>> = vec![None; batch.len()];
            let write_latency = self.cycle - start;
            if !readers.is_empty() {
                let read_frames = self.lane_frames(
                    &readers
                        .iter()
                        .map(|&u| outcomes[u].map_or(0, |a| a.data))
                        .collect::<Vec<_>>(),
                    &readers.iter().map(|&u| active[u]).collect::<Vec<_>>(),
                )?;
                for chip in 0..s {
                    let (mut mv, mut sv) = self.idle_views();
                    let read_hex = lane_hex(&read_frames, chip, field_width);
                    for &u in &readers {
                        for view in [&mut mv[u], &mut sv[u]] {
                            *view = PortView {
                                read: true,
                                write: false,
                                waitrequest: true,
                                readdata: read_hex.clone(),
                                ..PortView::idle()
                            };
                        }
                    }
                    self.tick(mv, sv)?;
                }
                for &u in &readers {
                    match despread_word(&read_frames, active[u], strict) {
                        Ok(v) => readback[u] = Some(v),
                        Err(e) => {
                            self.count_channel_error(&e);
                            outcomes[u] = None;
                        }
                    }
                }
            }
            let read_latency = self.cycle - start;

            // The slave already holds the whole round, so storage is only
            // comparable once the reference has caught up with it.
            let mut touched = Vec::new();
            for (u, txn) in batch.iter().enumerate() {
                let index = base_index + u;
                match outcomes[u] {
                    Some(access) => {
                        self.compare_readdata(index, txn, readback[u])?;
                        touched.push((index, [txn.address, access.address]));
                        let latency = if txn.is_write() { write_latency } else { read_latency };
                        self.record_completion(latency);
                    }
                    None if !txn.is_write() => {
                        self.reference.execute(txn)?;
                    }
                    None => {}
                }
            }
            for (index, addresses) in touched {
                self.compare_storage(index, &addresses)?;
            }
        }
        Ok(())
    }

    fn count_channel_error(&mut self, err: &ChannelError) {
        match err {
            ChannelError::Decode {
                source: CodecError::IntegrityViolation { .. },
                ..
            } => self.metrics.integrity_violations += 1,
            _ => self.metrics.decode_errors += 1,
        }
    }

    /// One channel frame per bit lane, each carrying bit `lane` of every
    /// user's word, with faults applied.
    fn lane_frames(&mut self, words: &[u32], codes: &[&codebook::SpreadingCode]) -> Result<Vec<ChannelFrame>, SimError> {
        let s = self.book.length();
        (0..DATA_WIDTH)
            .map(|lane| {
                let frame = if codes.is_empty() {
                    channel::superpose::<Vec<bool>>(s, &[])?
                } else {
                    let bits: Vec<bool> = words.iter().map(|w| (w >> lane) & 1 == 1).collect();
                    channel::transmit(&bits, codes)?
                };
                Ok(channel::inject_errors_with(&frame, self.config.error_rate, &mut self.fault_rng))
            })
            .collect()
    }
}

fn lane_hex(frames: &[ChannelFrame], chip: usize, field_width: usize) -> String {
    let fields: Vec<u32> = frames.iter().map(|f| f.sums[chip]).collect();
    hex_fields(&fields, field_width)
}

fn despread_word(frames: &[ChannelFrame], code: &codebook::SpreadingCode, strict: bool) -> Result<u32, ChannelError> {
    let mut word = 0u32;
    for (lane, frame) in frames.iter().enumerate() {
        let bit = channel::receive(frame, &[code], strict)?[0];
        word |= (bit as u32) << lane;
    }
    Ok(word)
}

/// Lines for every `(S, n)` cell of the reduction table; `None` where the
/// geometry is incompatible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table1 {
    pub code_lengths: Vec<usize>,
    pub word_widths: Vec<usize>,
    pub cells: Vec<Vec<Option<usize>>>,
}

impl Table1 {
    pub fn get(&self, code_length: usize, word_width: usize) -> Option<Option<usize>> {
        let i = self.code_lengths.iter().position(|&s| s == code_length)?;
        let j = self.word_widths.iter().position(|&n| n == word_width)?;
        Some(self.cells[i][j])
    }
}

impl std::fmt::Display for Table1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "S\\n")?;
        for n in &self.word_widths {
            write!(f, "\t{n}")?;
        }
        writeln!(f)?;
        for (s, row) in self.code_lengths.iter().zip(&self.cells) {
            write!(f, "{s}")?;
            for cell in row {
                match cell {
                    Some(v) => write!(f, "\t{v}")?,
                    None => write!(f, "\t-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub const TABLE1_CODE_LENGTHS: [usize; 4] = [4, 8, 16, 32];
pub const TABLE1_WORD_WIDTHS: [usize; 5] = [8, 16, 64, 128, 256];

pub fn table1_report() -> Table1 {
    let cells = TABLE1_CODE_LENGTHS
        .iter()
        .map(|&s| {
            TABLE1_WORD_WIDTHS
                .iter()
                .map(|&n| codec::bus_width(n, s).ok())
                .collect()
        })
        .collect();
    Table1 {
        code_lengths: TABLE1_CODE_LENGTHS.to_vec(),
        word_widths: TABLE1_WORD_WIDTHS.to_vec(),
        cells,
    }
}
