//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::collections::BTreeMap;
use std::io;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cdma_bus::bus_interface::{ReferenceBus, SlaveModel};
use cdma_bus::channel::{self, ChannelFrame};
use cdma_bus::codebook::{self, LfsrConfig};
use cdma_bus::codec::{self, CodecError, SumFrame};
use cdma_bus::simulator::{
    self, AccessMode, NullSink, ScenarioConfig, TraceRecord, TraceSink, TABLE1_CODE_LENGTHS,
    TABLE1_WORD_WIDTHS,
};
use cdma_bus::{CodeBook, SimMetrics};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
/// Final memory and `(index, readdata)` per read.
type Replay = (Vec<u32>, Vec<(usize, u32)>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn table1() -> Outcome {
    let start = Instant::now();
    let expected: [[Option<usize>; 5]; 4] = [
        [Some(6), Some(12), Some(48), Some(96), Some(192)],
        [Some(4), Some(8), Some(32), Some(64), Some(128)],
        [None, Some(5), Some(20), Some(40), Some(80)],
        [None, None, Some(12), Some(24), Some(48)],
    ];
    let table = simulator::table1_report();
    let (mut numbers, mut dashes) = (0, 0);
    for (i, &s) in TABLE1_CODE_LENGTHS.iter().enumerate() {
        for (j, &n) in TABLE1_WORD_WIDTHS.iter().enumerate() {
            let want = expected[i][j];
            let got = table.get(s, n).flatten();
            ensure(got == want, || format!("table (S={s}, n={n}): {got:?}, want {want:?}"))?;
            let direct = codec::bus_width(n, s).ok();
            ensure(direct == want, || format!("bus_width({n}, {s}) = {direct:?}, want {want:?}"))?;
            match want {
                Some(_) => numbers += 1,
                None => dashes += 1,
            }
        }
    }
    ensure((numbers, dashes) == (17, 3), || format!("{numbers} numbers, {dashes} dashes"))?;
    let rendered = table.to_string();
    ensure(rendered.lines().count() == 5, || "rendered table shape".into())?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("17 entries and 3 dashes exact in {:?}", start.elapsed()))
}

fn fifty_percent() -> Outcome {
    let cfg = ScenarioConfig::new(8, 100);
    let m = simulator::run_scenario_with(&cfg, &mut NullSink).map_err(|e| e.to_string())?;
    ensure(m.lines_used == 16 && m.lines_baseline == 32, || {
        format!("lines {} of {}", m.lines_used, m.lines_baseline)
    })?;
    ensure(m.reduction_percent == 50.0, || format!("reduction {}", m.reduction_percent))?;
    Ok("n=32, S=8: 16 lines, 50% reduction".into())
}

/// Every input for small books, seeded random inputs for large ones.
fn sweep_inputs(s: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<bool>> {
    if s <= 8 {
        (0..1u32 << s)
            .map(|v| (0..s).map(|k| (v >> k) & 1 == 1).collect())
            .collect()
    } else {
        (0..10_000).map(|_| (0..s).map(|_| rng.gen()).collect()).collect()
    }
}

const SWEEP_LENGTHS: [usize; 4] = [4, 8, 16, 32];

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0;
    for s in SWEEP_LENGTHS {
        let book = codebook::walsh_codebook(s).map_err(|e| e.to_string())?;
        for bits in sweep_inputs(s, &mut rng) {
            let frame = codec::encode_group(&bits, &book).map_err(|e| e.to_string())?;
            let back = codec::decode_group(&frame, &book, true).map_err(|e| e.to_string())?;
            ensure(back == bits, || format!("S={s}: {bits:?} decoded as {back:?}"))?;
            total += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{total} groups, zero failures, {:?}", start.elapsed()))
}

fn correlation_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for s in SWEEP_LENGTHS {
        let book = codebook::walsh_codebook(s).map_err(|e| e.to_string())?;
        for bits in sweep_inputs(s, &mut rng) {
            let frame = codec::encode_group(&bits, &book).map_err(|e| e.to_string())?;
            for (k, &d) in bits.iter().enumerate() {
                let corr = codec::correlate(&frame, book.code(k), s);
                let want = (2 * d as i64 - 1) * s as i64;
                ensure(corr == want, || format!("S={s} bit {k}: {corr} != {want}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} correlations equal (2d-1)S"))
}

/// Steps a register by hand until the seed state recurs.
fn brute_period(width: usize, taps: &[usize]) -> usize {
    let seed = vec![true; width];
    let mut state = seed.clone();
    for step in 1..=(1 << width) {
        let fb = taps.iter().fold(false, |acc, &t| acc ^ state[t - 1]);
        state.rotate_right(1);
        state[0] = fb;
        if state == seed {
            return step;
        }
    }
    0
}

fn lfsr_periods() -> Outcome {
    let start = Instant::now();
    for (width, taps, want) in [(4, vec![3, 4], 15), (3, vec![2, 3], 7)] {
        let cfg = LfsrConfig::new(width, taps.iter().copied()).map_err(|e| e.to_string())?;
        let got = codebook::lfsr_period(&cfg);
        let oracle = brute_period(width, &taps);
        ensure(got == want && oracle == want, || {
            format!("width {width} taps {taps:?}: {got}, oracle {oracle}, want {want}")
        })?;
    }
    let cfg = LfsrConfig::new(8, [1, 2, 3, 7]).map_err(|e| e.to_string())?;
    let first = codebook::lfsr_orbit(&cfg);
    let again = codebook::lfsr_orbit(&cfg);
    ensure(first == again, || "width-8 orbit not reproducible".into())?;
    ensure(first.period == 127 && first.tail == 1, || {
        format!("width-8 orbit changed: tail {}, period {}", first.tail, first.period)
    })?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "15 and 7 as expected; width 8 taps {{1,2,3,7}} measures period {} after a tail of {}, not 2^8-1 = 255",
        first.period, first.tail
    ))
}

fn multi_access() -> Outcome {
    let book = codebook::walsh_codebook(8).map_err(|e| e.to_string())?;
    let all: Vec<_> = book.codes().iter().collect();
    for pattern in 0..256u32 {
        let bits: Vec<bool> = (0..8).map(|k| (pattern >> k) & 1 == 1).collect();
        let got = channel::multi_access_round(&bits, &all).map_err(|e| e.to_string())?;
        ensure(got == bits, || format!("pattern {pattern:08b} decoded as {got:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for size in 2..=7 {
        for _ in 0..1000 {
            let codes: Vec<_> = sample(&mut rng, 7, size).iter().map(|i| book.code(i + 1)).collect();
            let bits: Vec<bool> = (0..size).map(|_| rng.gen()).collect();
            let got = channel::multi_access_round(&bits, &codes).map_err(|e| e.to_string())?;
            ensure(got == bits, || format!("size {size}: {bits:?} decoded as {got:?}"))?;
        }
    }
    Ok("256 full patterns and 6000 subset rounds recovered".into())
}

/// Keeps only the control bits, so long runs stay small.
#[derive(Default)]
struct ControlSink {
    records: Vec<(u64, String, String)>,
}

impl TraceSink for ControlSink {
    fn record(&mut self, r: TraceRecord) -> io::Result<()> {
        if r.signal.ends_with("_read") || r.signal.ends_with("_write") {
            self.records.push((r.cycle, r.signal, r.value));
        }
        Ok(())
    }
}

impl ControlSink {
    /// Cycles checked, or the first master/slave disagreement.
    fn check(&self) -> Result<usize, String> {
        let mut master = BTreeMap::new();
        let mut slave = BTreeMap::new();
        for (cycle, signal, value) in &self.records {
            if let Some(rest) = signal.strip_prefix("avm_m") {
                master.insert((*cycle, rest.to_string()), value);
            } else if let Some(rest) = signal.strip_prefix("avs_s") {
                slave.insert((*cycle, rest.to_string()), value);
            }
        }
        ensure(master.len() == slave.len() && !master.is_empty(), || {
            format!("{} master vs {} slave control samples", master.len(), slave.len())
        })?;
        for (key, value) in &master {
            let other = slave.get(key);
            ensure(other == Some(value), || {
                format!("cycle {} {}: master {value}, slave {other:?}", key.0, key.1)
            })?;
        }
        Ok(master.len())
    }
}

fn differential_workloads() -> Vec<ScenarioConfig> {
    let mut seq = ScenarioConfig::new(8, 10_000);
    seq.rng_seed = 7;
    seq.slave.span = 256;
    let mut conc = seq.clone();
    conc.masters = 4;
    conc.mode = AccessMode::Concurrent;
    vec![seq, conc]
}

/// Replays the same traffic through the uncoded bus.
fn reference_replay(cfg: &ScenarioConfig) -> Result<Replay, String> {
    let mut bus = ReferenceBus::new(SlaveModel::new(cfg.slave.base, cfg.slave.span).map_err(|e| e.to_string())?);
    let mut reads = Vec::new();
    for (i, txn) in simulator::generate_traffic(cfg).iter().enumerate() {
        if let Some(v) = bus.execute(txn).map_err(|e| e.to_string())? {
            reads.push((i, v));
        }
    }
    Ok((bus.slave.storage().to_vec(), reads))
}

fn differential(sinks: &mut Vec<ControlSink>) -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for cfg in differential_workloads() {
        let mut sink = ControlSink::default();
        let out = simulator::simulate(&cfg, &mut sink).map_err(|e| e.to_string())?;
        let m: &SimMetrics = &out.metrics;
        ensure(m.differential_mismatches == 0, || format!("{} mismatches", m.differential_mismatches))?;
        ensure(m.transactions_completed == 10_000, || format!("{} completed", m.transactions_completed))?;
        let (memory, reads) = reference_replay(&cfg)?;
        ensure(out.slave_memory == memory, || "final slave memory differs".into())?;
        let mut got = out.read_results.clone();
        got.sort_unstable();
        ensure(got == reads, || format!("{} coded reads vs {} reference reads differ", got.len(), reads.len()))?;
        notes.push(format!("{:?}: {} reads", cfg.mode, reads.len()));
        sinks.push(sink);
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("10^4 transactions per mode, memory and readdata identical ({}), {:?}", notes.join(", "), start.elapsed()))
}

fn control_transparency(sinks: &[ControlSink]) -> Outcome {
    ensure(!sinks.is_empty(), || "no traces from the differential workload".into())?;
    let mut samples = 0;
    for sink in sinks {
        samples += sink.check()?;
    }
    Ok(format!("{samples} read/write samples identical at master and slave"))
}

fn asserted_cycles(trace: &[TraceRecord], signal: &str) -> Vec<u64> {
    trace
        .iter()
        .filter(|r| r.signal == signal && r.value == "0x1")
        .map(|r| r.cycle)
        .collect()
}

fn timing_shape() -> Outcome {
    let mut cfg = ScenarioConfig::new(8, 1);
    cfg.write_fraction = 1.0;
    let report = simulator::run_scenario(&cfg).map_err(|e| e.to_string())?;
    let window: Vec<u64> = (0..8).collect();
    ensure(report.metrics.total_chip_cycles == 8, || format!("write ran {} cycles", report.metrics.total_chip_cycles))?;
    let last = report.trace.iter().map(|r| r.cycle).max();
    ensure(last == Some(7), || format!("trace ends at {last:?}"))?;
    for signal in ["avm_m0_write", "avm_m0_waitrequest", "avs_s0_write", "avs_s0_waitrequest"] {
        let cycles = asserted_cycles(&report.trace, signal);
        ensure(cycles == window, || format!("{signal} asserted on {cycles:?}"))?;
    }

    cfg.write_fraction = 0.0;
    let report = simulator::run_scenario(&cfg).map_err(|e| e.to_string())?;
    let m = &report.metrics;
    ensure(m.total_chip_cycles == 16 && m.latency_histogram.get(&16) == Some(&1), || {
        format!("read ran {} cycles, latencies {:?}", m.total_chip_cycles, m.latency_histogram)
    })?;
    let read = asserted_cycles(&report.trace, "avm_m0_read");
    ensure(read == (0..16).collect::<Vec<_>>(), || format!("read asserted on {read:?}"))?;
    Ok("write: 8 cycles under waitrequest; read: 16 cycles".into())
}

/// Correlations straight from a Sylvester-built Hadamard matrix.
fn oracle_correlations(sums: &[u32], users: i64) -> Vec<i64> {
    let mut h = vec![vec![1i64]];
    while h.len() < sums.len() {
        let n = h.len();
        let mut next = vec![vec![0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = h[i][j];
                next[i][j + n] = h[i][j];
                next[i + n][j] = h[i][j];
                next[i + n][j + n] = -h[i][j];
            }
        }
        h = next;
    }
    // Row +1 means chip 0; a bit-1 sender contributes -row.
    h.iter()
        .map(|row| -row.iter().zip(sums).map(|(&c, &p)| c * (users - 2 * p as i64)).sum::<i64>())
        .collect()
}

fn fault_detection() -> Outcome {
    let s = 8;
    let book: CodeBook = codebook::walsh_codebook(s).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut frames, mut changed, mut silent) = (0, 0, 0);
    while frames < 1000 {
        let bits: Vec<bool> = (0..s).map(|_| rng.gen()).collect();
        let clean = codec::encode_group(&bits, &book).map_err(|e| e.to_string())?;
        let sent = ChannelFrame {
            sums: clean.sums().to_vec(),
            active_count: s,
        };
        let received = channel::inject_errors_with(&sent, 0.2, &mut rng);
        if received.sums == sent.sums {
            continue;
        }
        frames += 1;
        let frame = SumFrame::new(received.sums.clone()).map_err(|e| e.to_string())?;
        let corrs = oracle_correlations(&received.sums, s as i64);
        let result = codec::decode_group(&frame, &book, true);
        if corrs.iter().any(|c| c.abs() != s as i64) {
            changed += 1;
            ensure(matches!(result, Err(CodecError::IntegrityViolation { .. })), || {
                format!("sums {:?} (correlations {corrs:?}) gave {result:?}", received.sums)
            })?;
        } else {
            silent += 1;
            let want: Vec<bool> = corrs.iter().map(|&c| c > 0).collect();
            ensure(result.as_ref() == Ok(&want), || format!("undetectable frame decoded as {result:?}"))?;
        }
    }
    ensure(changed > 0, || "no corruption changed a magnitude".into())?;
    Ok(format!(
        "{frames} corrupted frames: {changed} changed a magnitude and all raised IntegrityViolation, {silent} mapped onto another valid frame"
    ))
}

fn main() -> ExitCode {
    let mut sinks = Vec::new();
    let differential_result = differential(&mut sinks);
    let results: Vec<(&str, Outcome)> = vec![
        ("table 1 reproduction", table1()),
        ("50% reduction", fifty_percent()),
        ("round-trip identity", round_trip()),
        ("correlation law", correlation_law()),
        ("LFSR period", lfsr_periods()),
        ("multi-access", multi_access()),
        ("differential end-to-end", differential_result),
        ("timing shape", timing_shape()),
        ("control transparency", control_transparency(&sinks)),
        ("fault detection", fault_detection()),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
