//! Latency sweeps over any transport.
//!
//! * `db-growth`: s-term frequency fixed, total triples grown.
//! * `freq-sweep`: total triples fixed, s-term frequency swept over powers of two.
//! * `matching`: frequencies fixed, number of documents matching both terms swept.
//!
//! Each cell loads a fresh database, then times `runs` end-to-end searches
//! of `s AND x` after two warm-up runs.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use csse_core::protocol::{run_search, run_setup, run_update, Channel, LocalServer};
use csse_core::{SearchQuery, UpdateTriple};
use csse_service::{spawn, RemoteChannel, ServerConfig};
use rand::rngs::OsRng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::workload::frequency_db;

const LOAD_BATCH: usize = 2048;
const WARMUP: usize = 2;
const TARGET_FP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    /// In-process server, no sockets.
    Local,
    /// A daemon on an ephemeral loopback port per cell.
    Tcp,
}

impl FromStr for Transport {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "local" => Ok(Transport::Local),
            "tcp" => Ok(Transport::Tcp),
            _ => Err(CliError::user(format!("unknown transport {s:?}, expected local or tcp"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Scaling,
    Matching,
    Full,
}

impl FromStr for Profile {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "scaling" => Ok(Profile::Scaling),
            "matching" => Ok(Profile::Matching),
            "full" => Ok(Profile::Full),
            "" => Err(CliError::user("empty profile; expected quick, scaling, matching, or full")),
            _ => Err(CliError::user(format!("unknown profile {s:?}; expected quick, scaling, matching, or full"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub runs: usize,
    pub db_sizes: Vec<usize>,
    pub growth_s_freq: usize,
    pub growth_x_freq: usize,
    pub sweep_freqs: Vec<usize>,
    pub sweep_db: usize,
    pub sweep_x_freq: usize,
    pub matching: Vec<usize>,
    pub matching_freq: usize,
}

impl Profile {
    pub fn config(self) -> BenchConfig {
        let scaling = BenchConfig {
            runs: 15,
            db_sizes: vec![1000, 2500, 5000, 10_000],
            growth_s_freq: 16,
            growth_x_freq: 64,
            sweep_freqs: (2..=10).map(|e| 1 << e).collect(),
            sweep_db: 4096,
            sweep_x_freq: 2048,
            matching: vec![],
            matching_freq: 256,
        };
        match self {
            Profile::Quick => BenchConfig {
                runs: 5,
                db_sizes: vec![500, 2000],
                growth_s_freq: 16,
                growth_x_freq: 64,
                sweep_freqs: vec![4, 16, 64],
                sweep_db: 1000,
                sweep_x_freq: 128,
                matching: vec![0, 16],
                matching_freq: 32,
            },
            Profile::Scaling => scaling,
            Profile::Matching => BenchConfig {
                runs: 10,
                db_sizes: vec![],
                sweep_freqs: vec![],
                matching: vec![0, 16, 64, 256],
                ..scaling
            },
            Profile::Full => BenchConfig {
                matching: vec![0, 16, 64, 256],
                ..scaling
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub workload: String,
    pub phase: String,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> CliResult<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(|e| CliError::user(format!("csv: {e}")))?;
        }
        out.flush().map_err(|e| CliError::user(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn median(&self, workload: &str, phase: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.workload == workload && r.phase == phase)
            .map(|r| r.median_ms)
    }
}

/// Median and nearest-rank 95th percentile.
pub fn summarize(samples_ms: &[f64]) -> (f64, f64, f64) {
    assert!(!samples_ms.is_empty());
    let mut v = samples_ms.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    let mean = v.iter().sum::<f64>() / n as f64;
    (median, v[rank - 1], mean)
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

struct CellTimes {
    setup_ms: f64,
    load_ms: f64,
    search_ms: Vec<f64>,
}

fn run_cell_on<C: Channel>(ch: &mut C, triples: &[UpdateTriple], runs: usize) -> CliResult<CellTimes> {
    let t = Instant::now();
    let (sk, mut st) = run_setup(ch, triples.len() as u64, TARGET_FP, &mut OsRng)?;
    let setup_ms = ms(t);
    let t = Instant::now();
    for batch in triples.chunks(LOAD_BATCH) {
        run_update(&sk, &mut st, ch, batch, &mut OsRng)?;
    }
    let load_ms = ms(t);

    let q = SearchQuery::new(["s", "x"]).expect("two keywords");
    let mut search_ms = Vec::with_capacity(runs);
    for i in 0..WARMUP + runs {
        let t = Instant::now();
        let out = run_search(&sk, ch, &q, &mut OsRng)?;
        let elapsed = ms(t);
        if out.plan.as_ref().map(|p| p.s_term().as_bytes()) != Some(b"s") {
            return Err(CliError::Protocol("benchmark s-term was not chosen as least frequent".into()));
        }
        if i >= WARMUP {
            search_ms.push(elapsed);
        }
    }
    Ok(CellTimes {
        setup_ms,
        load_ms,
        search_ms,
    })
}

fn run_cell(transport: Transport, triples: &[UpdateTriple], runs: usize) -> CliResult<CellTimes> {
    match transport {
        Transport::Local => run_cell_on(&mut LocalServer::new(), triples, runs),
        Transport::Tcp => {
            let cfg = ServerConfig {
                listen: "127.0.0.1:0".parse().unwrap(),
                ..ServerConfig::default()
            };
            let server = spawn(cfg)?;
            let mut ch = RemoteChannel::connect(server.addr())?;
            run_cell_on(&mut ch, triples, runs)
        }
    }
}

fn push_rows(report: &mut BenchReport, workload: &str, c: &CellTimes) {
    for (phase, samples) in [
        ("setup", vec![c.setup_ms]),
        ("update", vec![c.load_ms]),
        ("search", c.search_ms.clone()),
    ] {
        let (median_ms, p95_ms, mean_ms) = summarize(&samples);
        report.rows.push(Row {
            workload: workload.to_string(),
            phase: phase.to_string(),
            median_ms,
            p95_ms,
            mean_ms,
            runs: samples.len(),
        });
    }
}

pub fn growth_name(n: usize) -> String {
    format!("db-growth/n={n}")
}

pub fn sweep_name(f: usize) -> String {
    format!("freq-sweep/f={f}")
}

pub fn matching_name(k: usize) -> String {
    format!("matching/k={k}")
}

/// Runs every sweep in `cfg`, calling `progress` after each cell.
pub fn run(cfg: &BenchConfig, transport: Transport, mut progress: impl FnMut(&str)) -> CliResult<BenchReport> {
    if cfg.runs == 0 {
        return Err(CliError::user("runs must be positive"));
    }
    let mut report = BenchReport::default();

    for &n in &cfg.db_sizes {
        let name = growth_name(n);
        let cell = run_cell(transport, &frequency_db(n, cfg.growth_s_freq, cfg.growth_x_freq, 0), cfg.runs)?;
        push_rows(&mut report, &name, &cell);
        progress(&name);
    }
    for &f in &cfg.sweep_freqs {
        let name = sweep_name(f);
        let cell = run_cell(transport, &frequency_db(cfg.sweep_db, f, cfg.sweep_x_freq, 0), cfg.runs)?;
        push_rows(&mut report, &name, &cell);
        progress(&name);
    }
    for &k in &cfg.matching {
        let name = matching_name(k);
        let total = 2 * cfg.matching_freq + 1024;
        let cell = run_cell(
            transport,
            &frequency_db(total, cfg.matching_freq, cfg.matching_freq + 1, k),
            cfg.runs,
        )?;
        push_rows(&mut report, &name, &cell);
        progress(&name);
    }
    report.verdicts = verdicts(cfg, &report);
    Ok(report)
}

/// Growth: search median at the largest size is at most 1.5 times that at the
/// smallest. Sweep: `L(f) / L(f_min) <= 2 f / f_min` for every `f`, and the
/// largest frequency is slower than the smallest.
pub fn verdicts(cfg: &BenchConfig, report: &BenchReport) -> Vec<Verdict> {
    let mut out = Vec::new();
    if let (Some(&lo), Some(&hi)) = (cfg.db_sizes.first(), cfg.db_sizes.last()) {
        if lo != hi {
            let a = report.median(&growth_name(lo), "search").unwrap_or(f64::NAN);
            let b = report.median(&growth_name(hi), "search").unwrap_or(f64::NAN);
            let ratio = b / a;
            out.push(Verdict {
                name: "db-growth".into(),
                pass: ratio <= 1.5,
                detail: format!("median {a:.3} ms at n={lo}, {b:.3} ms at n={hi}, ratio {ratio:.3} (limit 1.5)"),
            });
        }
    }
    if let (Some(&fmin), Some(&fmax)) = (cfg.sweep_freqs.first(), cfg.sweep_freqs.last()) {
        if fmin != fmax {
            let base = report.median(&sweep_name(fmin), "search").unwrap_or(f64::NAN);
            let mut worst = 0.0f64;
            let mut pass = true;
            for &f in &cfg.sweep_freqs {
                let l = report.median(&sweep_name(f), "search").unwrap_or(f64::NAN);
                let allowed = 2.0 * f as f64 / fmin as f64;
                let ratio = l / base;
                pass &= ratio <= allowed;
                worst = worst.max(ratio / allowed);
            }
            let top = report.median(&sweep_name(fmax), "search").unwrap_or(f64::NAN);
            pass &= top > base;
            out.push(Verdict {
                name: "freq-sweep".into(),
                pass,
                detail: format!(
                    "L({fmin}) = {base:.3} ms, L({fmax}) = {top:.3} ms, growth {:.1}x over a {}x frequency range, worst ratio/limit {worst:.3}",
                    top / base,
                    fmax / fmin
                ),
            });
        }
    }
    out
}
