//! Sweep execution and the results table.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use spdtn_core::circuit::{kicked_ising, lightcone_prune, Circuit, Lattice};
use spdtn_core::clifford::recompile;
use spdtn_core::oracle::statevector_expectation;
use spdtn_core::spd::{max_terms_from_env, run_spd_with, PauliSum, SpdOptions, DEFAULT_MAX_TERMS};
use spdtn_tn::evolve::{run_tn, Method, TnOptions};

use crate::config::{MethodSpec, Param, RunConfig};
use crate::error::{Error, Result};

pub const TABLE_VERSION: &str = "sim-results v1";

pub const COLUMNS: [&str; 11] = [
    "method",
    "theta_h",
    "param_name",
    "param_value",
    "expectation",
    "norm_psi",
    "norm_o",
    "norm_mix",
    "peak_terms_or_maxbond",
    "wall_time_s",
    "flags",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub theta_h: f64,
    pub param_name: String,
    pub param_value: f64,
    pub expectation: f64,
    pub norm_psi: f64,
    pub norm_o: f64,
    pub norm_mix: f64,
    pub peak_terms_or_maxbond: u64,
    pub wall_time_s: f64,
    pub flags: Vec<String>,
}

impl ResultRow {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    fn failed(method: &str, theta_h: f64, param: Param, message: String) -> Self {
        ResultRow {
            method: method.to_string(),
            theta_h,
            param_name: param.name().to_string(),
            param_value: param.value(),
            expectation: f64::NAN,
            norm_psi: f64::NAN,
            norm_o: f64::NAN,
            norm_mix: f64::NAN,
            peak_terms_or_maxbond: 0,
            wall_time_s: 0.0,
            flags: vec![format!("failed({})", message.replace(';', ","))],
        }
    }

    pub fn record(&self) -> [String; 11] {
        [
            self.method.clone(),
            self.theta_h.to_string(),
            self.param_name.clone(),
            self.param_value.to_string(),
            self.expectation.to_string(),
            self.norm_psi.to_string(),
            self.norm_o.to_string(),
            self.norm_mix.to_string(),
            self.peak_terms_or_maxbond.to_string(),
            self.wall_time_s.to_string(),
            self.flags.join(";"),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        if rec.len() != COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", COLUMNS.len(), rec.len()));
        }
        let num = |i: usize| -> std::result::Result<f64, String> {
            rec[i].parse().map_err(|_| format!("column {}: `{}` is not a number", COLUMNS[i], &rec[i]))
        };
        Ok(ResultRow {
            method: rec[0].to_string(),
            theta_h: num(1)?,
            param_name: rec[2].to_string(),
            param_value: num(3)?,
            expectation: num(4)?,
            norm_psi: num(5)?,
            norm_o: num(6)?,
            norm_mix: num(7)?,
            peak_terms_or_maxbond: rec[8]
                .parse()
                .map_err(|_| format!("column peak_terms_or_maxbond: `{}` is not an integer", &rec[8]))?,
            wall_time_s: num(9)?,
            flags: rec[10].split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        })
    }

    /// Identity of the sweep point this row belongs to.
    fn key(&self) -> (String, u64, u64) {
        (self.method.clone(), self.theta_h.to_bits(), self.param_value.to_bits())
    }
}

/// Metadata carried in the table's leading comment line.
#[derive(Clone, Debug, PartialEq)]
pub struct TableHeader {
    pub observable: String,
    pub steps: usize,
    pub extra_x_layer: bool,
    pub lattice: String,
    pub fingerprint: String,
}

impl TableHeader {
    pub fn for_config(cfg: &RunConfig) -> Self {
        TableHeader {
            observable: cfg.observable.clone(),
            steps: cfg.steps,
            extra_x_layer: cfg.extra_x_layer,
            lattice: cfg.lattice.describe(),
            fingerprint: format!("{:016x}", fnv1a(cfg.canonical().as_bytes())),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "# {TABLE_VERSION} | observable={} | steps={} | extra_x_layer={} | lattice={} | config={}",
            self.observable, self.steps, self.extra_x_layer, self.lattice, self.fingerprint
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let body = line.strip_prefix("# ")?;
        let mut parts = body.split(" | ");
        if parts.next()? != TABLE_VERSION {
            return None;
        }
        let mut fields = BTreeMap::new();
        for p in parts {
            let (k, v) = p.split_once('=')?;
            fields.insert(k, v);
        }
        Some(TableHeader {
            observable: fields.get("observable")?.to_string(),
            steps: fields.get("steps")?.parse().ok()?,
            extra_x_layer: fields.get("extra_x_layer")?.parse().ok()?,
            lattice: fields.get("lattice")?.to_string(),
            fingerprint: fields.get("config")?.to_string(),
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug)]
pub struct Table {
    pub header: TableHeader,
    pub rows: Vec<ResultRow>,
}

fn table_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Table {
        path: path.display().to_string(),
        message: message.into(),
    }
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let first = text.lines().next().unwrap_or_default();
        let header = TableHeader::parse(first).ok_or_else(|| table_error(path, "missing or unknown version line"))?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let names = reader.headers()?.clone();
        if names.iter().ne(COLUMNS.iter().copied()) {
            return Err(table_error(path, "unexpected column names"));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            rows.push(ResultRow::from_record(&rec).map_err(|m| table_error(path, format!("row {}: {m}", i + 1)))?);
        }
        Ok(Table { header, rows })
    }

    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.is_flagged()).count()
    }
}

/// One (method, parameter, theta) point of a sweep.
#[derive(Clone, Debug)]
pub struct Point {
    pub method: MethodSpec,
    pub param: Param,
    pub theta_h: f64,
}

/// Points in table order: method, then parameter, then theta.
pub fn plan(cfg: &RunConfig) -> Vec<Point> {
    let thetas = cfg.thetas();
    let mut points = Vec::new();
    for m in &cfg.methods {
        for p in m.params() {
            for &t in &thetas {
                points.push(Point {
                    method: m.clone(),
                    param: p,
                    theta_h: t,
                });
            }
        }
    }
    points
}

/// Shared inputs for evaluating points.
pub struct Context {
    pub lattice: Lattice,
    pub observable: PauliSum,
    pub config: RunConfig,
    pub max_terms: usize,
}

impl Context {
    pub fn new(cfg: &RunConfig, base_dir: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let lattice = cfg.lattice.build(base_dir)?;
        let observable = cfg.observable_for(lattice.num_nodes())?;
        let max_terms = max_terms_from_env().or(cfg.max_terms).unwrap_or(DEFAULT_MAX_TERMS);
        Ok(Context {
            lattice,
            observable,
            config: cfg.clone(),
            max_terms,
        })
    }

    pub fn circuit(&self, theta_h: f64) -> Circuit {
        kicked_ising(&self.lattice, theta_h, self.config.steps, self.config.extra_x_layer)
    }

    /// Evaluates one point; engine failures become a flagged row.
    pub fn run_point(&self, point: &Point) -> ResultRow {
        let start = Instant::now();
        let name = point.method.name();
        let mut row = match self.evaluate(point) {
            Ok(row) => row,
            Err(e) => ResultRow::failed(name, point.theta_h, point.param, e.to_string()),
        };
        row.wall_time_s = if self.config.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        row
    }

    fn evaluate(&self, point: &Point) -> Result<ResultRow> {
        let circuit = self.circuit(point.theta_h);
        let o = &self.observable;
        let mut row = ResultRow {
            method: point.method.name().to_string(),
            theta_h: point.theta_h,
            param_name: point.param.name().to_string(),
            param_value: point.param.value(),
            expectation: 0.0,
            norm_psi: 1.0,
            norm_o: 1.0,
            norm_mix: 1.0,
            peak_terms_or_maxbond: 0,
            wall_time_s: 0.0,
            flags: Vec::new(),
        };
        match (&point.method, point.param) {
            (MethodSpec::Spd { .. }, Param::Delta(delta)) => {
                let rc = recompile(&lightcone_prune(&circuit, o), o)?;
                let opts = SpdOptions {
                    max_terms: self.max_terms,
                    track_norm: false,
                };
                let (r, _) = run_spd_with(&rc, delta, &opts)?;
                row.expectation = r.expectation;
                row.norm_o = r.frobenius_norm / o.frobenius_norm();
                row.norm_mix = row.norm_o;
                row.peak_terms_or_maxbond = r.peak_terms as u64;
            }
            (MethodSpec::Exact, _) => {
                row.expectation = statevector_expectation(&circuit, o)?;
            }
            (m, Param::Chi(chi)) => {
                let method = match m {
                    MethodSpec::Peps { .. } => Method::Peps,
                    MethodSpec::Pepo { .. } => Method::Pepo,
                    _ => Method::Mix,
                };
                let opts = TnOptions {
                    kappa: self.config.kappa,
                    bp: self.config.bp_options(),
                    ..TnOptions::new(method, chi)
                };
                let r = run_tn(&circuit, o, &opts)?;
                row.expectation = r.expectation;
                row.norm_psi = r.norm_psi;
                row.norm_o = r.norm_o;
                row.norm_mix = r.norm_mix;
                row.peak_terms_or_maxbond = r.max_bond as u64;
                row.flags = r.flags;
            }
            (m, p) => {
                return Err(Error::Config(format!("parameter {} does not apply to {}", p.name(), m.name())));
            }
        }
        if !row.expectation.is_finite() && !row.flags.iter().any(|f| f == "non_finite") {
            row.flags.push("non_finite".into());
        }
        Ok(row)
    }
}

/// Outcome of a sweep.
#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub rows: Vec<ResultRow>,
    /// Rows taken over from an interrupted earlier run.
    pub resumed: usize,
}

impl SweepSummary {
    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.is_flagged()).count()
    }
}

fn csv_line(row: &ResultRow) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(row.record())?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn column_line() -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Rows from an earlier run with the same header that match the plan's
/// leading points. A torn final line is dropped.
fn resumable_rows(path: &Path, header: &TableHeader, points: &[Point]) -> Vec<ResultRow> {
    let Ok(mut text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    text.truncate(text.rfind('\n').map_or(0, |i| i + 1));
    let Ok(table) = Table::parse(&text, path) else {
        return Vec::new();
    };
    if &table.header != header {
        return Vec::new();
    }
    let mut kept = Vec::new();
    for (row, point) in table.rows.into_iter().zip(points) {
        let expect = (point.method.name().to_string(), point.theta_h.to_bits(), point.param.value().to_bits());
        if row.key() != expect {
            break;
        }
        kept.push(row);
    }
    kept
}

/// Runs every point of the config, writing rows in plan order as they
/// complete. Each row is flushed before the next is written, so an
/// interrupted sweep leaves a valid prefix that a rerun resumes from.
pub fn sweep(cfg: &RunConfig, out: Option<&Path>, workers: Option<usize>, base_dir: Option<&Path>) -> Result<SweepSummary> {
    let ctx = Context::new(cfg, base_dir)?;
    let points = plan(cfg);
    let header = TableHeader::for_config(cfg);

    let done = out.map(|p| resumable_rows(p, &header, &points)).unwrap_or_default();
    let resumed = done.len();
    let mut sink: Box<dyn Write + Send> = match out {
        Some(path) => {
            let mut f = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
            f.write_all(header.line().as_bytes())?;
            f.write_all(b"\n")?;
            f.write_all(&column_line()?)?;
            for row in &done {
                f.write_all(&csv_line(row)?)?;
            }
            f.sync_data()?;
            Box::new(f)
        }
        None => Box::new(std::io::sink()),
    };

    let workers = workers.or(cfg.workers).unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let todo: Vec<(usize, &Point)> = points.iter().enumerate().skip(resumed).collect();
    let mut rows = done;
    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    std::thread::scope(|scope| -> Result<()> {
        let ctx = &ctx;
        let todo = &todo;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, (i, p)| {
                    let _ = tx.send((*i, ctx.run_point(p)));
                });
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = resumed;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&next) {
                sink.write_all(&csv_line(&row)?)?;
                sink.flush()?;
                rows.push(row);
                next += 1;
            }
        }
        Ok(())
    })?;
    Ok(SweepSummary { rows, resumed })
}

/// Default output path next to the config, if the config names one.
pub fn resolve_output(cfg: &RunConfig, cli_out: Option<PathBuf>, base_dir: Option<&Path>) -> Option<PathBuf> {
    cli_out.or_else(|| {
        cfg.output.as_ref().map(|p| match base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        })
    })
}
