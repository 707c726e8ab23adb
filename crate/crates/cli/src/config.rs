//! JSON run configuration.
//!
//! ```json
//! {
//!   "lattice": { "kind": "ball", "center": 62, "size": 16 },
//!   "observable": "Z0",
//!   "steps": 8,
//!   "methods": [
//!     { "method": "spd", "deltas": [1e-3, 5e-4] },
//!     { "method": "mix", "chis": [8, 16, 32] },
//!     { "method": "exact" }
//!   ]
//! }
//! ```
//!
//! Lattice kinds: `heavy_hex {rows, cols}`, `eagle`, `ball {center, size}`
//! (a breadth-first fragment of the 127-qubit graph, renumbered from 0),
//! `file {path}` (edge-list text) and `edges {n, edges}`.
//!
//! Optional fields and defaults: `extra_x_layer` false, `theta_h` the grid
//! k*pi/32 for k = 0..=16, `kappa` 0, `bp_tol` 5e-6, `bp_max_iter` 100,
//! `damping` 0, `init_noise` 0, `seed` 0, `workers` all cores,
//! `record_wall_time` true, `max_terms` the engine default, `output` none.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spdtn_core::circuit::{eagle_127, heavy_hex, load_lattice, Lattice};
use spdtn_core::spd::{named_observable, PauliSum};
use spdtn_tn::bp::BpOptions;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSource {
    HeavyHex { rows: usize, cols: usize },
    Eagle,
    Ball { center: usize, size: usize },
    File { path: PathBuf },
    Edges { n: usize, edges: Vec<(usize, usize)> },
}

impl LatticeSource {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Lattice> {
        Ok(match self {
            LatticeSource::HeavyHex { rows, cols } => {
                if *rows == 0 || *cols == 0 {
                    return Err(Error::Config("heavy_hex needs rows, cols >= 1".into()));
                }
                heavy_hex(*rows, *cols)
            }
            LatticeSource::Eagle => eagle_127(),
            LatticeSource::Ball { center, size } => eagle_127().ball(*center, *size)?.0,
            LatticeSource::File { path } => match base_dir {
                Some(dir) if path.is_relative() => load_lattice(dir.join(path))?,
                _ => load_lattice(path)?,
            },
            LatticeSource::Edges { n, edges } => Lattice::new(*n, edges.clone())?,
        })
    }

    pub fn describe(&self) -> String {
        match self {
            LatticeSource::HeavyHex { rows, cols } => format!("heavy_hex({rows}x{cols})"),
            LatticeSource::Eagle => "eagle127".into(),
            LatticeSource::Ball { center, size } => format!("ball(center={center},size={size})"),
            LatticeSource::File { path } => format!("file({})", path.display()),
            LatticeSource::Edges { n, edges } => format!("edges(n={n},m={})", edges.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Spd { deltas: Vec<f64> },
    Peps { chis: Vec<usize> },
    Pepo { chis: Vec<usize> },
    Mix { chis: Vec<usize> },
    Exact,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Spd { .. } => "spd",
            MethodSpec::Peps { .. } => "peps",
            MethodSpec::Pepo { .. } => "pepo",
            MethodSpec::Mix { .. } => "mix",
            MethodSpec::Exact => "exact",
        }
    }

    /// The method's accuracy parameter values, in config order.
    pub fn params(&self) -> Vec<Param> {
        match self {
            MethodSpec::Spd { deltas } => deltas.iter().map(|&d| Param::Delta(d)).collect(),
            MethodSpec::Peps { chis } | MethodSpec::Pepo { chis } | MethodSpec::Mix { chis } => {
                chis.iter().map(|&c| Param::Chi(c)).collect()
            }
            MethodSpec::Exact => vec![Param::None],
        }
    }
}

/// Accuracy parameter of one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Param {
    Delta(f64),
    Chi(usize),
    None,
}

impl Param {
    pub fn name(&self) -> &'static str {
        match self {
            Param::Delta(_) => "delta",
            Param::Chi(_) => "chi",
            Param::None => "none",
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Param::Delta(d) => *d,
            Param::Chi(c) => *c as f64,
            Param::None => 0.0,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSource,
    pub observable: String,
    pub steps: usize,
    #[serde(default)]
    pub extra_x_layer: bool,
    #[serde(default)]
    pub theta_h: Option<Vec<f64>>,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub bp_tol: Option<f64>,
    #[serde(default)]
    pub bp_max_iter: Option<usize>,
    #[serde(default)]
    pub damping: f64,
    #[serde(default)]
    pub init_noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub max_terms: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// The default sweep grid, k*pi/32 for k = 0..=16.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=16).map(|k| k as f64 * PI / 32.0).collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(t) = &self.theta_h {
            if t.is_empty() {
                return bad("theta_h list is empty".into());
            }
            if let Some(x) = t.iter().find(|x| !x.is_finite()) {
                return bad(format!("theta_h value {x} is not finite"));
            }
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        for m in &self.methods {
            let params = m.params();
            if params.is_empty() {
                return bad(format!("method {} has an empty parameter list", m.name()));
            }
            for p in params {
                match p {
                    Param::Delta(d) if !(d >= 0.0 && d.is_finite()) => {
                        return bad(format!("spd delta {d} must be finite and >= 0"))
                    }
                    Param::Chi(0) => return bad(format!("{} chi must be >= 1", m.name())),
                    _ => {}
                }
            }
        }
        if !(self.kappa >= 0.0) {
            return bad(format!("kappa {} must be >= 0", self.kappa));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad(format!("damping {} must lie in [0, 1)", self.damping));
        }
        if !(self.init_noise >= 0.0) {
            return bad(format!("init_noise {} must be >= 0", self.init_noise));
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if self.max_terms == Some(0) {
            return bad("max_terms must be >= 1".into());
        }
        Ok(())
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.theta_h.clone().unwrap_or_else(default_theta_grid)
    }

    pub fn observable_for(&self, n: usize) -> Result<PauliSum> {
        Ok(named_observable(&self.observable, n)?)
    }

    pub fn bp_options(&self) -> BpOptions {
        let d = BpOptions::default();
        BpOptions {
            tol: self.bp_tol.unwrap_or(d.tol),
            max_iter: self.bp_max_iter.unwrap_or(d.max_iter),
            damping: self.damping,
            init_noise: self.init_noise,
            seed: self.seed,
        }
    }

    /// Canonical serialization, used to fingerprint result files.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.output = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}
