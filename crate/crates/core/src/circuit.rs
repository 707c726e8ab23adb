//! Lattices and layered Clifford + Pauli-rotation circuits.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliWord};
use crate::spd::PauliSum;

/// Simple undirected graph of qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<(f64, f64)>>,
}

impl Lattice {
    /// Validates and normalizes an edge list (each edge stored as `(min, max)`).
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a == b {
                return Err(Error::Lattice {
                    line: i + 1,
                    message: format!("self-loop at node {a}"),
                });
            }
            if a >= n || b >= n {
                return Err(Error::Lattice {
                    line: i + 1,
                    message: format!("edge ({a}, {b}) out of range for {n} nodes"),
                });
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Lattice {
                    line: i + 1,
                    message: format!("duplicate edge ({a}, {b})"),
                });
            }
            out.push(e);
        }
        Ok(Self {
            n,
            edges: out,
            coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<(f64, f64)>) -> Self {
        assert_eq!(coords.len(), self.n);
        self.coords = Some(coords);
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == node || b == node)
            .count()
    }

    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Graph distances from `source` (usize::MAX when unreachable).
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let adj = self.neighbors();
        let mut dist = vec![usize::MAX; self.n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// Induced subgraph on `nodes`, renumbered in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<(Lattice, Vec<usize>)> {
        let mut index = BTreeMap::new();
        for (i, &v) in nodes.iter().enumerate() {
            if v >= self.n || index.insert(v, i).is_some() {
                return Err(Error::Argument(format!("bad or repeated node {v}")));
            }
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((*index.get(&a)?, *index.get(&b)?)))
            .collect();
        let mut lat = Lattice::new(nodes.len(), edges)?;
        if let Some(c) = &self.coords {
            lat.coords = Some(nodes.iter().map(|&v| c[v]).collect());
        }
        Ok((lat, nodes.to_vec()))
    }

    /// The `size` nodes closest to `center` (BFS order, ties by index),
    /// returned as an induced subgraph plus the original node ids.
    pub fn ball(&self, center: usize, size: usize) -> Result<(Lattice, Vec<usize>)> {
        let dist = self.distances_from(center);
        let mut order: Vec<usize> = (0..self.n).filter(|&v| dist[v] != usize::MAX).collect();
        order.sort_by_key(|&v| (dist[v], v));
        order.truncate(size);
        order.sort_unstable();
        self.induced(&order)
    }

    /// Serializes to the edge-list text format accepted by [`parse_lattice`].
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for &(a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

/// Heavy-hex lattice of `rows x cols` hexagonal plaquettes with one extra node
/// on every hexagon edge.
///
/// Plaquettes follow a brick pattern: plaquette `(r, k)` spans vertex rows `r`
/// and `r + 1` and vertex columns `2k + r%2 ..= 2k + r%2 + 2`. Nodes are
/// numbered row by row: first the horizontal chain of row `r` (vertices and
/// the nodes between them, left to right), then the bridge nodes between rows
/// `r` and `r + 1`, left to right.
pub fn heavy_hex(rows: usize, cols: usize) -> Lattice {
    assert!(rows >= 1 && cols >= 1, "heavy_hex needs at least one plaquette");
    type V = (usize, usize);
    let mut hex_edges: BTreeSet<(V, V)> = BTreeSet::new();
    for r in 0..rows {
        for k in 0..cols {
            let c0 = 2 * k + r % 2;
            for rr in [r, r + 1] {
                hex_edges.insert(((rr, c0), (rr, c0 + 1)));
                hex_edges.insert(((rr, c0 + 1), (rr, c0 + 2)));
            }
            hex_edges.insert(((r, c0), (r + 1, c0)));
            hex_edges.insert(((r, c0 + 2), (r + 1, c0 + 2)));
        }
    }

    // chain[r]: position -> node kind (Some(c) for vertex column c, None for a flag)
    let mut chain: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut bridges: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &((r1, c1), (r2, c2)) in &hex_edges {
        if r1 == r2 {
            let row = chain.entry(r1).or_default();
            row.insert(2 * c1);
            row.insert(2 * c2);
            row.insert(c1 + c2);
        } else {
            bridges.entry(r1).or_default().insert(c1);
        }
    }

    let mut id_chain: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut id_bridge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut coords = Vec::new();
    let mut next = 0usize;
    for r in 0..=rows {
        if let Some(row) = chain.get(&r) {
            for &pos in row {
                id_chain.insert((r, pos), next);
                coords.push((pos as f64, -2.0 * r as f64));
                next += 1;
            }
        }
        if let Some(cols) = bridges.get(&r) {
            for &c in cols {
                id_bridge.insert((r, c), next);
                coords.push((2.0 * c as f64, -2.0 * r as f64 - 1.0));
                next += 1;
            }
        }
    }

    let mut edges = Vec::new();
    for &((r1, c1), (r2, c2)) in &hex_edges {
        if r1 == r2 {
            let mid = id_chain[&(r1, c1 + c2)];
            edges.push((id_chain[&(r1, 2 * c1)], mid));
            edges.push((mid, id_chain[&(r2, 2 * c2)]));
        } else {
            let mid = id_bridge[&(r1, c1)];
            edges.push((id_chain[&(r1, 2 * c1)], mid));
            edges.push((mid, id_chain[&(r2, 2 * c2)]));
        }
    }
    edges.sort_unstable();
    Lattice::new(next, edges)
        .expect("generator produces a simple graph")
        .with_coords(coords)
}

/// Parses the edge-list format: one `u v` pair per line, `#` comments, and an
/// optional `n <count>` header overriding the inferred node count.
pub fn parse_lattice(text: &str) -> Result<Lattice> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut lines = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() == 2 && parts[0] == "n" {
            let n = parts[1].parse().map_err(|_| Error::Lattice {
                line: line_no,
                message: format!("bad node count '{}'", parts[1]),
            })?;
            declared = Some(n);
            continue;
        }
        if parts.len() != 2 {
            return Err(Error::Lattice {
                line: line_no,
                message: format!("expected 'u v', got '{line}'"),
            });
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Lattice {
                line: line_no,
                message: format!("bad node index '{s}'"),
            })
        };
        let (a, b) = (parse(parts[0])?, parse(parts[1])?);
        if a == b {
            return Err(Error::Lattice {
                line: line_no,
                message: format!("self-loop at node {a}"),
            });
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::Lattice {
                line: line_no,
                message: format!("duplicate edge ({a}, {b})"),
            });
        }
        edges.push((a, b));
        lines.push(line_no);
    }
    let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
    let n = declared.unwrap_or(inferred);
    if let Some(pos) = edges.iter().position(|&(a, b)| a.max(b) >= n) {
        return Err(Error::Lattice {
            line: lines[pos],
            message: format!("node index exceeds declared count {n}"),
        });
    }
    Lattice::new(n, edges)
}

pub fn load_lattice(path: impl AsRef<Path>) -> Result<Lattice> {
    parse_lattice(&std::fs::read_to_string(path)?)
}

/// The 127-qubit Eagle-family heavy-hex coupling map shipped with the crate.
pub fn eagle_127() -> Lattice {
    parse_lattice(include_str!("../data/eagle127.edges")).expect("bundled lattice is valid")
}

/// Elementary gates. Rotations are `exp(-i theta axis / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    H { q: usize },
    S { q: usize },
    Sdg { q: usize },
    X { q: usize },
    Y { q: usize },
    Z { q: usize },
    Cx { control: usize, target: usize },
    Cz { a: usize, b: usize },
    Rotation { axis: PauliWord, theta: f64 },
}

impl Gate {
    pub fn rx(n: usize, q: usize, theta: f64) -> Gate {
        Gate::Rotation {
            axis: PauliWord::single(n, q, Letter::X),
            theta,
        }
    }

    pub fn rzz(n: usize, a: usize, b: usize, theta: f64) -> Gate {
        Gate::Rotation {
            axis: PauliWord::from_letters(n, &[(a, Letter::Z), (b, Letter::Z)]),
            theta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H { .. } => "h",
            Gate::S { .. } => "s",
            Gate::Sdg { .. } => "sdg",
            Gate::X { .. } => "x",
            Gate::Y { .. } => "y",
            Gate::Z { .. } => "z",
            Gate::Cx { .. } => "cx",
            Gate::Cz { .. } => "cz",
            Gate::Rotation { .. } => "rotation",
        }
    }

    /// Qubits in the order used by [`Gate::matrix`] (first qubit = lowest bit).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H { q } | Gate::S { q } | Gate::Sdg { q } | Gate::X { q } | Gate::Y { q } | Gate::Z { q } => {
                vec![*q]
            }
            Gate::Cx { control, target } => vec![*control, *target],
            Gate::Cz { a, b } => vec![*a, *b],
            Gate::Rotation { axis, .. } => axis.support(),
        }
    }

    pub fn is_clifford(&self) -> bool {
        match self {
            Gate::Rotation { theta, .. } => fold_angle(*theta).1.abs() < ANGLE_EPS,
            _ => true,
        }
    }

    /// Dense unitary on [`Gate::qubits`], row-major, little-endian local basis.
    pub fn matrix(&self) -> Vec<Complex64> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Gate::H { .. } => vec![c(h, 0.), c(h, 0.), c(h, 0.), c(-h, 0.)],
            Gate::S { .. } => vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)],
            Gate::Sdg { .. } => vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., -1.)],
            Gate::X { .. } => vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
            Gate::Y { .. } => vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
            Gate::Z { .. } => vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
            Gate::Cx { .. } => {
                // control = bit 0, target = bit 1
                let mut m = vec![c(0., 0.); 16];
                for col in 0..4usize {
                    let row = if col & 1 == 1 { col ^ 2 } else { col };
                    m[row * 4 + col] = c(1., 0.);
                }
                m
            }
            Gate::Cz { .. } => {
                let mut m = vec![c(0., 0.); 16];
                for i in 0..4usize {
                    m[i * 4 + i] = c(if i == 3 { -1. } else { 1. }, 0.);
                }
                m
            }
            Gate::Rotation { axis, theta } => {
                let support = axis.support();
                let k = support.len();
                let dim = 1usize << k;
                let (mut zmask, mut xmask) = (0usize, 0usize);
                for (i, &q) in support.iter().enumerate() {
                    match axis.letter(q) {
                        Letter::X => xmask |= 1 << i,
                        Letter::Y => {
                            xmask |= 1 << i;
                            zmask |= 1 << i
                        }
                        Letter::Z => zmask |= 1 << i,
                        Letter::I => {}
                    }
                }
                let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let mut m = vec![c(0., 0.); dim * dim];
                for col in 0..dim {
                    m[col * dim + col] += c(cs, 0.);
                    let (amp, row) = local_pauli_action(zmask, xmask, col);
                    m[row * dim + col] += c(0., -sn) * amp;
                }
                m
            }
        }
    }
}

/// `op(z, x)|b> = amp |row>` for the canonical Pauli on a local register.
pub fn local_pauli_action(zmask: usize, xmask: usize, basis: usize) -> (Complex64, usize) {
    let y = (zmask & xmask).count_ones();
    let sign = if (zmask & basis).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    let ipow = match y % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    (ipow * sign, basis ^ xmask)
}

pub(crate) const ANGLE_EPS: f64 = 1e-12;

/// Splits `theta = folded + k * pi/2` with `folded` in `(-pi/4, pi/4]`.
/// Returns `(k mod 4, folded)`; angles within 1e-12 of a multiple of pi/2
/// fold to exactly zero.
pub fn fold_angle(theta: f64) -> (u8, f64) {
    let x = theta / FRAC_PI_2;
    let nearest = x.round();
    if (x - nearest).abs() < ANGLE_EPS {
        return ((nearest as i64).rem_euclid(4) as u8, 0.0);
    }
    // Half-integer boundary folds up to +pi/4.
    let k = if ((x - x.floor()) - 0.5).abs() < ANGLE_EPS {
        x.floor()
    } else {
        (x - 0.5).ceil()
    };
    let folded = theta - k * FRAC_PI_2;
    ((k as i64).rem_euclid(4) as u8, folded)
}

/// A layer of a circuit. `Step` marks a boundary between time steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum Layer {
    /// `exp(-i theta X_j / 2)` on every qubit.
    Rx { theta: f64 },
    /// `exp(-i theta Z_j Z_k / 2)` on every lattice edge.
    Rzz { theta: f64 },
    Gates { gates: Vec<Gate> },
    Step,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n: usize,
    edges: Vec<(usize, usize)>,
    layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Self {
        Self {
            n,
            edges,
            layers: Vec::new(),
        }
    }

    pub fn on_lattice(lattice: &Lattice) -> Self {
        Self::new(lattice.num_nodes(), lattice.edges().to_vec())
    }

    pub fn push(&mut self, layer: Layer) -> Result<()> {
        if let Layer::Gates { gates } = &layer {
            for g in gates {
                self.check_gate(g)?;
            }
        }
        self.layers.push(layer);
        Ok(())
    }

    pub fn push_gate(&mut self, gate: Gate) -> Result<()> {
        self.check_gate(&gate)?;
        match self.layers.last_mut() {
            Some(Layer::Gates { gates }) => gates.push(gate),
            _ => self.layers.push(Layer::Gates { gates: vec![gate] }),
        }
        Ok(())
    }

    pub fn end_step(&mut self) {
        self.layers.push(Layer::Step);
    }

    fn check_gate(&self, g: &Gate) -> Result<()> {
        if let Gate::Rotation { axis, .. } = g {
            if axis.num_qubits() != self.n {
                return Err(Error::Argument(format!(
                    "rotation axis has {} qubits, circuit has {}",
                    axis.num_qubits(),
                    self.n
                )));
            }
        }
        let qs = g.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.n) {
            return Err(Error::Argument(format!("gate {} acts on qubit {q} >= {}", g.name(), self.n)));
        }
        let mut sorted = qs.clone();
        sorted.dedup();
        if sorted.len() != qs.len() {
            return Err(Error::Argument(format!("gate {} repeats a qubit", g.name())));
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of `Step` markers.
    pub fn num_steps(&self) -> usize {
        self.layers.iter().filter(|l| matches!(l, Layer::Step)).count()
    }

    fn expand(&self, layer: &Layer, out: &mut Vec<Gate>) {
        match layer {
            Layer::Rx { theta } => out.extend((0..self.n).map(|q| Gate::rx(self.n, q, *theta))),
            Layer::Rzz { theta } => out.extend(self.edges.iter().map(|&(a, b)| Gate::rzz(self.n, a, b, *theta))),
            Layer::Gates { gates } => out.extend(gates.iter().cloned()),
            Layer::Step => {}
        }
    }

    /// All gates in time order.
    pub fn gates(&self) -> Vec<Gate> {
        let mut out = Vec::new();
        for layer in &self.layers {
            self.expand(layer, &mut out);
        }
        out
    }

    /// Gates grouped by time step. Without step markers every layer is a step.
    pub fn steps(&self) -> Vec<Vec<Gate>> {
        let mut steps = Vec::new();
        if self.num_steps() == 0 {
            for layer in &self.layers {
                let mut g = Vec::new();
                self.expand(layer, &mut g);
                steps.push(g);
            }
            return steps;
        }
        let mut current = Vec::new();
        for layer in &self.layers {
            if matches!(layer, Layer::Step) {
                steps.push(std::mem::take(&mut current));
            } else {
                self.expand(layer, &mut current);
            }
        }
        if !current.is_empty() {
            steps.push(current);
        }
        steps
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Argument(format!("circuit json: {e}")))
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Circuit({} qubits, {} edges, {} layers, {} steps)",
            self.n,
            self.edges.len(),
            self.layers.len(),
            self.num_steps()
        )
    }
}

/// Kicked Ising circuit: each step applies `exp(-i theta_h X_j / 2)` on every
/// qubit followed by `exp(+i pi Z_j Z_k / 4)` on every edge. The ZZ gate is a
/// rotation with angle `-pi/2`.
pub fn kicked_ising(lattice: &Lattice, theta_h: f64, steps: usize, extra_x_layer: bool) -> Circuit {
    let mut c = Circuit::on_lattice(lattice);
    for _ in 0..steps {
        c.layers.push(Layer::Rx { theta: theta_h });
        c.layers.push(Layer::Rzz { theta: -FRAC_PI_2 });
        c.layers.push(Layer::Step);
    }
    if extra_x_layer {
        c.layers.push(Layer::Rx { theta: theta_h });
        c.layers.push(Layer::Step);
    }
    c
}

/// Removes gates outside the backward causal cone of the observable.
pub fn lightcone_prune(circuit: &Circuit, observable: &PauliSum) -> Circuit {
    let mut cone = vec![false; circuit.n];
    for q in observable.support() {
        cone[q] = true;
    }
    lightcone_prune_support(circuit, cone)
}

pub fn lightcone_prune_support(circuit: &Circuit, mut cone: Vec<bool>) -> Circuit {
    let n = circuit.n;
    let mut layers = Vec::with_capacity(circuit.layers.len());
    for layer in circuit.layers.iter().rev() {
        match layer {
            Layer::Step => layers.push(Layer::Step),
            Layer::Rx { theta } => {
                if cone.iter().all(|&c| c) {
                    layers.push(layer.clone());
                } else {
                    let gates: Vec<Gate> = (0..n).filter(|&q| cone[q]).map(|q| Gate::rx(n, q, *theta)).collect();
                    if !gates.is_empty() {
                        layers.push(Layer::Gates { gates });
                    }
                }
            }
            Layer::Rzz { theta } => {
                let kept: Vec<(usize, usize)> =
                    circuit.edges.iter().copied().filter(|&(a, b)| cone[a] || cone[b]).collect();
                for &(a, b) in &kept {
                    cone[a] = true;
                    cone[b] = true;
                }
                if kept.len() == circuit.edges.len() {
                    layers.push(layer.clone());
                } else if !kept.is_empty() {
                    layers.push(Layer::Gates {
                        gates: kept.into_iter().map(|(a, b)| Gate::rzz(n, a, b, *theta)).collect(),
                    });
                }
            }
            Layer::Gates { gates } => {
                let mut kept = Vec::new();
                for g in gates.iter().rev() {
                    let qs = g.qubits();
                    if qs.iter().any(|&q| cone[q]) {
                        for &q in &qs {
                            cone[q] = true;
                        }
                        kept.push(g.clone());
                    }
                }
                if !kept.is_empty() {
                    kept.reverse();
                    layers.push(Layer::Gates { gates: kept });
                }
            }
        }
    }
    layers.reverse();
    Circuit {
        n,
        edges: circuit.edges.clone(),
        layers,
    }
}
