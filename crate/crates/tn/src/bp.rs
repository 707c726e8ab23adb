//! Belief propagation on networks of "lazy" sites, each holding a list of
//! tensors that are never contracted into one.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{contract, eigh_psd, svd_sorted, truncation_rank, Label, Tensor, C64};

/// Sites of tensors connected by shared labels.
#[derive(Clone, Debug)]
pub struct SiteNetwork {
    sites: Vec<Vec<Tensor>>,
    /// Ket label -> bra label, for doubled (norm) networks.
    conj_pairs: HashMap<Label, Label>,
    edges: Vec<(usize, usize)>,
    /// Shared labels per edge: paired ket labels, then their bra partners,
    /// then any unpaired labels.
    shared: Vec<Vec<Label>>,
    /// Number of leading ket labels in `shared`.
    ket_count: Vec<usize>,
    /// `(neighbor, edge index)` per site.
    adjacency: Vec<Vec<(usize, usize)>>,
    dangling: Vec<Label>,
    dims: HashMap<Label, usize>,
}

impl SiteNetwork {
    pub fn new(sites: Vec<Vec<Tensor>>) -> Result<Self> {
        Self::with_pairs(sites, HashMap::new())
    }

    pub fn with_pairs(sites: Vec<Vec<Tensor>>, conj_pairs: HashMap<Label, Label>) -> Result<Self> {
        let mut owners: HashMap<Label, Vec<usize>> = HashMap::new();
        let mut dims: HashMap<Label, usize> = HashMap::new();
        for (s, list) in sites.iter().enumerate() {
            for t in list {
                for (l, &d) in t.labels().iter().zip(t.dims()) {
                    owners.entry(l.clone()).or_default().push(s);
                    if let Some(&prev) = dims.get(l) {
                        if prev != d {
                            return Err(Error::Dimension {
                                label: l.to_string(),
                                left: prev,
                                right: d,
                            });
                        }
                    }
                    dims.insert(l.clone(), d);
                }
            }
        }
        let mut by_pair: BTreeMap<(usize, usize), Vec<Label>> = BTreeMap::new();
        let mut dangling = Vec::new();
        for (l, o) in &owners {
            match o.as_slice() {
                [_] => dangling.push(l.clone()),
                [a, b] if a != b => by_pair.entry((*a.min(b), *a.max(b))).or_default().push(l.clone()),
                [_, _] => {}
                _ => {
                    return Err(Error::Structure(format!(
                        "label '{l}' appears {} times",
                        o.len()
                    )))
                }
            }
        }
        dangling.sort();
        let mut edges = Vec::new();
        let mut shared = Vec::new();
        let mut ket_count = Vec::new();
        let mut adjacency = vec![Vec::new(); sites.len()];
        for ((a, b), mut labels) in by_pair {
            labels.sort();
            let kets: Vec<Label> = labels
                .iter()
                .filter(|l| conj_pairs.get(*l).is_some_and(|d| labels.contains(d)))
                .cloned()
                .collect();
            let bras: Vec<Label> = kets.iter().map(|k| conj_pairs[k].clone()).collect();
            let rest: Vec<Label> = labels
                .iter()
                .filter(|l| !kets.contains(l) && !bras.contains(l))
                .cloned()
                .collect();
            let e = edges.len();
            edges.push((a, b));
            ket_count.push(kets.len());
            shared.push(kets.into_iter().chain(bras).chain(rest).collect());
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        Ok(Self {
            sites,
            conj_pairs,
            edges,
            shared,
            ket_count,
            adjacency,
            dangling,
            dims,
        })
    }

    /// Norm network `<T|T>`: every site holds its tensors plus their complex
    /// conjugates, with all labels of the copy renamed to their duals except
    /// those for which `keep` holds (the physical indices being traced).
    pub fn doubled(groups: &[Vec<Tensor>], keep: &dyn Fn(&Label) -> bool) -> Result<Self> {
        let mut sites = Vec::with_capacity(groups.len());
        let mut pairs = HashMap::new();
        for group in groups {
            let mut site = group.clone();
            for t in group {
                for l in t.labels() {
                    if !keep(l) {
                        pairs.insert(l.clone(), l.dual());
                    }
                }
                site.push(t.conj().relabel(|l| if keep(l) { l.clone() } else { l.dual() })?);
            }
            sites.push(site);
        }
        Self::with_pairs(sites, pairs)
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> &[Tensor] {
        &self.sites[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn shared_labels(&self, edge: usize) -> &[Label] {
        &self.shared[edge]
    }

    /// Leading ket labels of an edge in a doubled network.
    pub fn ket_labels(&self, edge: usize) -> &[Label] {
        &self.shared[edge][..self.ket_count[edge]]
    }

    pub fn neighbors(&self, site: usize) -> &[(usize, usize)] {
        &self.adjacency[site]
    }

    pub fn dangling(&self) -> &[Label] {
        &self.dangling
    }

    pub fn conj_pairs(&self) -> &HashMap<Label, Label> {
        &self.conj_pairs
    }

    pub fn all_tensors(&self) -> Vec<&Tensor> {
        self.sites.iter().flatten().collect()
    }

    fn edge_dims(&self, edge: usize) -> Vec<usize> {
        self.shared[edge].iter().map(|l| self.dims[l]).collect()
    }

    /// True if the site graph has no cycles.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.sites.len()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BpMode {
    /// General scalar network.
    OneNorm,
    /// Doubled norm network; messages are Hermitian-symmetrized.
    TwoNorm,
}

#[derive(Clone, Debug)]
pub struct BpOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the previous message in the update, in `[0, 1)`.
    pub damping: f64,
    /// Relative size of a seeded positive perturbation added to the uniform
    /// initial messages (zero disables it).
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self {
            tol: 5e-6,
            max_iter: 100,
            damping: 0.0,
            init_noise: 0.0,
            seed: 0,
        }
    }
}

/// Messages for every directed edge: index `2e` runs from the lower to the
/// higher site of edge `e`, `2e + 1` the other way.
#[derive(Clone, Debug)]
pub struct MessageSet {
    pub messages: Vec<Tensor>,
    pub iterations: usize,
    pub delta: f64,
    pub converged: bool,
}

impl MessageSet {
    /// Message from `from` along `edge`.
    pub fn get(&self, sn: &SiteNetwork, edge: usize, from: usize) -> &Tensor {
        &self.messages[directed(sn, edge, from)]
    }

    pub fn get_mut(&mut self, sn: &SiteNetwork, edge: usize, from: usize) -> &mut Tensor {
        &mut self.messages[directed(sn, edge, from)]
    }
}

fn directed(sn: &SiteNetwork, edge: usize, from: usize) -> usize {
    if sn.edges[edge].0 == from {
        2 * edge
    } else {
        2 * edge + 1
    }
}

/// Unit 1-norm with a phase removed: the trace phase for `[kets, bras]`
/// messages of a doubled network (keeps them PSD), otherwise the phase of
/// the element sum, or of the largest entry when the sum nearly cancels.
fn normalize(t: &mut Tensor, kets: Option<usize>) {
    let n1 = t.norm1();
    if n1 == 0.0 || !n1.is_finite() {
        return;
    }
    let s = match kets {
        Some(k) => {
            let d: usize = t.dims()[..k].iter().product();
            (0..d).map(|i| t.data()[i * d + i]).sum()
        }
        None => t.sum(),
    };
    let phase = if s.norm() > 1e-10 * n1 {
        s / s.norm()
    } else {
        let big = t
            .data()
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        big / big.norm()
    };
    t.scale(phase.conj() / n1);
}

/// `(M + M^dagger) / 2` for a message laid out as `[kets..., bras...]`.
fn hermitize(t: &mut Tensor, kets: usize) {
    let dims = t.dims();
    let d: usize = dims[..kets].iter().product();
    if d * d != t.len() {
        return;
    }
    let data = t.data_mut();
    for r in 0..d {
        for c in r..d {
            let (x, y) = (data[r * d + c], data[c * d + r]);
            let avg = (x + y.conj()) * 0.5;
            data[r * d + c] = avg;
            data[c * d + r] = avg.conj();
        }
    }
}

/// Uniform messages, optionally perturbed. In two-norm mode only the
/// diagonal is perturbed so messages stay PSD.
fn initial_messages(sn: &SiteNetwork, opts: &BpOptions, mode: BpMode) -> Result<Vec<Tensor>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(2 * sn.edges.len());
    for e in 0..sn.edges.len() {
        for _ in 0..2 {
            let mut m = Tensor::ones(sn.shared[e].clone(), sn.edge_dims(e))?;
            if opts.init_noise > 0.0 {
                let d: usize = sn.edge_dims(e)[..sn.ket_count[e]].iter().product();
                for (k, x) in m.data_mut().iter_mut().enumerate() {
                    if mode == BpMode::OneNorm || k % (d + 1) == 0 {
                        *x += opts.init_noise * rng.gen::<f64>();
                    }
                }
            }
            normalize(&mut m, None);
            out.push(m);
        }
    }
    Ok(out)
}

/// Contracts site `from` with all incoming messages except the one along `skip`.
fn site_message(sn: &SiteNetwork, msgs: &[Tensor], from: usize, edge: usize) -> Result<Tensor> {
    let mut ts: Vec<&Tensor> = sn.sites[from].iter().collect();
    for &(nb, e) in &sn.adjacency[from] {
        if e != edge {
            ts.push(&msgs[directed(sn, e, nb)]);
        }
    }
    contract(&ts, &sn.shared[edge])
}

/// Synchronous message passing until the largest 1-norm change is at most
/// `tol` or `max_iter` rounds have run.
pub fn bp_iterate(sn: &SiteNetwork, opts: &BpOptions, mode: BpMode) -> Result<MessageSet> {
    if !sn.dangling.is_empty() {
        return Err(Error::Structure(format!("dangling labels {:?}", sn.dangling)));
    }
    if mode == BpMode::TwoNorm {
        for e in 0..sn.edges.len() {
            if 2 * sn.ket_count[e] != sn.shared[e].len() {
                return Err(Error::Structure(format!(
                    "edge {:?} is not a ket/bra pair bond",
                    sn.edges[e]
                )));
            }
        }
    }
    let mut msgs = initial_messages(sn, opts, mode)?;
    let jobs: Vec<(usize, usize)> = (0..sn.edges.len())
        .flat_map(|e| [(e, sn.edges[e].0), (e, sn.edges[e].1)])
        .collect();
    let kets = |e: usize| (mode == BpMode::TwoNorm).then_some(sn.ket_count[e]);
    let mut delta = 0.0;
    let mut iterations = 0;
    let mut converged = jobs.is_empty();
    while !converged && iterations < opts.max_iter {
        let fresh: Vec<Result<Tensor>> = jobs
            .par_iter()
            .map(|&(e, from)| {
                let mut m = site_message(sn, &msgs, from, e)?;
                if mode == BpMode::TwoNorm {
                    hermitize(&mut m, sn.ket_count[e]);
                }
                normalize(&mut m, kets(e));
                Ok(m)
            })
            .collect();
        delta = 0.0f64;
        for (k, m) in fresh.into_iter().enumerate() {
            let mut m = m?;
            let old = &msgs[k];
            if opts.damping > 0.0 {
                for (x, y) in m.data_mut().iter_mut().zip(old.data()) {
                    *x = *x * (1.0 - opts.damping) + *y * opts.damping;
                }
                normalize(&mut m, kets(jobs[k].0));
            }
            let change: f64 = m.data().iter().zip(old.data()).map(|(a, b)| (a - b).norm()).sum();
            delta = delta.max(change);
            msgs[k] = m;
        }
        iterations += 1;
        converged = delta <= opts.tol;
    }
    Ok(MessageSet {
        messages: msgs,
        iterations,
        delta,
        converged,
    })
}

/// Complex number stored as `exp(log_abs) * phase`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogValue {
    pub log_abs: f64,
    pub phase: C64,
}

impl LogValue {
    pub fn from_value(v: C64) -> Self {
        let a = v.norm();
        Self {
            log_abs: a.ln(),
            phase: if a > 0.0 { v / a } else { C64::new(1.0, 0.0) },
        }
    }

    pub fn value(&self) -> C64 {
        self.phase * self.log_abs.exp()
    }

    pub fn mul(self, other: LogValue) -> Self {
        Self {
            log_abs: self.log_abs + other.log_abs,
            phase: self.phase * other.phase,
        }
    }

    pub fn div(self, other: LogValue) -> Self {
        Self {
            log_abs: self.log_abs - other.log_abs,
            phase: self.phase * other.phase.conj(),
        }
    }
}

/// Bethe estimate of the network value from (converged) messages:
/// product of site values with all incoming messages divided by the product
/// of message overlaps on every edge.
pub fn l1bp_value(sn: &SiteNetwork, ms: &MessageSet) -> Result<LogValue> {
    let mut total = LogValue::from_value(C64::new(1.0, 0.0));
    for s in 0..sn.sites.len() {
        let mut ts: Vec<&Tensor> = sn.sites[s].iter().collect();
        for &(nb, e) in &sn.adjacency[s] {
            ts.push(&ms.messages[directed(sn, e, nb)]);
        }
        let v = contract(&ts, &[])?.scalar_value()?;
        total = total.mul(LogValue::from_value(v));
    }
    for (e, &(a, b)) in sn.edges.iter().enumerate() {
        let v = contract(&[&ms.messages[2 * e], &ms.messages[2 * e + 1]], &[])?.scalar_value()?;
        if v.norm() == 0.0 || !v.norm().is_finite() {
            return Err(Error::DegenerateBond { a, b });
        }
        total = total.div(LogValue::from_value(v));
    }
    Ok(total)
}

/// Projector pair replacing the identity on a bond.
#[derive(Clone, Debug)]
pub struct BondProjectors {
    /// `D x r`, applied on the side that sent `m_ab`.
    pub left: DMatrix<C64>,
    /// `r x D`.
    pub right: DMatrix<C64>,
    pub discarded_weight: f64,
    /// A message had a significantly negative eigenvalue.
    pub negative: bool,
}

impl BondProjectors {
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }
}

fn inv_sqrt(s: f64) -> f64 {
    if s > 0.0 {
        1.0 / s.sqrt()
    } else {
        0.0
    }
}

/// Optimal bond truncation from the two messages meeting on a bond.
///
/// `m_ab` (sent by side A) and `m_ba` are `D x D` PSD matrices indexed
/// `[ket, bra]`. With `m_ab^T = R_A^dag R_A`, `m_ba = R_B R_B^dag` and the
/// truncated SVD `R_A R_B ~ U s V^dag`, the projectors are
/// `left = R_B V s^{-1/2}` and `right = s^{-1/2} U^dag R_A`.
pub fn compress_bond(m_ab: &DMatrix<C64>, m_ba: &DMatrix<C64>, chi: usize, kappa: f64) -> Result<BondProjectors> {
    let d = m_ab.nrows();
    if m_ab.shape() != (d, d) || m_ba.shape() != (d, d) {
        return Err(Error::Shape(format!(
            "bond messages {:?} and {:?} are not matching squares",
            m_ab.shape(),
            m_ba.shape()
        )));
    }
    let ea = eigh_psd(&m_ab.transpose())?;
    let eb = eigh_psd(m_ba)?;
    let ra_rank = ea.values.iter().filter(|&&v| v > 0.0).count();
    let rb_rank = eb.values.iter().filter(|&&v| v > 0.0).count();
    // R_A = sqrt(l) W^dag (rows: eigen index), R_B = W sqrt(l)
    let ra = DMatrix::from_fn(ra_rank, d, |r, c| ea.vectors[(c, r)].conj() * ea.values[r].sqrt());
    let rb = DMatrix::from_fn(d, rb_rank, |r, c| eb.vectors[(r, c)] * eb.values[c].sqrt());
    let m = &ra * &rb;
    let (u, s, vt) = svd_sorted(&m)?;
    let r = truncation_rank(&s, chi, kappa);
    let total: f64 = s.iter().map(|x| x * x).sum();
    let dropped: f64 = s[r..].iter().map(|x| x * x).sum();
    let scale_right = DMatrix::from_fn(r, ra_rank, |i, c| u[(c, i)].conj() * inv_sqrt(s[i]));
    let scale_left = DMatrix::from_fn(rb_rank, r, |c, i| vt[(i, c)].conj() * inv_sqrt(s[i]));
    Ok(BondProjectors {
        left: &rb * scale_left,
        right: scale_right * &ra,
        discarded_weight: if total > 0.0 { dropped / total } else { 0.0 },
        negative: ea.negative || eb.negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Label {
        Label::new(s)
    }

    #[test]
    fn identity_messages_give_identity_projector() {
        let id = DMatrix::<C64>::identity(4, 4);
        let p = compress_bond(&id, &id, 8, 0.0).unwrap();
        let prod = &p.left * &p.right;
        assert!((prod - id).norm() < 1e-10);
    }

    #[test]
    fn rank_one_messages_compress_to_one() {
        let v = DMatrix::from_fn(3, 1, |r, _| C64::new(r as f64 + 1.0, 0.5));
        let m = &v * v.adjoint();
        let p = compress_bond(&m, &m, 8, 0.0).unwrap();
        assert_eq!(p.rank(), 1);
    }

    #[test]
    fn two_site_network_is_exact() {
        let a = Tensor::from_fn(vec![l("x")], vec![3], |i| C64::new(i[0] as f64 + 1.0, 0.2)).unwrap();
        let b = Tensor::from_fn(vec![l("x")], vec![3], |i| C64::new(1.0, -(i[0] as f64))).unwrap();
        let sn = SiteNetwork::new(vec![vec![a.clone()], vec![b.clone()]]).unwrap();
        let ms = bp_iterate(&sn, &BpOptions { tol: 0.0, ..Default::default() }, BpMode::OneNorm).unwrap();
        assert!(ms.converged);
        let exact = contract(&[&a, &b], &[]).unwrap().scalar_value().unwrap();
        assert!((l1bp_value(&sn, &ms).unwrap().value() - exact).norm() < 1e-12);
    }

    #[test]
    fn label_used_three_times_is_rejected() {
        let t = Tensor::ones(vec![l("x")], vec![2]).unwrap();
        assert!(matches!(
            SiteNetwork::new(vec![vec![t.clone()], vec![t.clone()], vec![t]]),
            Err(Error::Structure(_))
        ));
    }
}
