//! Evolving PEPS / PEPO states, sandwich construction and the PEPS, PEPO and
//! MIX drivers.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use spdtn_core::circuit::{lightcone_prune, Circuit, Gate};
use spdtn_core::pauli::{Letter, PauliWord};
use spdtn_core::spd::PauliSum;

use crate::bp::{bp_iterate, compress_bond, l1bp_value, BpMode, BpOptions, LogValue, SiteNetwork};
use crate::error::{Error, Result};
use crate::tensor::{contract, truncated_svd, Label, Tensor, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    /// State `|psi>` with one physical label `p{j}` per site.
    Peps,
    /// Operator with output label `o{j}` and input label `i{j}` per site.
    Pepo,
}

/// Truncation record of one compressed step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepTruncation {
    pub max_discarded: f64,
    pub total_discarded: f64,
    pub max_bond: usize,
    pub bp_iterations: usize,
    pub bp_converged: bool,
    pub negative_eigenvalues: bool,
    pub dead_bonds: usize,
}

/// Fresh label generator with a fixed prefix.
#[derive(Clone, Debug)]
pub struct Namer {
    prefix: String,
    next: usize,
}

impl Namer {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            prefix: prefix.into(),
            next: 0,
        }
    }

    pub fn fresh(&mut self, tag: &str) -> Label {
        self.next += 1;
        Label::new(format!("{}{}{}", self.prefix, tag, self.next))
    }
}

pub fn physical_label(j: usize) -> Label {
    Label::new(format!("p{j}"))
}

pub fn out_label(j: usize) -> Label {
    Label::new(format!("o{j}"))
}

pub fn in_label(j: usize) -> Label {
    Label::new(format!("i{j}"))
}

pub fn letter_matrix(l: Letter) -> [C64; 4] {
    let (o, one, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    match l {
        Letter::I => [one, o, o, one],
        Letter::X => [o, one, one, o],
        Letter::Y => [o, -i, i, o],
        Letter::Z => [one, o, o, -one],
    }
}

/// Splits a gate into per-site tensors. Each piece has labels
/// `[out_q, in_q]` (plus a gate bond for two-qubit gates) and element
/// `G[out, in]`, or its complex conjugate when `conj` is set.
pub fn gate_pieces(gate: &Gate, outs: &[Label], ins: &[Label], conj: bool, namer: &mut Namer) -> Result<Vec<(usize, Tensor)>> {
    let qs = gate.qubits();
    if outs.len() != qs.len() || ins.len() != qs.len() {
        return Err(Error::Shape(format!("{} labels for a {}-qubit gate", outs.len(), qs.len())));
    }
    let mut m = gate.matrix();
    if conj {
        m.iter_mut().for_each(|x| *x = x.conj());
    }
    match qs.len() {
        0 => Ok(vec![]),
        1 => Ok(vec![(qs[0], Tensor::new(vec![outs[0].clone(), ins[0].clone()], vec![2, 2], m)?)]),
        2 => {
            let full = Tensor::from_fn(
                vec![outs[0].clone(), ins[0].clone(), outs[1].clone(), ins[1].clone()],
                vec![2; 4],
                |ix| m[(ix[0] + 2 * ix[2]) * 4 + ix[1] + 2 * ix[3]],
            )?;
            let bond = namer.fresh("g");
            let split = truncated_svd(&full, &[outs[0].clone(), ins[0].clone()], 4, 0.0, &bond)?;
            let r = split.s.len();
            let mut u = split.u;
            for (k, x) in u.data_mut().iter_mut().enumerate() {
                *x *= split.s[k % r];
            }
            Ok(vec![(qs[0], u), (qs[1], split.v)])
        }
        k => Err(Error::Structure(format!(
            "{} acts on {k} qubits; only one- and two-qubit gates can be split",
            gate.name()
        ))),
    }
}

/// Appends the pieces of `gates` (time order) acting on a ket whose open
/// wires are `wires`, advancing the wires.
pub fn push_ket_layer(groups: &mut [Vec<Tensor>], wires: &mut [Label], gates: &[Gate], namer: &mut Namer) -> Result<()> {
    for g in gates {
        let qs = g.qubits();
        let ins: Vec<Label> = qs.iter().map(|&q| wires[q].clone()).collect();
        let outs: Vec<Label> = qs.iter().map(|_| namer.fresh("w")).collect();
        for (q, t) in gate_pieces(g, &outs, &ins, false, namer)? {
            groups[q].push(t);
        }
        for (&q, o) in qs.iter().zip(outs) {
            wires[q] = o;
        }
    }
    Ok(())
}

/// PEPS or PEPO held as one tensor per site.
#[derive(Clone, Debug)]
pub struct EvolvingState {
    kind: StateKind,
    sites: Vec<Tensor>,
    steps: usize,
    generation: usize,
    log: Vec<StepTruncation>,
}

impl EvolvingState {
    /// `|0...0>`.
    pub fn zero_state(n: usize) -> Self {
        let sites = (0..n)
            .map(|j| {
                Tensor::new(vec![physical_label(j)], vec![2], vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
                    .expect("valid shape")
            })
            .collect();
        Self {
            kind: StateKind::Peps,
            sites,
            steps: 0,
            generation: 0,
            log: vec![],
        }
    }

    /// Product operator of a Pauli word.
    pub fn pauli(word: &PauliWord) -> Self {
        let sites = (0..word.num_qubits())
            .map(|j| {
                Tensor::new(vec![out_label(j), in_label(j)], vec![2, 2], letter_matrix(word.letter(j)).to_vec())
                    .expect("valid shape")
            })
            .collect();
        Self {
            kind: StateKind::Pepo,
            sites,
            steps: 0,
            generation: 0,
            log: vec![],
        }
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    /// Steps absorbed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn truncation_log(&self) -> &[StepTruncation] {
        &self.log
    }

    fn is_physical(&self, l: &Label) -> bool {
        let s = l.as_str();
        let digits = |rest: &str| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit());
        match self.kind {
            StateKind::Peps => s.strip_prefix('p').is_some_and(digits),
            StateKind::Pepo => s.strip_prefix('o').is_some_and(digits) || s.strip_prefix('i').is_some_and(digits),
        }
    }

    /// Largest virtual bond dimension.
    pub fn max_bond(&self) -> usize {
        self.sites
            .iter()
            .flat_map(|t| t.labels().iter().zip(t.dims()))
            .filter(|(l, _)| !self.is_physical(l))
            .map(|(_, &d)| d)
            .max()
            .unwrap_or(1)
    }

    /// Absorbs one step of gates (time order) and compresses every bond to
    /// at most `chi`. A PEPS advances forwards; a PEPO is conjugated,
    /// `Phi <- U^dag Phi U`, i.e. moves backwards in time.
    pub fn evolve(&mut self, gates: &[Gate], chi: usize, kappa: f64, bp: &BpOptions) -> Result<&StepTruncation> {
        let n = self.sites.len();
        self.generation += 1;
        let tag = if self.kind == StateKind::Peps { 's' } else { 'f' };
        let mut namer = Namer::new(format!("{tag}{}.", self.generation));
        let mut groups: Vec<Vec<Tensor>> = self.sites.iter().map(|t| vec![t.clone()]).collect();
        let mut open: Vec<(Label, Label)> = Vec::new();
        match self.kind {
            StateKind::Peps => {
                let mut wires: Vec<Label> = (0..n).map(physical_label).collect();
                push_ket_layer(&mut groups, &mut wires, gates, &mut namer)?;
                open.extend(wires.into_iter().enumerate().map(|(j, w)| (w, physical_label(j))));
            }
            StateKind::Pepo => {
                let mut ow: Vec<Label> = (0..n).map(out_label).collect();
                let mut iw: Vec<Label> = (0..n).map(in_label).collect();
                for g in gates.iter().rev() {
                    let qs = g.qubits();
                    let o_new: Vec<Label> = qs.iter().map(|_| namer.fresh("w")).collect();
                    let i_new: Vec<Label> = qs.iter().map(|_| namer.fresh("w")).collect();
                    let o_old: Vec<Label> = qs.iter().map(|&q| ow[q].clone()).collect();
                    let i_old: Vec<Label> = qs.iter().map(|&q| iw[q].clone()).collect();
                    for (q, t) in gate_pieces(g, &o_old, &o_new, true, &mut namer)? {
                        groups[q].push(t);
                    }
                    for (q, t) in gate_pieces(g, &i_old, &i_new, false, &mut namer)? {
                        groups[q].push(t);
                    }
                    for (k, &q) in qs.iter().enumerate() {
                        ow[q] = o_new[k].clone();
                        iw[q] = i_new[k].clone();
                    }
                }
                for j in 0..n {
                    open.push((ow[j].clone(), out_label(j)));
                    open.push((iw[j].clone(), in_label(j)));
                }
            }
        }
        let (sites, record) = compress_groups(&groups, &open, chi, kappa, bp, &format!("{tag}{}:", self.generation))?;
        self.sites = sites;
        self.steps += 1;
        self.log.push(record);
        Ok(self.log.last().unwrap())
    }

    /// Doubled network `<T|T>` (trace over physical labels for a PEPO).
    pub fn norm_network(&self) -> Result<SiteNetwork> {
        let groups: Vec<Vec<Tensor>> = self.sites.iter().map(|t| vec![t.clone()]).collect();
        SiteNetwork::doubled(&groups, &|l| self.is_physical(l))
    }

    /// BP estimate of `<T|T>` in the log domain.
    pub fn norm_squared_bp(&self, bp: &BpOptions) -> Result<(LogValue, bool)> {
        let sn = self.norm_network()?;
        let ms = bp_iterate(&sn, bp, BpMode::TwoNorm)?;
        Ok((l1bp_value(&sn, &ms)?, ms.converged))
    }
}

/// Replaces every bond of a lazy network by BP-optimal projectors and
/// contracts each site into one tensor. `open` maps the surviving open
/// labels to their final names.
fn compress_groups(
    groups: &[Vec<Tensor>],
    open: &[(Label, Label)],
    chi: usize,
    kappa: f64,
    bp: &BpOptions,
    bond_prefix: &str,
) -> Result<(Vec<Tensor>, StepTruncation)> {
    let keep: HashSet<Label> = open.iter().map(|(l, _)| l.clone()).collect();
    let sn = SiteNetwork::doubled(groups, &|l| keep.contains(l))?;
    let ms = bp_iterate(&sn, bp, BpMode::TwoNorm)?;
    let mut record = StepTruncation {
        bp_iterations: ms.iterations,
        bp_converged: ms.converged,
        max_bond: 1,
        ..Default::default()
    };
    let mut extra: Vec<Vec<Tensor>> = vec![Vec::new(); groups.len()];
    let mut bonds: Vec<Vec<Label>> = vec![Vec::new(); groups.len()];
    for (e, &(a, b)) in sn.edges().iter().enumerate() {
        let kets = sn.ket_labels(e).to_vec();
        let kdims: Vec<usize> = kets
            .iter()
            .map(|l| groups[a].iter().find_map(|t| t.dim(l)).expect("bond label on site"))
            .collect();
        let d: usize = kdims.iter().product();
        let m_ab = DMatrix::from_row_slice(d, d, ms.get(&sn, e, a).data());
        let m_ba = DMatrix::from_row_slice(d, d, ms.get(&sn, e, b).data());
        let proj = compress_bond(&m_ab, &m_ba, chi, kappa)?;
        let r = proj.rank();
        record.max_discarded = record.max_discarded.max(proj.discarded_weight);
        record.total_discarded += proj.discarded_weight;
        record.max_bond = record.max_bond.max(r);
        record.negative_eigenvalues |= proj.negative;
        if r == 0 {
            record.dead_bonds += 1;
        }
        let new = Label::new(format!("{bond_prefix}{a}.{b}"));
        let mut la = kets.clone();
        la.push(new.clone());
        let mut da = kdims.clone();
        da.push(r);
        let mut lb = vec![new.clone()];
        lb.extend(kets.iter().cloned());
        let mut db = vec![r];
        db.extend(kdims.iter().copied());
        extra[a].push(Tensor::from_matrix(&proj.left, la, da)?);
        extra[b].push(Tensor::from_matrix(&proj.right, lb, db)?);
        bonds[a].push(new.clone());
        bonds[b].push(new);
    }
    let mut sites = Vec::with_capacity(groups.len());
    for (j, group) in groups.iter().enumerate() {
        let mut output: Vec<Label> = open
            .iter()
            .filter(|(l, _)| group.iter().any(|t| t.has(l)))
            .map(|(l, _)| l.clone())
            .collect();
        output.extend(bonds[j].iter().cloned());
        let ts: Vec<&Tensor> = group.iter().chain(&extra[j]).collect();
        let t = contract(&ts, &output)?;
        sites.push(t.relabel(|l| {
            open.iter()
                .find(|(from, _)| from == l)
                .map(|(_, to)| to.clone())
                .unwrap_or_else(|| l.clone())
        })?);
    }
    Ok((sites, record))
}

/// Scalar network `<psi| V^dag Phi V |psi>` where `V` holds `lazy` steps
/// kept as uncontracted gate pieces on both the ket and the bra.
pub fn sandwich(psi: &EvolvingState, lazy: &[Vec<Gate>], phi: &EvolvingState) -> Result<SiteNetwork> {
    if psi.kind != StateKind::Peps || phi.kind != StateKind::Pepo {
        return Err(Error::Structure("sandwich needs a PEPS and a PEPO".into()));
    }
    let n = psi.num_sites();
    if phi.num_sites() != n {
        return Err(Error::Structure(format!("PEPS on {n} sites, PEPO on {}", phi.num_sites())));
    }
    let mut ket: Vec<Vec<Tensor>> = psi.sites.iter().map(|t| vec![t.clone()]).collect();
    let mut wires: Vec<Label> = (0..n).map(physical_label).collect();
    let mut namer = Namer::new("l.");
    for step in lazy {
        push_ket_layer(&mut ket, &mut wires, step, &mut namer)?;
    }
    let mut sites = Vec::with_capacity(n);
    for (j, group) in ket.into_iter().enumerate() {
        let mut site = Vec::with_capacity(2 * group.len() + 1);
        for t in &group {
            site.push(t.conj().relabel(|l| l.dual())?);
        }
        let (o, i) = (out_label(j), in_label(j));
        site.push(phi.sites[j].relabel(|l| {
            if *l == o {
                wires[j].dual()
            } else if *l == i {
                wires[j].clone()
            } else {
                l.clone()
            }
        })?);
        site.extend(group);
        sites.push(site);
    }
    SiteNetwork::new(sites)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Peps,
    Pepo,
    Mix,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Peps, Method::Pepo, Method::Mix];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Peps => "peps",
            Method::Pepo => "pepo",
            Method::Mix => "mix",
        }
    }

    /// Steps taken by the PEPS, kept lazy, and taken by the PEPO for a
    /// circuit of `steps` steps.
    pub fn split(&self, steps: usize, chi: usize) -> (usize, usize, usize) {
        match self {
            Method::Peps => {
                let psi = steps.saturating_sub(2);
                (psi, steps - psi, 0)
            }
            Method::Pepo => {
                let lazy = ((chi.max(1) as f64).log2().floor() as usize / 2).min(steps);
                (0, lazy, steps - lazy)
            }
            Method::Mix => {
                let psi = steps.div_ceil(2);
                (psi, 0, steps - psi)
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peps" => Ok(Method::Peps),
            "pepo" => Ok(Method::Pepo),
            "mix" => Ok(Method::Mix),
            other => Err(Error::Structure(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TnOptions {
    pub method: Method,
    pub chi: usize,
    pub kappa: f64,
    pub bp: BpOptions,
    /// Drop gates outside the observable's backward light cone first.
    pub prune: bool,
    /// Overrides the method's `(psi steps, lazy steps)` split.
    pub split: Option<(usize, usize)>,
}

impl TnOptions {
    pub fn new(method: Method, chi: usize) -> Self {
        Self {
            method,
            chi,
            kappa: 0.0,
            bp: BpOptions::default(),
            prune: true,
            split: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TnResult {
    /// Unnormalized BP estimate of `<0|U^dag O U|0>`.
    pub expectation: f64,
    pub imag_residue: f64,
    pub norm_psi: f64,
    pub norm_o: f64,
    pub norm_mix: f64,
    pub method: Method,
    pub chi: usize,
    pub kappa: f64,
    /// Steps evolved by the PEPS.
    pub tau: usize,
    pub lazy_steps: usize,
    pub pepo_steps: usize,
    pub max_bond: usize,
    pub bp_max_iterations: usize,
    pub bp_converged: bool,
    pub psi_truncation: Vec<StepTruncation>,
    pub phi_truncation: Vec<StepTruncation>,
    pub flags: Vec<String>,
    pub wall_time: f64,
}

fn push_flag(flags: &mut Vec<String>, f: &str) {
    if !flags.iter().any(|x| x == f) {
        flags.push(f.to_string());
    }
}

struct TermOutcome {
    value: C64,
    norm_psi: f64,
    norm_o: f64,
    max_bond: usize,
    bp_max_iterations: usize,
    bp_converged: bool,
    psi_log: Vec<StepTruncation>,
    phi_log: Vec<StepTruncation>,
    split: (usize, usize, usize),
}

fn run_term(circuit: &Circuit, word: &PauliWord, opts: &TnOptions) -> Result<TermOutcome> {
    let n = circuit.num_qubits();
    let steps = circuit.steps();
    let total = steps.len();
    let (tau, lazy, pepo) = match opts.split {
        Some((t, l)) if t + l <= total => (t, l, total - t - l),
        Some((t, l)) => {
            return Err(Error::Structure(format!("split {t}+{l} exceeds {total} steps")));
        }
        None => opts.method.split(total, opts.chi),
    };
    let mut psi = EvolvingState::zero_state(n);
    for step in &steps[..tau] {
        psi.evolve(step, opts.chi, opts.kappa, &opts.bp)?;
    }
    let mut phi = EvolvingState::pauli(word);
    for step in steps[tau + lazy..].iter().rev() {
        phi.evolve(step, opts.chi, opts.kappa, &opts.bp)?;
    }
    let sn = sandwich(&psi, &steps[tau..tau + lazy], &phi)?;
    let ms = bp_iterate(&sn, &opts.bp, BpMode::OneNorm)?;
    let value = l1bp_value(&sn, &ms)?.value();
    let mut converged = ms.converged;
    let mut iterations = ms.iterations;
    let norm_psi = if tau > 0 {
        let (v, c) = psi.norm_squared_bp(&opts.bp)?;
        converged &= c;
        (v.log_abs / 2.0).exp()
    } else {
        1.0
    };
    let norm_o = if pepo > 0 {
        let (v, c) = phi.norm_squared_bp(&opts.bp)?;
        converged &= c;
        ((v.log_abs - n as f64 * std::f64::consts::LN_2) / 2.0).exp()
    } else {
        1.0
    };
    for rec in psi.log.iter().chain(&phi.log) {
        converged &= rec.bp_converged;
        iterations = iterations.max(rec.bp_iterations);
    }
    Ok(TermOutcome {
        value,
        norm_psi,
        norm_o,
        max_bond: psi.max_bond().max(phi.max_bond()),
        bp_max_iterations: iterations,
        bp_converged: converged,
        psi_log: psi.log,
        phi_log: phi.log,
        split: (tau, lazy, pepo),
    })
}

/// BP tensor-network estimate of `<0|U^dag O U|0>`. Weighted sums are
/// handled term by term; reported norms are then the smallest per term.
pub fn run_tn(circuit: &Circuit, observable: &PauliSum, opts: &TnOptions) -> Result<TnResult> {
    let start = Instant::now();
    if observable.num_qubits() != circuit.num_qubits() {
        return Err(Error::Structure("observable and circuit sizes differ".into()));
    }
    if opts.chi == 0 {
        return Err(Error::Structure("chi must be positive".into()));
    }
    let mut result = TnResult {
        expectation: 0.0,
        imag_residue: 0.0,
        norm_psi: 1.0,
        norm_o: 1.0,
        norm_mix: 1.0,
        method: opts.method,
        chi: opts.chi,
        kappa: opts.kappa,
        tau: 0,
        lazy_steps: 0,
        pepo_steps: 0,
        max_bond: 1,
        bp_max_iterations: 0,
        bp_converged: true,
        psi_truncation: vec![],
        phi_truncation: vec![],
        flags: vec![],
        wall_time: 0.0,
    };
    let mut total = C64::new(0.0, 0.0);
    for (word, coeff) in observable.iter() {
        let single = PauliSum::single(word.clone(), 1.0);
        let pruned;
        let c = if opts.prune {
            pruned = lightcone_prune(circuit, &single);
            &pruned
        } else {
            circuit
        };
        let t = run_term(c, &word, opts)?;
        total += coeff * t.value;
        result.norm_psi = result.norm_psi.min(t.norm_psi);
        result.norm_o = result.norm_o.min(t.norm_o);
        result.max_bond = result.max_bond.max(t.max_bond);
        result.bp_max_iterations = result.bp_max_iterations.max(t.bp_max_iterations);
        result.bp_converged &= t.bp_converged;
        (result.tau, result.lazy_steps, result.pepo_steps) = t.split;
        result.psi_truncation = t.psi_log;
        result.phi_truncation = t.phi_log;
    }
    result.norm_mix = result.norm_psi * result.norm_o;
    result.expectation = total.re;
    result.imag_residue = total.im;
    let mut flags = Vec::new();
    if total.im.abs() > 1e-8 * total.norm().max(1.0) {
        push_flag(&mut flags, "imag_residue");
    }
    if !result.bp_converged {
        push_flag(&mut flags, "bp_not_converged");
    }
    if result.norm_psi > 1.0 + 1e-8 || result.norm_o > 1.0 + 1e-8 {
        push_flag(&mut flags, "norm_above_one");
    }
    for rec in result.psi_truncation.iter().chain(&result.phi_truncation) {
        if rec.negative_eigenvalues {
            push_flag(&mut flags, "negative_message_eigenvalue");
        }
        if rec.dead_bonds > 0 {
            push_flag(&mut flags, "dead_bond");
        }
    }
    if !result.expectation.is_finite() {
        push_flag(&mut flags, "non_finite");
    }
    result.flags = flags;
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}
