//! Sparse Pauli dynamics: Heisenberg evolution of a truncated Pauli sum.

use std::cmp::Ordering;
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::clifford::{CliffordTableau, RecompiledCircuit};
use crate::error::{Error, Result};
use crate::pauli::{anticommutes_packed, classify_packed, mul_into, words_for, Letter, PauliWord, Phase};

/// Below this many terms the scan phases run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Default cap on the number of stored terms.
pub const DEFAULT_MAX_TERMS: usize = 40_000_000;

/// Tolerance on the imaginary part of the z-type coefficient sum.
pub const IMAG_TOLERANCE: f64 = 1e-10;

/// Weighted sum of Pauli words, sorted strictly ascending by packed word.
#[derive(Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    stride: usize,
    keys: Vec<u64>,
    coeffs: Vec<Complex64>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            stride: 2 * words_for(n),
            keys: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// Sums duplicate words and drops exact zeros.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (PauliWord, Complex64)>) -> Result<Self> {
        let mut list: Vec<(PauliWord, Complex64)> = Vec::new();
        for (w, c) in terms {
            if w.num_qubits() != n {
                return Err(Error::Argument(format!(
                    "term on {} qubits in a sum over {n}",
                    w.num_qubits()
                )));
            }
            list.push((w, c));
        }
        list.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = Self::zero(n);
        for (w, c) in list {
            let len = out.len();
            if len > 0 && out.key(len - 1) == w.packed() {
                out.coeffs[len - 1] += c;
            } else {
                out.keys.extend_from_slice(w.packed());
                out.coeffs.push(c);
            }
        }
        out.retain(|c| c != Complex64::new(0.0, 0.0));
        Ok(out)
    }

    pub fn single(word: PauliWord, coeff: f64) -> Self {
        let n = word.num_qubits();
        Self::from_terms(n, [(word, Complex64::new(coeff, 0.0))]).expect("sizes match")
    }

    /// `sum_j Z_j / n`.
    pub fn magnetization(n: usize) -> Self {
        let c = Complex64::new(1.0 / n as f64, 0.0);
        Self::from_terms(n, (0..n).map(|q| (PauliWord::single(n, q, Letter::Z), c))).expect("sizes match")
    }

    /// Parses `term (+ term)*` where a term is `[coeff *] word`, e.g.
    /// `0.5*Z0 Z1 + X3`.
    pub fn from_text(n: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut offset = 0usize;
        for part in text.split('+') {
            let (coeff, word_text, word_offset) = match part.split_once('*') {
                Some((c, w)) => {
                    let c = c.trim();
                    let value: f64 = c.parse().map_err(|_| Error::Parse {
                        position: offset,
                        message: format!("bad coefficient '{c}'"),
                    })?;
                    (value, w, offset + part.find('*').unwrap_or(0) + 1)
                }
                None => (1.0, part, offset),
            };
            let word = PauliWord::parse(n, word_text).map_err(|e| match e {
                Error::Parse { position, message } => Error::Parse {
                    position: position + word_offset,
                    message,
                },
                other => other,
            })?;
            terms.push((word, Complex64::new(coeff, 0.0)));
            offset += part.len() + 1;
        }
        Self::from_terms(n, terms)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    fn key(&self, i: usize) -> &[u64] {
        &self.keys[i * self.stride..(i + 1) * self.stride]
    }

    pub fn word(&self, i: usize) -> PauliWord {
        PauliWord::from_packed_unchecked(self.n, self.key(i).to_vec())
    }

    pub fn coeff(&self, i: usize) -> Complex64 {
        self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (PauliWord, Complex64)> + '_ {
        (0..self.len()).map(move |i| (self.word(i), self.coeffs[i]))
    }

    pub fn get(&self, word: &PauliWord) -> Option<Complex64> {
        self.find(word.packed()).ok().map(|i| self.coeffs[i])
    }

    fn find(&self, key: &[u64]) -> std::result::Result<usize, usize> {
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.key(mid).cmp(key) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Ok(mid),
            }
        }
        Err(lo)
    }

    /// Union of the supports of all terms.
    pub fn support(&self) -> Vec<usize> {
        let w = self.stride / 2;
        let mut mask = vec![0u64; w];
        for i in 0..self.len() {
            let k = self.key(i);
            for j in 0..w {
                mask[j] |= k[j] | k[w + j];
            }
        }
        let mut out = Vec::new();
        for (j, &m) in mask.iter().enumerate() {
            let mut m = m;
            while m != 0 {
                out.push(j * 64 + m.trailing_zeros() as usize);
                m &= m - 1;
            }
        }
        out
    }

    pub fn is_sorted_unique(&self) -> bool {
        (1..self.len()).all(|i| self.key(i - 1) < self.key(i))
    }

    /// Largest `|Im a|` over all terms.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    fn retain(&mut self, keep: impl Fn(Complex64) -> bool) {
        let s = self.stride;
        let mut dst = 0usize;
        for src in 0..self.len() {
            if keep(self.coeffs[src]) {
                if dst != src {
                    self.coeffs[dst] = self.coeffs[src];
                    self.keys.copy_within(src * s..(src + 1) * s, dst * s);
                }
                dst += 1;
            }
        }
        self.coeffs.truncate(dst);
        self.keys.truncate(dst * s);
    }

    /// Drops every term with `|a| < delta`.
    pub fn truncate(&mut self, delta: f64) {
        if delta > 0.0 {
            self.retain(|c| c.norm() >= delta);
        }
    }

    /// `sum Re(a)` over terms made of `I` and `Z` only.
    pub fn expectation(&self) -> Result<f64> {
        let w = self.stride / 2;
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..self.len() {
            if self.key(i)[w..].iter().all(|&b| b == 0) {
                re += self.coeffs[i].re;
                im += self.coeffs[i].im;
            }
        }
        if im.abs() > IMAG_TOLERANCE {
            return Err(Error::Numerical(format!(
                "imaginary part {im:e} of the expectation exceeds {IMAG_TOLERANCE:e}"
            )));
        }
        Ok(re)
    }

    /// Two-norm of the coefficient vector.
    pub fn frobenius_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc + c.norm_sqr()).sqrt()
    }

    /// Term-wise Heisenberg image under a Clifford tableau.
    pub fn conjugated(&self, tableau: &CliffordTableau) -> Result<Self> {
        if tableau.num_qubits() != self.n {
            return Err(Error::Argument(format!(
                "tableau on {} qubits, sum on {}",
                tableau.num_qubits(),
                self.n
            )));
        }
        Self::from_terms(
            self.n,
            self.iter().map(|(w, c)| {
                let img = tableau.conjugate_word(&w);
                (img.word, c * img.phase.to_complex())
            }),
        )
    }

    /// In-place `O <- R^dagger O R` with `R = exp(-i theta axis / 2)`,
    /// followed by truncation at `delta`.
    pub fn apply_rotation(&mut self, axis: &PauliWord, theta: f64, delta: f64) -> Result<()> {
        if axis.num_qubits() != self.n {
            return Err(Error::Argument(format!(
                "axis on {} qubits, sum on {}",
                axis.num_qubits(),
                self.n
            )));
        }
        debug_assert!(self.is_sorted_unique(), "unsorted Pauli sum");
        let s = self.stride;
        let w = s / 2;
        let a = axis.packed();
        let len = self.len();

        // (1) anticommuting terms
        let anti: Vec<usize> = if len >= PAR_THRESHOLD {
            (0..len)
                .into_par_iter()
                .with_min_len(4096)
                .filter(|&i| anticommutes_packed(a, self.key(i)))
                .collect()
        } else {
            (0..len).filter(|&i| anticommutes_packed(a, self.key(i))).collect()
        };
        if anti.is_empty() {
            self.truncate(delta);
            return Ok(());
        }

        let (cos, sin) = (theta.cos(), theta.sin());
        let isin = Complex64::new(0.0, sin);

        // (2) products sigma * P and their location in the old array
        let product = |&i: &usize| -> (Vec<u64>, Complex64, std::result::Result<usize, usize>) {
            let mut bits = a.to_vec();
            let e = mul_into(&mut bits, self.key(i), w);
            let contrib = isin * Phase::from_exponent(e as i64).to_complex() * self.coeffs[i];
            let pos = self.find(&bits);
            (bits, contrib, pos)
        };
        let products: Vec<(Vec<u64>, Complex64, std::result::Result<usize, usize>)> = if anti.len() >= PAR_THRESHOLD {
            anti.par_iter().with_min_len(2048).map(product).collect()
        } else {
            anti.iter().map(product).collect()
        };

        // (3) update existing coefficients, gather new terms
        for &i in &anti {
            self.coeffs[i] *= cos;
        }
        let mut fresh: Vec<(Vec<u64>, Complex64)> = Vec::new();
        for (bits, contrib, pos) in products {
            match pos {
                Ok(j) => self.coeffs[j] += contrib,
                Err(_) => fresh.push((bits, contrib)),
            }
        }

        // (4) delete small terms, (5) merge surviving new terms
        self.truncate(delta);
        fresh.retain(|(_, c)| c.norm() >= delta && (delta > 0.0 || *c != Complex64::new(0.0, 0.0)));
        if fresh.is_empty() {
            return Ok(());
        }
        if fresh.len() >= PAR_THRESHOLD {
            fresh.par_sort_unstable_by(|x, y| x.0.cmp(&y.0));
        } else {
            fresh.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        }
        let total = self.len() + fresh.len();
        let mut keys = Vec::with_capacity(total * s);
        let mut coeffs = Vec::with_capacity(total);
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.len() || j < fresh.len() {
            let take_old = j >= fresh.len() || (i < self.len() && self.key(i) < fresh[j].0.as_slice());
            if take_old {
                keys.extend_from_slice(self.key(i));
                coeffs.push(self.coeffs[i]);
                i += 1;
            } else {
                keys.extend_from_slice(&fresh[j].0);
                coeffs.push(fresh[j].1);
                j += 1;
            }
        }
        self.keys = keys;
        self.coeffs = coeffs;
        Ok(())
    }

    /// Number of terms with weight at most `max_weight` (diagnostic).
    pub fn count_low_weight(&self, max_weight: usize) -> usize {
        (0..self.len())
            .filter(|&i| classify_packed(self.key(i)).weight <= max_weight)
            .count()
    }
}

impl fmt::Debug for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliSum[{} qubits; ", self.n)?;
        for (k, (w, c)) in self.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", c.re, c.im, w)?;
        }
        write!(f, "]")
    }
}

/// Functional form of [`PauliSum::apply_rotation`].
pub fn apply_rotation(mut s: PauliSum, axis: &PauliWord, theta: f64, delta: f64) -> Result<PauliSum> {
    s.apply_rotation(axis, theta, delta)?;
    Ok(s)
}

pub fn truncate(mut s: PauliSum, delta: f64) -> PauliSum {
    s.truncate(delta);
    s
}

pub fn expectation(s: &PauliSum) -> Result<f64> {
    s.expectation()
}

pub fn frobenius_norm(s: &PauliSum) -> f64 {
    s.frobenius_norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpdResult {
    pub expectation: f64,
    pub frobenius_norm: f64,
    pub peak_terms: usize,
    pub final_terms: usize,
    pub gate_count: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct SpdOptions {
    pub max_terms: usize,
    /// Record the Frobenius norm after every rotation.
    pub track_norm: bool,
}

impl Default for SpdOptions {
    fn default() -> Self {
        Self {
            max_terms: max_terms_from_env().unwrap_or(DEFAULT_MAX_TERMS),
            track_norm: false,
        }
    }
}

/// Term cap override from `SIM_MAX_TERMS`, if set and valid.
pub fn max_terms_from_env() -> Option<usize> {
    std::env::var("SIM_MAX_TERMS").ok()?.trim().parse().ok()
}

/// Evolves the recompiled observable through the rotations in reverse time
/// order, truncating after each one.
pub fn run_spd(rc: &RecompiledCircuit, delta: f64) -> Result<SpdResult> {
    run_spd_with(rc, delta, &SpdOptions::default()).map(|(r, _)| r)
}

/// Like [`run_spd`]; also returns the per-rotation norm trace when requested.
pub fn run_spd_with(rc: &RecompiledCircuit, delta: f64, opts: &SpdOptions) -> Result<(SpdResult, Vec<f64>)> {
    if !(delta >= 0.0) {
        return Err(Error::Argument(format!("threshold must be >= 0, got {delta}")));
    }
    let start = Instant::now();
    let mut sum = rc.observable.clone();
    sum.truncate(delta);
    let mut peak = sum.len();
    let mut norms = Vec::new();
    for (applied, rot) in rc.rotations.iter().rev().enumerate() {
        sum.apply_rotation(&rot.axis, rot.theta, delta)?;
        peak = peak.max(sum.len());
        if sum.len() > opts.max_terms {
            return Err(Error::TermCap {
                cap: opts.max_terms,
                gates_applied: applied + 1,
            });
        }
        if opts.track_norm {
            norms.push(sum.frobenius_norm());
        }
    }
    let scale = sum.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if sum.max_imag() > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "coefficient imaginary part {:e} exceeds 1e-12",
            sum.max_imag()
        )));
    }
    let result = SpdResult {
        expectation: sum.expectation()?,
        frobenius_norm: sum.frobenius_norm(),
        peak_terms: peak,
        final_terms: sum.len(),
        gate_count: rc.rotations.len(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((result, norms))
}

/// Observables used by the kicked Ising benchmarks, by name.
///
/// `magnetization`, `z62`, `w10` (weight 10, five steps), `w17` (weight 17,
/// five steps), `w17x` (weight 17, five steps plus an extra X layer), and any
/// literal sum accepted by [`PauliSum::from_text`].
pub fn named_observable(name: &str, n: usize) -> Result<PauliSum> {
    let text = match name.trim().to_ascii_lowercase().as_str() {
        "magnetization" | "mz" => return Ok(PauliSum::magnetization(n)),
        "z62" => "Z62",
        "w10" => "X13 X29 X31 Y9 Y30 Z8 Z12 Z17 Z28 Z32",
        "w17" => {
            "X37 X41 X52 X56 X57 X58 X62 X79 Y75 Z38 Z40 Z42 Z63 Z72 Z80 Z90 Z91"
        }
        "w17x" => {
            "X37 X41 X52 X56 X57 X58 X62 X79 Y38 Y40 Y42 Y63 Y72 Y80 Y90 Y91 Z75"
        }
        _ => return PauliSum::from_text(n, name),
    };
    PauliSum::from_text(n, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn w(n: usize, s: &str) -> PauliWord {
        PauliWord::parse(n, s).unwrap()
    }

    #[test]
    fn single_term_rotation() {
        let theta = 0.37;
        let mut s = PauliSum::single(w(1, "Z0"), 1.0);
        s.apply_rotation(&w(1, "X0"), theta, 0.0).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.get(&w(1, "Z0")).unwrap() - Complex64::new(theta.cos(), 0.0)).norm() < 1e-15);
        assert!((s.get(&w(1, "Y0")).unwrap() - Complex64::new(theta.sin(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn commuting_axis_leaves_sum_unchanged() {
        let mut s = PauliSum::single(w(1, "Z0"), 1.0);
        let before = s.clone();
        s.apply_rotation(&w(1, "Z0"), 0.7, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn two_term_rotation_matches_dense() {
        let theta = PI / 6.0;
        let mut s = PauliSum::from_text(1, "0.6*Z0 + 0.8*Y0").unwrap();
        s.apply_rotation(&w(1, "X0"), theta, 0.0).unwrap();
        let z = s.get(&w(1, "Z0")).unwrap().re;
        let y = s.get(&w(1, "Y0")).unwrap().re;
        assert!((z - (0.6 * theta.cos() - 0.8 * theta.sin())).abs() < 1e-15);
        assert!((y - (0.8 * theta.cos() + 0.6 * theta.sin())).abs() < 1e-15);
        assert!((s.frobenius_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_rules() {
        let mut s = PauliSum::from_text(2, "0.5*X0 + 0.00001*Z1").unwrap();
        let before = s.clone();
        s.truncate(0.0);
        assert_eq!(s, before);
        s.truncate(1e-4);
        assert_eq!(s.len(), 1);
        let mut s = PauliSum::from_text(1, "0.25*X0").unwrap();
        s.truncate(0.25);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn expectation_and_norm() {
        assert_eq!(PauliSum::from_text(127, "Z62").unwrap().expectation().unwrap(), 1.0);
        assert_eq!(PauliSum::from_text(1, "0.7*X0").unwrap().expectation().unwrap(), 0.0);
        assert_eq!(PauliSum::from_text(2, "3*X0 + 4*Z1").unwrap().frobenius_norm(), 5.0);
        let mut empty = PauliSum::from_text(1, "0.1*X0").unwrap();
        empty.truncate(1.0);
        assert!(empty.frobenius_norm().is_sign_positive());
        let bad = PauliSum::from_terms(1, [(w(1, "Z0"), Complex64::new(1.0, 1e-6))]).unwrap();
        assert!(matches!(bad.expectation(), Err(Error::Numerical(_))));
    }

    #[test]
    fn text_parsing_and_named() {
        let s = PauliSum::from_text(3, "Z0 Z1 + 0.5*X2").unwrap();
        assert_eq!(s.len(), 2);
        assert!(matches!(
            PauliSum::from_text(3, "Z0 + 0.5*Q2"),
            Err(Error::Parse { position: 9, .. })
        ));
        assert_eq!(named_observable("w10", 127).unwrap().word(0).weight(), 10);
        assert_eq!(named_observable("w17", 127).unwrap().word(0).weight(), 17);
        assert_eq!(named_observable("w17x", 127).unwrap().word(0).weight(), 17);
        assert_eq!(named_observable("magnetization", 127).unwrap().len(), 127);
    }

    #[test]
    fn duplicate_products_merge() {
        // X0 rotation on {Z0, Y0}: products hit existing terms only
        let mut s = PauliSum::from_text(2, "Z0 + Y0 + Z1").unwrap();
        s.apply_rotation(&w(2, "X0"), 0.3, 0.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.is_sorted_unique());
    }
}
