//! Dense reference simulators for small circuits.

use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::{Letter, PauliWord};
use crate::spd::{PauliSum, IMAG_TOLERANCE};

pub const DEFAULT_STATEVECTOR_CAP: usize = 24;
pub const DEFAULT_DENSE_CAP: usize = 12;

const NORM_TOLERANCE: f64 = 1e-10;

fn masks(word: &PauliWord) -> (usize, usize) {
    let (mut z, mut x) = (0usize, 0usize);
    for q in word.support() {
        match word.letter(q) {
            Letter::X => x |= 1 << q,
            Letter::Y => {
                x |= 1 << q;
                z |= 1 << q;
            }
            Letter::Z => z |= 1 << q,
            Letter::I => {}
        }
    }
    (z, x)
}

/// `i^k` for `k = |z & x| mod 4`.
fn y_phase(z: usize, x: usize) -> Complex64 {
    match (z & x).count_ones() % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Multiplies the amplitudes on `qubits` by a dense `2^k x 2^k` matrix
/// (row-major, bit `i` of the local index is `qubits[i]`).
fn apply_local(amps: &mut [Complex64], qubits: &[usize], m: &[Complex64]) {
    let k = qubits.len();
    let dim = 1usize << k;
    debug_assert_eq!(m.len(), dim * dim);
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    let offsets: Vec<usize> = (0..dim)
        .map(|l| {
            qubits
                .iter()
                .enumerate()
                .filter(|(i, _)| (l >> i) & 1 == 1)
                .map(|(_, &q)| 1usize << q)
                .sum()
        })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (l, &o) in offsets.iter().enumerate() {
            buf[l] = amps[base | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let row = &m[r * dim..(r + 1) * dim];
            amps[base | o] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

/// Dense `2^n` amplitude vector.
#[derive(Clone, Debug)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n: usize) -> Result<Self> {
        Self::zero_with_cap(n, DEFAULT_STATEVECTOR_CAP)
    }

    pub fn zero_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n > cap {
            return Err(Error::Capacity(format!("statevector on {n} qubits exceeds cap of {cap}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n {
            return Err(Error::Argument(format!("{} amplitudes for {n} qubits", amps.len())));
        }
        Ok(Self { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().fold(0.0, |acc, a| acc + a.norm_sqr()).sqrt()
    }

    /// `P|psi>` for a Pauli word.
    pub fn apply_pauli(&self, word: &PauliWord) -> Vec<Complex64> {
        let (z, x) = masks(word);
        let ph = y_phase(z, x);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let sign = if (z & b).count_ones() % 2 == 1 { -ph } else { ph };
            out[b ^ x] = sign * a;
        }
        out
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match gate {
            Gate::Rotation { axis, theta } => {
                if axis.num_qubits() != self.n {
                    return Err(Error::Argument("rotation axis size mismatch".into()));
                }
                let p = self.apply_pauli(axis);
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let ms = Complex64::new(0.0, -s);
                for (a, pa) in self.amps.iter_mut().zip(p) {
                    *a = *a * c + ms * pa;
                }
            }
            g => apply_local(&mut self.amps, &g.qubits(), &g.matrix()),
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.num_qubits() != self.n {
            return Err(Error::Argument("circuit size mismatch".into()));
        }
        for g in circuit.gates() {
            self.apply_gate(&g)?;
            let norm = self.norm();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Invariant(format!("state norm drifted to {norm} after {}", g.name())));
            }
        }
        Ok(())
    }

    /// `<psi|O|psi>` with an imaginary-residue check.
    pub fn expectation(&self, observable: &PauliSum) -> Result<f64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (w, c) in observable.iter() {
            let p = self.apply_pauli(&w);
            let ev: Complex64 = self.amps.iter().zip(&p).map(|(a, b)| a.conj() * b).sum();
            total += c * ev;
        }
        if total.im.abs() > IMAG_TOLERANCE {
            return Err(Error::Numerical(format!("imaginary residue {:e}", total.im)));
        }
        Ok(total.re)
    }
}

/// `<0|U^dag O U|0>` by dense state evolution.
pub fn statevector_expectation(circuit: &Circuit, observable: &PauliSum) -> Result<f64> {
    let mut psi = StateVector::zero(circuit.num_qubits())?;
    psi.apply_circuit(circuit)?;
    psi.expectation(observable)
}

/// `<0|U^dag O U|0>` by conjugating the dense `2^n x 2^n` observable gate by
/// gate in reverse order.
pub fn heisenberg_dense_expectation(circuit: &Circuit, observable: &PauliSum) -> Result<f64> {
    heisenberg_dense_with_cap(circuit, observable, DEFAULT_DENSE_CAP)
}

pub fn heisenberg_dense_with_cap(circuit: &Circuit, observable: &PauliSum, cap: usize) -> Result<f64> {
    let n = circuit.num_qubits();
    if n > cap {
        return Err(Error::Capacity(format!("dense operator on {n} qubits exceeds cap of {cap}")));
    }
    let dim = 1usize << n;
    // O[r, c] stored at index (r << n) | c: column bits are qubits 0..n, row bits n..2n.
    let mut op = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (w, c) in observable.iter() {
        let (z, x) = masks(&w);
        let ph = y_phase(z, x);
        for col in 0..dim {
            let sign = if (z & col).count_ones() % 2 == 1 { -ph } else { ph };
            op[((col ^ x) << n) | col] += c * sign;
        }
    }
    for g in circuit.gates().iter().rev() {
        let qs = g.qubits();
        let m = g.matrix();
        let k = 1usize << qs.len();
        let mut dagger = vec![Complex64::new(0.0, 0.0); k * k];
        let mut transpose = vec![Complex64::new(0.0, 0.0); k * k];
        for r in 0..k {
            for c in 0..k {
                dagger[r * k + c] = m[c * k + r].conj();
                transpose[r * k + c] = m[c * k + r];
            }
        }
        let row_qs: Vec<usize> = qs.iter().map(|q| q + n).collect();
        apply_local(&mut op, &row_qs, &dagger);
        apply_local(&mut op, &qs, &transpose);
    }
    Ok(op[0].re)
}
