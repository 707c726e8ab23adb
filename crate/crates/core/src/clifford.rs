//! Clifford tableaux in the Heisenberg picture and Clifford recompilation of
//! Clifford + rotation circuits.

use std::fmt;

use crate::circuit::{fold_angle, Circuit, Gate};
use crate::error::{Error, Result};
use crate::pauli::{anticommutes_packed, Letter, PauliWord, Phase, PhasedWord};
use crate::spd::PauliSum;

/// Heisenberg action `P -> V^dagger P V` of a Clifford `V`, stored as the
/// images of `X_q` and `Z_q` for every qubit.
#[derive(Clone, PartialEq, Eq)]
pub struct CliffordTableau {
    n: usize,
    /// `images[2q]` is the image of `X_q`, `images[2q + 1]` of `Z_q`.
    images: Vec<PhasedWord>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        let mut images = Vec::with_capacity(2 * n);
        for q in 0..n {
            images.push(PhasedWord::new(PauliWord::single(n, q, Letter::X), Phase::ONE));
            images.push(PhasedWord::new(PauliWord::single(n, q, Letter::Z), Phase::ONE));
        }
        Self { n, images }
    }

    /// Tableau of a Clifford circuit given in time order.
    pub fn from_gates<'a>(n: usize, gates: impl IntoIterator<Item = &'a Gate>) -> Result<Self> {
        let mut t = Self::identity(n);
        for g in gates {
            t.append_gate(g)?;
        }
        Ok(t)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn image_x(&self, q: usize) -> &PhasedWord {
        &self.images[2 * q]
    }

    pub fn image_z(&self, q: usize) -> &PhasedWord {
        &self.images[2 * q + 1]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// Heisenberg image `V^dagger P V` of a word.
    pub fn conjugate_word(&self, p: &PauliWord) -> PhasedWord {
        let mut acc = PhasedWord::identity(self.n);
        for q in p.support() {
            match p.letter(q) {
                Letter::X => {
                    let img = self.image_x(q);
                    acc.mul_assign_word(&img.word, img.phase);
                }
                Letter::Z => {
                    let img = self.image_z(q);
                    acc.mul_assign_word(&img.word, img.phase);
                }
                Letter::Y => {
                    // Y = i X Z
                    let (ix, iz) = (self.image_x(q), self.image_z(q));
                    acc.mul_assign_word(&ix.word, ix.phase * Phase::I);
                    acc.mul_assign_word(&iz.word, iz.phase);
                }
                Letter::I => {}
            }
        }
        acc
    }

    pub fn conjugate_phased(&self, p: &PhasedWord) -> PhasedWord {
        let mut out = self.conjugate_word(&p.word);
        out.phase = out.phase * p.phase;
        out
    }

    /// Appends a Clifford gate that acts after everything already recorded.
    pub fn append_gate(&mut self, gate: &Gate) -> Result<()> {
        let n = self.n;
        let support = gate.qubits();
        let mut updates = Vec::with_capacity(2 * support.len());
        for &q in &support {
            for (slot, letter) in [(2 * q, Letter::X), (2 * q + 1, Letter::Z)] {
                let g = PauliWord::single(n, q, letter);
                let h = gate_heisenberg(gate, &g)?;
                updates.push((slot, self.conjugate_phased(&h)));
            }
        }
        for (slot, img) in updates {
            self.images[slot] = img;
        }
        Ok(())
    }

    /// Appends `exp(-i k pi axis / 4)`, i.e. a rotation by a multiple of pi/2.
    pub fn append_quarter_turns(&mut self, axis: &PauliWord, k: u8) {
        if k % 4 == 0 {
            return;
        }
        let support = axis.support();
        let mut updates = Vec::new();
        for &q in &support {
            for (slot, letter) in [(2 * q, Letter::X), (2 * q + 1, Letter::Z)] {
                let g = PauliWord::single(self.n, q, letter);
                let h = quarter_turn_image(axis, k, &g);
                if h.word != g || h.phase != Phase::ONE {
                    updates.push((slot, self.conjugate_phased(&h)));
                }
            }
        }
        for (slot, img) in updates {
            self.images[slot] = img;
        }
    }
}

impl fmt::Debug for CliffordTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CliffordTableau({} qubits)", self.n)?;
        for q in 0..self.n {
            writeln!(f, "  X{q} -> {}", self.image_x(q))?;
            writeln!(f, "  Z{q} -> {}", self.image_z(q))?;
        }
        Ok(())
    }
}

/// `V^dagger P V` for the Clifford tableau `V`.
pub fn conjugate(tableau: &CliffordTableau, p: &PauliWord) -> PhasedWord {
    tableau.conjugate_word(p)
}

/// Composition satisfying `conjugate(compose(a, b), p) = conjugate(b, conjugate(a, p))`.
pub fn compose(a: &CliffordTableau, b: &CliffordTableau) -> Result<CliffordTableau> {
    if a.n != b.n {
        return Err(Error::Argument(format!(
            "tableau size mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    Ok(CliffordTableau {
        n: a.n,
        images: a.images.iter().map(|img| b.conjugate_phased(img)).collect(),
    })
}

/// Inverse tableau: `conjugate(inverse(V), conjugate(V, p)) = p`.
pub fn inverse(t: &CliffordTableau) -> CliffordTableau {
    let n = t.n;
    let mut images = Vec::with_capacity(2 * n);
    for q in 0..n {
        for letter in [Letter::X, Letter::Z] {
            let g = PauliWord::single(n, q, letter);
            // Preimage bits from the symplectic form: the x-bit at j is the
            // commutation of g with image(Z_j), the z-bit with image(X_j).
            let mut pre = PauliWord::identity(n);
            for j in 0..n {
                let x = anticommutes_packed(g.packed(), t.image_z(j).word.packed());
                let z = anticommutes_packed(g.packed(), t.image_x(j).word.packed());
                pre.set(j, Letter::from_bits(z, x));
            }
            let img = t.conjugate_word(&pre);
            debug_assert_eq!(img.word, g);
            // V^dag pre V = phase * g, so V g V^dag = phase^{-1} pre; phase is real.
            images.push(PhasedWord::new(pre, img.phase));
        }
    }
    CliffordTableau { n, images }
}

/// Single-gate Heisenberg map `G^dagger g G` for a generator `g` on the gate's support.
fn gate_heisenberg(gate: &Gate, g: &PauliWord) -> Result<PhasedWord> {
    let n = g.num_qubits();
    let one = |w: PauliWord| PhasedWord::new(w, Phase::ONE);
    let neg = |w: PauliWord| PhasedWord::new(w, Phase::MINUS_ONE);
    let q0 = g.support()[0];
    let l = g.letter(q0);
    let single = |q, letter| PauliWord::single(n, q, letter);
    Ok(match gate {
        Gate::H { .. } => match l {
            Letter::X => one(single(q0, Letter::Z)),
            _ => one(single(q0, Letter::X)),
        },
        Gate::S { .. } => match l {
            Letter::X => neg(single(q0, Letter::Y)),
            _ => one(g.clone()),
        },
        Gate::Sdg { .. } => match l {
            Letter::X => one(single(q0, Letter::Y)),
            _ => one(g.clone()),
        },
        Gate::X { .. } => match l {
            Letter::Z => neg(g.clone()),
            _ => one(g.clone()),
        },
        Gate::Y { .. } => neg(g.clone()),
        Gate::Z { .. } => match l {
            Letter::X => neg(g.clone()),
            _ => one(g.clone()),
        },
        Gate::Cx { control, target } => match (l, q0 == *control) {
            (Letter::X, true) => one(PauliWord::from_letters(n, &[(*control, Letter::X), (*target, Letter::X)])),
            (Letter::Z, false) => one(PauliWord::from_letters(n, &[(*control, Letter::Z), (*target, Letter::Z)])),
            _ => one(g.clone()),
        },
        Gate::Cz { a, b } => match l {
            Letter::X => {
                let other = if q0 == *a { *b } else { *a };
                one(PauliWord::from_letters(n, &[(q0, Letter::X), (other, Letter::Z)]))
            }
            _ => one(g.clone()),
        },
        Gate::Rotation { axis, theta } => {
            let (k, rest) = fold_angle(*theta);
            if rest != 0.0 {
                return Err(Error::UnsupportedGate(format!(
                    "rotation by {theta} is not Clifford"
                )));
            }
            quarter_turn_image(axis, k, g)
        }
    })
}

/// Heisenberg image of `p` under `exp(-i k pi axis / 4)`.
fn quarter_turn_image(axis: &PauliWord, k: u8, p: &PauliWord) -> PhasedWord {
    if k % 4 == 0 || !anticommutes_packed(axis.packed(), p.packed()) {
        return PhasedWord::new(p.clone(), Phase::ONE);
    }
    match k % 4 {
        2 => PhasedWord::new(p.clone(), Phase::MINUS_ONE),
        k => {
            let mut out = PhasedWord::new(axis.clone(), if k == 1 { Phase::I } else { Phase::MINUS_I });
            out.mul_assign_word(p, Phase::ONE);
            out
        }
    }
}

/// A non-Clifford rotation `exp(-i theta axis / 2)` with `|theta| <= pi/4`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    pub axis: PauliWord,
    pub theta: f64,
}

/// Output of [`recompile`]: `U = C R_m ... R_1` with all Cliffords pushed to
/// the end, so `<0|U^dag O U|0> = <0|R^dag O' R|0>` with `O' = C^dag O C`.
#[derive(Clone, Debug)]
pub struct RecompiledCircuit {
    /// Rotations in time order.
    pub rotations: Vec<Rotation>,
    /// The observable conjugated by the accumulated Clifford.
    pub observable: PauliSum,
    /// Accumulated Clifford `C`.
    pub residual_clifford: CliffordTableau,
}

/// Folds rotation angles into `(-pi/4, pi/4]`, absorbs all Clifford content
/// into a tableau and rewrites rotation axes accordingly.
pub fn recompile(circuit: &Circuit, observable: &PauliSum) -> Result<RecompiledCircuit> {
    let n = circuit.num_qubits();
    if observable.num_qubits() != n {
        return Err(Error::Argument(format!(
            "observable has {} qubits, circuit has {n}",
            observable.num_qubits()
        )));
    }
    let mut frame = CliffordTableau::identity(n);
    let mut rotations = Vec::new();
    for gate in circuit.gates() {
        match &gate {
            Gate::Rotation { axis, theta } => {
                let (k, rest) = fold_angle(*theta);
                if rest != 0.0 {
                    let img = frame.conjugate_word(axis);
                    let theta = match img.phase {
                        Phase::ONE => rest,
                        Phase::MINUS_ONE => -rest,
                        p => {
                            return Err(Error::Invariant(format!(
                                "Hermitian axis mapped to non-real phase {p}"
                            )))
                        }
                    };
                    rotations.push(Rotation { axis: img.word, theta });
                }
                frame.append_quarter_turns(axis, k);
            }
            g => frame.append_gate(g)?,
        }
    }
    let observable = observable.conjugated(&frame)?;
    Ok(RecompiledCircuit {
        rotations,
        observable,
        residual_clifford: frame,
    })
}
