//! Bit-packed n-qubit Pauli words.
//!
//! A word stores two bit vectors `z` and `x`, each packed little-endian into
//! `ceil(n/64)` 64-bit words, laid out as `[z..., x...]`. The operator named by
//! `(z, x)` is the tensor product of single-qubit `I`, `X`, `Y`, `Z` with
//! `(z_j, x_j) = (0,1) -> X`, `(1,0) -> Z`, `(1,1) -> Y`. Equivalently
//! `op(z, x) = i^{|z & x|} X^x Z^z`, which is Hermitian and squares to identity.
//! Phases produced by products are returned separately as powers of `i`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of 64-bit words needed for `n` bits.
#[inline]
pub fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// A fourth root of unity, stored as the exponent of `i` modulo 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(e: i64) -> Self {
        Phase(e.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// True for `+1` and `-1`.
    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl std::ops::MulAssign for Phase {
    fn mul_assign(&mut self, rhs: Phase) {
        *self = *self * rhs;
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_bits(z: bool, x: bool) -> Self {
        match (z, x) {
            (false, false) => Letter::I,
            (false, true) => Letter::X,
            (true, true) => Letter::Y,
            (true, false) => Letter::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (false, true),
            Letter::Y => (true, true),
            Letter::Z => (true, false),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// Bit-packed Pauli word on `n` qubits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliWord {
    n: usize,
    bits: Vec<u64>,
}

/// Result of a Pauli product: `phase * op(word)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhasedWord {
    pub word: PauliWord,
    pub phase: Phase,
}

impl PhasedWord {
    pub fn new(word: PauliWord, phase: Phase) -> Self {
        Self { word, phase }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(PauliWord::identity(n), Phase::ONE)
    }

    /// In-place right multiplication `self <- self * rhs`.
    pub fn mul_assign_word(&mut self, rhs: &PauliWord, rhs_phase: Phase) {
        let w = self.word.words();
        let e = mul_into(self.word.bits.as_mut_slice(), &rhs.bits, w);
        self.phase = self.phase * rhs_phase * Phase::from_exponent(e as i64);
    }
}

impl fmt::Display for PhasedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.phase, self.word)
    }
}

/// Weight and z-type classification of a word.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub weight: usize,
    pub z_type: bool,
}

impl PauliWord {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            bits: vec![0; 2 * words_for(n)],
        }
    }

    /// Builds a word from raw packed bits `[z..., x...]`.
    pub fn from_packed(n: usize, bits: Vec<u64>) -> Result<Self> {
        let w = words_for(n);
        if bits.len() != 2 * w {
            return Err(Error::Argument(format!(
                "packed length {} does not match {} qubits",
                bits.len(),
                n
            )));
        }
        let word = Self { n, bits };
        if !word.tail_is_clean() {
            return Err(Error::Argument("bits set beyond qubit count".into()));
        }
        Ok(word)
    }

    pub fn single(n: usize, qubit: usize, letter: Letter) -> Self {
        let mut w = Self::identity(n);
        w.set(qubit, letter);
        w
    }

    pub fn from_letters(n: usize, letters: &[(usize, Letter)]) -> Self {
        let mut w = Self::identity(n);
        for &(q, l) in letters {
            w.set(q, l);
        }
        w
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Number of 64-bit words per bit vector.
    pub fn words(&self) -> usize {
        self.bits.len() / 2
    }

    pub fn packed(&self) -> &[u64] {
        &self.bits
    }

    pub(crate) fn from_packed_unchecked(n: usize, bits: Vec<u64>) -> Self {
        Self { n, bits }
    }

    pub fn z_bits(&self) -> &[u64] {
        &self.bits[..self.words()]
    }

    pub fn x_bits(&self) -> &[u64] {
        &self.bits[self.words()..]
    }

    pub fn letter(&self, q: usize) -> Letter {
        let w = self.words();
        let (word, bit) = (q / 64, q % 64);
        let z = (self.bits[word] >> bit) & 1 == 1;
        let x = (self.bits[w + word] >> bit) & 1 == 1;
        Letter::from_bits(z, x)
    }

    pub fn set(&mut self, q: usize, letter: Letter) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let w = self.words();
        let (word, bit) = (q / 64, q % 64);
        let (z, x) = letter.bits();
        let mask = 1u64 << bit;
        self.bits[word] = (self.bits[word] & !mask) | if z { mask } else { 0 };
        self.bits[w + word] = (self.bits[w + word] & !mask) | if x { mask } else { 0 };
    }

    /// Qubits where the word acts non-trivially, ascending.
    pub fn support(&self) -> Vec<usize> {
        let w = self.words();
        let mut out = Vec::new();
        for i in 0..w {
            let mut m = self.bits[i] | self.bits[w + i];
            while m != 0 {
                let b = m.trailing_zeros() as usize;
                out.push(i * 64 + b);
                m &= m - 1;
            }
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn classify(&self) -> Classification {
        classify_packed(&self.bits)
    }

    pub fn weight(&self) -> usize {
        self.classify().weight
    }

    pub fn is_z_type(&self) -> bool {
        self.x_bits().iter().all(|&b| b == 0)
    }

    fn tail_is_clean(&self) -> bool {
        let w = self.words();
        let rem = self.n % 64;
        if w == 0 || rem == 0 {
            return true;
        }
        let mask = !((1u64 << rem) - 1);
        self.bits[w - 1] & mask == 0 && self.bits[2 * w - 1] & mask == 0
    }

    fn check_size(&self, other: &PauliWord) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Argument(format!(
                "Pauli size mismatch: {} vs {} qubits",
                self.n, other.n
            )));
        }
        Ok(())
    }

    /// Canonical text form, e.g. `X0 Y1 Z2`; the identity prints as `I`.
    pub fn to_text(&self) -> String {
        let tokens: Vec<String> = self
            .support()
            .into_iter()
            .map(|q| format!("{}{}", self.letter(q).as_char(), q))
            .collect();
        if tokens.is_empty() {
            "I".to_string()
        } else {
            tokens.join(" ")
        }
    }

    /// Parses whitespace-separated `<letter><index>` tokens.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let mut word = Self::identity(n);
        let mut seen = vec![false; n];
        let mut offset = 0usize;
        for raw in text.split_inclusive(char::is_whitespace) {
            let token = raw.trim();
            let pos = offset + (raw.len() - raw.trim_start().len());
            offset += raw.len();
            if token.is_empty() || token == "I" {
                continue;
            }
            let mut chars = token.chars();
            let letter = match chars.next() {
                Some('X') => Letter::X,
                Some('Y') => Letter::Y,
                Some('Z') => Letter::Z,
                Some(c) => {
                    return Err(Error::Parse {
                        position: pos,
                        message: format!("bad Pauli letter '{c}' in token '{token}'"),
                    })
                }
                None => continue,
            };
            let index: usize = chars.as_str().parse().map_err(|_| Error::Parse {
                position: pos,
                message: format!("bad qubit index in token '{token}'"),
            })?;
            if index >= n {
                return Err(Error::Parse {
                    position: pos,
                    message: format!("qubit index {index} out of range for {n} qubits"),
                });
            }
            if seen[index] {
                return Err(Error::Parse {
                    position: pos,
                    message: format!("duplicate qubit index {index}"),
                });
            }
            seen[index] = true;
            word.set(index, letter);
        }
        Ok(word)
    }
}

impl PartialOrd for PauliWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order over the packed `[z..., x...]` layout.
impl Ord for PauliWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.bits.as_slice().cmp(other.bits.as_slice()))
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl fmt::Debug for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliWord[{}]({})", self.n, self.to_text())
    }
}

impl Serialize for PauliWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PauliWord", 2)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("text", &self.to_text())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for PauliWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            text: String,
        }
        let raw = Raw::deserialize(d)?;
        PauliWord::parse(raw.n, &raw.text).map_err(serde::de::Error::custom)
    }
}

/// Parses text where the qubit count is inferred as `1 + max index`.
impl FromStr for PauliWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let max = s
            .split_whitespace()
            .filter_map(|t| t.get(1..).and_then(|d| d.parse::<usize>().ok()))
            .max()
            .map_or(0, |m| m + 1);
        PauliWord::parse(max, s)
    }
}

/// Weight and z-type flag of a packed `[z..., x...]` slice.
#[inline]
pub fn classify_packed(bits: &[u64]) -> Classification {
    let w = bits.len() / 2;
    let (z, x) = bits.split_at(w);
    let weight = z
        .iter()
        .zip(x)
        .map(|(a, b)| (a | b).count_ones() as usize)
        .sum();
    Classification {
        weight,
        z_type: x.iter().all(|&b| b == 0),
    }
}

/// Anticommutation test on packed slices of equal length.
#[inline]
pub fn anticommutes_packed(a: &[u64], b: &[u64]) -> bool {
    let w = a.len() / 2;
    let mut parity = 0u32;
    for i in 0..w {
        parity ^= (a[i] & b[w + i]).count_ones() ^ (a[w + i] & b[i]).count_ones();
    }
    parity & 1 == 1
}

/// Overwrites `acc` with the word of `acc * rhs` and returns the exponent of
/// `i` (mod 4) such that `op(acc) op(rhs) = i^e op(result)`.
#[inline]
pub fn mul_into(acc: &mut [u64], rhs: &[u64], w: usize) -> u32 {
    // op(z,x) = i^{|z&x|} X^x Z^z and Z^{z1} X^{x2} = (-1)^{|z1&x2|} X^{x2} Z^{z1}:
    // e = |z1&x1| + |z2&x2| + 2|z1&x2| - |z3&x3|.
    let mut e: u32 = 0;
    let mut neg: u32 = 0;
    for i in 0..w {
        let (z1, x1) = (acc[i], acc[w + i]);
        let (z2, x2) = (rhs[i], rhs[w + i]);
        let (z3, x3) = (z1 ^ z2, x1 ^ x2);
        e = e.wrapping_add((z1 & x1).count_ones() + (z2 & x2).count_ones() + 2 * (z1 & x2).count_ones());
        neg = neg.wrapping_add((z3 & x3).count_ones());
        acc[i] = z3;
        acc[w + i] = x3;
    }
    (e + 4 * (neg / 4 + 1) - neg) % 4
}

/// Product of two words with exact phase: `op(a) op(b) = phase * op(result)`.
pub fn pauli_mul(a: &PauliWord, b: &PauliWord) -> Result<PhasedWord> {
    a.check_size(b)?;
    let mut bits = a.bits.clone();
    let e = mul_into(&mut bits, &b.bits, a.words());
    Ok(PhasedWord::new(
        PauliWord { n: a.n, bits },
        Phase::from_exponent(e as i64),
    ))
}

/// True iff the two words anticommute.
pub fn anticommutes(a: &PauliWord, b: &PauliWord) -> Result<bool> {
    a.check_size(b)?;
    Ok(anticommutes_packed(&a.bits, &b.bits))
}

pub fn classify(a: &PauliWord) -> Classification {
    a.classify()
}

pub fn parse_pauli(n: usize, text: &str) -> Result<PauliWord> {
    PauliWord::parse(n, text)
}

pub fn format_pauli(word: &PauliWord) -> String {
    word.to_text()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(n: usize, s: &str) -> PauliWord {
        PauliWord::parse(n, s).unwrap()
    }

    #[test]
    fn single_qubit_products() {
        let zx = pauli_mul(&w(1, "Z0"), &w(1, "X0")).unwrap();
        assert_eq!(zx.word, w(1, "Y0"));
        assert_eq!(zx.phase, Phase::I);

        let xx = pauli_mul(&w(1, "X0"), &w(1, "X0")).unwrap();
        assert!(xx.word.is_identity());
        assert_eq!(xx.phase, Phase::ONE);

        let xy = pauli_mul(&w(1, "X0"), &w(1, "Y0")).unwrap();
        assert_eq!(xy.word, w(1, "Z0"));
        assert_eq!(xy.phase, Phase::I);

        let yx = pauli_mul(&w(1, "Y0"), &w(1, "X0")).unwrap();
        assert_eq!(yx.phase, Phase::MINUS_I);
    }

    #[test]
    fn two_qubit_product_phase() {
        let p = pauli_mul(&w(2, "X0 Z1"), &w(2, "Z0 Z1")).unwrap();
        assert_eq!(p.word, w(2, "Y0"));
        assert_eq!(p.phase, Phase::MINUS_I);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(pauli_mul(&w(2, "X0"), &w(3, "X0")).is_err());
        assert!(anticommutes(&w(2, "X0"), &w(3, "X0")).is_err());
    }

    #[test]
    fn anticommutation_basics() {
        assert!(anticommutes(&w(1, "X0"), &w(1, "Z0")).unwrap());
        assert!(!anticommutes(&w(1, "X0"), &w(1, "X0")).unwrap());
        assert!(!anticommutes(&w(2, "X0 X1"), &w(2, "Z0 Z1")).unwrap());
    }

    #[test]
    fn classification() {
        assert_eq!(
            classify(&PauliWord::identity(5)),
            Classification { weight: 0, z_type: true }
        );
        let big = w(127, "X13 X29 X31 Y9 Y30 Z8 Z12 Z17 Z28 Z32");
        assert_eq!(classify(&big), Classification { weight: 10, z_type: false });
        assert_eq!(
            classify(&w(127, "Z62")),
            Classification { weight: 1, z_type: true }
        );
    }

    #[test]
    fn parse_and_format() {
        let z62 = w(127, "Z62");
        assert_eq!(z62.z_bits()[0], 1 << 62);
        assert!(z62.x_bits().iter().all(|&b| b == 0));

        let p = w(3, "X0 Y1 Z2");
        assert_eq!(p.weight(), 3);
        assert_eq!(p.support(), vec![0, 1, 2]);
        assert_eq!(p.letter(1), Letter::Y);

        assert_eq!(format_pauli(&w(2, "Y1 X0")), "X0 Y1");
        assert_eq!(format_pauli(&PauliWord::identity(4)), "I");
        assert!(w(4, "I").is_identity());
    }

    #[test]
    fn parse_errors_carry_position() {
        match PauliWord::parse(4, "X0 Q1") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(PauliWord::parse(4, "X0 Z0"), Err(Error::Parse { .. })));
        assert!(matches!(PauliWord::parse(4, "X4"), Err(Error::Parse { .. })));
        assert!(matches!(PauliWord::parse(4, "Xa"), Err(Error::Parse { .. })));
    }

    #[test]
    fn high_words_are_handled() {
        let a = w(130, "X1 Z64 Y129");
        let b = w(130, "Z1 X64 Y129");
        assert!(!anticommutes(&a, &b).unwrap());
        let p = pauli_mul(&a, &b).unwrap();
        assert_eq!(p.word, w(130, "Y1 Y64"));
        // XZ = -iY, ZX = iY, YY = I
        assert_eq!(p.phase, Phase::ONE);
        assert!(PauliWord::from_packed(65, vec![0, 1 << 5, 0, 0]).is_err());
    }
}
