use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// `(x_bit, z_bit)`; `Y` is encoded as both bits set.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl From<Basis> for Pauli {
    fn from(b: Basis) -> Self {
        match b {
            Basis::X => Pauli::X,
            Basis::Z => Pauli::Z,
        }
    }
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

/// `±P_1 ⊗ ... ⊗ P_n` with `P_i ∈ {I, X, Y, Z}`. Qubits are 0-indexed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    negative: bool,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliString {
            n,
            x: vec![0; w],
            z: vec![0; w],
            negative: false,
        }
    }

    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(qubit, p);
        s
    }

    pub(crate) fn from_words(n: usize, x: Vec<u64>, z: Vec<u64>, negative: bool) -> Self {
        PauliString { n, x, z, negative }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// `+1` or `-1`.
    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn set_negative(&mut self, negative: bool) {
        self.negative = negative;
    }

    pub fn negated(mut self) -> Self {
        self.negative = !self.negative;
        self
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let (w, b) = (qubit / 64, qubit % 64);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let (w, b) = (qubit / 64, qubit % 64);
        let (xb, zb) = p.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
    }

    pub(crate) fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub(crate) fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// Number of `Y` factors.
    pub fn y_count(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut parity = 0u32;
        for w in 0..self.x.len() {
            parity ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones();
        }
        parity % 2 == 0
    }

    /// Pauli part of the product `self * other`, with the sign tracked for
    /// commuting factors. Returns `None` when the factors anticommute (the
    /// product then carries an imaginary phase).
    pub fn mul(&self, other: &PauliString) -> Option<PauliString> {
        if self.n != other.n || !self.commutes_with(other) {
            return None;
        }
        // Phase exponent of i accumulated per qubit.
        let mut exp: i32 = 0;
        for q in 0..self.n {
            exp += phase_exponent(self.get(q), other.get(q));
        }
        let exp = exp.rem_euclid(4);
        debug_assert!(exp % 2 == 0);
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        Some(PauliString {
            n: self.n,
            x,
            z,
            negative: self.negative ^ other.negative ^ (exp == 2),
        })
    }
}

/// Exponent `k` in `a * b = i^k * c` for single-qubit Paulis.
fn phase_exponent(a: Pauli, b: Pauli) -> i32 {
    use Pauli::*;
    match (a, b) {
        (X, Y) | (Y, Z) | (Z, X) => 1,
        (Y, X) | (Z, Y) | (X, Z) => -1,
        _ => 0,
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses strings such as `"+XZI"`, `"-YY"` or `"ZXZ"`.
    fn from_str(s: &str) -> Result<Self> {
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let mut p = PauliString::identity(body.chars().count());
        p.negative = negative;
        for (q, c) in body.chars().enumerate() {
            let op = match c.to_ascii_uppercase() {
                'I' | '_' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(Error::InvalidParams(format!("bad Pauli symbol {other:?}"))),
            };
            p.set(q, op);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let p: PauliString = "-XYZI".parse().unwrap();
        assert_eq!(p.to_string(), "-XYZI");
        assert_eq!(p.weight(), 3);
        assert_eq!(p.y_count(), 1);
        assert_eq!(p.get(1), Pauli::Y);
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn commutation() {
        let xz: PauliString = "XZ".parse().unwrap();
        let zx: PauliString = "ZX".parse().unwrap();
        let xi: PauliString = "XI".parse().unwrap();
        let zi: PauliString = "ZI".parse().unwrap();
        assert!(xz.commutes_with(&zx));
        assert!(!xi.commutes_with(&zi));
    }

    #[test]
    fn products_track_sign() {
        let xz: PauliString = "XZ".parse().unwrap();
        let zx: PauliString = "ZX".parse().unwrap();
        // (X⊗Z)(Z⊗X) = (XZ)⊗(ZX) = (-iY)⊗(iY) = Y⊗Y
        assert_eq!(xz.mul(&zx).unwrap().to_string(), "+YY");
        let xx: PauliString = "XX".parse().unwrap();
        let zz: PauliString = "ZZ".parse().unwrap();
        // (XZ)⊗(XZ) = (-iY)(-iY) = -YY
        assert_eq!(xx.mul(&zz).unwrap().to_string(), "-YY");
        assert!("X".parse::<PauliString>().unwrap().mul(&"Z".parse().unwrap()).is_none());
    }

    #[test]
    fn wide_strings_cross_word_boundary() {
        let mut p = PauliString::identity(130);
        p.set(0, Pauli::X);
        p.set(64, Pauli::Y);
        p.set(129, Pauli::Z);
        assert_eq!(p.weight(), 3);
        assert_eq!(p.get(64), Pauli::Y);
        let q = PauliString::single(130, 64, Pauli::Z);
        assert!(!p.commutes_with(&q));
    }
}
