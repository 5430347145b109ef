use std::fmt;

use rand::Rng;

use super::pauli::{words_for, Basis, Pauli, PauliString};
use crate::error::{Error, Result};
use crate::graph::ColoredGraph;

/// Measurement outcome, `+1` or `-1`.
pub type Outcome = i8;

/// Stabilizer state on `n` qubits in destabilizer/stabilizer form.
///
/// Rows `0..n` are destabilizers, rows `n..2n` are the stabilizer generators
/// and row `2n` is scratch space for deterministic measurements. Each row is
/// bit-packed into `words` u64 words for both the X and Z parts.
#[derive(Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    negative: Vec<bool>,
}

impl StabilizerTableau {
    /// `|0...0⟩`
    pub fn new_zero(n: usize) -> Self {
        assert!(n > 0, "tableau needs at least one qubit");
        let words = words_for(n);
        let rows = 2 * n + 1;
        let mut t = StabilizerTableau {
            n,
            words,
            x: vec![0; rows * words],
            z: vec![0; rows * words],
            negative: vec![false; rows],
        };
        for q in 0..n {
            t.set_x(q, q, true);
            t.set_z(n + q, q, true);
        }
        t
    }

    /// `|+...+⟩`
    pub fn new_plus(n: usize) -> Self {
        let mut t = Self::new_zero(n);
        for q in 0..n {
            t.apply_h(q);
        }
        t
    }

    /// Graph state with generators `g_i = X_i ∏_{k∈N(i)} Z_k` and destabilizers `Z_i`.
    pub fn graph_state(g: &ColoredGraph) -> Self {
        Self::graph_state_from_edges(g.n(), g.edges())
            .expect("ColoredGraph edges are always valid")
    }

    /// Graph state for an arbitrary simple graph given by 1-indexed edges.
    /// The graph need not be bipartite.
    pub fn graph_state_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("graph state needs n >= 1".into()));
        }
        let words = words_for(n);
        let rows = 2 * n + 1;
        let mut t = StabilizerTableau {
            n,
            words,
            x: vec![0; rows * words],
            z: vec![0; rows * words],
            negative: vec![false; rows],
        };
        for q in 0..n {
            t.set_z(q, q, true);
            t.set_x(n + q, q, true);
        }
        for &(a, b) in edges {
            if a == b || a == 0 || b == 0 || a > n || b > n {
                return Err(Error::InvalidEdge(a, b));
            }
            // Toggle so that duplicate edges cancel, as repeated CZ gates would.
            t.toggle_z(n + a - 1, b - 1);
            t.toggle_z(n + b - 1, a - 1);
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, row: usize, q: usize) -> (usize, u64) {
        (row * self.words + q / 64, 1u64 << (q % 64))
    }

    #[inline]
    fn x_bit(&self, row: usize, q: usize) -> bool {
        let (i, m) = self.idx(row, q);
        self.x[i] & m != 0
    }

    #[inline]
    fn z_bit(&self, row: usize, q: usize) -> bool {
        let (i, m) = self.idx(row, q);
        self.z[i] & m != 0
    }

    fn set_x(&mut self, row: usize, q: usize, v: bool) {
        let (i, m) = self.idx(row, q);
        if v {
            self.x[i] |= m
        } else {
            self.x[i] &= !m
        }
    }

    fn set_z(&mut self, row: usize, q: usize, v: bool) {
        let (i, m) = self.idx(row, q);
        if v {
            self.z[i] |= m
        } else {
            self.z[i] &= !m
        }
    }

    fn toggle_z(&mut self, row: usize, q: usize) {
        let (i, m) = self.idx(row, q);
        self.z[i] ^= m;
    }

    fn row(&self, r: usize) -> PauliString {
        let s = r * self.words;
        PauliString::from_words(
            self.n,
            self.x[s..s + self.words].to_vec(),
            self.z[s..s + self.words].to_vec(),
            self.negative[r],
        )
    }

    /// Stabilizer generator `i` (0-indexed).
    pub fn stabilizer(&self, i: usize) -> PauliString {
        self.row(self.n + i)
    }

    pub fn stabilizers(&self) -> Vec<PauliString> {
        (0..self.n).map(|i| self.stabilizer(i)).collect()
    }

    pub fn destabilizers(&self) -> Vec<PauliString> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    /// Row `h` becomes `row_i * row_h`.
    fn rowsum(&mut self, h: usize, i: usize) {
        let w = self.words;
        let (hs, is) = (h * w, i * w);
        let mut plus = 0u32;
        let mut minus = 0u32;
        for k in 0..w {
            let (xa, za) = (self.x[is + k], self.z[is + k]);
            let (xb, zb) = (self.x[hs + k], self.z[hs + k]);
            plus += ((xa & !za & xb & zb) | (xa & za & !xb & zb) | (!xa & za & xb & !zb))
                .count_ones();
            minus += ((xa & za & xb & !zb) | (!xa & za & xb & zb) | (xa & !za & !xb & zb))
                .count_ones();
        }
        let exp = (2 * (self.negative[h] as i64)
            + 2 * (self.negative[i] as i64)
            + plus as i64
            - minus as i64)
            .rem_euclid(4);
        debug_assert!(exp % 2 == 0, "rowsum of anticommuting rows");
        self.negative[h] = exp == 2;
        for k in 0..w {
            self.x[hs + k] ^= self.x[is + k];
            self.z[hs + k] ^= self.z[is + k];
        }
    }

    pub fn apply_h(&mut self, q: usize) -> &mut Self {
        assert!(q < self.n);
        for r in 0..2 * self.n {
            let (xb, zb) = (self.x_bit(r, q), self.z_bit(r, q));
            if xb && zb {
                self.negative[r] ^= true;
            }
            self.set_x(r, q, zb);
            self.set_z(r, q, xb);
        }
        self
    }

    pub fn apply_s(&mut self, q: usize) -> &mut Self {
        assert!(q < self.n);
        for r in 0..2 * self.n {
            let (xb, zb) = (self.x_bit(r, q), self.z_bit(r, q));
            if xb && zb {
                self.negative[r] ^= true;
            }
            self.set_z(r, q, zb ^ xb);
        }
        self
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> &mut Self {
        assert!(control < self.n && target < self.n && control != target);
        let (a, b) = (control, target);
        for r in 0..2 * self.n {
            let (xa, za) = (self.x_bit(r, a), self.z_bit(r, a));
            let (xb, zb) = (self.x_bit(r, b), self.z_bit(r, b));
            if xa && zb && (xb == za) {
                self.negative[r] ^= true;
            }
            self.set_x(r, b, xb ^ xa);
            self.set_z(r, a, za ^ zb);
        }
        self
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.apply_h(b).apply_cnot(a, b).apply_h(b)
    }

    /// Conjugate the state by a Pauli operator. Generators that anticommute
    /// with `p` flip sign; the overall sign of `p` is a global phase.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<&mut Self> {
        if p.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        let (px, pz) = (p.x_words(), p.z_words());
        for r in 0..2 * self.n {
            let s = r * self.words;
            let mut parity = 0u32;
            for k in 0..self.words {
                parity ^= ((self.x[s + k] & pz[k]) ^ (self.z[s + k] & px[k])).count_ones();
            }
            if parity % 2 == 1 {
                self.negative[r] ^= true;
            }
        }
        Ok(self)
    }

    pub fn apply_single_pauli(&mut self, q: usize, p: Pauli) -> &mut Self {
        assert!(q < self.n);
        if p == Pauli::I {
            return self;
        }
        let (px, pz) = p.bits();
        for r in 0..2 * self.n {
            let anti = (self.x_bit(r, q) && pz) ^ (self.z_bit(r, q) && px);
            if anti {
                self.negative[r] ^= true;
            }
        }
        self
    }

    /// Single-qubit measurement with Born-rule sampling; the state collapses
    /// onto the observed eigenspace.
    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, basis: Basis, rng: &mut R) -> Outcome {
        match basis {
            Basis::Z => self.measure_z(q, rng),
            Basis::X => {
                self.apply_h(q);
                let out = self.measure_z(q, rng);
                self.apply_h(q);
                out
            }
        }
    }

    fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Outcome {
        assert!(q < self.n);
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&r| self.x_bit(r, q)) {
            for r in 0..2 * n {
                if r != p && self.x_bit(r, q) {
                    self.rowsum(r, p);
                }
            }
            let w = self.words;
            let (src, dst) = (p * w, (p - n) * w);
            self.x.copy_within(src..src + w, dst);
            self.z.copy_within(src..src + w, dst);
            self.negative[p - n] = self.negative[p];
            self.x[src..src + w].fill(0);
            self.z[src..src + w].fill(0);
            self.set_z(p, q, true);
            let negative = rng.random_bool(0.5);
            self.negative[p] = negative;
            if negative {
                -1
            } else {
                1
            }
        } else {
            let scratch = 2 * n;
            self.clear_scratch();
            for r in 0..n {
                if self.x_bit(r, q) {
                    self.rowsum(scratch, r + n);
                }
            }
            if self.negative[scratch] {
                -1
            } else {
                1
            }
        }
    }

    fn clear_scratch(&mut self) {
        let w = self.words;
        let s = 2 * self.n * w;
        self.x[s..s + w].fill(0);
        self.z[s..s + w].fill(0);
        self.negative[2 * self.n] = false;
    }

    /// `Some(±1)` when `±p` lies in the stabilizer group (so measuring `p`
    /// gives that value deterministically), `None` when `⟨p⟩ = 0`.
    pub fn stabilizer_sign(&self, p: &PauliString) -> Option<Outcome> {
        assert_eq!(p.n(), self.n);
        let stabs = self.stabilizers();
        if !stabs.iter().all(|s| s.commutes_with(p)) {
            return None;
        }
        let mut acc = PauliString::identity(self.n);
        for (i, d) in self.destabilizers().iter().enumerate() {
            if !d.commutes_with(p) {
                acc = acc.mul(&stabs[i]).expect("stabilizers commute");
            }
        }
        debug_assert_eq!(acc.x_words(), p.x_words());
        debug_assert_eq!(acc.z_words(), p.z_words());
        Some(if acc.is_negative() == p.is_negative() { 1 } else { -1 })
    }

    /// Place this register on `positions` of a `total`-qubit register whose
    /// remaining qubits are `|0⟩`.
    pub fn embed(&self, total: usize, positions: &[usize]) -> Result<Self> {
        if positions.len() != self.n || positions.iter().any(|&p| p >= total) {
            return Err(Error::InvalidParams("embedding positions out of range".into()));
        }
        let mut seen = vec![false; total];
        for &p in positions {
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParams("embedding positions repeat".into()));
            }
        }
        let mut out = Self::new_zero(total);
        let free: Vec<usize> = (0..total).filter(|&q| !seen[q]).collect();
        let copy_row = |out: &mut Self, dst: usize, src: &PauliString| {
            for q in 0..out.n {
                out.set_x(dst, q, false);
                out.set_z(dst, q, false);
            }
            for (q, &p) in positions.iter().enumerate() {
                let (xb, zb) = src.get(q).bits();
                out.set_x(dst, p, xb);
                out.set_z(dst, p, zb);
            }
            out.negative[dst] = src.is_negative();
        };
        for i in 0..self.n {
            copy_row(&mut out, i, &self.row(i));
            copy_row(&mut out, total + i, &self.row(self.n + i));
        }
        for (k, &q) in free.iter().enumerate() {
            let (d, s) = (self.n + k, total + self.n + k);
            for c in 0..total {
                out.set_x(d, c, false);
                out.set_z(d, c, false);
                out.set_x(s, c, false);
                out.set_z(s, c, false);
            }
            out.negative[d] = false;
            out.negative[s] = false;
            out.set_x(d, q, true);
            out.set_z(s, q, true);
        }
        Ok(out)
    }

    /// Checks the symplectic structure: stabilizers commute pairwise,
    /// destabilizers commute pairwise, and destabilizer `i` anticommutes only
    /// with stabilizer `i`.
    pub fn is_valid(&self) -> bool {
        let d = self.destabilizers();
        let s = self.stabilizers();
        for i in 0..self.n {
            for j in 0..self.n {
                if !s[i].commutes_with(&s[j]) || !d[i].commutes_with(&d[j]) {
                    return false;
                }
                if d[i].commutes_with(&s[j]) == (i == j) {
                    return false;
                }
            }
        }
        true
    }
}

impl fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "StabilizerTableau(n = {})", self.n)?;
        fmt::Display::fmt(self, f)
    }
}

/// Text dump: destabilizers, a separator, then stabilizers.
impl fmt::Display for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            writeln!(f, "{}", self.row(r))?;
        }
        writeln!(f, "{}", "-".repeat(self.n + 1))?;
        for r in self.n..2 * self.n {
            writeln!(f, "{}", self.row(r))?;
        }
        Ok(())
    }
}
