//! Active-space Hamiltonians and second-quantized operators.
//!
//! Spin orbitals are indexed up-block first: spatial orbital `p` with spin up
//! is mode `p`, with spin down mode `p + n_spatial`. Determinants are bitmasks
//! over modes; the phase of a determinant is that of its creation operators
//! written in ascending mode order, `a†_{i1} a†_{i2} ... |0>` with `i1 < i2`.

mod fcidump;

pub use fcidump::{emit_fcidump, parse_fcidump, ParsedFcidump};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSpace {
    pub n_spatial: usize,
    pub n_electrons: usize,
    /// Target `2S+1`, when known.
    pub multiplicity_hint: Option<u32>,
}

impl ActiveSpace {
    pub fn new(n_spatial: usize, n_electrons: usize) -> Result<Self> {
        if n_spatial == 0 || n_electrons == 0 || n_electrons > 2 * n_spatial {
            return Err(Error::Invalid(format!(
                "active space ({n_electrons}e, {n_spatial}o) violates 0 < n_e <= 2*n_spatial"
            )));
        }
        if 2 * n_spatial > 64 {
            return Err(Error::Invalid("at most 32 spatial orbitals are supported".into()));
        }
        Ok(Self { n_spatial, n_electrons, multiplicity_hint: None })
    }

    pub fn n_modes(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn up(&self, p: usize) -> usize {
        p
    }

    pub fn down(&self, p: usize) -> usize {
        p + self.n_spatial
    }

    /// Mode index for spatial orbital `p` and spin (`false` up, `true` down).
    pub fn mode(&self, p: usize, down: bool) -> usize {
        if down {
            self.down(p)
        } else {
            self.up(p)
        }
    }

    pub fn is_down(&self, mode: usize) -> bool {
        mode >= self.n_spatial
    }

    pub fn spatial(&self, mode: usize) -> usize {
        mode % self.n_spatial
    }
}

/// Real active-space Hamiltonian in chemists' notation, energies in eV.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionHamiltonian {
    pub space: ActiveSpace,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub e_core: f64,
}

impl FermionHamiltonian {
    pub fn zeros(space: ActiveSpace) -> Self {
        let n = space.n_spatial;
        Self { space, h1: vec![0.0; n * n], h2: vec![0.0; n * n * n * n], e_core: 0.0 }
    }

    pub fn n_spatial(&self) -> usize {
        self.space.n_spatial
    }

    fn i2(&self, p: usize, q: usize) -> usize {
        p * self.n_spatial() + q
    }

    fn i4(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let n = self.n_spatial();
        ((p * n + q) * n + r) * n + s
    }

    pub fn h1(&self, p: usize, q: usize) -> f64 {
        self.h1[self.i2(p, q)]
    }

    /// `(pq|rs)`.
    pub fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.h2[self.i4(p, q, r, s)]
    }

    /// Sets `h[p][q]` and its transpose.
    pub fn set_h1(&mut self, p: usize, q: usize, v: f64) {
        let (a, b) = (self.i2(p, q), self.i2(q, p));
        self.h1[a] = v;
        self.h1[b] = v;
    }

    /// Sets `(pq|rs)` and its seven symmetry partners.
    pub fn set_h2(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in eightfold(p, q, r, s) {
            let i = self.i4(a, b, c, d);
            self.h2[i] = v;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n_spatial();
        for p in 0..n {
            for q in 0..n {
                if (self.h1(p, q) - self.h1(q, p)).abs() > tol {
                    return false;
                }
                for r in 0..n {
                    for s in 0..n {
                        let v = self.h2(p, q, r, s);
                        if eightfold(p, q, r, s).iter().any(|&(a, b, c, d)| (self.h2(a, b, c, d) - v).abs() > tol) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Relabels spatial orbitals: new orbital `perm[p]` is old orbital `p`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_spatial();
        assert_eq!(perm.len(), n);
        let mut out = Self::zeros(self.space);
        out.e_core = self.e_core;
        for p in 0..n {
            for q in 0..n {
                let i = out.i2(perm[p], perm[q]);
                out.h1[i] = self.h1(p, q);
                for r in 0..n {
                    for s in 0..n {
                        let i = out.i4(perm[p], perm[q], perm[r], perm[s]);
                        out.h2[i] = self.h2(p, q, r, s);
                    }
                }
            }
        }
        out
    }

    /// `H + c·N̂`, applied through the one-body diagonal.
    pub fn shifted_by_number(&self, c: f64) -> Self {
        let mut out = self.clone();
        for p in 0..self.n_spatial() {
            let v = out.h1(p, p) + c;
            out.set_h1(p, p, v);
        }
        out
    }

    /// Spin-orbital one-body integral.
    pub fn h1_spin(&self, a: usize, b: usize) -> f64 {
        let s = &self.space;
        if s.is_down(a) != s.is_down(b) {
            return 0.0;
        }
        self.h1(s.spatial(a), s.spatial(b))
    }

    /// Spin-orbital `(ab|cd)`: nonzero only when spin(a)=spin(b) and spin(c)=spin(d).
    pub fn h2_spin(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let s = &self.space;
        if s.is_down(a) != s.is_down(b) || s.is_down(c) != s.is_down(d) {
            return 0.0;
        }
        self.h2(s.spatial(a), s.spatial(b), s.spatial(c), s.spatial(d))
    }

    pub fn all_finite(&self) -> bool {
        self.e_core.is_finite() && self.h1.iter().chain(&self.h2).all(|v| v.is_finite())
    }
}

pub(crate) fn eightfold(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// A creation (`dagger`) or annihilation operator on one spin orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }

    pub fn adjoint(self) -> Self {
        Self { mode: self.mode, dagger: !self.dagger }
    }

    /// Applies the operator to a determinant; `None` when it annihilates it.
    pub fn apply(self, det: u64) -> Option<(u64, f64)> {
        let bit = 1u64 << self.mode;
        let occupied = det & bit != 0;
        if occupied == self.dagger {
            return None;
        }
        let below = (det & (bit - 1)).count_ones();
        let sign = if below % 2 == 1 { -1.0 } else { 1.0 };
        Some((det ^ bit, sign))
    }
}

/// A product of ladder operators, leftmost applied last.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coeff: f64,
    pub ops: Vec<Ladder>,
}

impl FermionTerm {
    pub fn apply(&self, det: u64) -> Option<(u64, f64)> {
        let mut d = det;
        let mut sign = self.coeff;
        for op in self.ops.iter().rev() {
            let (nd, s) = op.apply(d)?;
            d = nd;
            sign *= s;
        }
        Some((d, sign))
    }

    /// Creation operators all to the left of annihilation operators.
    pub fn is_normal_ordered(&self) -> bool {
        let first_annihilator = self.ops.iter().position(|o| !o.dagger).unwrap_or(self.ops.len());
        self.ops[first_annihilator..].iter().all(|o| !o.dagger)
    }
}

/// A real linear combination of ladder-operator products.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FermionOperator {
    pub n_modes: usize,
    pub terms: Vec<FermionTerm>,
}

impl FermionOperator {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes, terms: Vec::new() }
    }

    pub fn push(&mut self, coeff: f64, ops: Vec<Ladder>) {
        debug_assert!(ops.iter().all(|o| o.mode < self.n_modes));
        self.terms.push(FermionTerm { coeff, ops });
    }

    pub fn constant(n_modes: usize, c: f64) -> Self {
        let mut op = Self::new(n_modes);
        op.push(c, Vec::new());
        op
    }

    /// Every term is written in normal order.
    pub fn is_normal_ordered(&self) -> bool {
        self.terms.iter().all(FermionTerm::is_normal_ordered)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_modes: self.n_modes,
            terms: self
                .terms
                .iter()
                .map(|t| FermionTerm { coeff: t.coeff, ops: t.ops.iter().rev().map(|o| o.adjoint()).collect() })
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= c;
        }
        out
    }

    pub fn plus(&self, other: &FermionOperator) -> Self {
        let mut out = self.clone();
        out.n_modes = out.n_modes.max(other.n_modes);
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    /// Operator product `self * other`.
    pub fn times(&self, other: &FermionOperator) -> Self {
        let mut out = Self::new(self.n_modes.max(other.n_modes));
        for a in &self.terms {
            for b in &other.terms {
                let mut ops = a.ops.clone();
                ops.extend(b.ops.iter().copied());
                out.push(a.coeff * b.coeff, ops);
            }
        }
        out
    }

    /// Action on a determinant as a list of `(determinant, amplitude)`.
    pub fn apply(&self, det: u64) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        for t in &self.terms {
            if let Some((d, c)) = t.apply(det) {
                match out.iter_mut().find(|(e, _)| *e == d) {
                    Some(slot) => slot.1 += c,
                    None => out.push((d, c)),
                }
            }
        }
        out
    }

    pub fn max_mode(&self) -> Option<usize> {
        self.terms.iter().flat_map(|t| t.ops.iter().map(|o| o.mode)).max()
    }
}

/// `N̂ = Σ_j a†_j a_j`.
pub fn number_operator(space: &ActiveSpace) -> FermionOperator {
    let n = space.n_modes();
    let mut op = FermionOperator::new(n);
    for j in 0..n {
        op.push(1.0, vec![Ladder::create(j), Ladder::annihilate(j)]);
    }
    op
}

/// `N̂_↑ - N̂_↓`, i.e. `2 S_z`.
pub fn spin_z2_operator(space: &ActiveSpace) -> FermionOperator {
    let mut op = FermionOperator::new(space.n_modes());
    for p in 0..space.n_spatial {
        op.push(1.0, vec![Ladder::create(space.up(p)), Ladder::annihilate(space.up(p))]);
        op.push(-1.0, vec![Ladder::create(space.down(p)), Ladder::annihilate(space.down(p))]);
    }
    op
}

/// Second-quantized form of the Hamiltonian,
/// `e_core + Σ h_pq a†_pσ a_qσ + ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ`.
///
/// Products that vanish identically (repeated creation or annihilation mode)
/// are skipped.
pub fn to_fermion_operator(h: &FermionHamiltonian) -> FermionOperator {
    let s = &h.space;
    let n = s.n_spatial;
    let mut op = FermionOperator::new(s.n_modes());
    if h.e_core != 0.0 {
        op.push(h.e_core, Vec::new());
    }
    for spin in [false, true] {
        for p in 0..n {
            for q in 0..n {
                let v = h.h1(p, q);
                if v != 0.0 {
                    op.push(v, vec![Ladder::create(s.mode(p, spin)), Ladder::annihilate(s.mode(q, spin))]);
                }
            }
        }
    }
    for sigma in [false, true] {
        for tau in [false, true] {
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        for t in 0..n {
                            let v = h.h2(p, q, r, t);
                            if v == 0.0 {
                                continue;
                            }
                            let (ps, qs) = (s.mode(p, sigma), s.mode(q, sigma));
                            let (rt, tt) = (s.mode(r, tau), s.mode(t, tau));
                            if ps == rt || qs == tt {
                                continue;
                            }
                            op.push(
                                0.5 * v,
                                vec![Ladder::create(ps), Ladder::create(rt), Ladder::annihilate(tt), Ladder::annihilate(qs)],
                            );
                        }
                    }
                }
            }
        }
    }
    op
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hubbard_atom() -> FermionHamiltonian {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(1, 2).unwrap());
        h.set_h1(0, 0, -1.0);
        h.set_h2(0, 0, 0, 0, 0.5);
        h
    }

    #[test]
    fn ladder_signs() {
        // a†_1 on |mode 0 occupied> picks up one sign
        assert_eq!(Ladder::create(1).apply(0b01), Some((0b11, -1.0)));
        assert_eq!(Ladder::create(0).apply(0b10), Some((0b11, 1.0)));
        assert_eq!(Ladder::create(0).apply(0b01), None);
        assert_eq!(Ladder::annihilate(1).apply(0b01), None);
    }

    #[test]
    fn hubbard_atom_operator_is_diagonal() {
        // oracle: e_core - (n_up + n_dn) + 0.5 n_up n_dn on the four Fock states
        let op = to_fermion_operator(&hubbard_atom());
        let expect = |d: u64| {
            let (nu, nd) = ((d & 1) as f64, (d >> 1 & 1) as f64);
            -(nu + nd) + 0.5 * nu * nd
        };
        for d in 0..4u64 {
            let out = op.apply(d);
            let diag: f64 = out.iter().filter(|(e, _)| *e == d).map(|(_, c)| c).sum();
            assert!((diag - expect(d)).abs() < 1e-14, "det {d}");
            assert!(out.iter().all(|(e, c)| *e == d || c.abs() < 1e-14));
        }
    }

    #[test]
    fn zero_integrals_give_constant() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(2, 2).unwrap());
        h.e_core = 3.25;
        let op = to_fermion_operator(&h);
        assert_eq!(op.terms.len(), 1);
        assert!(op.terms[0].ops.is_empty());
        assert_eq!(op.terms[0].coeff, 3.25);
    }

    #[test]
    fn one_body_channels_per_spin() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(3, 4).unwrap());
        for p in 0..3 {
            h.set_h1(p, p, -1.0 - p as f64);
        }
        h.set_h1(1, 2, 0.1);
        h.set_h1(0, 1, 0.2);
        h.set_h1(0, 2, 0.3);
        let op = to_fermion_operator(&h);
        for spin in [false, true] {
            let count = op
                .terms
                .iter()
                .filter(|t| t.ops.len() == 2 && t.ops.iter().all(|o| h.space.is_down(o.mode) == spin))
                .filter(|t| t.ops[0].mode != t.ops[1].mode)
                .count();
            assert!(count <= 6);
        }
    }

    #[test]
    fn number_operator_counts() {
        let s1 = ActiveSpace::new(1, 1).unwrap();
        assert_eq!(number_operator(&s1).terms.len(), 2);
        let s3 = ActiveSpace::new(3, 4).unwrap();
        let n = number_operator(&s3);
        assert_eq!(n.terms.len(), 6);
        for det in [0b000000u64, 0b001011, 0b111111, 0b100001] {
            let out = n.apply(det);
            assert_eq!(out.len(), if det == 0 { 0 } else { 1 });
            if det != 0 {
                assert_eq!(out[0], (det, det.count_ones() as f64));
            }
        }
    }

    #[test]
    fn symmetric_setters() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(3, 2).unwrap());
        h.set_h2(0, 1, 2, 2, 0.7);
        h.set_h1(0, 2, 0.3);
        assert!(h.is_symmetric(0.0));
        assert_eq!(h.h2(2, 2, 1, 0), 0.7);
        assert_eq!(h.h1(2, 0), 0.3);
    }

    #[test]
    fn normal_order_flag() {
        let mut op = FermionOperator::new(2);
        op.push(1.0, vec![Ladder::create(0), Ladder::annihilate(1)]);
        assert!(op.is_normal_ordered());
        op.push(1.0, vec![Ladder::annihilate(1), Ladder::create(0)]);
        assert!(!op.is_normal_ordered());
    }
}
