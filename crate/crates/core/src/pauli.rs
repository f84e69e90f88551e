//! Pauli strings, weighted Pauli sums, and qubit-wise commuting measurement groups.
//!
//! Qubit `q` corresponds to bit `q` of a computational-basis index. In the
//! text form of a string the leftmost letter is qubit 0.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default coefficient pruning threshold for [`PauliSum`].
pub const DEFAULT_PRUNE: f64 = 1e-12;
/// Default qubit limit for dense matrix construction.
pub const DEFAULT_DENSE_LIMIT: usize = 10;
/// Registers are stored in 64-bit masks.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A fourth root of unity, stored as the exponent `k` in `i^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
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

    pub fn conj(self) -> Self {
        Phase::from_exponent(-(self.0 as i64))
    }
}

/// A tensor product of single-qubit Paulis times a phase `i^k`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: u8,
    x: u64,
    z: u64,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits are supported");
        Self { n_qubits: n_qubits as u8, x: 0, z: 0, phase: Phase::ONE }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, &p) in letters.iter().enumerate() {
            s.set(q, p);
        }
        s
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Self {
        let mut s = Self::identity(n_qubits);
        let keep = low_mask(n_qubits);
        s.x = x & keep;
        s.z = z & keep;
        s
    }

    /// A single-qubit Pauli embedded in an `n_qubits` register.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n_qubits);
        s.set(qubit, p);
        s
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        assert!(qubit < self.n_qubits(), "qubit {qubit} out of range");
        let (xb, zb) = p.bits();
        let bit = 1u64 << qubit;
        self.x = if xb { self.x | bit } else { self.x & !bit };
        self.z = if zb { self.z | bit } else { self.z & !bit };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits()).map(|q| self.letter(q)).collect()
    }

    /// The same operator with phase `+1`.
    pub fn normalized(&self) -> Self {
        Self { phase: Phase::ONE, ..*self }
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True when every letter is `I` or `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    /// Operator product `self * other` with the phase tracked exactly.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch { left: self.n_qubits(), right: other.n_qubits() });
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &PauliString) -> PauliString {
        let (ax, ay, az) = classes(self);
        let (bx, by, bz) = classes(other);
        let plus = (ax & by) | (ay & bz) | (az & bx);
        let minus = (ay & bx) | (az & by) | (ax & bz);
        let k = self.phase.0 as i64 + other.phase.0 as i64 + plus.count_ones() as i64
            - minus.count_ones() as i64;
        PauliString {
            n_qubits: self.n_qubits,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: Phase::from_exponent(k),
        }
    }

    /// Full (not qubit-wise) commutation.
    pub fn commutes(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Every qubit carries either identical letters or at least one identity.
    pub fn qubit_wise_commutes(&self, other: &PauliString) -> bool {
        let both = self.support() & other.support();
        (self.x ^ other.x) & both == 0 && (self.z ^ other.z) & both == 0
    }

    pub fn adjoint(&self) -> Self {
        // Hermitian letters; only the phase conjugates.
        Self { phase: self.phase.conj(), ..*self }
    }

    /// Action on a computational basis state: `P|b> = c |b'>`.
    pub fn apply_to_basis(&self, b: u64) -> (u64, Complex64) {
        let k = self.phase.0 as u32 + (self.x & self.z).count_ones();
        let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (b ^ self.x, Phase::from_exponent(k as i64).to_complex() * sign)
    }

    /// Eigenvalue `±1` of a diagonal (I/Z) string on basis state `b`, ignoring phase.
    pub fn diagonal_sign(&self, b: u64) -> f64 {
        if (b & self.z).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let mut sum = PauliSum::new(self.n_qubits());
        sum.add_string(Complex64::new(1.0, 0.0), *self);
        sum.to_dense()
    }

    pub fn letters_string(&self) -> String {
        (0..self.n_qubits()).map(|q| self.letter(q).as_char()).collect()
    }
}

fn classes(p: &PauliString) -> (u64, u64, u64) {
    (p.x & !p.z, p.x & p.z, !p.x & p.z)
}

pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.phase.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{p}{}", self.letters_string())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `XIYZ`, optionally prefixed by `+`, `-`, `+i`, `-i`, `i`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(r) = s.strip_prefix("+i").or_else(|| s.strip_prefix('i')) {
            (Phase::I, r)
        } else if let Some(r) = s.strip_prefix("-i") {
            (Phase::MINUS_I, r)
        } else if let Some(r) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, r)
        } else {
            (Phase::ONE, s.strip_prefix('+').unwrap_or(s))
        };
        if body.is_empty() || body.len() > MAX_QUBITS {
            return Err(Error::PauliText { line: 0, msg: format!("bad length in `{s}`") });
        }
        let letters = body
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::PauliText { line: 0, msg: format!("unknown letter `{other}`") }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_letters(&letters).with_phase(phase))
    }
}

/// A weighted sum `Σ g_i P_i` with phase-normalized strings as keys.
///
/// Coefficients are complex so that anti-Hermitian generators and operator
/// products can be represented; Hermitian sums have real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
    prune: f64,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_QUBITS);
        Self { n_qubits, terms: BTreeMap::new(), prune: DEFAULT_PRUNE }
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune = threshold;
        self.prune_small();
        self
    }

    pub fn identity(n_qubits: usize, coeff: f64) -> Self {
        let mut s = Self::new(n_qubits);
        s.add_string(Complex64::new(coeff, 0.0), PauliString::identity(n_qubits));
        s
    }

    pub fn from_terms<I: IntoIterator<Item = (f64, PauliString)>>(n_qubits: usize, terms: I) -> Self {
        let mut s = Self::new(n_qubits);
        for (c, p) in terms {
            s.add_string(Complex64::new(c, 0.0), p);
        }
        s.prune_small();
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coeff * p`, folding the phase of `p` into the coefficient.
    /// No pruning happens here; call [`PauliSum::prune_small`] when done.
    pub fn add_string(&mut self, coeff: Complex64, p: PauliString) {
        debug_assert_eq!(p.n_qubits(), self.n_qubits);
        let c = coeff * p.phase().to_complex();
        *self.terms.entry(p.normalized()).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn prune_small(&mut self) {
        let t = self.prune;
        self.terms.retain(|_, c| c.norm() > t);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(&p.normalized()).copied().unwrap_or_default() * p.phase().to_complex().conj()
    }

    /// The coefficient of the identity string.
    pub fn constant(&self) -> Complex64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check(other)?;
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_string(*c, *p);
        }
        out.prune_small();
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.prune_small();
        out
    }

    /// Operator product `self * other`.
    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        self.check(other)?;
        let mut out = PauliSum::new(self.n_qubits);
        out.prune = self.prune.min(other.prune);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_string(ca * cb, a.mul_unchecked(b));
            }
        }
        out.prune_small();
        Ok(out)
    }

    pub fn adjoint(&self) -> PauliSum {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.re.abs() <= tol)
    }

    /// Real parts of the coefficients, for Hermitian sums.
    pub fn real_terms(&self) -> Vec<(PauliString, f64)> {
        self.terms.iter().map(|(p, c)| (*p, c.re)).collect()
    }

    pub fn strings(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.keys()
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > limit {
            return Err(Error::DenseLimit { n: self.n_qubits, limit });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, c) in &self.terms {
            for b in 0..dim as u64 {
                let (out, amp) = p.apply_to_basis(b);
                m[(out as usize, b as usize)] += c * amp;
            }
        }
        Ok(m)
    }

    /// `⟨ψ|Σ g P|ψ⟩` on a state vector.
    pub fn expectation_vector(&self, psi: &DVector<Complex64>) -> Result<Complex64> {
        let dim = 1usize << self.n_qubits;
        if psi.len() != dim {
            return Err(Error::Invalid(format!("state has length {}, expected {dim}", psi.len())));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in &self.terms {
            let mut e = Complex64::new(0.0, 0.0);
            for b in 0..dim {
                let (out, amp) = p.apply_to_basis(b as u64);
                e += psi[out as usize].conj() * amp * psi[b];
            }
            acc += c * e;
        }
        Ok(acc)
    }

    /// Writes `<coeff> <letters>` lines, sorted by letters.
    ///
    /// Only real coefficients are representable.
    pub fn to_text(&self) -> Result<String> {
        let mut lines: Vec<(String, f64)> = Vec::with_capacity(self.terms.len());
        for (p, c) in &self.terms {
            if c.im != 0.0 {
                return Err(Error::Invalid(format!("complex coefficient on {p}")));
            }
            lines.push((p.letters_string(), c.re));
        }
        lines.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::new();
        for (letters, c) in lines {
            out.push_str(&format!("{c:.16e} {letters}\n"));
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut sum: Option<PauliSum> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(c), Some(l), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::PauliText { line: i + 1, msg: "expected `<coeff> <letters>`".into() });
            };
            let coeff: f64 = c
                .parse()
                .map_err(|_| Error::PauliText { line: i + 1, msg: format!("bad coefficient `{c}`") })?;
            let p: PauliString = l.parse().map_err(|e| match e {
                Error::PauliText { msg, .. } => Error::PauliText { line: i + 1, msg },
                other => other,
            })?;
            let s = sum.get_or_insert_with(|| PauliSum::new(p.n_qubits()));
            if s.n_qubits != p.n_qubits() {
                return Err(Error::PauliText { line: i + 1, msg: "inconsistent qubit count".into() });
            }
            s.add_string(Complex64::new(coeff, 0.0), p);
        }
        let mut s = sum.ok_or_else(|| Error::PauliText { line: 0, msg: "no terms".into() })?;
        s.prune_small();
        Ok(s)
    }

    fn check(&self, other: &PauliSum) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            Err(Error::QubitMismatch { left: self.n_qubits, right: other.n_qubits })
        } else {
            Ok(())
        }
    }
}

/// Per-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Basis {
    Z,
    X,
    Y,
}

/// Strings measurable from one circuit execution.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    pub members: Vec<PauliString>,
    pub basis_rotation: Vec<Basis>,
    pub is_diagonal: bool,
}

impl MeasurementGroup {
    fn empty_diagonal(n_qubits: usize) -> Self {
        Self { members: Vec::new(), basis_rotation: vec![Basis::Z; n_qubits], is_diagonal: true }
    }

    /// Accepts `p` when it is qubit-wise compatible with the current basis.
    fn try_push(&mut self, p: PauliString, fixed: &mut [Option<Pauli>]) -> bool {
        for (q, slot) in fixed.iter().enumerate() {
            let l = p.letter(q);
            if l != Pauli::I {
                if let Some(existing) = slot {
                    if *existing != l {
                        return false;
                    }
                }
            }
        }
        for (q, slot) in fixed.iter_mut().enumerate() {
            let l = p.letter(q);
            if l != Pauli::I {
                *slot = Some(l);
                self.basis_rotation[q] = match l {
                    Pauli::X => Basis::X,
                    Pauli::Y => Basis::Y,
                    _ => Basis::Z,
                };
            }
        }
        self.members.push(p);
        true
    }

    /// True when the group has something other than the identity to measure.
    pub fn needs_execution(&self) -> bool {
        self.members.iter().any(|p| !p.is_identity())
    }
}

/// Greedy qubit-wise commuting partition.
///
/// All I/Z-only strings (identity included) form the first, diagonal group.
/// Remaining strings are visited by descending `|g|` and placed in the first
/// compatible group.
pub fn group_commuting(h: &PauliSum) -> Vec<MeasurementGroup> {
    let n = h.n_qubits();
    let mut groups = Vec::new();
    let diag: Vec<PauliString> = h.strings().filter(|p| p.is_diagonal()).copied().collect();
    if !diag.is_empty() {
        let mut g = MeasurementGroup::empty_diagonal(n);
        g.members = diag;
        groups.push(g);
    }
    let mut rest: Vec<(PauliString, f64)> =
        h.iter().filter(|(p, _)| !p.is_diagonal()).map(|(p, c)| (*p, c.norm())).collect();
    // stable sort keeps key order among ties
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));

    let mut fixed: Vec<Vec<Option<Pauli>>> = Vec::new();
    let first_free = groups.len();
    for (p, _) in rest {
        let mut placed = false;
        for (gi, g) in groups.iter_mut().enumerate().skip(first_free) {
            if g.try_push(p, &mut fixed[gi - first_free]) {
                placed = true;
                break;
            }
        }
        if !placed {
            let mut g = MeasurementGroup { members: Vec::new(), basis_rotation: vec![Basis::Z; n], is_diagonal: false };
            let mut f = vec![None; n];
            g.try_push(p, &mut f);
            groups.push(g);
            fixed.push(f);
        }
    }
    groups
}

/// Ensures a diagonal group exists (possibly empty) at index 0.
pub fn with_diagonal_group(mut groups: Vec<MeasurementGroup>, n_qubits: usize) -> Vec<MeasurementGroup> {
    if !groups.first().is_some_and(|g| g.is_diagonal) {
        groups.insert(0, MeasurementGroup::empty_diagonal(n_qubits));
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn identity_absorption() {
        let r = ps("XI").multiply(&ps("II")).unwrap();
        assert_eq!(r, ps("XI"));
        assert_eq!(r.phase(), Phase::ONE);
    }

    #[test]
    fn x_times_y_is_i_z() {
        let r = ps("X").multiply(&ps("Y")).unwrap();
        assert_eq!(r.letters_string(), "Z");
        assert_eq!(r.phase(), Phase::I);
        let r = ps("Y").multiply(&ps("X")).unwrap();
        assert_eq!(r.phase(), Phase::MINUS_I);
    }

    #[test]
    fn two_qubit_product() {
        let r = ps("ZX").multiply(&ps("ZY")).unwrap();
        assert_eq!(r.letters_string(), "IZ");
        assert_eq!(r.phase(), Phase::I);
    }

    #[test]
    fn mismatched_qubits() {
        assert!(matches!(ps("X").multiply(&ps("XX")), Err(Error::QubitMismatch { .. })));
    }

    #[test]
    fn number_operator_dense() {
        let s = PauliSum::from_terms(1, [(0.5, ps("I")), (-0.5, ps("Z"))]);
        let m = s.to_dense().unwrap();
        assert!((m[(0, 0)].re - 0.0).abs() < 1e-15);
        assert!((m[(1, 1)].re - 1.0).abs() < 1e-15);
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn x_dense() {
        let m = ps("X").to_dense().unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dense_limit() {
        let s = PauliSum::identity(11, 1.0);
        assert!(matches!(s.to_dense(), Err(Error::DenseLimit { n: 11, limit: 10 })));
    }

    #[test]
    fn diagonal_strings_share_one_group() {
        let h = PauliSum::from_terms(2, [(1.0, ps("ZZ")), (0.5, ps("IZ")), (0.2, ps("ZI"))]);
        let g = group_commuting(&h);
        assert_eq!(g.len(), 1);
        assert!(g[0].is_diagonal);
        assert_eq!(g[0].members.len(), 3);
    }

    #[test]
    fn non_commuting_singletons() {
        let h = PauliSum::from_terms(1, [(1.0, ps("Z")), (0.5, ps("X"))]);
        let g = group_commuting(&h);
        assert_eq!(g.len(), 2);
        assert!(g[0].is_diagonal);
        assert_eq!(g[1].basis_rotation, vec![Basis::X]);
    }

    #[test]
    fn text_round_trip() {
        let h = PauliSum::from_terms(4, [(0.25, ps("XIYZ")), (-1.0 / 3.0, ps("IIII")), (1e-7, ps("ZZZZ"))]);
        let text = h.to_text().unwrap();
        assert!(text.contains(" XIYZ\n"));
        let back = PauliSum::from_text(&text).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let err = PauliSum::from_text("0.5 XX\nfoo ZZ\n").unwrap_err();
        assert!(matches!(err, Error::PauliText { line: 2, .. }));
        let err = PauliSum::from_text("0.5 XX\n0.1 XQ\n").unwrap_err();
        assert!(matches!(err, Error::PauliText { line: 2, .. }));
    }

    #[test]
    fn basis_action_of_y() {
        let (b, c) = ps("Y").apply_to_basis(0);
        assert_eq!((b, c), (1, Complex64::new(0.0, 1.0)));
        let (b, c) = ps("Y").apply_to_basis(1);
        assert_eq!((b, c), (0, Complex64::new(0.0, -1.0)));
    }
}
