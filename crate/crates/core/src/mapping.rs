//! Fermion-to-qubit encodings (Jordan–Wigner and parity) and two-qubit tapering.
//!
//! Jordan–Wigner stores the occupation of mode `j` on qubit `j`; parity stores
//! the cumulative parity of modes `0..=j`. Under the up-then-down mode order,
//! parity qubit `n/2 - 1` holds the spin-up number parity and qubit `n - 1`
//! the total number parity; tapering fixes both and removes them.
//!
//! Basis labels print with qubit 0 rightmost, so the parity encoding of modes
//! `{0, 1, 3, 5}` of six reads `011001` and tapers to `1101`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fci::Determinant;
use crate::fermion::{number_operator, ActiveSpace, FermionOperator, Ladder};
use crate::pauli::{low_mask, Pauli, PauliString, PauliSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    JordanWigner,
    Parity,
}

/// Eigenvalues `±1` of the two conserved parities fixed by tapering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorParities {
    /// `(-1)^N`.
    pub total: i8,
    /// `(-1)^{N_up}`.
    pub up: i8,
}

impl SectorParities {
    pub fn for_electrons(n_up: usize, n_down: usize) -> Self {
        let sign = |k: usize| if k % 2 == 0 { 1 } else { -1 };
        Self { total: sign(n_up + n_down), up: sign(n_up) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub kind: MappingKind,
    pub n_spin_orbitals: usize,
    pub taper: bool,
    pub sector_parities: Option<SectorParities>,
}

impl MappingSpec {
    pub fn jordan_wigner(n_spin_orbitals: usize) -> Self {
        Self { kind: MappingKind::JordanWigner, n_spin_orbitals, taper: false, sector_parities: None }
    }

    pub fn parity(n_spin_orbitals: usize) -> Self {
        Self { kind: MappingKind::Parity, n_spin_orbitals, taper: false, sector_parities: None }
    }

    pub fn parity_tapered(n_spin_orbitals: usize, sector: SectorParities) -> Self {
        Self { kind: MappingKind::Parity, n_spin_orbitals, taper: true, sector_parities: Some(sector) }
    }

    /// Parity mapping tapered to the sector of `n_up` and `n_down` electrons.
    pub fn parity_tapered_for(space: &ActiveSpace, n_up: usize, n_down: usize) -> Self {
        Self::parity_tapered(space.n_modes(), SectorParities::for_electrons(n_up, n_down))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spin_orbitals == 0 || self.n_spin_orbitals > 64 {
            return Err(Error::Mapping(format!("{} spin orbitals is out of range", self.n_spin_orbitals)));
        }
        if self.taper {
            if self.kind != MappingKind::Parity {
                return Err(Error::Mapping("tapering requires the parity mapping".into()));
            }
            if self.n_spin_orbitals % 2 != 0 || self.n_spin_orbitals < 2 {
                return Err(Error::Mapping("tapering requires an even number of spin orbitals".into()));
            }
            let Some(s) = self.sector_parities else {
                return Err(Error::Mapping("tapering requires sector parities".into()));
            };
            if s.total.abs() != 1 || s.up.abs() != 1 {
                return Err(Error::Mapping("sector parities must be +1 or -1".into()));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        if self.taper {
            self.n_spin_orbitals - 2
        } else {
            self.n_spin_orbitals
        }
    }

    pub fn register(&self) -> Option<TaperedRegister> {
        if !self.taper {
            return None;
        }
        let n = self.n_spin_orbitals;
        Some(TaperedRegister {
            n_qubits_full: n,
            n_qubits_reduced: n - 2,
            removed_positions: [n / 2 - 1, n - 1],
            sector: self.sector_parities.expect("validated"),
        })
    }
}

/// Bookkeeping for the two removed parity qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaperedRegister {
    pub n_qubits_full: usize,
    pub n_qubits_reduced: usize,
    /// `[up-parity qubit, total-parity qubit]`.
    pub removed_positions: [usize; 2],
    pub sector: SectorParities,
}

impl TaperedRegister {
    fn removed_mask(&self) -> u64 {
        self.removed_positions.iter().fold(0, |m, &q| m | 1 << q)
    }

    /// Drops the removed positions from a full-register mask.
    pub fn compress(&self, bits: u64) -> u64 {
        let mut out = 0u64;
        let mut k = 0;
        for q in 0..self.n_qubits_full {
            if self.removed_positions.contains(&q) {
                continue;
            }
            out |= (bits >> q & 1) << k;
            k += 1;
        }
        out
    }

    /// Re-inserts zero bits at the removed positions.
    pub fn expand(&self, bits: u64) -> u64 {
        let mut out = 0u64;
        let mut k = 0;
        for q in 0..self.n_qubits_full {
            if self.removed_positions.contains(&q) {
                continue;
            }
            out |= (bits >> k & 1) << q;
            k += 1;
        }
        out
    }

    /// Full-register label with the fixed parity bits restored.
    pub fn decode(&self, reduced: u64) -> u64 {
        let mut full = self.expand(reduced);
        if self.sector.up < 0 {
            full |= 1 << self.removed_positions[0];
        }
        if self.sector.total < 0 {
            full |= 1 << self.removed_positions[1];
        }
        full
    }

    /// Reduced label, or `None` when the full label lies outside the sector.
    pub fn encode(&self, full: u64) -> Option<u64> {
        let up_bit = full >> self.removed_positions[0] & 1 == 1;
        let tot_bit = full >> self.removed_positions[1] & 1 == 1;
        (up_bit == (self.sector.up < 0) && tot_bit == (self.sector.total < 0)).then(|| self.compress(full))
    }

    /// Replaces `Z` on removed qubits by their fixed eigenvalues.
    pub fn taper(&self, sum: &PauliSum) -> Result<PauliSum> {
        let removed = self.removed_mask();
        let mut out = PauliSum::new(self.n_qubits_reduced);
        for (p, c) in sum.iter() {
            if p.x_mask() & removed != 0 {
                return Err(Error::Symmetry(format!("term {p} flips a tapered qubit")));
            }
            let mut sign = 1.0;
            if p.z_mask() >> self.removed_positions[0] & 1 == 1 {
                sign *= self.sector.up as f64;
            }
            if p.z_mask() >> self.removed_positions[1] & 1 == 1 {
                sign *= self.sector.total as f64;
            }
            let reduced = PauliString::from_masks(self.n_qubits_reduced, self.compress(p.x_mask()), self.compress(p.z_mask()));
            out.add_string(c * sign, reduced);
        }
        out.prune_small();
        Ok(out)
    }
}

/// A computational basis state of an `n`-qubit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel {
    pub bits: u64,
    pub n_qubits: usize,
}

impl BasisLabel {
    pub fn new(bits: u64, n_qubits: usize) -> Self {
        Self { bits: bits & low_mask(n_qubits), n_qubits }
    }

    pub fn bit(&self, q: usize) -> bool {
        self.bits >> q & 1 == 1
    }

    /// Parses a label printed with qubit 0 rightmost.
    pub fn parse(s: &str) -> Result<Self> {
        let n = s.len();
        if n == 0 || n > 64 {
            return Err(Error::Invalid(format!("bad basis label `{s}`")));
        }
        let mut bits = 0u64;
        for (k, c) in s.chars().rev().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << k,
                _ => return Err(Error::Invalid(format!("bad basis label `{s}`"))),
            }
        }
        Ok(Self { bits, n_qubits: n })
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            f.write_str(if self.bit(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn projector(n: usize, qubits: &[usize], sign: f64) -> PauliSum {
    // ½(I + sign·Z_a Z_b ...)
    let mut z = PauliString::identity(n);
    for &q in qubits {
        z.set(q, Pauli::Z);
    }
    let mut s = PauliSum::new(n);
    s.add_string(Complex64::new(0.5, 0.0), PauliString::identity(n));
    s.add_string(Complex64::new(0.5 * sign, 0.0), z);
    s
}

/// Qubit image of a single ladder operator on the full register.
///
/// Built as (flip) · (sign) · (occupation projector), each a Pauli product.
pub fn ladder_to_pauli(op: Ladder, kind: MappingKind, n: usize) -> PauliSum {
    let j = op.mode;
    assert!(j < n, "mode {j} outside {n} spin orbitals");
    // projector onto the occupation the operator requires (0 for a†, 1 for a)
    let want_empty = if op.dagger { 1.0 } else { -1.0 };
    let (flip, sign, proj) = match kind {
        MappingKind::JordanWigner => {
            let flip = PauliString::single(n, j, Pauli::X);
            let mut sign = PauliString::identity(n);
            for q in 0..j {
                sign.set(q, Pauli::Z);
            }
            (flip, sign, projector(n, &[j], want_empty))
        }
        MappingKind::Parity => {
            let mut flip = PauliString::identity(n);
            for q in j..n {
                flip.set(q, Pauli::X);
            }
            let mut sign = PauliString::identity(n);
            let occ_qubits: Vec<usize> = if j == 0 {
                vec![0]
            } else {
                sign.set(j - 1, Pauli::Z);
                vec![j - 1, j]
            };
            (flip, sign, projector(n, &occ_qubits, want_empty))
        }
    };
    let fs = flip.mul_unchecked(&sign);
    let mut pre = PauliSum::new(n);
    pre.add_string(Complex64::new(1.0, 0.0), fs);
    pre.multiply(&proj).expect("same register")
}

/// Maps a fermionic operator to a qubit operator under `spec`.
pub fn map_operator(op: &FermionOperator, spec: &MappingSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n_spin_orbitals;
    if let Some(m) = op.max_mode() {
        if m >= n {
            return Err(Error::Mapping(format!("mode {m} outside {n} spin orbitals")));
        }
    }
    let mut cache: std::collections::HashMap<Ladder, PauliSum> = std::collections::HashMap::new();
    let mut full = PauliSum::new(n);
    for term in &op.terms {
        let mut prod = PauliSum::identity(n, term.coeff);
        for l in &term.ops {
            let img = cache.entry(*l).or_insert_with(|| ladder_to_pauli(*l, spec.kind, n));
            prod = prod.multiply(img)?;
            if prod.is_empty() {
                break;
            }
        }
        for (p, c) in prod.iter() {
            full.add_string(*c, *p);
        }
    }
    full.prune_small();
    match spec.register() {
        Some(reg) => reg.taper(&full),
        None => Ok(full),
    }
}

/// Full-register encoding of a determinant.
pub fn encode_full(d: Determinant, kind: MappingKind, n: usize) -> u64 {
    match kind {
        MappingKind::JordanWigner => d.0 & low_mask(n),
        MappingKind::Parity => {
            let mut out = 0u64;
            let mut parity = 0u64;
            for q in 0..n {
                parity ^= d.0 >> q & 1;
                out |= parity << q;
            }
            out
        }
    }
}

/// Basis label of the encoded determinant.
pub fn map_state(d: Determinant, spec: &MappingSpec) -> Result<BasisLabel> {
    spec.validate()?;
    let n = spec.n_spin_orbitals;
    if d.0 & !low_mask(n) != 0 {
        return Err(Error::Mapping(format!("determinant {:#b} exceeds {n} modes", d.0)));
    }
    let full = encode_full(d, spec.kind, n);
    match spec.register() {
        None => Ok(BasisLabel::new(full, n)),
        Some(reg) => reg
            .encode(full)
            .map(|b| BasisLabel::new(b, reg.n_qubits_reduced))
            .ok_or_else(|| Error::Mapping(format!("determinant {:#b} lies outside the tapered sector", d.0))),
    }
}

/// Mapped (and tapered) number operator; diagonal by construction.
#[derive(Debug, Clone)]
pub struct ElectronCounter {
    terms: Vec<(PauliString, f64)>,
    n_qubits: usize,
}

impl ElectronCounter {
    pub fn new(spec: &MappingSpec) -> Result<Self> {
        let space = ActiveSpace { n_spatial: spec.n_spin_orbitals / 2, n_electrons: 1, multiplicity_hint: None };
        let mut op = number_operator(&space);
        op.n_modes = spec.n_spin_orbitals;
        if spec.n_spin_orbitals % 2 == 1 {
            op.push(1.0, vec![Ladder::create(spec.n_spin_orbitals - 1), Ladder::annihilate(spec.n_spin_orbitals - 1)]);
        }
        let mapped = map_operator(&op, spec)?;
        debug_assert!(mapped.strings().all(PauliString::is_diagonal));
        Ok(Self { terms: mapped.real_terms(), n_qubits: spec.n_qubits() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn count(&self, bits: u64) -> usize {
        let v: f64 = self.terms.iter().map(|(p, c)| c * p.diagonal_sign(bits)).sum();
        v.round().max(0.0) as usize
    }
}

/// Electron number implied by a measured basis label.
pub fn electron_count_of_bitstring(bits: BasisLabel, spec: &MappingSpec) -> Result<usize> {
    if bits.n_qubits != spec.n_qubits() {
        return Err(Error::QubitMismatch { left: bits.n_qubits, right: spec.n_qubits() });
    }
    Ok(ElectronCounter::new(spec)?.count(bits.bits))
}
