//! Exact diagonalization in fixed-particle-number determinant bases.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fermion::{ActiveSpace, FermionHamiltonian, Ladder};

/// Default limit on the determinant basis size for dense diagonalization.
pub const DEFAULT_BASIS_LIMIT: usize = 5000;

/// Occupation bitmask over spin orbitals (bit `j` set when mode `j` is occupied).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant(pub u64);

impl Determinant {
    pub fn from_modes(modes: &[usize]) -> Self {
        Determinant(modes.iter().fold(0u64, |m, &j| m | 1 << j))
    }

    pub fn n_electrons(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_occupied(self, mode: usize) -> bool {
        self.0 >> mode & 1 == 1
    }

    pub fn modes(self) -> Vec<usize> {
        (0..64).filter(|&j| self.is_occupied(j)).collect()
    }

    /// `N_up - N_down`.
    pub fn twice_sz(self, space: &ActiveSpace) -> i64 {
        let up_mask = (1u64 << space.n_spatial) - 1;
        (self.0 & up_mask).count_ones() as i64 - (self.0 >> space.n_spatial).count_ones() as i64
    }

    /// Sign `s` with `a†_{m1} a†_{m2} ... |0> = s |self>` for the given creation order.
    ///
    /// Used to express determinants written in a non-ascending orbital order,
    /// e.g. interleaved spin labels.
    pub fn sign_of_creation_order(order: &[usize]) -> Option<(Determinant, f64)> {
        let mut det = 0u64;
        let mut sign = 1.0;
        for &m in order.iter().rev() {
            let (d, s) = Ladder::create(m).apply(det)?;
            det = d;
            sign *= s;
        }
        Some((Determinant(det), sign))
    }
}

fn twice(sz: f64) -> Result<i64> {
    let t = 2.0 * sz;
    if (t - t.round()).abs() > 1e-9 {
        return Err(Error::Invalid(format!("S_z = {sz} is not a half-integer")));
    }
    Ok(t.round() as i64)
}

/// All determinants with `n_e` electrons (and the given `S_z`), ascending.
pub fn enumerate_sector(space: &ActiveSpace, n_e: usize, sz: Option<f64>) -> Result<Vec<Determinant>> {
    let n_modes = space.n_modes();
    if n_e > n_modes {
        return Err(Error::EmptySector(format!("{n_e} electrons in {n_modes} spin orbitals")));
    }
    let target = sz.map(twice).transpose()?;
    let mut out = Vec::new();
    // Gosper's hack over masks of popcount n_e.
    if n_e == 0 {
        out.push(Determinant(0));
    } else {
        let limit = 1u64 << n_modes;
        let mut m: u64 = (1u64 << n_e) - 1;
        while m < limit {
            out.push(Determinant(m));
            let c = m & m.wrapping_neg();
            let r = m + c;
            m = (((r ^ m) >> 2) / c) | r;
        }
    }
    if let Some(t) = target {
        out.retain(|d| d.twice_sz(space) == t);
    }
    if out.is_empty() {
        return Err(Error::EmptySector(format!("{n_e} electrons with 2S_z = {}", target.unwrap_or_default())));
    }
    Ok(out)
}

/// `<bra|H|ket>` by the Slater–Condon rules.
pub fn slater_condon(h: &FermionHamiltonian, bra: Determinant, ket: Determinant) -> f64 {
    let diff = bra.0 ^ ket.0;
    let n_diff = diff.count_ones();
    if bra.n_electrons() != ket.n_electrons() || n_diff > 4 {
        return 0.0;
    }
    let occ = ket.modes();
    match n_diff {
        0 => {
            let mut e = h.e_core;
            for &i in &occ {
                e += h.h1_spin(i, i);
                for &j in &occ {
                    e += 0.5 * (h.h2_spin(i, i, j, j) - h.h2_spin(i, j, j, i));
                }
            }
            e
        }
        2 => {
            let i = (ket.0 & diff).trailing_zeros() as usize;
            let a = (bra.0 & diff).trailing_zeros() as usize;
            let Some(s) = excitation_sign(ket, &[a], &[i], bra) else { return 0.0 };
            let mut v = h.h1_spin(a, i);
            for &k in &occ {
                if k != i {
                    v += h.h2_spin(a, i, k, k) - h.h2_spin(a, k, k, i);
                }
            }
            s * v
        }
        4 => {
            let holes = Determinant(ket.0 & diff).modes();
            let parts = Determinant(bra.0 & diff).modes();
            let (i, j, a, b) = (holes[0], holes[1], parts[0], parts[1]);
            let Some(s) = excitation_sign(ket, &[a, b], &[j, i], bra) else { return 0.0 };
            s * (h.h2_spin(a, i, b, j) - h.h2_spin(a, j, b, i))
        }
        _ => 0.0,
    }
}

/// Sign of `a†_{create[0]} a†_{create[1]}.. a_{annihilate[0]} a_{annihilate[1]}.. |ket>` relative to `|bra>`.
fn excitation_sign(ket: Determinant, create: &[usize], annihilate: &[usize], bra: Determinant) -> Option<f64> {
    let mut d = ket.0;
    let mut sign = 1.0;
    let ops = create.iter().map(|&m| Ladder::create(m)).chain(annihilate.iter().map(|&m| Ladder::annihilate(m)));
    let ops: Vec<Ladder> = ops.collect();
    for op in ops.iter().rev() {
        let (nd, s) = op.apply(d)?;
        d = nd;
        sign *= s;
    }
    (d == bra.0).then_some(sign)
}

/// Hamiltonian matrix in the given basis.
pub fn hamiltonian_matrix(h: &FermionHamiltonian, basis: &[Determinant]) -> DMatrix<f64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| slater_condon(h, basis[i], basis[j]))
}

#[derive(Debug, Clone)]
pub struct FciSolution {
    /// Ascending, eV.
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector for `energies[k]`, over `basis`.
    pub states: Vec<DVector<f64>>,
    pub basis: Vec<Determinant>,
    pub n_electrons: usize,
    pub sz: Option<f64>,
}

impl FciSolution {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Coefficient of determinant `d` in state `k` (zero when outside the basis).
    pub fn coefficient(&self, k: usize, d: Determinant) -> f64 {
        self.basis.binary_search(&d).map(|i| self.states[k][i]).unwrap_or(0.0)
    }

    /// `level,energy_eV,gap_eV` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,energy_eV,gap_eV\n");
        let e0 = self.energies[0];
        for (k, e) in self.energies.iter().enumerate() {
            let _ = writeln!(out, "{k},{e:.12},{:.12}", e - e0);
        }
        out
    }
}

pub fn solve_fci(h: &FermionHamiltonian, n_e: usize, sz: Option<f64>) -> Result<FciSolution> {
    solve_fci_with_limit(h, n_e, sz, DEFAULT_BASIS_LIMIT)
}

pub fn solve_fci_with_limit(h: &FermionHamiltonian, n_e: usize, sz: Option<f64>, limit: usize) -> Result<FciSolution> {
    let basis = enumerate_sector(&h.space, n_e, sz)?;
    if basis.len() > limit {
        return Err(Error::BasisTooLarge { size: basis.len(), limit });
    }
    let m = hamiltonian_matrix(h, &basis);
    let asym = (&m - m.transpose()).amax();
    if asym > 1e-10 {
        return Err(Error::NotHermitian(asym));
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..basis.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let states = order
        .iter()
        .map(|&k| {
            let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(FciSolution { energies, states, basis, n_electrons: n_e, sz })
}

/// Makes the first component of largest magnitude positive.
fn fix_sign(v: &mut DVector<f64>) {
    let max = v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > max - 1e-12) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

/// `E_k - E_0` for `k >= 1`.
pub fn excitation_energies(sol: &FciSolution) -> Vec<f64> {
    let e0 = sol.energies[0];
    sol.energies.iter().skip(1).map(|e| e - e0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn sector_sizes_match_counting() {
        let s3 = ActiveSpace::new(3, 4).unwrap();
        assert_eq!(enumerate_sector(&s3, 4, Some(0.0)).unwrap().len() as u64, binom(3, 2) * binom(3, 2));
        let s1 = ActiveSpace::new(1, 2).unwrap();
        assert_eq!(enumerate_sector(&s1, 2, None).unwrap(), vec![Determinant(0b11)]);
        let s4 = ActiveSpace::new(4, 6).unwrap();
        assert_eq!(enumerate_sector(&s4, 6, None).unwrap().len() as u64, binom(8, 6));
    }

    #[test]
    fn sector_is_ascending_and_filtered() {
        let s = ActiveSpace::new(3, 4).unwrap();
        let b = enumerate_sector(&s, 3, Some(0.5)).unwrap();
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(b.iter().all(|d| d.n_electrons() == 3 && d.twice_sz(&s) == 1));
    }

    #[test]
    fn impossible_sectors() {
        let s = ActiveSpace::new(2, 2).unwrap();
        assert!(matches!(enumerate_sector(&s, 5, None), Err(Error::EmptySector(_))));
        assert!(matches!(enumerate_sector(&s, 2, Some(2.0)), Err(Error::EmptySector(_))));
        assert!(enumerate_sector(&s, 2, Some(0.25)).is_err());
    }

    #[test]
    fn hubbard_atom_ground_state() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(1, 2).unwrap());
        h.set_h1(0, 0, -1.0);
        h.set_h2(0, 0, 0, 0, 0.5);
        let sol = solve_fci(&h, 2, None).unwrap();
        // single determinant: 2h + U
        assert!((sol.ground_energy() - (2.0 * -1.0 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn empty_sector_is_core_energy() {
        let mut h = FermionHamiltonian::zeros(ActiveSpace::new(2, 2).unwrap());
        h.set_h1(0, 0, -1.0);
        h.e_core = 4.5;
        let sol = solve_fci(&h, 0, None).unwrap();
        assert_eq!(sol.energies, vec![4.5]);
    }

    #[test]
    fn basis_limit() {
        let h = FermionHamiltonian::zeros(ActiveSpace::new(4, 4).unwrap());
        assert!(matches!(solve_fci_with_limit(&h, 4, None, 10), Err(Error::BasisTooLarge { size: 70, limit: 10 })));
    }

    #[test]
    fn gaps() {
        let sol = FciSolution { energies: vec![-1.5, -0.3], states: vec![], basis: vec![], n_electrons: 2, sz: None };
        let g = excitation_energies(&sol);
        assert_eq!(g.len(), 1);
        assert!((g[0] - 1.2).abs() < 1e-15);
        let deg = FciSolution { energies: vec![0.0, 0.0], ..sol };
        assert_eq!(excitation_energies(&deg), vec![0.0]);
    }

    #[test]
    fn creation_order_sign() {
        // a†_0 a†_3 a†_1 a†_5 |0> = - a†_0 a†_1 a†_3 a†_5 |0>
        let (d, s) = Determinant::sign_of_creation_order(&[0, 3, 1, 5]).unwrap();
        assert_eq!(d, Determinant::from_modes(&[0, 1, 3, 5]));
        assert_eq!(s, -1.0);
        assert!(Determinant::sign_of_creation_order(&[1, 1]).is_none());
    }
}
