//! Built-in model Hamiltonians with the active-space shapes of spin defects.
//!
//! Integrals follow a rotationally invariant (Kanamori-like) form on an
//! `e = {e_x, e_y}` doublet plus one or two `a1`-type orbitals, with the
//! intra-doublet Hund exchange large enough that the open-shell `e^2` triplet
//! is the ground state. All values are in eV and frozen.

use crate::error::{Error, Result};
use crate::fci::Determinant;
use crate::fermion::{ActiveSpace, FermionHamiltonian};

pub const FIXTURE_NAMES: [&str; 3] = ["hubbard1", "triplet-nv-shape", "triplet-vv-shape"];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub hamiltonian: FermionHamiltonian,
    pub n_electrons: usize,
    /// `2 S_z` of the working sector.
    pub twice_sz: i64,
    /// Closed/open-shell reference determinant for the ansatz.
    pub reference: Determinant,
    /// Determinants of the two-configuration ground state, reference first.
    pub pair: Option<[Determinant; 2]>,
    /// Creation orders of the same two kets as conventionally written.
    pub pair_creation_orders: Option<[Vec<usize>; 2]>,
    pub description: &'static str,
}

impl Fixture {
    pub fn space(&self) -> &ActiveSpace {
        &self.hamiltonian.space
    }

    pub fn sz(&self) -> f64 {
        self.twice_sz as f64 / 2.0
    }

    /// `(n_up, n_down)` of the working sector.
    pub fn spin_counts(&self) -> (usize, usize) {
        let n = self.n_electrons as i64;
        (((n + self.twice_sz) / 2) as usize, ((n - self.twice_sz) / 2) as usize)
    }
}

/// Orbital parameters of the Kanamori-like construction.
struct Kanamori<'a> {
    /// `(one-body energy, intra-orbital U)` per `a`-type orbital.
    a: &'a [(f64, f64)],
    e_energy: f64,
    u_e: f64,
    j_e: f64,
    /// `(a index, V = (aa|ee), K = (ae|ae))`.
    a_e: &'a [(usize, f64, f64)],
    /// `(a, a', V, K)` between `a`-type orbitals.
    a_a: &'a [(usize, usize, f64, f64)],
}

fn kanamori(k: &Kanamori, n_electrons: usize) -> FermionHamiltonian {
    let na = k.a.len();
    let (x, y) = (na, na + 1);
    let space = ActiveSpace::new(na + 2, n_electrons).expect("valid");
    let mut h = FermionHamiltonian::zeros(space);
    for (p, &(eps, u)) in k.a.iter().enumerate() {
        h.set_h1(p, p, eps);
        h.set_h2(p, p, p, p, u);
    }
    for e in [x, y] {
        h.set_h1(e, e, k.e_energy);
        h.set_h2(e, e, e, e, k.u_e);
    }
    h.set_h2(x, x, y, y, k.u_e - 2.0 * k.j_e);
    h.set_h2(x, y, x, y, k.j_e);
    for &(a, v, kk) in k.a_e {
        for e in [x, y] {
            h.set_h2(a, a, e, e, v);
            h.set_h2(a, e, a, e, kk);
        }
    }
    for &(a, b, v, kk) in k.a_a {
        h.set_h2(a, a, b, b, v);
        h.set_h2(a, b, a, b, kk);
    }
    h
}

fn hubbard1() -> Fixture {
    let mut h = FermionHamiltonian::zeros(ActiveSpace::new(1, 2).expect("valid"));
    h.set_h1(0, 0, -1.0);
    h.set_h2(0, 0, 0, 0, 0.5);
    Fixture {
        name: "hubbard1",
        hamiltonian: h,
        n_electrons: 2,
        twice_sz: 0,
        reference: Determinant::from_modes(&[0, 1]),
        pair: None,
        pair_creation_orders: None,
        description: "one orbital, h = -1, U = 0.5; ground energy 2h + U = -1.5",
    }
}

fn triplet_nv() -> Fixture {
    // orbitals: a1 = 0, e_x = 1, e_y = 2
    let h = kanamori(&Kanamori {
        a: &[(-6.0, 3.0)],
        e_energy: -3.0,
        u_e: 2.5,
        j_e: 0.256,
        a_e: &[(0, 2.0, 0.3)],
        a_a: &[],
    }, 4);
    let d1 = Determinant::from_modes(&[0, 1, 3, 5]);
    let d2 = Determinant::from_modes(&[0, 2, 3, 4]);
    Fixture {
        name: "triplet-nv-shape",
        hamiltonian: h,
        n_electrons: 4,
        twice_sz: 0,
        reference: d1,
        pair: Some([d1, d2]),
        pair_creation_orders: Some([vec![0, 3, 1, 5], vec![0, 3, 4, 2]]),
        description: "(4e,3o) a1 + e; eps_a = -6, eps_e = -3, U_a = 3, U_e = 2.5, J_e = 0.256, \
                      U'_e = U_e - 2 J_e, (aa|ee) = 2.0, (ae|ae) = 0.3; ground state is the e^2 triplet",
    }
}

fn triplet_vv() -> Fixture {
    // orbitals: a1' = 0, a1 = 1, e_x = 2, e_y = 3
    let h = kanamori(&Kanamori {
        a: &[(-8.0, 3.2), (-6.0, 3.0)],
        e_energy: -3.0,
        u_e: 2.5,
        j_e: 0.19,
        a_e: &[(0, 1.8, 0.25), (1, 2.0, 0.3)],
        a_a: &[(0, 1, 2.2, 0.28)],
    }, 6);
    let d1 = Determinant::from_modes(&[0, 1, 2, 4, 5, 7]);
    let d2 = Determinant::from_modes(&[0, 1, 3, 4, 5, 6]);
    Fixture {
        name: "triplet-vv-shape",
        hamiltonian: h,
        n_electrons: 6,
        twice_sz: 0,
        reference: d1,
        pair: Some([d1, d2]),
        pair_creation_orders: Some([vec![0, 4, 1, 5, 2, 7], vec![0, 4, 1, 5, 6, 3]]),
        description: "(6e,4o) a1' + a1 + e; eps = (-8, -6, -3), U = (3.2, 3.0, 2.5), J_e = 0.19, \
                      U'_e = U_e - 2 J_e, (a'a'|ee) = 1.8, (a'e|a'e) = 0.25, (aa|ee) = 2.0, (ae|ae) = 0.3, \
                      (a'a'|aa) = 2.2, (a'a|a'a) = 0.28; ground state is the e^2 triplet",
    }
}

pub fn build_fixture(name: &str) -> Result<Fixture> {
    match name {
        "hubbard1" => Ok(hubbard1()),
        "triplet-nv-shape" => Ok(triplet_nv()),
        "triplet-vv-shape" => Ok(triplet_vv()),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}
