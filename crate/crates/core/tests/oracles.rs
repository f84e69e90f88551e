//! Cross-module checks against independently built matrices.

use approx::assert_abs_diff_eq;
use defectvqe_core::ansatz::{build_uccsd_with, compile, ExcitationSelection};
use defectvqe_core::fci::{enumerate_sector, hamiltonian_matrix, slater_condon, solve_fci};
use defectvqe_core::fermion::to_fermion_operator;
use defectvqe_core::fixtures::{build_fixture, FIXTURE_NAMES};
use defectvqe_core::mapping::{encode_full, map_operator, map_state, MappingKind, MappingSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

#[test]
fn slater_condon_matches_mapped_operator() {
    for name in FIXTURE_NAMES {
        let f = build_fixture(name).unwrap();
        let n_modes = f.space().n_modes();
        let spec = MappingSpec::jordan_wigner(n_modes);
        let dense = map_operator(&to_fermion_operator(&f.hamiltonian), &spec).unwrap().to_dense().unwrap();
        let basis = enumerate_sector(f.space(), f.n_electrons, Some(f.sz())).unwrap();
        for &bra in &basis {
            for &ket in &basis {
                let (i, j) = (encode_full(bra, MappingKind::JordanWigner, n_modes), encode_full(ket, MappingKind::JordanWigner, n_modes));
                let z = dense[(i as usize, j as usize)];
                assert_abs_diff_eq!(z.re, slater_condon(&f.hamiltonian, bra, ket), epsilon = 1e-12);
                assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn tapered_sector_contains_fci_spectrum() {
    for name in ["triplet-nv-shape", "triplet-vv-shape"] {
        let f = build_fixture(name).unwrap();
        let (nu, nd) = f.spin_counts();
        let spec = MappingSpec::parity_tapered_for(f.space(), nu, nd);
        let dense = map_operator(&to_fermion_operator(&f.hamiltonian), &spec).unwrap().to_dense().unwrap();
        let basis = enumerate_sector(f.space(), f.n_electrons, Some(f.sz())).unwrap();
        let labels: Vec<usize> = basis.iter().map(|&d| map_state(d, &spec).unwrap().bits as usize).collect();
        let block = DMatrix::from_fn(labels.len(), labels.len(), |i, j| dense[(labels[i], labels[j])].re);
        let mut got: Vec<f64> = block.symmetric_eigen().eigenvalues.iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let want = solve_fci(&f.hamiltonian, f.n_electrons, Some(f.sz())).unwrap().energies;
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        // the sector block is not coupled to the rest of the tapered register
        let outside: Vec<usize> = (0..dense.nrows()).filter(|r| !labels.contains(r)).collect();
        for &i in &labels {
            for &o in &outside {
                assert!(dense[(o, i)].norm() < 1e-12);
            }
        }
    }
}

#[test]
fn fci_matrix_is_symmetric() {
    let f = build_fixture("triplet-vv-shape").unwrap();
    let basis = enumerate_sector(f.space(), 6, Some(0.0)).unwrap();
    let m = hamiltonian_matrix(&f.hamiltonian, &basis);
    assert_abs_diff_eq!((&m - m.transpose()).norm(), 0.0, epsilon = 1e-14);
}

#[test]
fn compiled_circuit_matches_dense_exponential() {
    let f = build_fixture("triplet-nv-shape").unwrap();
    let (nu, nd) = f.spin_counts();
    let spec = MappingSpec::parity_tapered_for(f.space(), nu, nd);
    let a = build_uccsd_with(f.space(), f.reference, ExcitationSelection::ConfigurationPreserving).unwrap();
    let g = map_operator(&a.generators()[0], &spec).unwrap().to_dense().unwrap();
    let reference = map_state(f.reference, &spec).unwrap().bits as usize;
    assert_eq!(reference, 0b1101);
    let c = compile(&a, &spec, 1).unwrap();
    for theta in [0.2, FRAC_PI_2, 2.5] {
        let u = (&g * Complex64::new(theta / 2.0, 0.0)).exp();
        let want: DVector<Complex64> = u.column(reference).into_owned();
        let got = c.statevector(&[theta]).unwrap();
        assert_abs_diff_eq!(got.dotc(&want).norm_sqr(), 1.0, epsilon = 1e-10);
    }
    let psi = c.statevector(&[FRAC_PI_2]).unwrap();
    // equal weights with a relative minus sign in the qubit basis
    assert_abs_diff_eq!(psi[0b1101].norm_sqr(), 0.5, epsilon = 1e-10);
    let ratio = psi[0b0111] / psi[0b1101];
    assert_abs_diff_eq!(ratio.re, -1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(ratio.im, 0.0, epsilon = 1e-10);
}
