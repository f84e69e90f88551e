//! Unitary coupled-cluster ansatz construction and compilation to gate circuits.
//!
//! Each generator `G_k = T_k - T_k^†` enters as `exp((θ_k / 2) G_k)`; the
//! doubles excitation operator is `a†_a a†_b a_i a_j` with `i < j`, `a < b`.
//! Generators act in list order, the first one directly on the reference.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fci::Determinant;
use crate::fermion::{ActiveSpace, FermionOperator, Ladder};
use crate::mapping::{map_operator, map_state, MappingSpec};
use crate::pauli::{Pauli, PauliString};
use crate::sim::{Angle, Circuit, Gate};

/// Which excitations out of the reference are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationSelection {
    /// Every occupied-to-virtual single and double.
    All,
    /// Excitations that conserve S_z.
    #[default]
    SpinConserving,
    /// S_z-conserving excitations that leave every spatial orbital's
    /// occupation unchanged (spin rearrangements within open shells).
    ConfigurationPreserving,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excitation {
    /// Occupied spin orbitals, ascending.
    pub from: Vec<usize>,
    /// Virtual spin orbitals, ascending.
    pub to: Vec<usize>,
}

impl Excitation {
    pub fn rank(&self) -> usize {
        self.from.len()
    }

    pub fn name(&self) -> String {
        let j = |v: &[usize]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
        format!("theta[{}->{}]", j(&self.from), j(&self.to))
    }

    /// `T` for this excitation.
    pub fn operator(&self, n_modes: usize) -> FermionOperator {
        let mut t = FermionOperator::new(n_modes);
        let mut ops: Vec<Ladder> = self.to.iter().map(|&a| Ladder::create(a)).collect();
        ops.extend(self.from.iter().map(|&i| Ladder::annihilate(i)));
        t.push(1.0, ops);
        t
    }

    /// Anti-Hermitian generator `T - T^†`.
    pub fn generator(&self, n_modes: usize) -> FermionOperator {
        let t = self.operator(n_modes);
        t.plus(&t.adjoint().scaled(-1.0))
    }
}

#[derive(Debug, Clone)]
pub struct UccsdAnsatz {
    pub space: ActiveSpace,
    pub excitations: Vec<Excitation>,
    pub selection: ExcitationSelection,
    pub initial_state: Determinant,
}

impl UccsdAnsatz {
    pub fn n_parameters(&self) -> usize {
        self.excitations.len()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.excitations.iter().map(Excitation::name).collect()
    }

    pub fn generators(&self) -> Vec<FermionOperator> {
        let n = self.space.n_modes();
        self.excitations.iter().map(|e| e.generator(n)).collect()
    }
}

/// All singles and doubles, S_z-filtered when asked.
pub fn build_uccsd(space: &ActiveSpace, reference: Determinant, spin_conserving: bool) -> Result<UccsdAnsatz> {
    let sel = if spin_conserving { ExcitationSelection::SpinConserving } else { ExcitationSelection::All };
    build_uccsd_with(space, reference, sel)
}

pub fn build_uccsd_with(space: &ActiveSpace, reference: Determinant, selection: ExcitationSelection) -> Result<UccsdAnsatz> {
    let n = space.n_modes();
    if n > 64 || reference.0 >> n != 0 {
        return Err(Error::Invalid(format!("reference {:#b} outside {n} spin orbitals", reference.0)));
    }
    if reference.n_electrons() != space.n_electrons {
        return Err(Error::Invalid(format!(
            "reference has {} electrons, active space {}",
            reference.n_electrons(),
            space.n_electrons
        )));
    }
    let occ: Vec<usize> = (0..n).filter(|&m| reference.is_occupied(m)).collect();
    let vir: Vec<usize> = (0..n).filter(|&m| !reference.is_occupied(m)).collect();
    let spin = |m: usize| if space.is_down(m) { -1i32 } else { 1 };
    let keep = |from: &[usize], to: &[usize]| -> bool {
        let sz_ok = from.iter().map(|&m| spin(m)).sum::<i32>() == to.iter().map(|&m| spin(m)).sum::<i32>();
        match selection {
            ExcitationSelection::All => true,
            ExcitationSelection::SpinConserving => sz_ok,
            ExcitationSelection::ConfigurationPreserving => {
                let mut delta = vec![0i32; space.n_spatial];
                from.iter().for_each(|&m| delta[space.spatial(m)] -= 1);
                to.iter().for_each(|&m| delta[space.spatial(m)] += 1);
                sz_ok && delta.iter().all(|&d| d == 0)
            }
        }
    };
    let mut excitations = Vec::new();
    for &i in &occ {
        for &a in &vir {
            if keep(&[i], &[a]) {
                excitations.push(Excitation { from: vec![i], to: vec![a] });
            }
        }
    }
    for (x, &i) in occ.iter().enumerate() {
        for &j in &occ[x + 1..] {
            for (y, &a) in vir.iter().enumerate() {
                for &b in &vir[y + 1..] {
                    if keep(&[i, j], &[a, b]) {
                        excitations.push(Excitation { from: vec![i, j], to: vec![a, b] });
                    }
                }
            }
        }
    }
    Ok(UccsdAnsatz { space: space.clone(), excitations, selection, initial_state: reference })
}

/// One `exp(i c θ_slot P)` factor; for a fixed exponent `slot` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliRotation {
    pub string: PauliString,
    /// Coefficient `c`, including the one-half of the generator convention.
    pub coeff: f64,
    pub slot: usize,
}

/// X gates on the qubits set in the reference's encoded label.
pub fn prepare_reference(reference: Determinant, mapping: &MappingSpec) -> Result<Circuit> {
    let label = map_state(reference, mapping)?;
    let mut c = Circuit::new(mapping.n_qubits());
    for q in 0..label.n_qubits {
        if label.bit(q) {
            c.push(Gate::X(q));
        }
    }
    Ok(c)
}

/// Appends the gate pattern for `exp(i * scale * θ_slot * P)`.
///
/// Y is rotated with Rx(-π/2), so the conjugated string is `(-1)^{#Y} Z...Z`.
pub fn push_pauli_exponential(c: &mut Circuit, p: &PauliString, slot: usize, scale: f64) {
    let support: Vec<usize> = (0..p.n_qubits()).filter(|&q| p.letter(q) != Pauli::I).collect();
    if support.is_empty() {
        return;
    }
    let n_y = support.iter().filter(|&&q| p.letter(q) == Pauli::Y).count();
    let s = if n_y % 2 == 0 { 1.0 } else { -1.0 };
    let phase = p.phase().to_complex();
    debug_assert!(phase.im.abs() < 1e-15, "rotation string must carry a real phase");
    let s = s * phase.re;
    let mut basis = Vec::new();
    for &q in &support {
        match p.letter(q) {
            Pauli::X => basis.push((Gate::H(q), Gate::H(q))),
            Pauli::Y => basis.push((Gate::Rx(q, Angle::Fixed(-FRAC_PI_2)), Gate::Rx(q, Angle::Fixed(FRAC_PI_2)))),
            _ => {}
        }
    }
    basis.iter().for_each(|(pre, _)| c.push(*pre));
    for w in support.windows(2) {
        c.push(Gate::Cnot { control: w[0], target: w[1] });
    }
    let last = *support.last().expect("non-empty");
    c.push(Gate::Rz(last, Angle::Slot { slot, scale: -2.0 * scale * s }));
    for w in support.windows(2).rev() {
        c.push(Gate::Cnot { control: w[0], target: w[1] });
    }
    basis.iter().for_each(|(_, post)| c.push(*post));
}

#[derive(Debug, Clone)]
pub struct CompiledAnsatz {
    pub circuit: Circuit,
    pub replication: usize,
    pub mapping: MappingSpec,
    /// Rotations of a single replication block, in application order.
    pub rotations: Vec<PauliRotation>,
    pub reference_label: u64,
    /// Whether the two-term merge fired on the first generator.
    pub merged_first_generator: bool,
}

impl CompiledAnsatz {
    pub fn n_parameters(&self) -> usize {
        self.circuit.n_parameters()
    }

    pub fn n_qubits(&self) -> usize {
        self.circuit.n_qubits
    }

    pub fn statevector(&self, params: &[f64]) -> Result<DVector<Complex64>> {
        self.check_params(params)?;
        self.circuit.statevector(params)
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::Invalid(format!("expected {} parameters, got {}", self.n_parameters(), params.len())));
        }
        Ok(())
    }
}

fn rotations_of(generator: &FermionOperator, mapping: &MappingSpec, slot: usize) -> Result<Vec<PauliRotation>> {
    let mapped = map_operator(generator, mapping)?;
    let mut out = Vec::new();
    for (p, c) in mapped.iter() {
        if c.re.abs() > 1e-10 {
            return Err(Error::Circuit(format!("generator term {} is not anti-Hermitian", p.letters_string())));
        }
        if p.is_identity() {
            continue;
        }
        // G = i Σ b P, the half-angle convention gives exp(i θ/2 b P)
        out.push(PauliRotation { string: *p, coeff: 0.5 * c.im, slot });
    }
    Ok(out)
}

fn apply_rotation(psi: &DVector<Complex64>, p: &PauliString, angle: f64) -> DVector<Complex64> {
    // exp(i a P) = cos a + i sin a P for a Pauli string
    let mut out = psi * Complex64::new(angle.cos(), 0.0);
    let f = Complex64::new(0.0, angle.sin());
    for (b, amp) in psi.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let (k, w) = p.apply_to_basis(b as u64);
        out[k as usize] += f * w * amp;
    }
    out
}

fn basis_vector(n: usize, b: u64) -> DVector<Complex64> {
    let mut v = DVector::zeros(1 << n);
    v[b as usize] = Complex64::new(1.0, 0.0);
    v
}

/// Collapses a generator onto one string `K` within `span{ref, K ref}`.
///
/// Fires when every term flips the same qubits as `K` and `P_m K` is diagonal
/// with one eigenvalue `s_m` on both states; then the exponent is
/// `(Σ s_m c_m) K` on that subspace. Confirmed densely before use.
fn try_merge(rots: &[PauliRotation], reference: u64, n_qubits: usize) -> Option<PauliRotation> {
    if rots.len() < 2 || n_qubits > 16 {
        return None;
    }
    let x = rots[0].string.x_mask();
    if x == 0 || rots.iter().any(|r| r.string.x_mask() != x) {
        return None;
    }
    if rots.iter().enumerate().any(|(i, a)| rots[i + 1..].iter().any(|b| !a.string.commutes(&b.string))) {
        return None;
    }
    let lowest_is_x = |p: &PauliString| {
        let q = (0..p.n_qubits()).find(|&q| p.letter(q) != Pauli::I);
        q.is_some_and(|q| p.letter(q) == Pauli::X)
    };
    let mut cands: Vec<&PauliRotation> = rots.iter().collect();
    cands.sort_by_key(|r| (r.string.weight(), !lowest_is_x(&r.string)));
    let other = reference ^ x;
    let r = basis_vector(n_qubits, reference);
    'cand: for keep in cands {
        let mut coeff = 0.0;
        for rot in rots {
            let d = rot.string.mul_unchecked(&keep.string);
            let ph = d.phase().to_complex();
            if ph.im.abs() > 1e-15 {
                continue 'cand;
            }
            let (s1, s2) = (ph.re * d.diagonal_sign(reference), ph.re * d.diagonal_sign(other));
            if s1 != s2 {
                continue 'cand;
            }
            coeff += s1 * rot.coeff;
        }
        let merged = PauliRotation { string: keep.string.normalized(), coeff: coeff * keep.string.phase().to_complex().re, slot: keep.slot };
        let ok = [0.37, 1.1, -2.3].iter().all(|&t| {
            let full = rots.iter().fold(r.clone(), |v, rot| apply_rotation(&v, &rot.string, rot.coeff * t));
            (full - apply_rotation(&r, &merged.string, merged.coeff * t)).norm() < 1e-12
        });
        if ok {
            return Some(merged);
        }
    }
    None
}

/// Checks a single gate pattern against `cos a + i sin a P` on a dense basis.
fn self_check(rot: &PauliRotation, n_qubits: usize) -> Result<()> {
    if n_qubits > 8 {
        return Ok(());
    }
    let mut c = Circuit::new(n_qubits);
    push_pauli_exponential(&mut c, &rot.string, 0, rot.coeff);
    let theta = [0.813];
    let u = c.unitary(&theta)?;
    for b in 0..(1u64 << n_qubits) {
        let want = apply_rotation(&basis_vector(n_qubits, b), &rot.string, rot.coeff * theta[0]);
        if (u.column(b as usize) - want).norm() > 1e-10 {
            return Err(Error::Circuit(format!("gate pattern mismatch for {}", rot.string.letters_string())));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    pub replication: usize,
    /// Collapse the first generator onto one string when safe on the reference.
    pub merge_first_generator: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self { replication: 1, merge_first_generator: true }
    }
}

/// Maps, trotterizes and compiles the ansatz with `n` replications per block.
pub fn compile(ansatz: &UccsdAnsatz, mapping: &MappingSpec, n: usize) -> Result<CompiledAnsatz> {
    compile_with(ansatz, mapping, CompileOptions { replication: n, ..Default::default() })
}

pub fn compile_with(ansatz: &UccsdAnsatz, mapping: &MappingSpec, opts: CompileOptions) -> Result<CompiledAnsatz> {
    let n = opts.replication;
    if n == 0 {
        return Err(Error::Invalid("replication must be at least 1".into()));
    }
    mapping.validate()?;
    if mapping.n_spin_orbitals != ansatz.space.n_modes() {
        return Err(Error::Mapping(format!(
            "mapping covers {} spin orbitals, active space {}",
            mapping.n_spin_orbitals,
            ansatz.space.n_modes()
        )));
    }
    let nq = mapping.n_qubits();
    let mut circuit = prepare_reference(ansatz.initial_state, mapping)?;
    let reference_label = map_state(ansatz.initial_state, mapping)?.bits;
    let mut rotations = Vec::new();
    let mut merged_first_generator = false;
    for (k, g) in ansatz.generators().iter().enumerate() {
        let mut rots = rotations_of(g, mapping, k).map_err(|e| match e {
            Error::Symmetry(m) => Error::Symmetry(format!("generator {}: {m}", ansatz.excitations[k].name())),
            other => other,
        })?;
        if k == 0 && opts.merge_first_generator {
            if let Some(m) = try_merge(&rots, reference_label, nq) {
                rots = vec![m];
                merged_first_generator = true;
            }
        }
        for r in &rots {
            self_check(r, nq)?;
        }
        for _ in 0..n {
            for r in &rots {
                push_pauli_exponential(&mut circuit, &r.string, r.slot, r.coeff / n as f64);
            }
        }
        rotations.extend(rots);
    }
    circuit.parameter_names = ansatz.parameter_names();
    Ok(CompiledAnsatz { circuit, replication: n, mapping: *mapping, rotations, reference_label, merged_first_generator })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::number_operator;
    use crate::mapping::SectorParities;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn nv_space() -> ActiveSpace {
        ActiveSpace::new(3, 4).unwrap()
    }

    // modes: a=0, x=1, y=2 up; 3, 4, 5 down
    fn ref_xy() -> Determinant {
        Determinant::from_modes(&[0, 1, 3, 5])
    }

    fn nv_mapping() -> MappingSpec {
        MappingSpec::parity_tapered(6, SectorParities { total: 1, up: 1 })
    }

    #[test]
    fn counts_for_nv_references() {
        let s = nv_space();
        let a = build_uccsd(&s, ref_xy(), true).unwrap();
        assert_eq!(a.n_parameters(), 8);
        let b = build_uccsd(&s, Determinant::from_modes(&[0, 1, 3, 4]), true).unwrap();
        assert_eq!(b.n_parameters(), 8);
        let c = build_uccsd_with(&s, ref_xy(), ExcitationSelection::ConfigurationPreserving).unwrap();
        assert_eq!(c.excitations, vec![Excitation { from: vec![1, 5], to: vec![2, 4] }]);
        let all = build_uccsd(&s, ref_xy(), false).unwrap();
        assert!(all.n_parameters() > a.n_parameters());
    }

    #[test]
    fn ordering_singles_then_doubles() {
        let a = build_uccsd(&nv_space(), ref_xy(), true).unwrap();
        let ranks: Vec<usize> = a.excitations.iter().map(Excitation::rank).collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        let singles: Vec<_> = a.excitations.iter().filter(|e| e.rank() == 1).map(|e| (e.from[0], e.to[0])).collect();
        let mut sorted = singles.clone();
        sorted.sort();
        assert_eq!(singles, sorted);
    }

    #[test]
    fn no_virtuals_no_excitations() {
        let s = ActiveSpace::new(1, 2).unwrap();
        let a = build_uccsd(&s, Determinant::from_modes(&[0, 1]), true).unwrap();
        assert_eq!(a.n_parameters(), 0);
    }

    #[test]
    fn prepare_reference_sets_label_bits() {
        let c = prepare_reference(ref_xy(), &nv_mapping()).unwrap();
        assert_eq!(c.gates, vec![Gate::X(0), Gate::X(2), Gate::X(3)]);
        let jw = MappingSpec::jordan_wigner(6);
        let c = prepare_reference(ref_xy(), &jw).unwrap();
        assert_eq!(c.gates, vec![Gate::X(0), Gate::X(1), Gate::X(3), Gate::X(5)]);
        let c = prepare_reference(Determinant(0), &jw).unwrap();
        assert!(c.gates.is_empty());
    }

    fn nv_single() -> CompiledAnsatz {
        let a = build_uccsd_with(&nv_space(), ref_xy(), ExcitationSelection::ConfigurationPreserving).unwrap();
        compile(&a, &nv_mapping(), 1).unwrap()
    }

    #[test]
    fn nv_circuit_shape() {
        let c = nv_single();
        assert!(c.merged_first_generator);
        assert_eq!(c.rotations.len(), 1);
        assert_eq!(c.rotations[0].string.letter(1), Pauli::X);
        assert_eq!(c.rotations[0].string.letter(3), Pauli::Y);
        assert_eq!(c.circuit.depth(), 6);
        assert_eq!(c.circuit.two_qubit_count(), 2);
        let g = &c.circuit.gates;
        assert!(g.contains(&Gate::H(1)));
        assert!(g.contains(&Gate::Rx(3, Angle::Fixed(-FRAC_PI_2))));
    }

    #[test]
    fn nv_netlist_golden() {
        let want = "qubits 4\nx 0\nx 2\nx 3\nh 1\nrx 3 -1.5707963267948966\ncx 1 3\nrz 3 -1.0*theta[0]\ncx 1 3\nh 1\nrx 3 1.5707963267948966\n";
        assert_eq!(nv_single().circuit.to_netlist(), want);
    }

    #[test]
    fn nv_state_amplitudes() {
        // creation-ordered kets |a ā e_x ē_y> and |a ā e_y ē_x>
        let (d1, s1) = Determinant::sign_of_creation_order(&[0, 3, 1, 5]).unwrap();
        let (d2, s2) = Determinant::sign_of_creation_order(&[0, 3, 4, 2]).unwrap();
        let m = nv_mapping();
        let (b1, b2) = (map_state(d1, &m).unwrap().bits, map_state(d2, &m).unwrap().bits);
        assert_eq!((b1, b2), (0b1101, 0b0111));
        let c = nv_single();
        for theta in [0.0, PI / 4.0, PI / 2.0, PI] {
            let psi = c.statevector(&[theta]).unwrap();
            let (u, v) = (psi[b1 as usize] * s1, psi[b2 as usize] * s2);
            let phase = if u.norm() > 1e-6 { u / u.norm() } else { v / v.norm() };
            assert_abs_diff_eq!((u / phase).re, (theta / 2.0).cos(), epsilon = 1e-10);
            assert_abs_diff_eq!((v / phase).re, (theta / 2.0).sin(), epsilon = 1e-10);
            assert_abs_diff_eq!(u.norm_sqr() + v.norm_sqr(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn replication_invariance() {
        let a = build_uccsd(&nv_space(), ref_xy(), true).unwrap();
        let m = nv_mapping();
        let theta: Vec<f64> = (0..a.n_parameters()).map(|k| 0.3 + 0.17 * k as f64).collect();
        let base = compile(&a, &m, 1).unwrap().circuit.unitary(&theta).unwrap();
        for n in 2..=5 {
            let u = compile(&a, &m, n).unwrap().circuit.unitary(&theta).unwrap();
            assert_abs_diff_eq!((u - &base).norm(), 0.0, epsilon = 1e-10);
        }
        let single = nv_single();
        let psi1 = single.statevector(&[0.7]).unwrap();
        let a1 = build_uccsd_with(&nv_space(), ref_xy(), ExcitationSelection::ConfigurationPreserving).unwrap();
        for n in 2..=5 {
            let psi = compile(&a1, &m, n).unwrap().statevector(&[0.7]).unwrap();
            let f = psi1.dotc(&psi).norm_sqr();
            assert!(f >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let a = build_uccsd(&nv_space(), ref_xy(), true).unwrap();
        let c = compile(&a, &nv_mapping(), 3).unwrap();
        let psi = c.statevector(&vec![0.0; a.n_parameters()]).unwrap();
        assert_abs_diff_eq!(psi[c.reference_label as usize].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn generators_anti_hermitian_and_conserve_number() {
        let s = nv_space();
        let a = build_uccsd(&s, ref_xy(), true).unwrap();
        let m = nv_mapping();
        for g in a.generators() {
            let p = map_operator(&g, &m).unwrap();
            assert!(p.is_anti_hermitian(1e-12));
        }
        let opts = CompileOptions { replication: 2, merge_first_generator: false };
        let c = compile_with(&a, &m, opts).unwrap();
        let theta: Vec<f64> = (0..a.n_parameters()).map(|k| 0.2 * (k as f64 + 1.0)).collect();
        let mut body = c.circuit.clone();
        let n_prep = prepare_reference(ref_xy(), &m).unwrap().gates.len();
        body.gates.drain(..n_prep);
        let u = body.unitary(&theta).unwrap();
        let n_op = map_operator(&number_operator(&s), &m).unwrap().to_dense().unwrap();
        assert_abs_diff_eq!((&u * &n_op - &n_op * &u).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn jordan_wigner_compiles_without_merge_when_unsafe() {
        let a = build_uccsd(&nv_space(), ref_xy(), true).unwrap();
        let m = MappingSpec::jordan_wigner(6);
        let c = compile(&a, &m, 1).unwrap();
        let theta = vec![0.4; a.n_parameters()];
        let psi = c.statevector(&theta).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_zero_replication() {
        let a = build_uccsd(&nv_space(), ref_xy(), true).unwrap();
        assert!(compile(&a, &nv_mapping(), 0).is_err());
    }
}
