use criterion::{black_box, criterion_group, criterion_main, Criterion};
use defectvqe_core::ansatz::{build_uccsd_with, compile, ExcitationSelection};
use defectvqe_core::estimation::{estimate_energy, EstimatorSettings, MeasurementPlan};
use defectvqe_core::fci::solve_fci;
use defectvqe_core::fermion::to_fermion_operator;
use defectvqe_core::fixtures::build_fixture;
use defectvqe_core::mapping::{map_operator, MappingSpec};
use defectvqe_core::sim::DeviceCalibration;
use defectvqe_core::solvers::{build_qse, qse_operators};
use std::f64::consts::FRAC_PI_2;

const CALIBRATION: &str = include_str!("../../../configs/casablanca.toml");

fn kernels(c: &mut Criterion) {
    let nv = build_fixture("triplet-nv-shape").unwrap();
    let vv = build_fixture("triplet-vv-shape").unwrap();
    let (nu, nd) = nv.spin_counts();
    let spec = MappingSpec::parity_tapered_for(nv.space(), nu, nd);
    let fop = to_fermion_operator(&nv.hamiltonian);
    let pauli = map_operator(&fop, &spec).unwrap();
    let plan = MeasurementPlan::new(&pauli).unwrap();
    let ansatz = build_uccsd_with(nv.space(), nv.reference, ExcitationSelection::ConfigurationPreserving).unwrap();
    let noise = DeviceCalibration::from_toml(CALIBRATION).unwrap().noise_model(spec.n_qubits(), false).unwrap();
    let theta = vec![FRAC_PI_2; ansatz.n_parameters()];
    let c1 = compile(&ansatz, &spec, 1).unwrap();
    let c5 = compile(&ansatz, &spec, 5).unwrap();

    c.bench_function("fci_vv", |b| b.iter(|| solve_fci(black_box(&vv.hamiltonian), vv.n_electrons, Some(vv.sz())).unwrap()));
    c.bench_function("map_operator_nv_tapered", |b| b.iter(|| map_operator(black_box(&fop), &spec).unwrap()));
    c.bench_function("density_run_nv_n5_noisy", |b| b.iter(|| c5.circuit.run(black_box(&theta), Some(&noise)).unwrap()));

    let exact = EstimatorSettings::exact();
    let shots = EstimatorSettings { shots: Some(8192), post_select: true, n_target: nv.n_electrons, noise: Some(noise.clone()), ..EstimatorSettings::exact() };
    c.bench_function("estimate_energy_exact", |b| b.iter(|| estimate_energy(&c1, black_box(&theta), &plan, &exact, 0).unwrap()));
    c.bench_function("estimate_energy_8192_shots_noisy", |b| b.iter(|| estimate_energy(&c1, black_box(&theta), &plan, &shots, 7).unwrap()));

    let state = c1.circuit.run(&theta, None).unwrap();
    let ops = qse_operators(nv.space(), &[nv.reference]).unwrap();
    c.bench_function("build_qse_nv_exact", |b| b.iter(|| build_qse(black_box(&state), &nv.hamiltonian, &ops, &spec, &exact, 0).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels
}
criterion_main!(benches);
