use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use phasered::fourier::wrap_diff;
use phasered::network::{
    build_phase_model, compare_full_vs_reduced, default_phases, simulate_full, simulate_phase_model,
    stuart_landau_pair, Coupling, EdgeWeight, NetworkSpec, PhaseModel,
};
use phasered::ode::{self, Tolerance};
use phasered::reduction::CouplingFunction;
use phasered::OscillatorModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn radial_pair(eps: f64, coupling: Coupling) -> NetworkSpec {
    NetworkSpec::new(
        vec![OscillatorModel::radial(), OscillatorModel::radial()],
        eps,
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        coupling,
    )
    .unwrap()
}

#[test]
fn uncoupled_nodes_follow_their_own_flow() {
    let spec = NetworkSpec::new(
        vec![OscillatorModel::radial(), OscillatorModel::spiral()],
        0.0,
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        Coupling::Diffusive,
    )
    .unwrap();
    let x0 = [1.3, 0.2, -0.5, 0.8];
    let tol = Tolerance::GEOMETRY;
    let traj = simulate_full(&spec, &x0, (0.0, 7.0), tol).unwrap();
    let a = ode::flow(&OscillatorModel::radial(), &x0[..2], 7.0, tol).unwrap();
    let b = ode::flow(&OscillatorModel::spiral(), &x0[2..], 7.0, tol).unwrap();
    let end = traj.last_state();
    for (u, v) in end.iter().zip(a.iter().chain(&b)) {
        assert!((u - v).abs() < 10.0 * 1e-9, "{u} vs {v}");
    }
}

#[test]
fn synchronization_manifold_is_invariant() {
    let sl = OscillatorModel::stuart_landau(2.0, 1.0);
    let spec = NetworkSpec::new(vec![sl.clone(), sl], 0.3, vec![vec![0.0, 1.0], vec![1.0, 0.0]], Coupling::Diffusive).unwrap();
    let traj = simulate_full(&spec, &[0.7, -0.4, 0.7, -0.4], (0.0, 30.0), Tolerance::GEOMETRY).unwrap();
    for x in traj.states() {
        assert_eq!(x[0], x[2]);
        assert_eq!(x[1], x[3]);
    }
}

#[test]
fn prescribed_stuart_landau_coupling_vanishes() {
    let spec = stuart_landau_pair(0.02, 0.1).unwrap();
    let pm = build_phase_model(&spec).unwrap();
    for q in pm.q.iter().flatten().flatten() {
        assert!(q.max_abs() < 1e-12, "{:e}", q.max_abs());
    }
    assert_abs_diff_eq!(pm.omega[1] - pm.omega[0], 0.02, epsilon = 1e-9);
}

#[test]
fn diffusive_coupling_vanishes_on_diagonal() {
    let pm = build_phase_model(&radial_pair(0.05, Coupling::Diffusive)).unwrap();
    let q = pm.q[0][1].as_ref().unwrap();
    assert!(q.node(0).abs() < 1e-12);
    // Z = (−sin, cos) against γ(s+φ) − γ(s) gives sin φ
    for k in 0..q.grid_len() {
        assert_abs_diff_eq!(q.node(k), q.grid_phase(k).sin(), epsilon = 1e-8);
    }
}

#[test]
fn quasi_periodic_weights_reduce_to_their_mean() {
    let base = radial_pair(0.05, Coupling::Direct);
    let pm0 = build_phase_model(&base).unwrap();
    let h = pm0.q[0][1].as_ref().unwrap();
    for (b, c) in [(0.5, 0.0), (0.0, 0.7), (1.3, -0.9)] {
        let mut spec = base.clone();
        spec.nu = (1.0, 2f64.sqrt());
        let w = EdgeWeight { a: 0.6, b, c };
        spec.adjacency = vec![vec![EdgeWeight::default(), w], vec![w, EdgeWeight::default()]];
        let pm = build_phase_model(&spec).unwrap();
        let q = pm.q[0][1].as_ref().unwrap();
        for k in 0..q.grid_len() {
            assert!((q.node(k) - 0.6 * h.node(k)).abs() < 1e-6);
        }
    }
}

fn kuramoto(n: usize, eps: f64, omega: Vec<f64>) -> PhaseModel {
    let q = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (i != j).then(|| CouplingFunction::from_fn(128, |p| p.sin())))
                .collect()
        })
        .collect();
    PhaseModel::from_couplings(eps, omega, q).unwrap()
}

#[test]
fn phase_model_rotation_and_locking() {
    let free = kuramoto(2, 0.0, vec![1.0, 1.3]);
    let traj = simulate_phase_model(&free, &[0.1, 0.2], (0.0, 10.0), Tolerance::FINE).unwrap();
    assert_abs_diff_eq!(traj.last_state()[0], 0.1 + 10.0, epsilon = 1e-9);
    assert_abs_diff_eq!(traj.last_state()[1], 0.2 + 13.0, epsilon = 1e-9);

    // θ₁' = ω₁ + ε sin(θ₂ − θ₁), θ₂' = ω₂ + ε sin(θ₁ − θ₂): φ' = Δ − 2ε sin φ
    let (eps, delta) = (0.1, 0.1);
    let pm = kuramoto(2, eps, vec![1.0, 1.0 + delta]);
    let traj = simulate_phase_model(&pm, &[0.0, 2.0], (0.0, 400.0), Tolerance::FINE).unwrap();
    let x = traj.last_state();
    assert_abs_diff_eq!(wrap_diff(x[1] - x[0]), (delta / (2.0 * eps)).asin(), epsilon = 1e-8);
}

#[test]
fn identical_kuramoto_network_synchronizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let theta0: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.2..1.2)).collect();
    let pm = kuramoto(10, 0.1, vec![1.0; 10]);
    let traj = simulate_phase_model(&pm, &theta0, (0.0, 300.0), Tolerance::FINE).unwrap();
    let x = traj.last_state();
    let spread = x.iter().map(|t| wrap_diff(t - x[0]).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-8, "{spread:e}");

    // common phase shifts commute with the flow
    let shifted: Vec<f64> = theta0.iter().map(|t| t + 0.8).collect();
    let t2 = simulate_phase_model(&pm, &shifted, (0.0, 50.0), Tolerance::FINE).unwrap();
    let t1 = simulate_phase_model(&pm, &theta0, (0.0, 50.0), Tolerance::FINE).unwrap();
    for (a, b) in t1.last_state().iter().zip(t2.last_state()) {
        assert_abs_diff_eq!(b - a, 0.8, epsilon = 1e-8);
    }
}

#[test]
fn full_versus_reduced() {
    let tol = Tolerance::FINE;
    let spec = radial_pair(0.0, Coupling::Diffusive);
    let pm = build_phase_model(&spec).unwrap();
    let rep = compare_full_vs_reduced(&spec, &pm, &[0.0, 1.0], 3.0, 20, tol).unwrap();
    assert!(rep.max_error < 1e-8, "{:e}", rep.max_error);

    let spec = radial_pair(0.05, Coupling::Diffusive);
    let pm = build_phase_model(&spec).unwrap();
    let rep = compare_full_vs_reduced(&spec, &pm, &[0.0, 1.0], 1.0, 40, tol).unwrap();
    assert!(rep.max_error <= 0.1, "{}", rep.max_error);

    // vanishing first-order coupling predicts free drift; the full pair locks
    let spec = stuart_landau_pair(0.02, 0.2).unwrap();
    let pm = build_phase_model(&spec).unwrap();
    let rep = compare_full_vs_reduced(&spec, &pm, &default_phases(2), 100.0, 400, Tolerance::GEOMETRY).unwrap();
    let drift_red = rep.reduced_frequency[1] - rep.reduced_frequency[0];
    let drift_full = rep.full_frequency[1] - rep.full_frequency[0];
    assert_abs_diff_eq!(drift_red, 0.02, epsilon = 1e-9);
    assert!(drift_full.abs() < 1e-3, "{drift_full}");
    assert!(rep.frequency_discrepancy > 5e-3);
    let _ = PI;
}

#[test]
fn random_phase_shift_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pm = build_phase_model(&radial_pair(0.1, Coupling::Diffusive)).unwrap();
    for _ in 0..5 {
        let th: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..6.28)).collect();
        let d = rng.gen_range(-3.0..3.0);
        let a = simulate_phase_model(&pm, &th, (0.0, 20.0), Tolerance::FINE).unwrap();
        let sh: Vec<f64> = th.iter().map(|t| t + d).collect();
        let b = simulate_phase_model(&pm, &sh, (0.0, 20.0), Tolerance::FINE).unwrap();
        for (u, v) in a.last_state().iter().zip(b.last_state()) {
            assert_abs_diff_eq!(v - u, d, epsilon = 1e-8);
        }
    }
}
