use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use phasered::limit_cycle::{find_default_cycle, find_limit_cycle, monodromy, CycleOptions};
use phasered::ode::{self, Direction, Section, Tolerance};
use phasered::OscillatorModel;

fn y_section() -> Section {
    Section::coordinate(2, 1, 0.0, Direction::Increasing)
}

#[test]
fn radial_cycle_is_unit_circle() {
    let model = OscillatorModel::radial();
    let c = find_limit_cycle(&model, &[1.7, 0.1], &y_section(), &CycleOptions::default()).unwrap();
    assert_abs_diff_eq!(c.period, TAU, epsilon = 1e-6);
    for k in 0..c.grid_len() {
        let p = c.point(k);
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-6);
    }
    let g = c.gamma_at(PI / 3.0);
    assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(g[1], (PI / 3.0).sin(), epsilon = 1e-8);
    assert_eq!(c.gamma_at(TAU), c.gamma_at(0.0));
    assert_eq!(c.gamma_at(c.grid_phase(17)), c.point(17).to_vec());
    assert_abs_diff_eq!(c.floquet, -2.0, epsilon = 1e-4);
}

#[test]
fn spiral_and_stuart_landau_periods() {
    let opts = CycleOptions::default();
    let spiral = find_limit_cycle(&OscillatorModel::spiral(), &[0.5, 0.5], &y_section(), &opts).unwrap();
    assert_abs_diff_eq!(spiral.period, TAU, epsilon = 1e-6);
    assert_abs_diff_eq!(spiral.floquet, -2.0, epsilon = 1e-4);
    let sl = OscillatorModel::stuart_landau(2.0, 1.0);
    let c = find_default_cycle(&sl, &opts).unwrap();
    assert_abs_diff_eq!(c.period, TAU, epsilon = 1e-6);
    assert_abs_diff_eq!(c.floquet, -2.0, epsilon = 1e-4);
    let fast = find_default_cycle(&OscillatorModel::stuart_landau(3.0, -0.5), &opts).unwrap();
    assert_abs_diff_eq!(fast.period, TAU / 3.5, epsilon = 1e-6);
    assert_abs_diff_eq!(fast.floquet, -2.0, epsilon = 1e-4);
}

#[test]
fn grid_is_uniform_in_time_and_periodic() {
    let model = OscillatorModel::spiral();
    let c = find_default_cycle(&model, &CycleOptions::default()).unwrap();
    let tol = Tolerance::FINE;
    for k in (0..c.grid_len()).step_by(16) {
        let back = ode::flow(&model, c.point(k), c.period, tol).unwrap();
        let d: f64 = back.iter().zip(c.point(k)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(d < 1e-8, "node {k}: {d}");
        let t = c.period * k as f64 / c.grid_len() as f64;
        let fwd = ode::flow(&model, &c.anchor, t, tol).unwrap();
        let d: f64 = fwd.iter().zip(c.point(k)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(d < 1e-8, "node {k}: {d}");
    }
}

#[test]
fn anchor_has_maximal_first_coordinate() {
    let c = find_default_cycle(&OscillatorModel::radial(), &CycleOptions::default()).unwrap();
    assert_abs_diff_eq!(c.anchor[0], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(c.anchor[1], 0.0, epsilon = 1e-9);
    // the anchor follows the section: x = 0 crossed leftwards is the top of the circle
    let top = Section::coordinate(2, 0, 0.0, Direction::Decreasing);
    let c = find_limit_cycle(&OscillatorModel::radial(), &[0.3, 1.4], &top, &CycleOptions::default()).unwrap();
    assert_abs_diff_eq!(c.anchor[0], 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(c.anchor[1], 1.0, epsilon = 1e-9);
}

#[test]
fn three_dimensional_monodromy() {
    // radial oscillator times a decoupled contracting direction
    let model = OscillatorModel::from_fn("radial3", 3, |x, out| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        out[0] = x[0] - x[1] - x[0] * r2;
        out[1] = x[0] + x[1] - x[1] * r2;
        out[2] = -0.5 * x[2];
    });
    let section = Section::coordinate(3, 1, 0.0, Direction::Increasing);
    let c = find_limit_cycle(&model, &[1.2, 0.0, 0.3], &section, &CycleOptions::default()).unwrap();
    assert_abs_diff_eq!(c.period, TAU, epsilon = 1e-6);
    assert_abs_diff_eq!(c.floquet, -0.5, epsilon = 1e-4);
    let m = monodromy(&model, &c, Tolerance::FINE).unwrap();
    assert_abs_diff_eq!(m.determinant(), (-2.5 * TAU).exp(), epsilon = 1e-8);
}

#[test]
fn summary_and_csv() {
    let c = find_default_cycle(&OscillatorModel::radial(), &CycleOptions::default()).unwrap();
    let json = serde_json::to_string(&c.summary()).unwrap();
    assert!(json.contains("\"T\""));
    let csv = c.to_csv();
    assert!(csv.starts_with("theta,x1,x2\n"));
    assert_eq!(csv.lines().count(), 257);
}
