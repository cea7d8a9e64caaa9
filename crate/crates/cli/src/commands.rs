use phasered::diagnostics::{critical_coupling, scaling_sweep, Threshold};
use phasered::fourier::wrap_diff;
use phasered::limit_cycle::{find_default_cycle, LimitCycle};
use phasered::network::{build_phase_model, compare_full_vs_reduced, default_phases, stuart_landau_pair};
use phasered::phase::{compute_isochron_with, phase_sensitivity, PhaseOptions, PhaseSensitivity};
use phasered::reduction::{average_periodic, compare_forced, lock_analysis};
use phasered::{OscillatorModel, Perturbation, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{missing, PrcConfig, RunConfig};
use crate::output::{columns, indexed, Artifacts};
use crate::CliError;

fn cycle_of(cfg: &RunConfig, model: &OscillatorModel, out: &mut Artifacts) -> Result<LimitCycle, CliError> {
    out.tolerance("cycle", cfg.cycle.tol);
    Ok(find_default_cycle(model, &cfg.cycle)?)
}

fn sensitivity_table(z: &PhaseSensitivity) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut cols = columns(&["theta"]);
    cols.extend(indexed("z", z.dim()));
    let rows = (0..z.grid_len())
        .map(|k| std::iter::once(z.grid_phase(k)).chain(z.node(k).iter().copied()).collect())
        .collect();
    (cols, rows)
}

pub fn find_cycle(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let model = cfg.model()?;
    let cycle = cycle_of(cfg, &model, out)?;
    let mut cols = columns(&["theta"]);
    cols.extend(indexed("x", cycle.dim()));
    let rows: Vec<Vec<f64>> = (0..cycle.grid_len())
        .map(|k| std::iter::once(cycle.grid_phase(k)).chain(cycle.point(k).iter().copied()).collect())
        .collect();
    out.table("cycle", &cols, &rows)?;
    let mut summary = serde_json::to_value(cycle.summary()).map_err(|e| CliError::Io(e.to_string()))?;
    summary["model"] = json!(model.name());
    out.json("summary", &summary)
}

pub fn isochrons(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let iso_cfg = cfg.isochrons.as_ref().ok_or_else(|| missing("isochrons"))?;
    let model = cfg.model()?;
    let cycle = cycle_of(cfg, &model, out)?;
    out.tolerance("phase", PhaseOptions::default().tol);
    let z = phase_sensitivity(&model, &cycle, iso_cfg.method)?;
    let mut cols = columns(&["theta", "index"]);
    cols.extend(indexed("x", cycle.dim()));
    let mut rows = vec![];
    let mut extents = vec![];
    for theta in iso_cfg.phases() {
        let iso = compute_isochron_with(&model, &cycle, &z, theta, (iso_cfg.r_min, iso_cfg.r_max), iso_cfg.points)?;
        for (i, p) in iso.points.iter().enumerate() {
            let mut row = vec![theta, i as f64];
            row.extend_from_slice(p);
            rows.push(row);
        }
        extents.push(json!({ "theta": theta, "points": iso.points.len(), "extent": iso.extent }));
    }
    out.table("isochrons", &cols, &rows)?;
    out.json("summary", &json!({ "model": model.name(), "isochrons": extents }))
}

pub fn prc(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let prc_cfg = cfg.prc.clone().unwrap_or_default();
    let PrcConfig { method } = prc_cfg;
    let model = cfg.model()?;
    let cycle = cycle_of(cfg, &model, out)?;
    let z = phase_sensitivity(&model, &cycle, method)?;
    let (cols, rows) = sensitivity_table(&z);
    out.table("prc", &cols, &rows)?;
    let analytic_error = (0..z.grid_len())
        .map(|k| {
            model.analytic_z(z.grid_phase(k)).map(|e| {
                e.iter().zip(z.node(k)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
        })
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    out.json(
        "summary",
        &json!({
            "model": model.name(),
            "method": method,
            "omega0": z.omega0,
            "grid": z.grid_len(),
            "normalization_error": z.normalization_error(&model, &cycle),
            "analytic_max_error": analytic_error,
        }),
    )
}

pub fn reduce(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let red = cfg.reduce.as_ref().ok_or_else(|| missing("reduce"))?;
    let model = cfg.model()?;
    let forcing = &red.forcing;
    let pert = Perturbation::sinusoidal(forcing.direction.clone(), forcing.omega, forcing.amplitude)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cycle = cycle_of(cfg, &model, out)?;
    let z = phase_sensitivity(&model, &cycle, red.method)?;
    let frame = red.frame_frequency.unwrap_or(forcing.omega);
    let gamma = average_periodic(&z, &cycle, &pert, frame)?;
    let rows: Vec<[f64; 2]> = (0..gamma.grid_len()).map(|k| [gamma.grid_phase(k), gamma.node(k)]).collect();
    out.table("coupling", &columns(&["psi", "gamma"]), &rows)?;
    let detuning = cycle.omega0 - frame;
    let lock = lock_analysis(detuning, forcing.amplitude, &gamma)?;
    let mut summary = json!({
        "model": model.name(),
        "omega0": cycle.omega0,
        "frame_frequency": frame,
        "detuning": detuning,
        "epsilon": forcing.amplitude,
        "lock": lock,
    });
    if let Some(cmp_cfg) = &red.compare {
        let horizon = cmp_cfg.horizon.unwrap_or(1.0 / forcing.amplitude);
        let tol = Tolerance::FINE;
        out.tolerance("comparison", tol);
        let cmp = compare_forced(&model, &cycle, &z, &pert, cmp_cfg.theta0, horizon, cmp_cfg.samples, tol)?;
        let rows: Vec<[f64; 2]> = cmp.times.iter().zip(&cmp.errors).map(|(t, e)| [*t, *e]).collect();
        out.table("comparison", &columns(&["t", "error"]), &rows)?;
        summary["comparison"] = json!({
            "horizon": horizon,
            "max_error": cmp.max_error,
            "rms_error": cmp.rms_error,
        });
    }
    out.json("summary", &summary)
}

pub fn simulate(cfg: &RunConfig, seed: u64, out: &mut Artifacts) -> Result<(), CliError> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let spec = sim.network.build()?;
    let n = spec.len();
    let theta0 = match (&sim.initial_phases, sim.random_initial) {
        (Some(_), true) => {
            return Err(CliError::Config("`initial_phases` and `random_initial` are exclusive".into()));
        }
        (Some(p), false) => p.clone(),
        (None, true) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
        }
        (None, false) => default_phases(n),
    };
    if theta0.len() != n {
        return Err(CliError::Config(format!("expected {n} initial phases, got {}", theta0.len())));
    }
    let pm = build_phase_model(&spec)?;
    out.tolerance("simulation", sim.tol);
    out.tolerance("cycle", phasered::CycleOptions::default().tol);
    let rep = compare_full_vs_reduced(&spec, &pm, &theta0, sim.horizon_mult, sim.samples, sim.tol)?;

    let mut cols = columns(&["t"]);
    cols.extend(indexed("full", n));
    cols.extend(indexed("reduced", n));
    let rows: Vec<Vec<f64>> = rep
        .times
        .iter()
        .zip(rep.full.iter().zip(&rep.reduced))
        .map(|(t, (f, r))| std::iter::once(*t).chain(f.iter().copied()).chain(r.iter().copied()).collect())
        .collect();
    out.table("phases", &cols, &rows)?;
    for (i, row) in pm.q.iter().enumerate() {
        for (j, q) in row.iter().enumerate() {
            if let Some(q) = q {
                let rows: Vec<[f64; 2]> = (0..q.grid_len()).map(|k| [q.grid_phase(k), q.node(k)]).collect();
                out.table(&format!("coupling_{}_{}", i + 1, j + 1), &columns(&["phi", "q"]), &rows)?;
            }
        }
    }
    let final_difference: Vec<f64> = rep
        .full
        .last()
        .map(|f| f.iter().map(|p| wrap_diff(p - f[0])).collect())
        .unwrap_or_default();
    out.json(
        "summary",
        &json!({
            "epsilon": spec.epsilon,
            "omega": pm.omega,
            "initial_phases": theta0,
            "horizon": rep.horizon,
            "max_error": rep.max_error,
            "rms_error": rep.rms_error,
            "full_frequency": rep.full_frequency,
            "reduced_frequency": rep.reduced_frequency,
            "frequency_discrepancy": rep.frequency_discrepancy,
            "final_phase_offsets": final_difference,
        }),
    )
}

fn threshold_row(delta: f64, t: &Threshold) -> [f64; 4] {
    match *t {
        Threshold::Found { eps_c, lo, hi } => [delta, eps_c, lo, hi],
        Threshold::BelowRange { eps_min } => [delta, f64::NAN, 0.0, eps_min],
        Threshold::AboveRange { eps_max } => [delta, f64::NAN, eps_max, f64::INFINITY],
    }
}

pub fn sweep(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
    sw.criterion.validate().map_err(|e| CliError::Config(e.to_string()))?;
    out.tolerance("simulation", sw.criterion.tol);
    let res = critical_coupling(&stuart_landau_pair, sw.delta_omega, &sw.grid.values(), &sw.criterion)?;
    let rows: Vec<[f64; 5]> = res
        .runs
        .iter()
        .map(|r| {
            let rep = &r.report;
            [
                r.epsilon,
                rep.s,
                f64::from(u8::from(rep.locked)),
                rep.slips as f64,
                rep.psi_star.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    out.table("sweep", &columns(&["epsilon", "S", "locked", "slips", "psi_star"]), &rows)?;
    out.json(
        "summary",
        &json!({
            "delta_omega": sw.delta_omega,
            "eps_c": res.threshold.eps_c(),
            "threshold": res.threshold,
            "criterion": sw.criterion,
        }),
    )
}

pub fn fit_scaling(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let fc = cfg.fit_scaling.as_ref().ok_or_else(|| missing("fit_scaling"))?;
    fc.criterion.validate().map_err(|e| CliError::Config(e.to_string()))?;
    out.tolerance("simulation", fc.criterion.tol);
    let (fit, all) = scaling_sweep(&stuart_landau_pair, &fc.detunings, &fc.grid.values(), &fc.criterion)?;
    let rows: Vec<[f64; 4]> = all.iter().map(|c| threshold_row(c.delta_omega, &c.threshold)).collect();
    out.table("thresholds", &columns(&["delta_omega", "eps_c", "lo", "hi"]), &rows)?;
    out.json("scaling", &fit)
}
