//! Acceptance checks, one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Statistical criteria run at desk scale. Set `DOPO_FULL_SCALE=1` to run the
//! fringe criterion on the full 200,000-trajectory superposition ensemble.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use dopo_core::convergence::{ou_weak_convergence, OuProblem, DEFAULT_STEP_SIZES};
use dopo_core::experiment::{
    case_a_spec, case_b_spec, preset, run_experiment, superposition_spec, ExperimentResult, ExperimentSpec,
    RunOptions,
};
use dopo_core::model::{derive_params, DopoVariant};
use dopo_core::observables::{
    classical_mixture_covariance, distribution_from_modes, estimate_moments, fit_gaussian, fringe_visibility,
    gaussian_discord, quadrature_stats, resolve_discord_convention, DiscordConvention, ModeMap,
    QuadratureDistribution, QuadratureTarget,
};
use dopo_core::output::{distribution_csv, series_csv};
use dopo_core::sde::{run_batch, IntegrationConfig};
use num_complex::Complex64;

type Outcome = Result<String, String>;

struct Harness {
    failures: usize,
}

impl Harness {
    fn check(&mut self, id: &str, name: &str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                self.failures += 1;
                println!("[FAIL] {id} {name}: {detail} ({secs:.1} s)");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(spec: &ExperimentSpec) -> Result<ExperimentResult, String> {
    let r = run_experiment(spec, &RunOptions::default()).map_err(|e| e.to_string())?;
    if let Some(l) = r.failed_labels().first() {
        return Err(format!("label {} failed: {}", l.label, l.error.as_deref().unwrap_or("")));
    }
    Ok(r)
}

fn single_label(mut spec: ExperimentSpec, label: &str) -> ExperimentSpec {
    spec.sweep.retain(|e| e.label == label);
    assert_eq!(spec.sweep.len(), 1, "label {label} not in preset");
    spec
}

/// Rounds to the number of significant figures shown in `printed`.
fn matches_printed(value: f64, printed: &str) -> bool {
    let digits = printed.trim_start_matches(['0', '.']).len() as i32;
    let p: f64 = printed.parse().unwrap();
    let scale = 10f64.powi(digits - 1 - p.abs().log10().floor() as i32);
    (value * scale).round() / scale == p
}

/// Minimum of a centered five-point moving average and the τ at its center.
fn smoothed_min(tau: &[f64], v: &[f64]) -> (f64, f64) {
    (2..v.len() - 2)
        .map(|i| (v[i - 2..=i + 2].iter().sum::<f64>() / 5.0, tau[i]))
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a })
}

fn ac1() -> Outcome {
    let tuples = [
        (case_a_spec(), ["0.995", "0.980", "0.67", "0.33", "0.020"], ["0.0050", "0.020", "0.33", "0.67", "0.98"]),
        (case_b_spec(), ["0.999", "0.995", "0.990", "0.952", "0.909"], ["0.0010", "0.0050", "0.0099", "0.048", "0.091"]),
    ];
    let mut n = 0;
    for (spec, xi, th) in tuples {
        for ((entry, xi), th) in spec.sweep.iter().zip(xi).zip(th) {
            let d = derive_params(&entry.overrides.apply(&spec.base)).map_err(|e| e.to_string())?;
            ensure(matches_printed(d.xi, xi), || format!("{}: xi = {} vs {xi}", entry.label, d.xi))?;
            ensure(matches_printed(d.lambda_th, th), || format!("{}: lambda_th = {} vs {th}", entry.label, d.lambda_th))?;
            n += 1;
        }
    }
    Ok(format!("{n} (xi, lambda_th) tuples match"))
}

fn ac2() -> Outcome {
    let mut detail = Vec::new();
    for (scheme, expected) in [(dopo_core::sde::Scheme::EulerMaruyama, 1.0), (dopo_core::sde::Scheme::WeakOrder2Platen, 2.0)] {
        let r = ou_weak_convergence(&OuProblem::default(), scheme, &DEFAULT_STEP_SIZES, 100_000, 2024)
            .map_err(|e| e.to_string())?;
        ensure((r.slope - expected).abs() <= 0.3, || format!("{} slope {:.3}", scheme.short_name(), r.slope))?;
        detail.push(format!("{} slope {:.3}", scheme.short_name(), r.slope));
    }
    Ok(detail.join(", "))
}

fn ac3() -> Outcome {
    let mut labels = 0;
    for mut spec in [case_a_spec(), case_b_spec(), superposition_spec()] {
        spec.n_trajectories = 2000;
        spec.sample_times = vec![0.0];
        spec.outputs = dopo_core::experiment::OutputRequest::all_series();
        let r = run(&spec)?;
        for s in &r.series {
            let get = |c: &str| s.at(c, 0.0).ok_or_else(|| format!("{}: no {c} at tau 0", s.label));
            for c in ["var_p1", "var_p2"] {
                let v = get(c)?;
                ensure((v.value - 0.25).abs() < 1e-12, || format!("{} {c} = {}", s.label, v.value))?;
            }
            let epr = get("epr_sum")?;
            ensure((epr.value - 1.0).abs() < 1e-12, || format!("{} epr_sum = {}", s.label, epr.value))?;
            let d = get("discord")?;
            ensure(d.value.abs() < 1e-12, || format!("{} discord = {}", s.label, d.value))?;
            for c in ["n1", "n2"] {
                let n = get(c)?;
                ensure(n.value.abs() <= n.se.max(1e-12), || format!("{} {c} = {} ± {}", s.label, n.value, n.se))?;
            }
            labels += 1;
        }
        // Var(x_j) is not a series column; take it from the τ = 0 ensemble.
        for entry in &spec.sweep {
            let p = entry.overrides.apply(&spec.base);
            let system = dopo_core::model::build_system(&p, spec.variant, p.schedule(), spec.boundary)
                .map_err(|e| e.to_string())?;
            let config = IntegrationConfig {
                dt: spec.dt,
                t_final: 0.0,
                scheme: spec.scheme,
                sample_times: vec![0.0],
                master_seed: 5,
                n_trajectories: 200,
                max_failure_fraction: 0.0,
            };
            let (snaps, _) = run_batch(&system, &config, &system.vacuum()).map_err(|e| e.to_string())?;
            let m = estimate_moments(&snaps[0], &ModeMap::for_system(&system)).map_err(|e| e.to_string())?;
            let q = quadrature_stats(&m.mean);
            for j in 0..2 {
                ensure((q.var_x[j] - 0.25).abs() < 1e-12 && (q.var_p[j] - 0.25).abs() < 1e-12, || {
                    format!("{}: Var(x{}) = {}, Var(p{}) = {}", entry.label, j + 1, q.var_x[j], j + 1, q.var_p[j])
                })?;
            }
        }
    }
    Ok(format!("{labels} labels: Var = 0.25, EPR = 1, discord = 0, n = 0"))
}

fn case_b_gc1(theta: f64) -> ExperimentSpec {
    let mut spec = single_label(preset("case-b-desk").unwrap(), "gc_1");
    spec.sweep[0].overrides.theta = Some(theta);
    let mut times = vec![0.0, 1.0, 1.25];
    times.extend((2..=25).map(f64::from));
    spec.sample_times = times;
    spec
}

/// τ ≥ 1 rows with mean photon number below one, i.e. before the
/// oscillation has built up.
fn pre_oscillation_rows(r: &ExperimentResult) -> Vec<f64> {
    let s = &r.series[0];
    let tau = s.column("tau").unwrap();
    let n1 = s.column("n1").unwrap();
    tau.iter().zip(&n1).take_while(|(_, n)| **n < 1.0).filter(|(t, _)| **t >= 1.0).map(|(t, _)| *t).collect()
}

fn ac4(out_of_phase: &ExperimentResult) -> Outcome {
    let in_phase = run(&case_b_gc1(0.0))?;
    let params = case_b_gc1(0.0).label_params("gc_1").unwrap();
    let tau_th = derive_params(&params).unwrap().lambda_th * params.t_f / params.lambda_f;
    let mut detail = Vec::new();
    for (r, sign, name) in [(out_of_phase, 1.0, "theta=pi"), (&in_phase, -1.0, "theta=0")] {
        let rows = pre_oscillation_rows(r);
        ensure(rows.len() >= 5 && rows[0] < tau_th, || format!("{name}: window {rows:?}"))?;
        let mut min_z = f64::INFINITY;
        for &t in &rows {
            let s = &r.series[0];
            let (xx, pp) = (s.at("corr_xx", t).unwrap(), s.at("corr_pp", t).unwrap());
            let (zx, zp) = (-sign * xx.value / xx.se, sign * pp.value / pp.se);
            ensure(zx > 3.0 && zp > 3.0, || {
                format!("{name} tau {t}: corr_xx {:.5} ± {:.5}, corr_pp {:.5} ± {:.5}", xx.value, xx.se, pp.value, pp.se)
            })?;
            min_z = min_z.min(zx).min(zp);
        }
        detail.push(format!("{name}: {} rows in tau [{}, {}], min |z| {min_z:.1}", rows.len(), rows[0], rows[rows.len() - 1]));
    }
    Ok(format!("{} (threshold crossed at tau {tau_th:.2})", detail.join("; ")))
}

fn ac5(out_of_phase: &ExperimentResult) -> Outcome {
    let s = &out_of_phase.series[0];
    let rows = pre_oscillation_rows(out_of_phase);
    let (t, e) = rows
        .iter()
        .map(|&t| (t, s.at("epr_sum", t).unwrap()))
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .ok_or("empty window")?;
    let z = (1.0 - e.value) / e.se;
    ensure(z > 3.0, || format!("min EPR sum {:.4} ± {:.4} at tau {t}", e.value, e.se))?;
    Ok(format!("EPR sum {:.4} ± {:.4} at tau {t} ({z:.1} SE below 1)", e.value, e.se))
}

fn ac6() -> Outcome {
    let spec = single_label(preset("case-a-desk").unwrap(), "gs_0.5");
    let r = run(&spec)?;
    let c = r.series[0].at("corr_xx", 200.0).ok_or("no tau 200 row")?;
    ensure(c.value <= -0.99, || format!("corr_xx(200) = {}", c.value))?;
    Ok(format!("corr_xx(t_f) = {:.5} ± {:.1e} with {} trajectories", c.value, c.se, spec.n_trajectories))
}

fn superposition_desk() -> ExperimentSpec {
    let mut spec = preset("superposition-desk").unwrap();
    // the vacuum and a below-threshold Gaussian state serve as baselines
    let mut times = vec![0.0, 10.0];
    times.extend(&spec.outputs.distributions.as_ref().unwrap().times);
    spec.outputs.distributions.as_mut().unwrap().times = times;
    spec
}

fn ac7(coupled: &ExperimentResult) -> Outcome {
    let mut single = single_label(preset("superposition-desk").unwrap(), "superposition");
    single.sweep[0].overrides.zeta = Some(0.0);
    // without coupling the path fields are inert and the path-eliminated model is exact
    single.variant = DopoVariant::PathEliminated4;
    single.outputs.distributions = None;
    let single = run(&single)?;

    let mut detail = Vec::new();
    for (r, name) in [(coupled, "coupled"), (&single, "zeta=0")] {
        let s = &r.series[0];
        let tau = s.column("tau").unwrap();
        for c in ["var_p1", "var_p2"] {
            let (m, t) = smoothed_min(&tau, &s.column(c).unwrap());
            let ok = if name == "coupled" { (m - 0.043).abs() <= 0.01 } else { m >= 0.115 };
            ensure(ok, || format!("{name} min {c} = {m:.4} at tau {t}"))?;
            detail.push(format!("{name} {c} {m:.4} @ {t}"));
        }
    }
    Ok(format!("{} (5-point smoothed minima, {} trajectories)", detail.join(", "), coupled.metadata.spec.n_trajectories))
}

fn ac8() -> Outcome {
    let res = resolve_discord_convention();
    let selected = res.selected.ok_or("no convention within 5% of the anchor")?;
    ensure(selected == DiscordConvention::default(), || format!("selected {selected:?} is not the default"))?;
    let d = gaussian_discord(&classical_mixture_covariance(50.0)).map_err(|e| e.to_string())?;
    let rel = (d.value - 0.02356).abs() / 0.02356;
    ensure(rel < 0.05, || format!("discord {} ({:.1}% off)", d.value, 100.0 * rel))?;
    ensure(res.table.len() >= 4, || "convention table incomplete".into())?;
    Ok(format!("D = {:.5} ({:.2}% off) under {:?}", d.value, 100.0 * rel, selected))
}

fn ac9() -> Outcome {
    let mut spec = single_label(case_a_spec(), "gs_0.05");
    spec.sweep[0].label = "gs_0.5_gc_25".into();
    spec.sweep[0].overrides.gamma_s = Some(0.5);
    spec.sweep[0].overrides.gamma_c = Some(25.0);
    spec.n_trajectories = 5000;
    spec.sample_times = (0..=10).map(|k| 20.0 * k as f64).collect();
    let six = run(&spec)?;
    spec.variant = DopoVariant::PathEliminated4;
    let four = run(&spec)?;
    let mut worst = (0.0f64, String::new());
    for &t in &spec.sample_times {
        for c in ["n1", "n2", "corr_xx", "corr_pp"] {
            let (a, b) = (six.series[0].at(c, t).unwrap(), four.series[0].at(c, t).unwrap());
            let diff = (a.value - b.value).abs();
            if diff == 0.0 {
                continue;
            }
            let z = diff / (a.se * a.se + b.se * b.se).sqrt();
            ensure(z <= 3.0, || format!("{c} at tau {t}: {} ± {} vs {} ± {}", a.value, a.se, b.value, b.se))?;
            if z > worst.0 {
                worst = (z, format!("{c} @ {t}"));
            }
        }
    }
    Ok(format!("11 times x 4 observables agree, largest deviation {:.2} SE ({})", worst.0, worst.1))
}

fn ac10(coupled: &ExperimentResult) -> Outcome {
    let grid: Vec<f64> = (0..401).map(|k| -4.0 + 0.02 * k as f64).collect();
    let zero = Complex64::new(0.0, 0.0);
    let vac = distribution_from_modes(&vec![(zero, zero); 1000], QuadratureTarget::P1, &grid).map_err(|e| e.to_string())?;
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let worst = grid.iter().zip(&vac.density).map(|(p, d)| (d - c * (-2.0 * p * p).exp()).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-12, || format!("vacuum P(p) deviates by {worst:e}"))?;
    let mut lo: f64 = f64::INFINITY;
    let mut hi: f64 = f64::NEG_INFINITY;
    for d in &coupled.distributions {
        let i = d.distribution.integral();
        ensure((0.9..=1.1).contains(&i), || format!("{:?} at tau {}: integral {i}", d.distribution.target, d.tau))?;
        lo = lo.min(i);
        hi = hi.max(i);
    }
    Ok(format!("vacuum max deviation {worst:.1e}; {} simulated integrals in [{lo:.4}, {hi:.4}]", coupled.distributions.len()))
}

fn find_dist<'a>(r: &'a ExperimentResult, target: QuadratureTarget, tau: f64) -> &'a QuadratureDistribution {
    &r.distributions.iter().find(|d| d.tau == tau && d.distribution.target == target).unwrap().distribution
}

fn ac11(coupled: &ExperimentResult) -> Outcome {
    let window = [29.0, 31.0, 33.0, 35.0];
    let targets = [QuadratureTarget::P1, QuadratureTarget::P2];
    if std::env::var("DOPO_FULL_SCALE").is_ok_and(|v| v == "1") {
        let mut spec = superposition_spec();
        spec.sample_times = window.to_vec();
        let r = run(&spec)?;
        for &t in &window {
            let v = targets.map(|tg| fringe_visibility(find_dist(&r, tg, t)));
            if v.iter().all(|f| f.found && f.visibility > 0.0) {
                return Ok(format!(
                    "full scale: fringes in P(p1) and P(p2) at tau {t}, visibility {:.3} / {:.3}",
                    v[0].visibility, v[1].visibility
                ));
            }
        }
        return Err("full scale: no tau with fringes in both P(p1) and P(p2)".into());
    }
    let residual = |tg, t| fit_gaussian(find_dist(coupled, tg, t)).map(|f| f.residual).map_err(|e| e.to_string());
    let mut baseline = 0.0f64;
    for tg in targets {
        baseline = baseline.max(residual(tg, 0.0)?).max(residual(tg, 10.0)?);
    }
    for &t in &window {
        let r = [residual(targets[0], t)?, residual(targets[1], t)?];
        if r.iter().all(|&x| x > baseline) {
            return Ok(format!(
                "desk tier: P(p) fit residuals {:.4} / {:.4} at tau {t} exceed vacuum and Gaussian baseline {baseline:.1e}",
                r[0], r[1]
            ));
        }
    }
    Err(format!("desk tier: no tau in [29, 35] with P(p) residuals above baseline {baseline:.1e}"))
}

fn ac12() -> Outcome {
    let mut spec = preset("case-b-desk").unwrap();
    spec.n_trajectories = 300;
    spec.sample_times = (0..=6).map(f64::from).collect();
    let dump = |threads| -> Result<String, String> {
        let r = run_experiment(&spec, &RunOptions { threads: Some(threads), progress: false }).map_err(|e| e.to_string())?;
        let mut all: String = r.series.iter().map(series_csv).collect();
        all.extend(r.distributions.iter().map(distribution_csv));
        Ok(all)
    };
    let (a, b) = (dump(1)?, dump(4)?);
    ensure(a == b, || "CSV output differs between 1 and 4 threads".into())?;
    let mut dist = superposition_spec();
    dist.n_trajectories = 300;
    dist.sample_times = vec![0.0, 29.0];
    dist.outputs.distributions.as_mut().unwrap().times = vec![29.0];
    let dd = |threads| -> Result<String, String> {
        let r = run_experiment(&dist, &RunOptions { threads: Some(threads), progress: false }).map_err(|e| e.to_string())?;
        Ok(r.distributions.iter().map(distribution_csv).collect())
    };
    ensure(dd(1)? == dd(4)?, || "distribution CSV differs between 1 and 4 threads".into())?;
    Ok(format!("{} bytes of series CSV identical for 1 and 4 threads; distributions identical", a.len()))
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };

    h.check("AC1", "threshold formulas", ac1);
    h.check("AC2", "integrator weak order", ac2);
    h.check("AC3", "vacuum invariants", ac3);

    let case_b = run(&case_b_gc1(std::f64::consts::PI));
    h.check("AC4", "correlation signs", || ac4(case_b.as_ref().map_err(Clone::clone)?));
    h.check("AC5", "entanglement window", || ac5(case_b.as_ref().map_err(Clone::clone)?));
    h.check("AC6", "final-state injection locking", ac6);

    let coupled = run(&superposition_desk());
    h.check("AC7", "squeezing depth", || ac7(coupled.as_ref().map_err(Clone::clone)?));
    h.check("AC8", "discord oracle", ac8);
    h.check("AC9", "elimination consistency", ac9);
    h.check("AC10", "distribution normalization and vacuum shape", || ac10(coupled.as_ref().map_err(Clone::clone)?));
    h.check("AC11", "fringe detection", || ac11(coupled.as_ref().map_err(Clone::clone)?));
    h.check("AC12", "determinism", ac12);

    if h.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", h.failures);
        ExitCode::FAILURE
    }
}
