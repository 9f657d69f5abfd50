//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero when any criterion fails.

use std::path::Path;
use std::time::Instant;

use warpflow::config::Tolerances;
use warpflow::diagnostics::{asymptotic_gaps, asymptotics_report, fit_rate, r_infinity_oracle, Severity};
use warpflow::io::Snapshot;
use warpflow::oracle::{run_identity_suite, VerifyOptions, DEFAULT_SEED};
use warpflow::{parse_config_str, DiagnosticsRecord, MetricPreset, RunConfig, Simulation, Termination, Trajectory};

// Pinned tolerances.
const SOLITON_TOL: f64 = 1e-6;
const AREA_LAW_TOL: f64 = 5e-3;
const RESCALED_AREA_TOL: f64 = 1e-3;
const MONITOR_ABS: f64 = 1e-6;
const MONITOR_H2: f64 = 10.0;
const FIT_R2_MIN: f64 = 0.95;
const GAP_REDUCTION: f64 = 1e3;
const R_INF_TOL: f64 = 2e-3;
const ORDER_ABS: f64 = 1e-8;
/// Joint refinement halves h; a consistent scheme at least halves each residual.
const CROSSCHECK_SHRINK: f64 = 2.0;
/// The criteria on the shared sphere run read samples up to this time.
const EARLY_WINDOW: f64 = 3.0;

type Outcome = Result<(bool, String), String>;
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn cfg(text: &str) -> Result<RunConfig, String> {
    parse_config_str(text).map_err(|e| e.to_string())
}

fn simulate(c: &RunConfig) -> Result<(Simulation, Trajectory), String> {
    let sim = Simulation::new(c).map_err(|e| e.to_string())?;
    let tr = sim.run().map_err(|e| e.to_string())?;
    Ok((sim, tr))
}

fn sphere_text(nodes: [usize; 2], initial: &str, t_end: f64, interval: f64) -> String {
    format!(
        "[manifold]\npreset = \"round_sphere\"\n\n[initial]\n{initial}\n\n[discretization]\nnodes = [{}, {}]\n\n[stepping]\nt_end = {t_end}\ndiag_interval = {interval}\n",
        nodes[0], nodes[1]
    )
}

const COSINE: &str = "profile = \"cosine\"\nbase = 1.0\namplitude = 0.2\nmode = 1";

fn monitor_tol(c: &RunConfig) -> Result<f64, String> {
    let h = c.preset.grid(&c.nodes).map_err(|e| e.to_string())?.max_spacing();
    Ok(MONITOR_ABS + MONITOR_H2 * h * h)
}

/// The axisymmetric sphere run shared by criteria 2 to 5.
struct Shared {
    config: RunConfig,
    sim: Simulation,
    tr: Trajectory,
}

impl Shared {
    fn early(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.tr.records.iter().filter(|r| r.t <= EARLY_WINDOW + 1e-12)
    }
}

fn shared_run() -> Result<Shared, String> {
    let config = cfg(&sphere_text([24, 48], COSINE, 8.0, 0.1))?;
    let (sim, tr) = simulate(&config)?;
    if tr.status != Termination::ReachedEnd {
        return Err(format!("shared run stopped early: {:?}", tr.status));
    }
    Ok(Shared { config, sim, tr })
}

fn soliton() -> Outcome {
    let c = cfg(&sphere_text([32, 64], "profile = \"constant\"\nvalue = 1.0", 1.0, 0.1)
        .replace("diag_interval", "integrator = \"rk4\"\ndiag_interval"))?;
    let (_, tr) = simulate(&c)?;
    let exact = 0.5_f64.exp();
    let err = tr.final_state.u().iter().map(|u| (u - exact).abs()).fold(0.0, f64::max);
    let ok = tr.status == Termination::ReachedEnd && tr.final_state.t == 1.0 && err <= SOLITON_TOL;
    Ok((ok, format!("max|u - e^(1/2)| = {err:.3e} at t = {} (tol {SOLITON_TOL:.0e})", tr.final_state.t)))
}

fn area_law(s: &Shared) -> Outcome {
    let growth = s.early().map(|r| r.area_growth_error).fold(0.0, f64::max);
    let rescaled = s.early().map(|r| r.rescaled_area_dev).fold(0.0, f64::max);
    let ok = growth <= AREA_LAW_TOL && rescaled <= RESCALED_AREA_TOL;
    Ok((
        ok,
        format!(
            "max relative area-law error {growth:.3e} (tol {AREA_LAW_TOL:.0e}), rescaled area drift {rescaled:.3e} (tol {RESCALED_AREA_TOL:.0e}) over t <= {EARLY_WINDOW}"
        ),
    ))
}

fn bound_monitors(s: &Shared) -> Outcome {
    let tol = monitor_tol(&s.config)?;
    let fatal = s.tr.breaches.iter().filter(|b| b.severity == Severity::Fatal && b.t <= EARLY_WINDOW + 1e-12).count();
    let first = &s.tr.records[0];
    let (lo, hi) = (first.u_resc_min, first.u_resc_max);
    let below = s.early().map(|r| lo - r.u_resc_min).fold(f64::NEG_INFINITY, f64::max);
    let above = s.early().map(|r| r.u_resc_max - hi).fold(f64::NEG_INFINITY, f64::max);
    let ok = fatal == 0 && below <= tol && above <= tol;
    Ok((
        ok,
        format!(
            "{fatal} fatal breaches; rescaled u leaves [{lo:.4}, {hi:.4}] by at most {:.3e} (tol {tol:.3e})",
            below.max(above).max(0.0)
        ),
    ))
}

fn gradient_decay(s: &Shared) -> Outcome {
    let tol = monitor_tol(&s.config)?;
    let sup0 = s.tr.records[0].grad_sq_max;
    let worst = s.early().map(|r| r.grad_sq_max * (r.lambda_cert * r.t).exp() - sup0).fold(f64::NEG_INFINITY, f64::max);
    let lambda = s.early().last().map(|r| r.lambda_cert).unwrap_or(0.0);
    let (ts, vs): (Vec<f64>, Vec<f64>) = s.early().map(|r| (r.t, r.grad_u_resc_max)).unzip();
    let fit = fit_rate("grad_u_resc_max", &ts, &vs).map_err(|e| e.to_string())?;
    let ok = worst <= tol && lambda > 0.0 && fit.rate < 0.0 && fit.r_squared > FIT_R2_MIN;
    Ok((
        ok,
        format!(
            "lambda_cert = {lambda:.4}, max excess of |Dphi|^2 e^(lambda t) over sup|Dphi0|^2 = {worst:.3e} (tol {tol:.3e}), max|Du~| rate {:.4} R2 {:.4}",
            fit.rate, fit.r_squared
        ),
    ))
}

fn asymptotics(s: &Shared) -> Outcome {
    let c = &s.config;
    let r4 = r_infinity_oracle(c.preset, &c.initial, &c.nodes, 4).map_err(|e| e.to_string())?;
    let g0 = asymptotic_gaps(&s.sim.initial_state().phi, 0.0, &s.sim.metric, r4).map_err(|e| e.to_string())?;
    let g1 =
        asymptotic_gaps(&s.tr.final_state.phi, s.tr.final_state.t, &s.sim.metric, r4).map_err(|e| e.to_string())?;
    let red = [("u", g0.u / g1.u), ("metric", g0.metric / g1.metric), ("weingarten", g0.weingarten / g1.weingarten)];
    let est = s.tr.records.last().map(|r| r.r_inf_est).unwrap_or(f64::NAN);
    let rel = (est / r4 - 1.0).abs();
    let ok = red.iter().all(|(_, x)| *x >= GAP_REDUCTION) && rel <= R_INF_TOL;
    let text: Vec<String> = red.iter().map(|(n, x)| format!("{n} {x:.3e}")).collect();
    Ok((
        ok,
        format!(
            "gap reductions by t = {}: {} (need {GAP_REDUCTION:.0e}); r_inf_est {est:.7} vs oracle {r4:.7} ({rel:.2e}, tol {R_INF_TOL:.0e})",
            s.tr.final_state.t,
            text.join(", ")
        ),
    ))
}

fn identity_oracle() -> Outcome {
    let cases = [
        (MetricPreset::Circle, vec![32]),
        (MetricPreset::RoundSphere, vec![16, 32]),
        (MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 2 }, vec![16, 32]),
        (MetricPreset::FlatTorus, vec![16, 16]),
    ];
    let mut failing = Vec::new();
    for (preset, base_counts) in cases {
        let r = run_identity_suite(&VerifyOptions {
            preset,
            base_counts,
            seed: DEFAULT_SEED,
            tolerances: Tolerances::default(),
            defect: 0.0,
        })
        .map_err(|e| e.to_string())?;
        failing.extend(r.failing().iter().map(|x| format!("{}:{}", preset.name(), x.identity)));
    }
    let detail = if failing.is_empty() {
        "all identities pass on circle, round_sphere, perturbed_sphere and flat_torus".to_string()
    } else {
        format!("failing: {}", failing.join(", "))
    };
    Ok((failing.is_empty(), detail))
}

fn crosscheck_maxima(nodes: [usize; 2]) -> Result<[f64; 5], String> {
    let c = cfg(&sphere_text(nodes, COSINE, 0.5, 0.1))?;
    let (_, tr) = simulate(&c)?;
    let mut m = [0.0_f64; 5];
    for r in tr.records.iter().skip(1) {
        let xs = [r.xc_metric, r.xc_measure, r.xc_mean_curvature, r.xc_rescaled_phi, r.xc_rescaled_measure];
        for (a, x) in m.iter_mut().zip(xs) {
            if !x.is_finite() {
                return Err(format!("non-finite cross-check at t = {}", r.t));
            }
            *a = a.max(x);
        }
    }
    Ok(m)
}

fn crosschecks() -> Outcome {
    let coarse = crosscheck_maxima([16, 32])?;
    let fine = crosscheck_maxima([32, 64])?;
    let names = ["metric", "measure", "mean_curvature", "rescaled_phi", "rescaled_measure"];
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 0..5 {
        let ratio = coarse[k] / fine[k];
        ok &= ratio >= CROSSCHECK_SHRINK;
        parts.push(format!("{} {:.2e}->{:.2e}", names[k], coarse[k], fine[k]));
    }
    Ok((ok, format!("16x32 -> 32x64: {} (need shrink >= {CROSSCHECK_SHRINK})", parts.join(", "))))
}

fn phi_series(dir: &Path, samples: usize) -> Result<Vec<Vec<f64>>, String> {
    (0..samples)
        .map(|k| {
            Snapshot::read(&dir.join(format!("snapshot_phi_{k:05}.txt"))).map(|s| s.values).map_err(|e| e.to_string())
        })
        .collect()
}

fn comparison() -> Outcome {
    let lower = "profile = \"cosine\"\nbase = 1.0\namplitude = 0.2\nmode = 1";
    let upper = "profile = \"random\"\nbase = 1.35\namplitude = 0.1\nseed = 5";
    let mut series = Vec::new();
    let mut tol = 0.0;
    let mut samples = 0;
    for initial in [lower, upper] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let text = format!(
            "{}\n[output]\ndir = {:?}\nsnapshot_fields = [\"phi\"]\nsnapshot_every = 1\n",
            sphere_text([16, 32], initial, 2.0, 0.1),
            dir.path().display().to_string()
        );
        let c = cfg(&text)?;
        let h = c.preset.grid(&c.nodes).map_err(|e| e.to_string())?.max_spacing();
        tol = ORDER_ABS + MONITOR_H2 * h * h;
        let (_, tr) = simulate(&c)?;
        if tr.status != Termination::ReachedEnd {
            return Err(format!("run stopped: {:?}", tr.status));
        }
        samples = tr.records.len();
        series.push(phi_series(dir.path(), samples)?);
    }
    let mut worst = f64::NEG_INFINITY;
    let mut min_gap = f64::INFINITY;
    for (a, b) in series[0].iter().zip(&series[1]) {
        for (lo, hi) in a.iter().zip(b) {
            worst = worst.max(lo - hi);
            min_gap = min_gap.min(hi - lo);
        }
    }
    let gap_at = |k: usize| series[0][k].iter().zip(&series[1][k]).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    let final_gap = gap_at(samples - 1);
    let initial_gap = series[0][0].iter().zip(&series[1][0]).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min);
    Ok((
        worst <= tol,
        format!(
            "{samples} samples; min phi gap {min_gap:.6e} (initially {initial_gap:.6e}, final {final_gap:.6e}), max violation {:.3e} (tol {tol:.3e})",
            worst.max(0.0)
        ),
    ))
}

fn negative_control() -> Outcome {
    let c = cfg(
        "[manifold]\npreset = \"flat_torus\"\n\n[initial]\nprofile = \"series\"\nbase = 1.0\nterms = [{ l = 1, m = 0, amplitude = 0.1 }, { l = 1, m = 1, amplitude = 0.05 }]\n\n[discretization]\nnodes = [16, 16]\n\n[stepping]\nt_end = 2.0\ndiag_interval = 0.05\n",
    )?;
    let (_, tr) = simulate(&c)?;
    let flag = tr.records.iter().all(|r| r.ric_positive == 0.0);
    let lambda = tr.records.iter().map(|r| r.lambda_cert.abs()).fold(0.0, f64::max);
    let gradient_breaches = tr.breaches.iter().filter(|b| b.monitor == "gradient_decay").count();
    let reported = tr.records.iter().all(|r| r.grad_sq_max.is_finite());
    let report = asymptotics_report(&tr.records).map_err(|e| e.to_string())?;
    let ok = tr.status == Termination::ReachedEnd
        && flag
        && lambda == 0.0
        && gradient_breaches == 0
        && reported
        && !report.conforming
        && report.to_string().contains("condition Ric>0 violated");
    Ok((
        ok,
        format!(
            "status {:?}, condition flag set on every row: {}, max lambda_cert {lambda}, gradient monitor breaches {gradient_breaches}, |Dphi|^2 still reported: {reported}",
            tr.status, flag
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let shared = shared_run();
    let on_shared = |f: fn(&Shared) -> Outcome| -> Outcome {
        match &shared {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        }
    };
    let criteria: Vec<Criterion> = vec![
        ("round-sphere soliton", Box::new(soliton)),
        ("area law", Box::new(move || on_shared(area_law))),
        ("bound monitors", Box::new(move || on_shared(bound_monitors))),
        ("gradient decay", Box::new(move || on_shared(gradient_decay))),
        ("asymptotics", Box::new(move || on_shared(asymptotics))),
        ("identity oracle", Box::new(identity_oracle)),
        ("evolution cross-checks", Box::new(crosschecks)),
        ("comparison principle", Box::new(comparison)),
        ("negative control", Box::new(negative_control)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "criterion {} {:<24} {}  {detail} [{:.1}s]",
            k + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
