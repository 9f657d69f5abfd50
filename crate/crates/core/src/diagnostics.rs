//! Per-sample monitors, evolution cross-checks, rate fits and asymptotics.

use std::fmt;

use crate::base::{christoffel_base, MetricField, MetricPreset, MetricSource};
use crate::config::Tolerances;
use crate::error::{FlowError, Result};
use crate::graph::{graph_quantities, GraphGeometry};
use crate::grid::{theta_parity, Stencil};
use crate::initial::InitialProfile;
use crate::tensor::{identity, norm2, Mat2, ZERO2};

/// `∫ √det g` over the chart. Periodic axes use the trapezoid rule and the
/// cell-centred polar axis the midpoint rule; on uniform grids both reduce
/// to a weighted node sum.
pub fn area(geom: &GraphGeometry, metric: &MetricField) -> f64 {
    let n = metric.dim();
    let w = metric.grid.cell_measure();
    geom.points.iter().map(|p| crate::tensor::det(&p.g, n).sqrt()).sum::<f64>() * w
}

/// `|Mⁿ|` by the same quadrature.
pub fn base_area(metric: &MetricField) -> f64 {
    metric.sqrt_det.iter().sum::<f64>() * metric.grid.cell_measure()
}

/// `r∞ = (|M₀| / |Mⁿ|)^{1/n}`.
pub fn r_infinity(area0: f64, base: f64, n: usize) -> Result<f64> {
    if !(area0 > 0.0 && base > 0.0) {
        return Err(FlowError::ConfigGeneral(format!("areas must be positive, got {area0} and {base}")));
    }
    Ok((area0 / base).powf(1.0 / n as f64))
}

/// `r∞` of the initial data measured on a grid refined `factor` times.
pub fn r_infinity_oracle(
    preset: MetricPreset,
    profile: &InitialProfile,
    counts: &[usize],
    factor: usize,
) -> Result<f64> {
    let grid = preset.grid(counts)?.refined(factor)?;
    let metric = crate::base::eval_metric(preset, &grid, MetricSource::Analytic)?;
    let u0 = profile.sample(&preset, &grid)?;
    let phi: Vec<f64> = u0.iter().map(|u| u.ln()).collect();
    let geom = graph_quantities(&phi, &metric, &Stencil::new(&grid))?;
    r_infinity(area(&geom, &metric), base_area(&metric), grid.dim())
}

macro_rules! record {
    ($($field:ident),* $(,)?) => {
        /// One row of the diagnostics table.
        #[derive(Debug, Clone, Default, PartialEq)]
        pub struct DiagnosticsRecord {
            $(pub $field: f64,)*
        }

        impl DiagnosticsRecord {
            pub const FIELDS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field),*]
            }

            pub fn from_values(v: &[f64]) -> Option<Self> {
                if v.len() != Self::FIELDS.len() {
                    return None;
                }
                let mut it = v.iter().copied();
                Some(DiagnosticsRecord { $($field: it.next()?,)* })
            }

            /// Value of a column by name.
            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $(stringify!($field) => Some(self.$field),)*
                    _ => None,
                }
            }
        }
    };
}

record!(
    t,
    step,
    dt,
    area,
    area_ratio,
    area_growth_error,
    rescaled_area,
    rescaled_area_dev,
    phi_resc_min,
    phi_resc_max,
    u_resc_min,
    u_resc_max,
    inv_f_min,
    inv_f_max,
    uhv_min,
    uhv_max,
    h_resc_min,
    h_resc_max,
    grad_sq_max,
    grad_u_resc_max,
    hess_u_resc_max,
    metric_gap,
    weingarten_gap,
    u_gap,
    r_inf_est,
    lambda_cert,
    mu_min,
    f_sup,
    ric_positive,
    h_form_discrepancy,
    xc_metric,
    xc_measure,
    xc_rescaled_measure,
    xc_mean_curvature,
    xc_rescaled_phi,
    warnings,
    fatal,
);

/// Columns written as integers.
pub const INTEGER_FIELDS: [&str; 4] = ["step", "ric_positive", "warnings", "fatal"];

/// Quantities frozen at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub phi_min: f64,
    pub phi_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub inv_f_min: f64,
    pub inv_f_max: f64,
    pub uhv_min: f64,
    pub uhv_max: f64,
    pub grad_sq_max: f64,
    /// Lower bound `c` for `H e^{t/n}`.
    pub h_lower: f64,
    /// Upper bound `C` for `H e^{t/n}`.
    pub h_upper: f64,
    pub area0: f64,
    pub base_area: f64,
    pub r_inf: f64,
}

fn range(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

impl Baseline {
    pub fn capture(phi0: &[f64], geom0: &GraphGeometry, metric: &MetricField) -> Result<Self> {
        let pts = &geom0.points;
        let (phi_min, phi_max) = range(phi0.iter().copied());
        let (u_min, u_max) = range(pts.iter().map(|p| p.u));
        let (inv_f_min, inv_f_max) = range(pts.iter().map(|p| 1.0 / p.f));
        let (uhv_min, uhv_max) = range(pts.iter().map(|p| p.u * p.mean_curvature / p.v));
        let grad_sq_max = pts.iter().map(|p| p.grad_sq).fold(0.0, f64::max);
        let area0 = area(geom0, metric);
        let base = base_area(metric);
        Ok(Baseline {
            phi_min,
            phi_max,
            u_min,
            u_max,
            inv_f_min,
            inv_f_max,
            uhv_min,
            uhv_max,
            grad_sq_max,
            h_lower: uhv_min / u_max,
            h_upper: uhv_max * (1.0 + grad_sq_max).sqrt() / u_min,
            area0,
            base_area: base,
            r_inf: r_infinity(area0, base, metric.dim())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warn,
    Fatal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breach {
    pub monitor: &'static str,
    pub t: f64,
    pub excess: f64,
    pub tolerance: f64,
    pub severity: Severity,
}

impl fmt::Display for Breach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}: {} exceeded by {:.3e} (tolerance {:.3e}) at t = {:.6}",
            self.severity, self.monitor, self.excess, self.tolerance, self.t
        )
    }
}

/// Running extrema needed by the certified decay rate. Saved in checkpoints
/// so that resumed runs report the same values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorState {
    pub mu_min: f64,
    pub f_sup: f64,
}

impl Default for MonitorState {
    fn default() -> Self {
        MonitorState { mu_min: f64::INFINITY, f_sup: 0.0 }
    }
}

/// Residuals of the evolution equations at one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CrossChecks {
    pub metric: f64,
    pub measure: f64,
    pub rescaled_measure: f64,
    pub mean_curvature: f64,
    pub rescaled_phi: f64,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    pub baseline: Baseline,
    pub tolerance: f64,
    pub state: MonitorState,
    pub delta_ric: f64,
}

/// Asymptotic gaps in σ-norms against a reference radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticGaps {
    /// `max |g̃ − r² σ|_σ`
    pub metric: f64,
    /// `max |h̃♯ − r⁻¹ Id|_σ`
    pub weingarten: f64,
    /// `max |ũ − r|`
    pub u: f64,
}

/// Norm of a (1,1)-tensor `t[i][j] = T^i_j` measured with σ.
fn mixed_norm(sigma: &Mat2, sigma_inv: &Mat2, t: &Mat2, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += sigma[i][k] * sigma_inv[j][l] * t[i][j] * t[k][l];
                }
            }
        }
    }
    s.max(0.0).sqrt()
}

pub fn gaps_from_geometry(geom: &GraphGeometry, metric: &MetricField, t: f64, r: f64) -> AsymptoticGaps {
    let n = metric.dim();
    let shrink = (-t / n as f64).exp();
    let grow = 1.0 / shrink;
    let mut gaps = AsymptoticGaps { metric: 0.0, weingarten: 0.0, u: 0.0 };
    for (idx, p) in geom.points.iter().enumerate() {
        let s = &metric.sigma[idx];
        let si = &metric.sigma_inv[idx];
        let mut dg = ZERO2;
        let mut dw = ZERO2;
        let id = identity(n);
        for i in 0..n {
            for j in 0..n {
                dg[i][j] = shrink * shrink * p.g[i][j] - r * r * s[i][j];
                dw[i][j] = grow * p.weingarten[i][j] - id[i][j] / r;
            }
        }
        gaps.metric = gaps.metric.max(norm2(si, &dg, n));
        gaps.weingarten = gaps.weingarten.max(mixed_norm(s, si, &dw, n));
        gaps.u = gaps.u.max((p.u * shrink - r).abs());
    }
    gaps
}

pub fn asymptotic_gaps(phi: &[f64], t: f64, metric: &MetricField, r: f64) -> Result<AsymptoticGaps> {
    let geom = graph_quantities(phi, metric, &Stencil::new(&metric.grid))?;
    Ok(gaps_from_geometry(&geom, metric, t, r))
}

impl Monitor {
    pub fn new(baseline: Baseline, tolerances: &Tolerances, metric: &MetricField) -> Self {
        Monitor {
            baseline,
            tolerance: tolerances.monitor(metric.grid.max_spacing()),
            state: MonitorState::default(),
            delta_ric: metric.delta_ric,
        }
    }

    pub fn conforming(&self) -> bool {
        self.delta_ric > 0.0
    }

    /// `λ_cert = 2 μ_min δ_ric / (sup F)²` over the samples seen so far, or 0
    /// when the Ricci hypothesis fails.
    pub fn lambda_cert(&self) -> f64 {
        if !self.conforming() || !self.state.mu_min.is_finite() || self.state.f_sup <= 0.0 {
            return 0.0;
        }
        2.0 * self.state.mu_min * self.delta_ric / (self.state.f_sup * self.state.f_sup)
    }

    /// Evaluate every monitored quantity at one sample.
    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        t: f64,
        step: u64,
        dt: f64,
        phi: &[f64],
        geom: &GraphGeometry,
        metric: &MetricField,
        xc: CrossChecks,
    ) -> (DiagnosticsRecord, Vec<Breach>) {
        let n = metric.dim();
        let nf = n as f64;
        let pts = &geom.points;
        let shrink = (-t / nf).exp();
        let grow = 1.0 / shrink;
        let b = &self.baseline;

        let mu = pts.iter().map(|p| p.mu).fold(f64::INFINITY, f64::min);
        let fmax = pts.iter().map(|p| p.f).fold(0.0, f64::max);
        self.state.mu_min = self.state.mu_min.min(mu);
        self.state.f_sup = self.state.f_sup.max(fmax);
        let lambda = self.lambda_cert();

        let (phi_lo, phi_hi) = range(phi.iter().map(|p| p - t / nf));
        let (u_lo, u_hi) = range(pts.iter().map(|p| p.u * shrink));
        let (if_lo, if_hi) = range(pts.iter().map(|p| 1.0 / p.f));
        let (uhv_lo, uhv_hi) = range(pts.iter().map(|p| p.u * p.mean_curvature / p.v));
        let (hr_lo, hr_hi) = range(pts.iter().map(|p| p.mean_curvature * grow));
        let grad_sq_max = pts.iter().map(|p| p.grad_sq).fold(0.0, f64::max);
        let grad_u = pts.iter().map(|p| p.u * shrink * p.grad_sq.sqrt()).fold(0.0, f64::max);
        let mut hess_u = 0.0_f64;
        for (idx, p) in pts.iter().enumerate() {
            let mut m = ZERO2;
            for i in 0..n {
                for j in 0..n {
                    m[i][j] = p.u * shrink * (p.hess[i][j] + p.dphi[i] * p.dphi[j]);
                }
            }
            hess_u = hess_u.max(norm2(&metric.sigma_inv[idx], &m, n));
        }
        let a = area(geom, metric);
        let resc_area = a * (-t).exp();
        let r_est = pts.iter().zip(&metric.sqrt_det).map(|(p, w)| p.u * shrink * w).sum::<f64>()
            * metric.grid.cell_measure()
            / b.base_area;
        let gaps = gaps_from_geometry(geom, metric, t, r_est);

        let tol = self.tolerance;
        let mut checks: Vec<(&'static str, f64)> = vec![
            ("phi_bound", (b.phi_min - phi_lo).max(phi_hi - b.phi_max)),
            ("u_bound", (b.u_min - u_lo).max(u_hi - b.u_max)),
            ("inv_f_range", (b.inv_f_min - if_lo).max(if_hi - b.inv_f_max)),
            ("uhv_range", (b.uhv_min - uhv_lo).max(uhv_hi - b.uhv_max)),
            ("h_lower", b.h_lower - hr_lo),
        ];
        if self.conforming() {
            checks.push(("h_upper", hr_hi - b.h_upper));
            checks.push(("gradient_decay", grad_sq_max * (lambda * t).exp() - b.grad_sq_max));
        }
        let mut breaches = Vec::new();
        for (monitor, excess) in checks {
            // NaN excess counts as fatal.
            if excess <= tol {
                continue;
            }
            let severity = if excess <= 10.0 * tol { Severity::Warn } else { Severity::Fatal };
            breaches.push(Breach { monitor, t, excess, tolerance: tol, severity });
        }
        let warnings = breaches.iter().filter(|x| x.severity == Severity::Warn).count();
        let fatal = breaches.len() - warnings;

        let rec = DiagnosticsRecord {
            t,
            step: step as f64,
            dt,
            area: a,
            area_ratio: a / b.area0,
            area_growth_error: ((a / b.area0) * (-t).exp() - 1.0).abs(),
            rescaled_area: resc_area,
            rescaled_area_dev: (resc_area / b.area0 - 1.0).abs(),
            phi_resc_min: phi_lo,
            phi_resc_max: phi_hi,
            u_resc_min: u_lo,
            u_resc_max: u_hi,
            inv_f_min: if_lo,
            inv_f_max: if_hi,
            uhv_min: uhv_lo,
            uhv_max: uhv_hi,
            h_resc_min: hr_lo,
            h_resc_max: hr_hi,
            grad_sq_max,
            grad_u_resc_max: grad_u,
            hess_u_resc_max: hess_u,
            metric_gap: gaps.metric,
            weingarten_gap: gaps.weingarten,
            u_gap: gaps.u,
            r_inf_est: r_est,
            lambda_cert: lambda,
            mu_min: self.state.mu_min,
            f_sup: self.state.f_sup,
            ric_positive: if self.conforming() { 1.0 } else { 0.0 },
            h_form_discrepancy: geom.h_form_discrepancy,
            xc_metric: xc.metric,
            xc_measure: xc.measure,
            xc_rescaled_measure: xc.rescaled_measure,
            xc_mean_curvature: xc.mean_curvature,
            xc_rescaled_phi: xc.rescaled_phi,
            warnings: warnings as f64,
            fatal: fatal as f64,
        };
        (rec, breaches)
    }
}

/// Derivative at `at` of the quadratic through three samples.
pub fn lagrange_derivative(ts: [f64; 3], fs: [f64; 3], at: f64) -> f64 {
    let [t0, t1, t2] = ts;
    let l0 = ((at - t1) + (at - t2)) / ((t0 - t1) * (t0 - t2));
    let l1 = ((at - t0) + (at - t2)) / ((t1 - t0) * (t1 - t2));
    let l2 = ((at - t0) + (at - t1)) / ((t2 - t0) * (t2 - t1));
    fs[0] * l0 + fs[1] * l1 + fs[2] * l2
}

/// Compare time differences of the geometry at fixed nodes with the
/// evolution equations, evaluated at `ts[k]`.
///
/// Nodes of the graph parametrisation `p ↦ (u(p, t), p)` do not move
/// normally: `∂_t x = H⁻¹ ν + T^k x_k` with `T^k = φ^k / (H u v)`. The right
/// sides therefore carry the tangential terms `L_T g`, `∂_k(√g T^k)` and
/// `T^k ∂_k H` on top of the normal-variation formulas.
pub fn evolution_crosschecks(ts: [f64; 3], phis: [&[f64]; 3], k: usize, metric: &MetricField) -> Result<CrossChecks> {
    let grid = &metric.grid;
    let st = Stencil::new(grid);
    let n = metric.dim();
    let nf = n as f64;
    let geoms: Vec<GraphGeometry> = phis.iter().map(|p| graph_quantities(p, metric, &st)).collect::<Result<_>>()?;
    let at = ts[k];
    let geo = &geoms[k];
    let len = grid.len();
    let pole = grid.has_poles();
    let par = |idx: &[usize]| pole && theta_parity(idx);

    let g: Vec<Mat2> = geo.points.iter().map(|p| p.g).collect();
    let g_inv: Vec<Mat2> = geo.points.iter().map(|p| p.g_inv).collect();
    let sqrt_g: Vec<f64> = g.iter().map(|m| crate::tensor::det(m, n).sqrt()).collect();
    let hfield: Vec<f64> = geo.points.iter().map(|p| p.mean_curvature).collect();
    let inv_h: Vec<f64> = hfield.iter().map(|h| 1.0 / h).collect();
    let tang: Vec<[f64; 2]> = geo
        .points
        .iter()
        .map(|p| {
            let s = 1.0 / (p.mean_curvature * p.u * p.v);
            [p.dphi_up[0] * s, p.dphi_up[1] * s]
        })
        .collect();
    let flux: Vec<[f64; 2]> = tang.iter().zip(&sqrt_g).map(|(t, s)| [t[0] * s, t[1] * s]).collect();
    let gchr = christoffel_base(&st, &g, &g_inv);

    let mut out = CrossChecks::default();
    for idx in 0..len {
        if !grid.in_measure_band(idx) {
            continue;
        }
        let p = &geo.points[idx];
        // time derivatives
        let dt_of = |f: &dyn Fn(&GraphGeometry, usize) -> f64| {
            lagrange_derivative(ts, [f(&geoms[0], idx), f(&geoms[1], idx), f(&geoms[2], idx)], at)
        };
        let mut gdot = ZERO2;
        for i in 0..n {
            for j in 0..n {
                gdot[i][j] = dt_of(&|gg: &GraphGeometry, q| gg.points[q].g[i][j]);
            }
        }
        let sqrt_dot = dt_of(&|gg: &GraphGeometry, q| crate::tensor::det(&gg.points[q].g, n).sqrt());
        let h_dot = dt_of(&|gg: &GraphGeometry, q| gg.points[q].mean_curvature);
        let resc_sqrt = |j: usize| (-ts[j]).exp() * crate::tensor::det(&geoms[j].points[idx].g, n).sqrt();
        let resc_dot = lagrange_derivative(ts, [resc_sqrt(0), resc_sqrt(1), resc_sqrt(2)], at);
        let phit = |j: usize| phis[j][idx] - ts[j] / nf;
        let phit_dot = lagrange_derivative(ts, [phit(0), phit(1), phit(2)], at);

        // spatial derivatives at the evaluation time
        let tv = tang[idx];
        let mut dtan = [[0.0; 2]; 2]; // dtan[i][k] = ∂_i T^k
        let mut dg = [ZERO2; 2];
        let mut dh = [0.0; 2];
        let mut div = 0.0;
        for i in 0..n {
            for kk in 0..n {
                dtan[i][kk] = st.d1_by(idx, i, par(&[kk]), |q| tang[q][kk]);
            }
            for a in 0..n {
                for b in 0..n {
                    dg[i][a][b] = st.d1_by(idx, i, par(&[a, b]), |q| g[q][a][b]);
                }
            }
            dh[i] = st.d1_by(idx, i, false, |q| hfield[q]);
            div += st.d1_by(idx, i, par(&[i]), |q| flux[q][i]);
        }
        let mut resid = ZERO2;
        for i in 0..n {
            for j in 0..n {
                let mut lie = 0.0;
                for kk in 0..n {
                    lie += tv[kk] * dg[kk][i][j] + g[idx][kk][j] * dtan[i][kk] + g[idx][i][kk] * dtan[j][kk];
                }
                resid[i][j] = gdot[i][j] - (2.0 * p.h[i][j] / p.mean_curvature + lie);
            }
        }
        out.metric = out.metric.max(norm2(&g_inv[idx], &resid, n));
        let sg = sqrt_g[idx];
        out.measure = out.measure.max((sqrt_dot / sg - 1.0 - div / sg).abs());
        let shrink = (-at).exp();
        out.rescaled_measure = out.rescaled_measure.max(((resc_dot - shrink * div) / (shrink * sg)).abs());

        // Ḣ = −Δ_g(H⁻¹) − H⁻¹(|A|² + Ric̄(ν)) + T^k ∂_k H
        let mut lap = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut d2 = st.d2_by(idx, i, j, false, |q| inv_h[q]);
                for kk in 0..n {
                    d2 -= gchr[idx][kk][i][j] * st.d1_by(idx, kk, false, |q| inv_h[q]);
                }
                lap += g_inv[idx][i][j] * d2;
            }
        }
        let w = &p.weingarten;
        let a2: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| w[i][j] * w[j][i]).sum();
        let mut ric_nu = 0.0;
        for i in 0..n {
            for j in 0..n {
                ric_nu +=
                    (metric.ricci[idx][i][j] - (nf - 1.0) * metric.sigma[idx][i][j]) * p.dphi_up[i] * p.dphi_up[j];
            }
        }
        ric_nu /= (p.u * p.v).powi(2);
        let h = p.mean_curvature;
        let transport: f64 = (0..n).map(|kk| tv[kk] * dh[kk]).sum();
        let rhs = -lap - (a2 + ric_nu) / h + transport;
        out.mean_curvature = out.mean_curvature.max(((h_dot - rhs) / h).abs());
        out.rescaled_phi = out.rescaled_phi.max((phit_dot - 1.0 / p.f + 1.0 / nf).abs());
    }
    Ok(out)
}

/// Exponential rate fitted to a positive series.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub name: String,
    pub t_start: f64,
    pub t_end: f64,
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// Samples dropped because they were not positive.
    pub trimmed: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares slope of `log(series)` over the second half of the window.
pub fn fit_rate(name: &str, ts: &[f64], values: &[f64]) -> Result<RateFit> {
    if ts.len() != values.len() || ts.is_empty() {
        return Err(FlowError::ConfigGeneral(format!("{name}: empty or mismatched series")));
    }
    let t_mid = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let window: Vec<(f64, f64)> = ts.iter().zip(values).filter(|(t, _)| **t >= t_mid).map(|(t, v)| (*t, *v)).collect();
    let pts: Vec<(f64, f64)> =
        window.iter().filter(|(_, v)| *v > 0.0 && v.is_finite()).map(|(t, v)| (*t, v.ln())).collect();
    let trimmed = window.len() - pts.len();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(FlowError::ConfigGeneral(format!(
            "{name}: {} positive samples in the fit window, need {MIN_FIT_SAMPLES}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let rate = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit {
        name: name.to_string(),
        t_start: pts[0].0,
        t_end: pts[pts.len() - 1].0,
        rate,
        r_squared,
        samples: pts.len(),
        trimmed,
    })
}

/// Final asymptotic gaps and their fitted rates.
#[derive(Debug, Clone)]
pub struct AsymptoticsReport {
    pub t_final: f64,
    pub r_inf_est: f64,
    pub initial: AsymptoticGaps,
    pub last: AsymptoticGaps,
    pub fits: Vec<std::result::Result<RateFit, String>>,
    /// Whether the base satisfied `Ric > 0` (`δ_ric > 0`) for this run.
    pub conforming: bool,
    pub lambda_cert: f64,
}

pub fn asymptotics_report(records: &[DiagnosticsRecord]) -> Result<AsymptoticsReport> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(FlowError::ConfigGeneral("no diagnostics records".into())),
    };
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let fits = ["u_gap", "metric_gap", "weingarten_gap", "grad_u_resc_max", "hess_u_resc_max"]
        .iter()
        .map(|name| {
            let vals: Vec<f64> = records.iter().map(|r| r.get(name).unwrap_or(f64::NAN)).collect();
            fit_rate(name, &ts, &vals).map_err(|e| e.to_string())
        })
        .collect();
    let gaps =
        |r: &DiagnosticsRecord| AsymptoticGaps { metric: r.metric_gap, weingarten: r.weingarten_gap, u: r.u_gap };
    Ok(AsymptoticsReport {
        t_final: last.t,
        r_inf_est: last.r_inf_est,
        initial: gaps(first),
        last: gaps(last),
        fits,
        conforming: last.ric_positive > 0.5,
        lambda_cert: last.lambda_cert,
    })
}

impl fmt::Display for AsymptoticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.conforming {
            writeln!(f, "condition Ric>0 violated (delta_ric = 0); empirical only")?;
        }
        writeln!(f, "t_final = {:.6}", self.t_final)?;
        writeln!(f, "r_inf_est = {:.10}", self.r_inf_est)?;
        writeln!(
            f,
            "lambda_cert = {:.6e} (conservative: 2 mu_min delta_ric / sup F^2 over samples so far)",
            self.lambda_cert
        )?;
        writeln!(f, "{:<16} {:>14} {:>14}", "gap", "initial", "final")?;
        writeln!(f, "{:<16} {:>14.6e} {:>14.6e}", "u", self.initial.u, self.last.u)?;
        writeln!(f, "{:<16} {:>14.6e} {:>14.6e}", "metric", self.initial.metric, self.last.metric)?;
        writeln!(f, "{:<16} {:>14.6e} {:>14.6e}", "weingarten", self.initial.weingarten, self.last.weingarten)?;
        writeln!(f, "fitted rates (second half of the window):")?;
        for fit in &self.fits {
            match fit {
                Ok(r) => writeln!(
                    f,
                    "  {:<18} rate {:>11.5} R2 {:.4} over [{:.3}, {:.3}] ({} samples, {} trimmed)",
                    r.name, r.rate, r.r_squared, r.t_start, r.t_end, r.samples, r.trimmed
                )?,
                Err(e) => writeln!(f, "  {e}")?,
            }
        }
        Ok(())
    }
}
