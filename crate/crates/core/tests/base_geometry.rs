#![allow(clippy::needless_range_loop)]

use std::f64::consts::{FRAC_PI_3, PI};

use approx::assert_abs_diff_eq;
use warpflow::base::{christoffel_from_derivs, eval_metric, legendre, MetricPreset, MetricSource};
use warpflow::oracle::{base_geometry_residuals, observed_order, Band};
use warpflow::tensor::matmul;
use warpflow::{ChartGrid, FlowError};

const PRESETS: [MetricPreset; 4] = [
    MetricPreset::Circle,
    MetricPreset::RoundSphere,
    MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 2 },
    MetricPreset::FlatTorus,
];

fn counts(p: MetricPreset) -> Vec<usize> {
    match p.dim() {
        1 => vec![32],
        _ => vec![16, 32],
    }
}

#[test]
fn christoffel_of_round_sphere_at_sixty_degrees() {
    let (s, c) = FRAC_PI_3.sin_cos();
    let sigma = [[1.0, 0.0], [0.0, s * s]];
    let inv = [[1.0, 0.0], [0.0, 1.0 / (s * s)]];
    // ∂_θ σ_λλ = 2 sin θ cos θ, nothing else varies
    let dm = [[[0.0, 0.0], [0.0, 2.0 * s * c]], [[0.0; 2]; 2]];
    let chr = christoffel_from_derivs(&inv, &dm, 2);
    let frozen = -(3.0_f64).sqrt() / 4.0;
    assert_abs_diff_eq!(chr[0][1][1], frozen, epsilon = 1e-15);
    assert_abs_diff_eq!(chr[1][0][1], c / s, epsilon = 1e-15);
    assert_eq!(chr[1][0][1], chr[1][1][0]);

    let (analytic, riem, ric) = MetricPreset::RoundSphere.analytic_at([FRAC_PI_3, 0.0]);
    assert_abs_diff_eq!(analytic[0][1][1], frozen, epsilon = 1e-15);
    assert_abs_diff_eq!(riem[0][1][0][1], s * s, epsilon = 1e-15);
    assert_abs_diff_eq!(ric[1][1], sigma[1][1], epsilon = 1e-15);
}

#[test]
fn flat_presets_have_vanishing_connection_and_curvature() {
    for p in [MetricPreset::Circle, MetricPreset::FlatTorus] {
        for src in [MetricSource::Analytic, MetricSource::Stencil] {
            let m = eval_metric(p, &p.grid(&counts(p)).unwrap(), src).unwrap();
            for idx in 0..m.grid.len() {
                assert!(m.christoffel[idx].iter().flatten().flatten().all(|v| *v == 0.0));
                assert!(m.riemann[idx].iter().flatten().flatten().flatten().all(|v| *v == 0.0));
            }
            assert_eq!(m.delta_ric, 0.0);
        }
    }
}

#[test]
fn round_sphere_metric_and_ricci() {
    let g = ChartGrid::sphere(32, 64).unwrap();
    let m = eval_metric(MetricPreset::RoundSphere, &g, MetricSource::Analytic).unwrap();
    for idx in 0..g.len() {
        let s = g.coords(idx)[0].sin();
        assert_eq!(m.sigma[idx], [[1.0, 0.0], [0.0, s * s]]);
        assert_eq!(m.ricci[idx], m.sigma[idx]);
    }
    assert_abs_diff_eq!(m.delta_ric, 1.0, epsilon = 1e-12);

    // stencil curvature, trusted on the measurement band
    let st = eval_metric(MetricPreset::RoundSphere, &g.refined(4).unwrap(), MetricSource::Stencil).unwrap();
    assert_abs_diff_eq!(st.delta_ric, 1.0, epsilon = 1e-3);
}

#[test]
fn inverse_metric_is_inverse_everywhere() {
    for p in PRESETS {
        let m = eval_metric(p, &p.grid(&counts(p)).unwrap(), MetricSource::Analytic).unwrap();
        let n = p.dim();
        for idx in 0..m.grid.len() {
            let id = matmul(&m.sigma_inv[idx], &m.sigma[idx], n);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((id[i][j] - want).abs() <= 1e-12, "{} node {idx}", p.name());
                }
            }
        }
    }
}

#[test]
fn stencil_curvature_converges_at_second_order() {
    let coarse = ChartGrid::sphere(16, 32).unwrap();
    let band = Band::common(&coarse);
    for p in [MetricPreset::RoundSphere, MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 2 }] {
        let res: Vec<[f64; 4]> = [1, 2, 4]
            .iter()
            .map(|f| base_geometry_residuals(p, &coarse.refined(*f).unwrap(), band).unwrap().map(|r| r.max))
            .collect();
        for k in 0..4 {
            let series: Vec<f64> = res.iter().map(|r| r[k]).collect();
            let order = observed_order(&series).unwrap();
            assert!(order >= 1.8, "{} component {k}: order {order} from {series:?}", p.name());
        }
    }
}

#[test]
fn stencil_riemann_symmetries() {
    let p = MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 3 };
    let coarse = ChartGrid::sphere(16, 32).unwrap();
    let band = Band::common(&coarse);
    let mut last_slot = Vec::new();
    for f in [1, 2, 4] {
        let g = coarse.refined(f).unwrap();
        let m = eval_metric(p, &g, MetricSource::Stencil).unwrap();
        let mut worst = 0.0_f64;
        for idx in 0..g.len() {
            let r = &m.riemann[idx];
            // antisymmetry in the first pair is structural
            assert_eq!(r[0][1][0][1], -r[1][0][0][1]);
            assert_eq!(r[0][0][0][1], 0.0);
            if band.contains(&g, idx) {
                worst = worst.max((r[0][1][0][1] + r[0][1][1][0]).abs()).max((r[0][1][1][0] - r[1][0][0][1]).abs());
            }
        }
        last_slot.push(worst);
    }
    let o = observed_order(&last_slot).unwrap();
    assert!(o >= 1.8, "{o} {last_slot:?}");
}

#[test]
fn perturbed_sphere_curvature_matches_conformal_formula() {
    // K = (1 − Δ₀w)/ψ with w = ½ log ψ; at the equator P₂ = −½, P₂' = 0.
    let eps = 0.1;
    let (chr, riem, ric) = MetricPreset::PerturbedSphere { epsilon: eps, mode: 2 }.analytic_at([PI / 2.0, 0.0]);
    let psi = 1.0 - 0.5 * eps;
    let lap_w = 0.5 * (-6.0 * eps * (-0.5)) / psi;
    let k = (1.0 - lap_w) / psi;
    assert_abs_diff_eq!(riem[0][1][0][1], k * psi * psi, epsilon = 1e-14);
    assert_abs_diff_eq!(ric[0][0], k * psi, epsilon = 1e-14);
    assert_abs_diff_eq!(chr[0][0][0], 0.0, epsilon = 1e-15);
    assert_eq!(legendre(2, 0.0), (-0.5, 0.0));
}

#[test]
fn perturbed_sphere_reports_positive_ricci_bound() {
    let g = ChartGrid::sphere(32, 64).unwrap();
    for src in [MetricSource::Analytic, MetricSource::Stencil] {
        let m = eval_metric(MetricPreset::PerturbedSphere { epsilon: 0.05, mode: 2 }, &g, src).unwrap();
        assert!(m.delta_ric > 0.0 && m.delta_ric <= 1.0, "{src:?} {}", m.delta_ric);
    }
}

#[test]
fn degenerate_perturbation_names_first_failing_node() {
    let g = ChartGrid::sphere(16, 32).unwrap();
    let err =
        eval_metric(MetricPreset::PerturbedSphere { epsilon: -1.5, mode: 2 }, &g, MetricSource::Analytic).unwrap_err();
    assert!(matches!(err, FlowError::NonPositiveMetric { node: 0, .. }), "{err}");
}

#[test]
fn undersized_grid_is_rejected() {
    let err = ChartGrid::sphere(4, 64).unwrap_err();
    assert!(err.to_string().contains("node count below minimum"), "{err}");
}
