use warpflow::config::Tolerances;
use warpflow::oracle::{
    observed_order, run_identity_suite, seed_from_env, Status, VerifyOptions, VerifyReport, CSV_HEADER, DEFAULT_SEED,
    GRAPH_IDENTITIES,
};
use warpflow::MetricPreset;

fn suite(preset: MetricPreset, base_counts: &[usize], seed: u64, defect: f64) -> VerifyReport {
    run_identity_suite(&VerifyOptions {
        preset,
        base_counts: base_counts.to_vec(),
        seed,
        tolerances: Tolerances::default(),
        defect,
    })
    .unwrap()
}

fn status(r: &VerifyReport, name: &str) -> Status {
    r.row(name).unwrap_or_else(|| panic!("no row {name}")).status
}

#[test]
fn round_sphere_passes_every_identity() {
    let r = suite(MetricPreset::RoundSphere, &[16, 32], DEFAULT_SEED, 0.0);
    assert!(r.passed(), "{r}");
    for name in GRAPH_IDENTITIES {
        assert_eq!(status(&r, name), Status::Pass, "{r}");
    }
    let order = r.row("gauss_formula").unwrap().order.unwrap();
    assert!(order > 1.9, "{order}");
    assert!(r.row("simons").unwrap().order.unwrap() >= 0.9);
    assert!(r.notes.iter().any(|n| n.contains("-2 H h^ij")));
}

#[test]
fn circle_marks_two_dimensional_identities_degenerate() {
    let r = suite(MetricPreset::Circle, &[32], DEFAULT_SEED, 0.0);
    assert!(r.passed(), "{r}");
    for name in ["gauss_equation", "ricci_gauss", "scalar_gauss", "codazzi"] {
        assert_eq!(status(&r, name), Status::Degenerate);
        assert_eq!(r.row(name).unwrap().note.as_deref(), Some("n=1 degenerate"));
    }
    for name in ["gauss_formula", "weingarten", "simons", "graph_connection"] {
        assert_eq!(status(&r, name), Status::Pass);
    }
}

#[test]
fn simons_is_unsupported_on_curved_ambients() {
    let r = suite(MetricPreset::FlatTorus, &[16, 16], DEFAULT_SEED, 0.0);
    assert!(r.passed(), "{r}");
    assert_eq!(status(&r, "simons"), Status::Unsupported);
    assert_eq!(status(&r, "codazzi"), Status::Pass);
}

#[test]
fn umbilic_graphs_satisfy_identities_to_rounding() {
    let r = suite(MetricPreset::RoundSphere, &[16, 32], DEFAULT_SEED, 0.0);
    let umbilic: Vec<_> = r.rows.iter().filter(|x| x.identity.ends_with("[umbilic]")).collect();
    assert_eq!(umbilic.len(), GRAPH_IDENTITIES.len());
    for row in umbilic {
        assert!(row.max_residual[0] <= 1e-10, "{row}");
    }
}

#[test]
fn defective_stencil_is_caught() {
    let r = suite(MetricPreset::RoundSphere, &[16, 32], DEFAULT_SEED, 0.05);
    assert!(!r.passed());
    let failing: Vec<&str> = r.failing().iter().map(|x| x.identity.as_str()).collect();
    assert!(failing.contains(&"gauss_formula"), "{failing:?}");
}

#[test]
fn suite_is_deterministic_per_seed() {
    let a = suite(MetricPreset::Circle, &[32], 11, 0.0);
    let b = suite(MetricPreset::Circle, &[32], 11, 0.0);
    let c = suite(MetricPreset::Circle, &[32], 12, 0.0);
    assert_eq!(a.rows, b.rows);
    assert_ne!(a.rows, c.rows);

    std::env::set_var("WARPFLOW_SEED", "12345");
    assert_eq!(seed_from_env(), 12345);
    std::env::set_var("WARPFLOW_SEED", "not a number");
    assert_eq!(seed_from_env(), DEFAULT_SEED);
    std::env::remove_var("WARPFLOW_SEED");
    assert_eq!(seed_from_env(), DEFAULT_SEED);
}

#[test]
fn csv_has_a_row_per_level() {
    let r = suite(MetricPreset::Circle, &[32], DEFAULT_SEED, 0.0);
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let gauss: Vec<&str> = csv.lines().filter(|l| l.starts_with("gauss_formula,")).collect();
    assert_eq!(gauss.len(), 3);
    assert!(gauss[2].starts_with("gauss_formula,Pass,128,"));
    let codazzi: Vec<&str> = csv.lines().filter(|l| l.starts_with("codazzi,")).collect();
    assert_eq!(codazzi, ["codazzi,Degenerate,32,,,"]);
}

#[test]
fn order_fit() {
    assert!((observed_order(&[1.0, 0.25, 0.0625]).unwrap() - 2.0).abs() < 1e-12);
    assert!(observed_order(&[1.0, 0.0]).is_none());
    assert!(observed_order(&[1.0]).is_none());
}
