use approx::assert_abs_diff_eq;
use warpflow::base::{eval_metric, MetricField, MetricPreset, MetricSource};
use warpflow::flow::rescale;
use warpflow::graph::graph_quantities;
use warpflow::initial::LowModeField;
use warpflow::{FlowError, FlowOperator, Integrator, Stencil, Stepper};

fn metric(p: MetricPreset, counts: &[usize]) -> MetricField {
    eval_metric(p, &p.grid(counts).unwrap(), MetricSource::Analytic).unwrap()
}

fn integrate(op: &FlowOperator, integrator: Integrator, phi: &mut [f64], t_end: f64, c: f64) {
    let mut st = Stepper::new(integrator, phi.len());
    let mut t = 0.0;
    while t < t_end {
        let info = st.begin(op, phi).unwrap();
        let dt = op.dt_from_lambda(c, info.lambda_max).unwrap().min(t_end - t);
        st.finish(op, phi, dt).unwrap();
        t += dt;
    }
}

fn fixed_steps(op: &FlowOperator, integrator: Integrator, phi: &mut [f64], dt: f64, steps: usize) {
    let mut st = Stepper::new(integrator, phi.len());
    for _ in 0..steps {
        st.step(op, phi, dt).unwrap();
    }
}

#[test]
fn level_set_speeds() {
    for (p, c, want) in [(MetricPreset::RoundSphere, vec![16, 32], 0.5), (MetricPreset::Circle, vec![16], 1.0)] {
        let m = metric(p, &c);
        let op = FlowOperator::new(&m);
        let mut out = vec![0.0; m.grid.len()];
        op.eval(&vec![0.0; m.grid.len()], &mut out).unwrap();
        assert!(out.iter().all(|v| (v - want).abs() < 1e-15), "{}", p.name());
    }
}

#[test]
fn speed_is_slope_over_mean_curvature_times_height() {
    for (p, c) in [
        (MetricPreset::PerturbedSphere { epsilon: 0.1, mode: 2 }, vec![24, 48]),
        (MetricPreset::FlatTorus, vec![24, 24]),
    ] {
        let m = metric(p, &c);
        let w = LowModeField::new(p, 0.2, 3);
        let phi: Vec<f64> = (0..m.grid.len()).map(|i| w.eval(m.grid.coords(i))).collect();
        let op = FlowOperator::new(&m);
        let mut out = vec![0.0; phi.len()];
        op.eval(&phi, &mut out).unwrap();
        let geom = graph_quantities(&phi, &m, &Stencil::new(&m.grid)).unwrap();
        for (x, q) in out.iter().zip(&geom.points) {
            let want = q.v / (q.mean_curvature * q.u);
            assert!((x - want).abs() <= 1e-12 * want, "{x} vs {want}");
        }
    }
}

#[test]
fn sign_loss_is_fatal_and_names_the_node() {
    let m = metric(MetricPreset::Circle, &[32]);
    // a deep dimple: φ'' ≫ 1 at θ = 0 makes 1 − φ'' + … negative there
    let phi: Vec<f64> = (0..32).map(|i| 0.9 * (3.0 * m.grid.coords(i)[0]).cos()).collect();
    let op = FlowOperator::new(&m);
    let mut out = vec![0.0; 32];
    match op.eval(&phi, &mut out) {
        Err(FlowError::NonPositiveMeanCurvature { node, .. }) => assert!(node < 32),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stable_step_formula_and_cfl_range() {
    let m = metric(MetricPreset::RoundSphere, &[32, 64]);
    let op = FlowOperator::new(&m);
    let phi = vec![0.0; m.grid.len()];
    let dt = op.stable_dt(&phi, 0.5).unwrap();
    assert!(dt > 0.0);
    let mut out = vec![0.0; phi.len()];
    let info = op.eval(&phi, &mut out).unwrap();
    let h = m.grid.min_spacing();
    assert_abs_diff_eq!(dt, 0.5 * h * h / (4.0 * info.lambda_max), epsilon = 1e-18);
    // F = 2, a = σ^-1: the largest chart eigenvalue sits next to the pole
    let s0 = m.grid.coords(0)[0].sin();
    assert_abs_diff_eq!(info.lambda_max, 0.25 / (s0 * s0), epsilon = 1e-12);
    for bad in [0.0, -0.1, 1.5] {
        let err = op.stable_dt(&phi, bad).unwrap_err();
        assert!(err.to_string().contains("c_cfl out of (0,1]"), "{err}");
    }
}

#[test]
fn doubling_resolution_quarters_the_step_off_the_sphere() {
    for (p, coarse, fine) in
        [(MetricPreset::Circle, vec![32], vec![64]), (MetricPreset::FlatTorus, vec![16, 16], vec![32, 32])]
    {
        let dts: Vec<f64> = [coarse, fine]
            .iter()
            .map(|c| {
                let m = metric(p, c);
                let w = LowModeField::new(p, 0.1, 5);
                let phi: Vec<f64> = (0..m.grid.len()).map(|i| w.eval(m.grid.coords(i))).collect();
                FlowOperator::new(&m).stable_dt(&phi, 0.9).unwrap()
            })
            .collect();
        let ratio = dts[0] / dts[1];
        assert!((ratio / 4.0 - 1.0).abs() <= 0.05, "{}: {ratio}", p.name());
    }
}

#[test]
fn level_sets_expand_exponentially() {
    let m = metric(MetricPreset::RoundSphere, &[16, 32]);
    let op = FlowOperator::new(&m);
    let mut phi = vec![0.0; m.grid.len()];
    integrate(&op, Integrator::Rk4, &mut phi, 1.0, 0.9);
    let want = 1.648_721_270_700_128_2;
    assert!(phi.iter().all(|p| (p.exp() - want).abs() <= 1e-6));
    // spatial error is identically zero: every node carries the same value
    assert!(phi.iter().all(|p| *p == phi[0]));

    let m = metric(MetricPreset::Circle, &[16]);
    let op = FlowOperator::new(&m);
    let mut phi = vec![0.0; 16];
    integrate(&op, Integrator::Rk4, &mut phi, 1.0, 0.9);
    assert!(phi.iter().all(|p| (p.exp() - std::f64::consts::E).abs() <= 1e-6));
}

#[test]
fn second_order_integrator_converges_in_time() {
    let m = metric(MetricPreset::Circle, &[64]);
    let op = FlowOperator::new(&m);
    let phi0: Vec<f64> = (0..64).map(|i| (1.0 + 0.2 * m.grid.coords(i)[0].cos()).ln()).collect();
    let dt = op.stable_dt(&phi0, 0.8).unwrap();
    let steps = 64;
    let mut reference = phi0.clone();
    fixed_steps(&op, Integrator::Rk4, &mut reference, dt / 8.0, steps * 8);
    let err = |k: usize| {
        let mut p = phi0.clone();
        fixed_steps(&op, Integrator::Rk2, &mut p, dt / k as f64, steps * k);
        p.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1), err(2));
    assert!(e1 / e2 >= 3.8, "{e1} {e2}");
}

#[test]
fn rescaled_views() {
    let phi = vec![0.3, -0.2];
    let r0 = rescale(&phi, 0.0, 2);
    assert_eq!(r0.phi, phi);
    assert_eq!((r0.shrink, r0.grow), (1.0, 1.0));

    // u₀ ≡ r₀ stays at r₀ after rescaling and H̃ = n / r₀
    let m = metric(MetricPreset::RoundSphere, &[16, 32]);
    let op = FlowOperator::new(&m);
    let r0 = 1.7_f64;
    let mut phi = vec![r0.ln(); m.grid.len()];
    integrate(&op, Integrator::Rk4, &mut phi, 2.0, 0.9);
    let resc = rescale(&phi, 2.0, 2);
    assert!(resc.u.iter().all(|u| (u - r0).abs() <= 1e-6));
    let geom = graph_quantities(&phi, &m, &Stencil::new(&m.grid)).unwrap();
    for q in &geom.points {
        assert_abs_diff_eq!(q.mean_curvature * resc.grow, 2.0 / r0, epsilon = 1e-6);
    }
}
