//! Fixtures shared by the benchmarks in `benches/`.

use warpflow::base::{eval_metric, MetricPreset, MetricSource};
use warpflow::flow::FlowOperator;
use warpflow::MetricField;

/// A sphere problem at `n × 2n` with `u₀ = 1 + 0.2 cos θ`.
pub fn sphere(n: usize) -> (MetricField, FlowOperator, Vec<f64>) {
    let preset = MetricPreset::RoundSphere;
    let grid = preset.grid(&[n, 2 * n]).expect("valid sphere grid");
    let metric = eval_metric(preset, &grid, MetricSource::Analytic).expect("analytic metric");
    let op = FlowOperator::new(&metric);
    let phi = (0..grid.len()).map(|i| (1.0 + 0.2 * grid.coords(i)[0].cos()).ln()).collect();
    (metric, op, phi)
}
