//! Initial data `u₀ > 0` on the base grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::MetricPreset;
use crate::error::{FlowError, Result};
use crate::grid::ChartGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTerm {
    pub l: u32,
    pub m: i32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// `u₀ ≡ value`
    Constant { value: f64 },
    /// `u₀ = base + amplitude · cos(mode · x₀)` with `x₀` the first chart coordinate.
    Cosine { base: f64, amplitude: f64, mode: u32 },
    /// Polar graph of the ellipse with semi-axes `a` (along θ = 0) and `b`; circle only.
    Ellipse { a: f64, b: f64 },
    /// `u₀ = base + Σ amplitude · Y(l, m)` with the basis of [`basis_function`].
    Series { base: f64, terms: Vec<SeriesTerm> },
    /// `u₀ = base · exp(w)` with `w` a seeded random low-mode field, `|w| ≤ amplitude`.
    Random { base: f64, amplitude: f64, seed: u64 },
}

/// Associated Legendre function `P_l^m(x)` without the Condon-Shortley phase.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 0..m {
        pmm *= f64::from(2 * k + 1) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * f64::from(2 * m + 1) * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut p = 0.0;
    for ll in (m + 2)..=l {
        p = (x * f64::from(2 * ll - 1) * pm1 - f64::from(ll + m - 1) * pmm) / f64::from(ll - m);
        pmm = pm1;
        pm1 = p;
    }
    p
}

/// Basis used by series profiles.
///
/// * circle: `cos(lθ)` for `m ≥ 0`, `sin(lθ)` for `m < 0`;
/// * sphere: `P_l^|m|(cos θ) cos(mλ)` for `m ≥ 0`, `… sin(|m|λ)` for `m < 0`;
/// * torus: `cos(l x + m y)`.
pub fn basis_function(preset: &MetricPreset, l: u32, m: i32, x: [f64; 2]) -> f64 {
    match preset {
        MetricPreset::Circle => {
            let a = f64::from(l) * x[0];
            if m >= 0 {
                a.cos()
            } else {
                a.sin()
            }
        }
        MetricPreset::FlatTorus => (f64::from(l) * x[0] + f64::from(m) * x[1]).cos(),
        _ => {
            let p = assoc_legendre(l, m.unsigned_abs(), x[0].cos());
            let a = f64::from(m.unsigned_abs()) * x[1];
            if m >= 0 {
                p * a.cos()
            } else {
                p * a.sin()
            }
        }
    }
}

/// A smooth random field made of low modes, bounded by `amplitude`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowModeField {
    preset: MetricPreset,
    terms: Vec<(u32, i32, f64)>,
}

impl LowModeField {
    pub fn new(preset: MetricPreset, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(u32, i32)> = match preset {
            MetricPreset::Circle => (1..=3).flat_map(|l| [(l, 0), (l, -1)]).collect(),
            MetricPreset::FlatTorus => vec![(1, 0), (0, 1), (1, 1), (1, -1), (2, 1)],
            _ => vec![(1, 0), (1, 1), (1, -1), (2, 0), (2, 1), (2, -1), (2, 2), (2, -2)],
        };
        let mut terms: Vec<(u32, i32, f64)> = modes
            .into_iter()
            .map(|(l, m)| {
                let c: f64 = rng.random_range(-1.0..1.0);
                // Scale each basis function to unit sup norm.
                (l, m, c / basis_sup(&preset, l, m))
            })
            .collect();
        let total: f64 = terms.iter().map(|t| (t.2 * basis_sup(&preset, t.0, t.1)).abs()).sum();
        for t in &mut terms {
            t.2 *= amplitude / total;
        }
        LowModeField { preset, terms }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|&(l, m, c)| c * basis_function(&self.preset, l, m, x)).sum()
    }

    pub fn sample(&self, grid: &ChartGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(grid.coords(i))).collect()
    }
}

fn basis_sup(preset: &MetricPreset, l: u32, m: i32) -> f64 {
    match preset {
        MetricPreset::Circle | MetricPreset::FlatTorus => 1.0,
        _ => (0..=400)
            .map(|k| assoc_legendre(l, m.unsigned_abs(), (f64::from(k) / 200.0 - 1.0).clamp(-1.0, 1.0)).abs())
            .fold(0.0, f64::max),
    }
}

impl InitialProfile {
    pub fn name(&self) -> &'static str {
        match self {
            InitialProfile::Constant { .. } => "constant",
            InitialProfile::Cosine { .. } => "cosine",
            InitialProfile::Ellipse { .. } => "ellipse",
            InitialProfile::Series { .. } => "series",
            InitialProfile::Random { .. } => "random",
        }
    }

    /// `u₀` at every node; fails if it is not positive and finite.
    pub fn sample(&self, preset: &MetricPreset, grid: &ChartGrid) -> Result<Vec<f64>> {
        if let InitialProfile::Ellipse { .. } = self {
            if !matches!(preset, MetricPreset::Circle) {
                return Err(FlowError::ConfigGeneral("the ellipse profile needs the circle preset".into()));
            }
        }
        let random = match self {
            InitialProfile::Random { amplitude, seed, .. } => Some(LowModeField::new(*preset, *amplitude, *seed)),
            _ => None,
        };
        let mut out = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let x = grid.coords(idx);
            let u = match self {
                InitialProfile::Constant { value } => *value,
                InitialProfile::Cosine { base, amplitude, mode } => base + amplitude * (f64::from(*mode) * x[0]).cos(),
                InitialProfile::Ellipse { a, b } => {
                    let (s, c) = x[0].sin_cos();
                    1.0 / ((c / a).powi(2) + (s / b).powi(2)).sqrt()
                }
                InitialProfile::Series { base, terms } => {
                    base + terms.iter().map(|t| t.amplitude * basis_function(preset, t.l, t.m, x)).sum::<f64>()
                }
                InitialProfile::Random { base, .. } => base * random.as_ref().map_or(0.0, |f| f.eval(x)).exp(),
            };
            if !(u > 0.0) || !u.is_finite() {
                return Err(FlowError::ConfigGeneral(format!(
                    "initial height must be positive, got {u} at node {idx}"
                )));
            }
            out.push(u);
        }
        Ok(out)
    }
}
