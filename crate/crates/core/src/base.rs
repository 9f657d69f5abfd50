//! Base manifold geometry: metric presets, Christoffel symbols, curvature.
//!
//! Curvature convention:
//! `R_abc^d = ∂_b Γ^d_ac − ∂_a Γ^d_bc + Γ^d_be Γ^e_ac − Γ^d_ae Γ^e_bc`,
//! lowered on the last slot with σ, and `Ric_ik = R_imk^m`. The unit round
//! sphere then has `R_θλθλ = sin²θ` and `Ric = σ`.
//!
//! Two sources are supported. `Analytic` fills every tensor from closed
//! forms. `Stencil` samples only σ and obtains Γ and R by centred
//! differences; it is second-order accurate away from the poles and is used
//! to cross-check the closed forms and by the identity oracle.

use crate::error::{FlowError, Result};
use crate::grid::{theta_parity, ChartGrid, Stencil};
use crate::tensor::{generalized_eigen, inverse, is_spd, Chr, Mat2, Riem, ZERO2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricPreset {
    /// Unit circle, `n = 1`.
    Circle,
    /// Unit round 2-sphere in (θ, λ).
    RoundSphere,
    /// Axisymmetric conformal deformation `(1 + ε P_l(cos θ)) σ_round`.
    PerturbedSphere { epsilon: f64, mode: u32 },
    /// Flat square torus `[0, 2π)²`.
    FlatTorus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSource {
    Analytic,
    Stencil,
}

impl MetricPreset {
    pub fn dim(&self) -> usize {
        match self {
            MetricPreset::Circle => 1,
            _ => 2,
        }
    }

    pub fn has_poles(&self) -> bool {
        matches!(self, MetricPreset::RoundSphere | MetricPreset::PerturbedSphere { .. })
    }

    /// True when the warped ambient space is flat (Euclidean space).
    pub fn flat_ambient(&self) -> bool {
        matches!(self, MetricPreset::Circle | MetricPreset::RoundSphere)
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricPreset::Circle => "circle",
            MetricPreset::RoundSphere => "round_sphere",
            MetricPreset::PerturbedSphere { .. } => "perturbed_sphere",
            MetricPreset::FlatTorus => "flat_torus",
        }
    }

    pub fn grid(&self, counts: &[usize]) -> Result<ChartGrid> {
        let need = self.dim();
        if counts.len() != need {
            return Err(FlowError::InvalidGrid(format!(
                "preset {} needs {need} node counts, got {}",
                self.name(),
                counts.len()
            )));
        }
        match self {
            MetricPreset::Circle => ChartGrid::circle(counts[0]),
            MetricPreset::FlatTorus => ChartGrid::torus(counts[0], counts[1]),
            _ => ChartGrid::sphere(counts[0], counts[1]),
        }
    }

    /// σ at a chart point.
    pub fn sigma_at(&self, x: [f64; 2]) -> Mat2 {
        match *self {
            MetricPreset::Circle => [[1.0, 0.0], [0.0, 0.0]],
            MetricPreset::FlatTorus => [[1.0, 0.0], [0.0, 1.0]],
            MetricPreset::RoundSphere => {
                let s = x[0].sin();
                [[1.0, 0.0], [0.0, s * s]]
            }
            MetricPreset::PerturbedSphere { epsilon, mode } => {
                let s = x[0].sin();
                let psi = 1.0 + epsilon * legendre(mode, x[0].cos()).0;
                [[psi, 0.0], [0.0, psi * s * s]]
            }
        }
    }

    /// Closed-form Christoffel symbols, Riemann tensor and Ricci tensor.
    pub fn analytic_at(&self, x: [f64; 2]) -> (Chr, Riem, Mat2) {
        let mut chr: Chr = [[[0.0; 2]; 2]; 2];
        let mut riem: Riem = [[[[0.0; 2]; 2]; 2]; 2];
        let sigma = self.sigma_at(x);
        let (s, c) = x[0].sin_cos();
        // Gauss curvature, Christoffel corrections from the conformal factor.
        let (k, w_th) = match *self {
            MetricPreset::Circle | MetricPreset::FlatTorus => return (chr, riem, ZERO2),
            MetricPreset::RoundSphere => (1.0, 0.0),
            MetricPreset::PerturbedSphere { epsilon, mode } => {
                let (p, dp) = legendre(mode, c);
                let psi = 1.0 + epsilon * p;
                let psi_th = -epsilon * s * dp;
                let lap_psi = -epsilon * f64::from(mode * (mode + 1)) * p;
                let lap_w = 0.5 * (lap_psi / psi - psi_th * psi_th / (psi * psi));
                ((1.0 - lap_w) / psi, 0.5 * psi_th / psi)
            }
        };
        chr[0][0][0] = w_th;
        chr[0][1][1] = -s * c - s * s * w_th;
        chr[1][0][1] = c / s + w_th;
        chr[1][1][0] = c / s + w_th;
        let r = k * (sigma[0][0] * sigma[1][1]);
        riem[0][1][0][1] = r;
        riem[0][1][1][0] = -r;
        riem[1][0][0][1] = -r;
        riem[1][0][1][0] = r;
        let ric = [[k * sigma[0][0], 0.0], [0.0, k * sigma[1][1]]];
        (chr, riem, ric)
    }
}

/// Legendre polynomial `P_l(x)` and its derivative.
pub fn legendre(l: u32, x: f64) -> (f64, f64) {
    if l == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for k in 1..l {
        let kf = f64::from(k);
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// All base-geometry fields on a grid.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub preset: MetricPreset,
    pub source: MetricSource,
    pub grid: ChartGrid,
    pub sigma: Vec<Mat2>,
    pub sigma_inv: Vec<Mat2>,
    pub sqrt_det: Vec<f64>,
    pub christoffel: Vec<Chr>,
    pub riemann: Vec<Riem>,
    pub ricci: Vec<Mat2>,
    /// Largest δ with `Ric ≥ δ σ`: every node for closed-form curvature, the
    /// measurement band for stencil curvature on pole-bounded grids.
    pub delta_ric: f64,
}

impl MetricField {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Scalar curvature of σ at a node.
    pub fn scalar_curvature(&self, idx: usize) -> f64 {
        crate::tensor::contract(&self.sigma_inv[idx], &self.ricci[idx], self.dim())
    }
}

/// Build every base-geometry field for `preset` on `grid`.
pub fn eval_metric(preset: MetricPreset, grid: &ChartGrid, source: MetricSource) -> Result<MetricField> {
    let n = grid.dim();
    if n != preset.dim() || grid.has_poles() != preset.has_poles() {
        return Err(FlowError::InvalidGrid(format!("grid does not match preset {}", preset.name())));
    }
    let len = grid.len();
    let mut sigma = Vec::with_capacity(len);
    let mut sigma_inv = Vec::with_capacity(len);
    let mut sqrt_det = Vec::with_capacity(len);
    for idx in 0..len {
        let x = grid.coords(idx);
        let s = preset.sigma_at(x);
        if !is_spd(&s, n) {
            return Err(FlowError::NonPositiveMetric { node: idx, coord: x[0] });
        }
        sqrt_det.push(crate::tensor::det(&s, n).sqrt());
        sigma_inv.push(inverse(&s, n).expect("spd metric is invertible"));
        sigma.push(s);
    }
    let (christoffel, riemann, ricci) = match source {
        MetricSource::Analytic => {
            let mut c = Vec::with_capacity(len);
            let mut r = Vec::with_capacity(len);
            let mut q = Vec::with_capacity(len);
            for idx in 0..len {
                let (a, b, d) = preset.analytic_at(grid.coords(idx));
                c.push(a);
                r.push(b);
                q.push(d);
            }
            (c, r, q)
        }
        MetricSource::Stencil => {
            let st = Stencil::new(grid);
            let c = christoffel_base(&st, &sigma, &sigma_inv);
            let r = riemann_base(&st, &c, &sigma);
            let q = ricci_base(&r, &sigma_inv, n);
            (c, r, q)
        }
    };
    // Centred differences cannot resolve the coordinate singularity of the
    // curvature next to a pole, so stencil curvature is trusted on the
    // measurement band only.
    let trusted = |i: usize| source == MetricSource::Analytic || grid.in_measure_band(i);
    let delta_ric = (0..len)
        .filter(|&i| trusted(i))
        .map(|i| generalized_eigen(&ricci[i], &sigma[i], n).0)
        .fold(f64::INFINITY, f64::min);
    Ok(MetricField {
        preset,
        source,
        grid: grid.clone(),
        sigma,
        sigma_inv,
        sqrt_det,
        christoffel,
        riemann,
        ricci,
        delta_ric,
    })
}

/// `Γ^k_ij = ½ σ^kl (∂_i σ_lj + ∂_j σ_il − ∂_l σ_ij)` from `dm[k][i][j] = ∂_k m_ij`.
pub fn christoffel_from_derivs(inv: &Mat2, dm: &[Mat2; 2], n: usize) -> Chr {
    let mut c: Chr = [[[0.0; 2]; 2]; 2];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += inv[k][l] * (dm[i][l][j] + dm[j][i][l] - dm[l][i][j]);
                }
                c[k][i][j] = 0.5 * s;
            }
        }
    }
    c
}

/// Curvature from Christoffel symbols and their derivatives
/// `dc[b][d][a][c] = ∂_b Γ^d_ac`, lowered with `m`.
pub fn riemann_from(c: &Chr, dc: &[Chr; 2], m: &Mat2, n: usize) -> Riem {
    let mut up = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    let mut s = dc[b][d][a][cc] - dc[a][d][b][cc];
                    for e in 0..n {
                        s += c[d][b][e] * c[e][a][cc] - c[d][a][e] * c[e][b][cc];
                    }
                    up[a][b][cc][d] = s;
                }
            }
        }
    }
    let mut low: Riem = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    low[a][b][cc][d] = (0..n).map(|e| up[a][b][cc][e] * m[e][d]).sum();
                }
            }
        }
    }
    low
}

/// `Ric_ik = R_imk^m = R_imke σ^em`.
pub fn ricci_from(r: &Riem, inv: &Mat2, n: usize) -> Mat2 {
    let mut ric = ZERO2;
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for m in 0..n {
                for e in 0..n {
                    s += r[i][m][k][e] * inv[e][m];
                }
            }
            ric[i][k] = s;
        }
    }
    ric
}

/// Christoffel symbols of a sampled metric field by centred differences.
pub fn christoffel_base(st: &Stencil, metric: &[Mat2], inv: &[Mat2]) -> Vec<Chr> {
    let n = st.grid.dim();
    (0..st.grid.len())
        .map(|idx| {
            let mut dm = [ZERO2; 2];
            for (k, dk) in dm.iter_mut().enumerate().take(n) {
                for i in 0..n {
                    for j in 0..n {
                        dk[i][j] = st.d1_by(idx, k, theta_parity(&[i, j]), |q| metric[q][i][j]);
                    }
                }
            }
            christoffel_from_derivs(&inv[idx], &dm, n)
        })
        .collect()
}

/// Riemann tensor of a sampled metric from its Christoffel field.
pub fn riemann_base(st: &Stencil, chr: &[Chr], metric: &[Mat2]) -> Vec<Riem> {
    let n = st.grid.dim();
    (0..st.grid.len())
        .map(|idx| {
            let dc = chr_derivatives(st, chr, idx);
            riemann_from(&chr[idx], &dc, &metric[idx], n)
        })
        .collect()
}

/// `out[b][d][a][c] = ∂_b Γ^d_ac` by centred differences.
pub fn chr_derivatives(st: &Stencil, chr: &[Chr], idx: usize) -> [Chr; 2] {
    let n = st.grid.dim();
    let mut dc = [[[[0.0; 2]; 2]; 2]; 2];
    for (b, dcb) in dc.iter_mut().enumerate().take(n) {
        for d in 0..n {
            for a in 0..n {
                for c in 0..n {
                    dcb[d][a][c] = st.d1_by(idx, b, theta_parity(&[d, a, c]), |q| chr[q][d][a][c]);
                }
            }
        }
    }
    dc
}

pub fn ricci_base(riem: &[Riem], inv: &[Mat2], n: usize) -> Vec<Mat2> {
    riem.iter().zip(inv).map(|(r, i)| ricci_from(r, i, n)).collect()
}
