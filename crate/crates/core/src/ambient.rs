//! The warped product `ℝ₊ ×_Id Mⁿ` with metric `γ = dr² + r² σ`.
//!
//! Ambient index 0 is the radial direction; base index `k` is stored at
//! `k + 1`. All arrays are 3-dimensional regardless of `n`, unused slots
//! stay zero.

use crate::base::MetricField;
use crate::error::{FlowError, Result};
use crate::grid::{theta_parity_ambient, Stencil};
use crate::tensor::{Chr, Chr3, Mat2, Mat3, Riem, Riem3};

/// Radial level set `{r} × M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSet {
    /// Induced metric `r² σ`.
    pub alpha: Mat2,
    /// Second fundamental form w.r.t. `∂_r`, equal to `r σ`.
    pub beta: Mat2,
    pub mean_curvature: f64,
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(FlowError::NonPositiveRadius(r))
    }
}

pub fn ambient_metric(r: f64, sigma: &Mat2, n: usize) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    g[0][0] = 1.0;
    for i in 0..n {
        for j in 0..n {
            g[i + 1][j + 1] = r * r * sigma[i][j];
        }
    }
    g
}

pub fn ambient_metric_inv(r: f64, sigma_inv: &Mat2, n: usize) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    g[0][0] = 1.0;
    for i in 0..n {
        for j in 0..n {
            g[i + 1][j + 1] = sigma_inv[i][j] / (r * r);
        }
    }
    g
}

/// Levi-Civita connection of γ at radius `r` over a base point with metric
/// `sigma` and base connection `chr`.
pub fn ambient_christoffel(r: f64, sigma: &Mat2, chr: &Chr, n: usize) -> Result<Chr3> {
    check_r(r)?;
    Ok(ambient_christoffel_unchecked(r, sigma, chr, n))
}

#[inline]
pub(crate) fn ambient_christoffel_unchecked(r: f64, sigma: &Mat2, chr: &Chr, n: usize) -> Chr3 {
    let mut c = [[[0.0; 3]; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            c[0][i + 1][j + 1] = -r * sigma[i][j];
            for k in 0..n {
                c[k + 1][i + 1][j + 1] = chr[k][i][j];
            }
        }
        c[i + 1][0][i + 1] = 1.0 / r;
        c[i + 1][i + 1][0] = 1.0 / r;
    }
    c
}

/// Closed-form curvature of γ:
/// `R̄_ijkl = r² (R_ijkl − σ_ik σ_jl + σ_il σ_jk)`, zero when any index is radial.
pub fn ambient_riemann(r: f64, riem: &Riem, sigma: &Mat2, n: usize) -> Result<Riem3> {
    check_r(r)?;
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[i + 1][j + 1][k + 1][l + 1] =
                        r * r * (riem[i][j][k][l] - sigma[i][k] * sigma[j][l] + sigma[i][l] * sigma[j][k]);
                }
            }
        }
    }
    Ok(out)
}

/// Curvature of γ at `(r, node)` computed from stencil derivatives of Γ̄:
/// centred differences of step `dr` in the radial direction and grid
/// stencils along the base.
pub fn ambient_riemann_stencil(r: f64, metric: &MetricField, idx: usize, st: &Stencil, dr: f64) -> Result<Riem3> {
    check_r(r)?;
    check_r(r - dr)?;
    let n = metric.dim();
    let dim = n + 1;
    let sig = &metric.sigma;
    let chr = &metric.christoffel;
    let at = |rr: f64, q: usize| ambient_christoffel_unchecked(rr, &sig[q], &chr[q], n);
    let c0 = at(r, idx);
    let cp = at(r + dr, idx);
    let cm = at(r - dr, idx);
    // dc[b][d][a][c] = ∂_b Γ̄^d_ac
    let mut dc = [[[[0.0; 3]; 3]; 3]; 3];
    for d in 0..dim {
        for a in 0..dim {
            for c in 0..dim {
                dc[0][d][a][c] = (cp[d][a][c] - cm[d][a][c]) / (2.0 * dr);
                for k in 0..n {
                    let odd = theta_parity_ambient(&[d, a, c]) && metric.grid.has_poles();
                    dc[k + 1][d][a][c] = st.d1_by(idx, k, odd, |q| at(r, q)[d][a][c]);
                }
            }
        }
    }
    let gamma = ambient_metric(r, &sig[idx], n);
    Ok(riemann3_from(&c0, &dc, &gamma, dim))
}

/// Lowered curvature from a connection and its derivatives, dimension `dim`.
pub fn riemann3_from(c: &Chr3, dc: &[Chr3; 3], m: &Mat3, dim: usize) -> Riem3 {
    let mut up = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            for cc in 0..dim {
                for d in 0..dim {
                    let mut s = dc[b][d][a][cc] - dc[a][d][b][cc];
                    for e in 0..dim {
                        s += c[d][b][e] * c[e][a][cc] - c[d][a][e] * c[e][b][cc];
                    }
                    up[a][b][cc][d] = s;
                }
            }
        }
    }
    let mut low = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..dim {
        for b in 0..dim {
            for cc in 0..dim {
                for d in 0..dim {
                    low[a][b][cc][d] = (0..dim).map(|e| up[a][b][cc][e] * m[e][d]).sum();
                }
            }
        }
    }
    low
}

/// `Ric̄_ac = R̄_abce γ^eb`.
pub fn ambient_ricci(riem: &Riem3, gamma_inv: &Mat3, n: usize) -> Mat3 {
    let dim = n + 1;
    let mut ric = [[0.0; 3]; 3];
    for a in 0..dim {
        for c in 0..dim {
            let mut s = 0.0;
            for b in 0..dim {
                for e in 0..dim {
                    s += riem[a][b][c][e] * gamma_inv[e][b];
                }
            }
            ric[a][c] = s;
        }
    }
    ric
}

/// Closed form `Ric̄ = 0 ⊕ (Ric_σ − (n − 1) σ)`; independent of r.
pub fn ambient_ricci_closed(ric: &Mat2, sigma: &Mat2, n: usize) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            out[i + 1][j + 1] = ric[i][j] - (n as f64 - 1.0) * sigma[i][j];
        }
    }
    out
}

/// `R̄ = r⁻² (scal_σ − n(n − 1))`.
pub fn ambient_scalar_curvature(r: f64, scal_sigma: f64, n: usize) -> f64 {
    let nf = n as f64;
    (scal_sigma - nf * (nf - 1.0)) / (r * r)
}

pub fn level_set_geometry(r: f64, sigma: &Mat2, n: usize) -> Result<LevelSet> {
    check_r(r)?;
    let mut alpha = [[0.0; 2]; 2];
    let mut beta = [[0.0; 2]; 2];
    for i in 0..n {
        for j in 0..n {
            alpha[i][j] = r * r * sigma[i][j];
            beta[i][j] = r * sigma[i][j];
        }
    }
    Ok(LevelSet { alpha, beta, mean_curvature: n as f64 / r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{eval_metric, MetricPreset, MetricSource};

    #[test]
    fn radius_must_be_positive() {
        let s = [[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(level_set_geometry(0.0, &s, 2), Err(FlowError::NonPositiveRadius(_))));
        assert!(ambient_christoffel(-1.0, &s, &[[[0.0; 2]; 2]; 2], 2).is_err());
    }

    #[test]
    fn level_set_mean_curvature_is_n_over_r() {
        let s = [[1.0, 0.0], [0.0, 0.25]];
        let l = level_set_geometry(2.0, &s, 2).unwrap();
        assert_eq!(l.mean_curvature, 1.0);
        assert_eq!(l.beta[1][1], 0.5);
        assert_eq!(l.alpha[1][1], 1.0);
    }

    #[test]
    fn round_sphere_ambient_is_flat() {
        let p = MetricPreset::RoundSphere;
        let g = p.grid(&[16, 32]).unwrap();
        let m = eval_metric(p, &g, MetricSource::Analytic).unwrap();
        for idx in 0..g.len() {
            let r = ambient_riemann(1.7, &m.riemann[idx], &m.sigma[idx], 2).unwrap();
            let worst = r.iter().flatten().flatten().flatten().fold(0.0_f64, |a, b| a.max(b.abs()));
            assert!(worst < 1e-14);
        }
    }
}
