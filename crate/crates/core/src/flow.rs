//! Method-of-lines integration of `φ̇ = 1/F(Dφ, D²φ)`.
//!
//! [`FlowOperator`] evaluates the right side with a precomputed neighbour
//! table and per-node metric coefficients; it performs the same arithmetic
//! as [`crate::graph::point_geometry`] but skips everything the flow does
//! not need.

use crate::base::MetricField;
use crate::error::{FlowError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk2,
    Rk4,
}

impl Integrator {
    pub fn name(&self) -> &'static str {
        match self {
            Integrator::Rk2 => "rk2",
            Integrator::Rk4 => "rk4",
        }
    }
}

/// Neighbour slots in [`FlowOperator`]'s table.
const E0P: usize = 0;
const E0M: usize = 1;
const E1P: usize = 2;
const E1M: usize = 3;
const PP: usize = 4;
const PM: usize = 5;
const MP: usize = 6;
const MM: usize = 7;

#[derive(Debug, Clone)]
pub struct FlowOperator {
    n: usize,
    len: usize,
    nb: Vec<[u32; 8]>,
    /// σ^00, σ^01, σ^11
    sinv: Vec<[f64; 3]>,
    /// Γ^0_00, Γ^0_01, Γ^0_11, Γ^1_00, Γ^1_01, Γ^1_11
    chr: Vec<[f64; 6]>,
    h: [f64; 2],
    h_min: f64,
}

/// Result of evaluating the right side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsInfo {
    /// Largest chart eigenvalue of `F⁻² a^ij` over the grid.
    pub lambda_max: f64,
}

impl FlowOperator {
    pub fn new(metric: &MetricField) -> Self {
        let grid = &metric.grid;
        let n = grid.dim();
        let len = grid.len();
        let mut nb = Vec::with_capacity(len);
        for idx in 0..len {
            let s = |di, dj| grid.shift(idx, di, dj).index as u32;
            if n == 1 {
                nb.push([s(1, 0), s(-1, 0), 0, 0, 0, 0, 0, 0]);
            } else {
                nb.push([s(1, 0), s(-1, 0), s(0, 1), s(0, -1), s(1, 1), s(1, -1), s(-1, 1), s(-1, -1)]);
            }
        }
        let sinv = metric.sigma_inv.iter().map(|m| [m[0][0], m[0][1], m[1][1]]).collect();
        let chr = metric
            .christoffel
            .iter()
            .map(|c| [c[0][0][0], c[0][0][1], c[0][1][1], c[1][0][0], c[1][0][1], c[1][1][1]])
            .collect();
        let sp = grid.spacing();
        let h = [sp[0], if n == 2 { sp[1] } else { 1.0 }];
        FlowOperator { n, len, nb, sinv, chr, h, h_min: grid.min_spacing() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Write `1/F` into `out`. Fails when `F` is not positive and finite.
    pub fn eval(&self, phi: &[f64], out: &mut [f64]) -> Result<RhsInfo> {
        assert_eq!(phi.len(), self.len);
        assert_eq!(out.len(), self.len);
        if self.n == 1 {
            self.eval_1d(phi, out)
        } else {
            self.eval_2d(phi, out)
        }
    }

    fn sign_loss(&self, phi: &[f64], node: usize, f: f64, v2: f64) -> FlowError {
        if !f.is_finite() {
            return FlowError::NonFinite { quantity: "F", node };
        }
        // H = F v / u
        FlowError::NonPositiveMeanCurvature { node, value: f * v2.sqrt() / phi[node].exp() }
    }

    fn eval_1d(&self, phi: &[f64], out: &mut [f64]) -> Result<RhsInfo> {
        let inv2h = 0.5 / self.h[0];
        let invh2 = 1.0 / (self.h[0] * self.h[0]);
        let mut lam = 0.0_f64;
        for idx in 0..self.len {
            let nb = &self.nb[idx];
            let fp = phi[nb[E0P] as usize];
            let fm = phi[nb[E0M] as usize];
            let s = self.sinv[idx][0];
            let c = self.chr[idx][0];
            let p = (fp - fm) * inv2h;
            let hess = (fp - 2.0 * phi[idx] + fm) * invh2 - c * p;
            let up = s * p;
            let v2 = 1.0 + up * p;
            let iv2 = 1.0 / v2;
            let f = (1.0 - s * hess + up * up * hess * iv2) * iv2;
            if !(f > 0.0) || !f.is_finite() {
                return Err(self.sign_loss(phi, idx, f, v2));
            }
            let rate = 1.0 / f;
            out[idx] = rate;
            let a = (s - up * up * iv2) * iv2;
            lam = lam.max(a * rate * rate);
        }
        Ok(RhsInfo { lambda_max: lam })
    }

    fn eval_2d(&self, phi: &[f64], out: &mut [f64]) -> Result<RhsInfo> {
        let [h0, h1] = self.h;
        let i2h0 = 0.5 / h0;
        let i2h1 = 0.5 / h1;
        let ih00 = 1.0 / (h0 * h0);
        let ih11 = 1.0 / (h1 * h1);
        let ih01 = 0.25 / (h0 * h1);
        let mut lam = 0.0_f64;
        for idx in 0..self.len {
            let nb = &self.nb[idx];
            let at = |k: usize| phi[nb[k] as usize];
            let c0 = phi[idx];
            let (e0p, e0m, e1p, e1m) = (at(E0P), at(E0M), at(E1P), at(E1M));
            let p0 = (e0p - e0m) * i2h0;
            let p1 = (e1p - e1m) * i2h1;
            let q00 = (e0p - 2.0 * c0 + e0m) * ih00;
            let q11 = (e1p - 2.0 * c0 + e1m) * ih11;
            let q01 = (at(PP) - at(PM) - at(MP) + at(MM)) * ih01;
            let g = &self.chr[idx];
            let d00 = q00 - g[0] * p0 - g[3] * p1;
            let d01 = q01 - g[1] * p0 - g[4] * p1;
            let d11 = q11 - g[2] * p0 - g[5] * p1;
            let [s00, s01, s11] = self.sinv[idx];
            let u0 = s00 * p0 + s01 * p1;
            let u1 = s01 * p0 + s11 * p1;
            let v2 = 1.0 + u0 * p0 + u1 * p1;
            let iv2 = 1.0 / v2;
            let lap = s00 * d00 + 2.0 * s01 * d01 + s11 * d11;
            let quad = u0 * u0 * d00 + 2.0 * u0 * u1 * d01 + u1 * u1 * d11;
            let f = (2.0 - lap + quad * iv2) * iv2;
            if !(f > 0.0) || !f.is_finite() {
                return Err(self.sign_loss(phi, idx, f, v2));
            }
            let rate = 1.0 / f;
            out[idx] = rate;
            // Largest eigenvalue of the chart matrix a^ij = (σ^ij − φ^i φ^j / v²) / v².
            let a00 = (s00 - u0 * u0 * iv2) * iv2;
            let a01 = (s01 - u0 * u1 * iv2) * iv2;
            let a11 = (s11 - u1 * u1 * iv2) * iv2;
            let ht = 0.5 * (a00 + a11);
            let hd = 0.5 * (a00 - a11);
            let top = ht + (hd * hd + a01 * a01).sqrt();
            lam = lam.max(top * rate * rate);
        }
        Ok(RhsInfo { lambda_max: lam })
    }

    /// `Δt = c · h_min² / (2 n Λ)`.
    pub fn dt_from_lambda(&self, c_cfl: f64, lambda_max: f64) -> Result<f64> {
        if !(c_cfl > 0.0 && c_cfl <= 1.0) {
            return Err(FlowError::ConfigGeneral(format!("c_cfl out of (0,1]: {c_cfl}")));
        }
        if !lambda_max.is_finite() || lambda_max <= 0.0 {
            return Err(FlowError::NonFinite { quantity: "stability eigenvalue", node: 0 });
        }
        Ok(c_cfl * self.h_min * self.h_min / (2.0 * self.n as f64 * lambda_max))
    }

    pub fn stable_dt(&self, phi: &[f64], c_cfl: f64) -> Result<f64> {
        let mut scratch = vec![0.0; self.len];
        let info = self.eval(phi, &mut scratch)?;
        self.dt_from_lambda(c_cfl, info.lambda_max)
    }
}

/// Reusable stage buffers for explicit Runge-Kutta steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub integrator: Integrator,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(integrator: Integrator, len: usize) -> Self {
        Stepper { integrator, k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }

    /// First stage, which also yields the stability eigenvalue. Must precede
    /// [`Stepper::finish`].
    pub fn begin(&mut self, op: &FlowOperator, phi: &[f64]) -> Result<RhsInfo> {
        op.eval(phi, &mut self.k[0])
    }

    /// Complete a step of size `dt` from `phi` after [`Stepper::begin`].
    pub fn finish(&mut self, op: &FlowOperator, phi: &mut [f64], dt: f64) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        match self.integrator {
            Integrator::Rk2 => {
                for i in 0..phi.len() {
                    tmp[i] = phi[i] + dt * k1[i];
                }
                op.eval(tmp, k2)?;
                for i in 0..phi.len() {
                    phi[i] += 0.5 * dt * (k1[i] + k2[i]);
                }
            }
            Integrator::Rk4 => {
                for i in 0..phi.len() {
                    tmp[i] = phi[i] + 0.5 * dt * k1[i];
                }
                op.eval(tmp, k2)?;
                for i in 0..phi.len() {
                    tmp[i] = phi[i] + 0.5 * dt * k2[i];
                }
                op.eval(tmp, k3)?;
                for i in 0..phi.len() {
                    tmp[i] = phi[i] + dt * k3[i];
                }
                op.eval(tmp, k4)?;
                let w = dt / 6.0;
                for i in 0..phi.len() {
                    phi[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }
        if let Some(node) = phi.iter().position(|p| !p.is_finite()) {
            return Err(FlowError::NonFinite { quantity: "phi", node });
        }
        Ok(())
    }

    /// One full step.
    pub fn step(&mut self, op: &FlowOperator, phi: &mut [f64], dt: f64) -> Result<()> {
        self.begin(op, phi)?;
        self.finish(op, phi, dt)
    }
}

/// Rescaled views of a state at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    /// `e^{−t/n}` and `e^{t/n}`.
    pub shrink: f64,
    pub grow: f64,
}

/// `φ̃ = φ − t/n`, `ũ = u e^{−t/n}`. Metric-type views scale by `shrink²`,
/// curvature-type views by `grow`.
pub fn rescale(phi: &[f64], t: f64, n: usize) -> Rescaled {
    let s = t / n as f64;
    let phi_t: Vec<f64> = phi.iter().map(|p| p - s).collect();
    let u = phi_t.iter().map(|p| p.exp()).collect();
    Rescaled { phi: phi_t, u, shrink: (-s).exp(), grow: s.exp() }
}
