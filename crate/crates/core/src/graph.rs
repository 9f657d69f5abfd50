//! Geometry of the graph `x: p ↦ (u(p), p)` with `u = e^φ`.
//!
//! Everything is computed from `φ`, its gradient and its σ-covariant
//! Hessian. Points of the graph are assembled by [`point_geometry`], which is
//! pure algebra and therefore shared by the flow, the oracle and the tests.

use crate::base::MetricField;
use crate::error::{FlowError, Result};
use crate::grid::Stencil;
use crate::tensor::{contract, generalized_eigen, matmul, raise, trace, Chr, Mat2, Vec2, Vec3, ZERO2};

/// The evolved unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub t: f64,
    pub phi: Vec<f64>,
    pub step: u64,
    /// True when `phi` holds `φ̃ = φ − t/n` instead of `φ`.
    pub rescaled: bool,
}

impl GraphState {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if let Some(node) = phi.iter().position(|p| !p.is_finite()) {
            return Err(FlowError::NonFinite { quantity: "phi", node });
        }
        Ok(GraphState { t: 0.0, phi, step: 0, rescaled: false })
    }

    pub fn from_u(u: &[f64]) -> Result<Self> {
        if let Some(node) = u.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(FlowError::NonFinite { quantity: "u (must be positive)", node });
        }
        Self::new(u.iter().map(|x| x.ln()).collect())
    }

    pub fn u(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.exp()).collect()
    }
}

/// All graph quantities at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub u: f64,
    /// `φ_i`
    pub dphi: Vec2,
    /// `φ^i = σ^ij φ_j`
    pub dphi_up: Vec2,
    /// `D_ij φ`
    pub hess: Mat2,
    /// `|Dφ|²_σ`
    pub grad_sq: f64,
    pub v: f64,
    pub g: Mat2,
    pub g_inv: Mat2,
    /// Unit normal, ambient components (radial first).
    pub nu: Vec3,
    pub h: Mat2,
    /// `h^i_j` stored as `[i][j]`.
    pub weingarten: Mat2,
    pub mean_curvature: f64,
    /// The three closed forms of H, see [`mean_curvature_forms`].
    pub h_forms: [f64; 3],
    pub chi: f64,
    pub f: f64,
    /// `a^ij = v⁻² u² g^ij`
    pub a: Mat2,
    /// Smallest eigenvalue of `a^ij` relative to `σ^ij`.
    pub mu: f64,
}

/// Three algebraically equivalent expressions of the mean curvature:
///
/// 1. `[uv]⁻¹ (n − Δ_σ φ + D²φ(Dφ, Dφ) v⁻²)` with traces taken as matrix
///    products,
/// 2. `[uv]⁻¹ (n − σ^ij φ_ij + φ^i φ^j φ_ij v⁻²)` as explicit index sums,
/// 3. `[uv]⁻¹ (n − u² g^ij D_ij φ)`.
///
/// In the third form the Laplacian is the σ-covariant Hessian traced with g;
/// the Laplace-Beltrami operator of g would differ by first-order terms.
pub fn mean_curvature_forms(
    u: f64,
    v: f64,
    dphi_up: &Vec2,
    hess: &Mat2,
    sigma_inv: &Mat2,
    g_inv: &Mat2,
    n: usize,
) -> [f64; 3] {
    let uv = u * v;
    let v2 = v * v;
    let nf = n as f64;
    let lap = trace(&matmul(sigma_inv, hess, n), n);
    let hv = raise(hess, dphi_up, n);
    let quad: f64 = (0..n).map(|i| dphi_up[i] * hv[i]).sum();
    let h1 = (nf - lap + quad / v2) / uv;

    let mut s = 0.0;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += sigma_inv[i][j] * hess[i][j];
            q += dphi_up[i] * dphi_up[j] * hess[i][j];
        }
    }
    let h2 = (nf - s + q / v2) / uv;

    let h3 = (nf - u * u * contract(g_inv, hess, n)) / uv;
    [h1, h2, h3]
}

/// Assemble the graph geometry at a node from `u`, `Dφ` and `D²φ`.
pub fn point_geometry(u: f64, dphi: Vec2, hess: Mat2, sigma: &Mat2, sigma_inv: &Mat2, n: usize) -> PointGeometry {
    let dphi_up = raise(sigma_inv, &dphi, n);
    let grad_sq: f64 = (0..n).map(|i| dphi[i] * dphi_up[i]).sum();
    let v2 = 1.0 + grad_sq;
    let v = v2.sqrt();
    let u2 = u * u;
    let mut g = ZERO2;
    let mut g_inv = ZERO2;
    let mut h = ZERO2;
    let mut a = ZERO2;
    for i in 0..n {
        for j in 0..n {
            g[i][j] = u2 * (sigma[i][j] + dphi[i] * dphi[j]);
            g_inv[i][j] = (sigma_inv[i][j] - dphi_up[i] * dphi_up[j] / v2) / u2;
            h[i][j] = u / v * (sigma[i][j] + dphi[i] * dphi[j] - hess[i][j]);
            a[i][j] = u2 * g_inv[i][j] / v2;
        }
    }
    let weingarten = matmul(&g_inv, &h, n);
    let mean_curvature = trace(&weingarten, n);
    let h_forms = mean_curvature_forms(u, v, &dphi_up, &hess, sigma_inv, &g_inv, n);
    let mut nu = [1.0 / v, 0.0, 0.0];
    for k in 0..n {
        nu[k + 1] = -dphi_up[k] / (u * v);
    }
    let mu = generalized_eigen(&a, sigma_inv, n).0;
    PointGeometry {
        u,
        dphi,
        dphi_up,
        hess,
        grad_sq,
        v,
        g,
        g_inv,
        nu,
        h,
        weingarten,
        mean_curvature,
        h_forms,
        chi: v / u,
        f: h_forms[1] * u / v,
        a,
        mu,
    }
}

/// Centred-difference gradient and σ-covariant Hessian of `φ` at a node.
pub fn derivatives_at(st: &Stencil, phi: &[f64], chr: &Chr, idx: usize) -> (Vec2, Mat2) {
    let n = st.grid.dim();
    let d = st.gradient(phi, idx);
    let mut hess = st.hessian(phi, idx);
    for i in 0..n {
        for j in 0..n {
            hess[i][j] -= (0..n).map(|k| chr[k][i][j] * d[k]).sum::<f64>();
        }
    }
    (d, hess)
}

/// `D_ij φ = ∂_ij φ − Γ^m_ij φ_m` at every node.
pub fn covariant_hessian(st: &Stencil, phi: &[f64], metric: &MetricField) -> Vec<Mat2> {
    (0..phi.len()).map(|i| derivatives_at(st, phi, &metric.christoffel[i], i).1).collect()
}

/// Geometry of the whole graph.
#[derive(Debug, Clone)]
pub struct GraphGeometry {
    pub points: Vec<PointGeometry>,
    /// Largest mutual difference of the three mean curvature forms.
    pub h_form_discrepancy: f64,
}

pub fn graph_quantities(phi: &[f64], metric: &MetricField, st: &Stencil) -> Result<GraphGeometry> {
    let n = metric.dim();
    let mut points = Vec::with_capacity(phi.len());
    let mut disc = 0.0_f64;
    for idx in 0..phi.len() {
        let (d, hess) = derivatives_at(st, phi, &metric.christoffel[idx], idx);
        let p = point_geometry(phi[idx].exp(), d, hess, &metric.sigma[idx], &metric.sigma_inv[idx], n);
        let checks: [(&'static str, f64); 5] =
            [("u", p.u), ("v", p.v), ("mean curvature", p.mean_curvature), ("F", p.f), ("mu", p.mu)];
        for (name, val) in checks {
            if !val.is_finite() {
                return Err(FlowError::NonFinite { quantity: name, node: idx });
            }
        }
        let [a, b, c] = p.h_forms;
        disc = disc.max((a - b).abs()).max((b - c).abs()).max((a - c).abs());
        points.push(p);
    }
    Ok(GraphGeometry { points, h_form_discrepancy: disc })
}

/// `a^ij` at every node and its smallest eigenvalue relative to σ over the grid.
pub fn parabolicity(geom: &GraphGeometry) -> Result<(Vec<Mat2>, f64)> {
    let mut mu = f64::INFINITY;
    for (node, p) in geom.points.iter().enumerate() {
        if !(p.mu > 0.0) {
            return Err(FlowError::Degenerate { node, value: p.mu });
        }
        mu = mu.min(p.mu);
    }
    Ok((geom.points.iter().map(|p| p.a).collect(), mu))
}

/// `^gΓ^k_ij = ^σΓ^k_ij + φ_i δ^k_j + φ_j δ^k_i − u⁻² v⁻² φ^k g_ij + v⁻² φ^k D_ij φ`.
pub fn graph_connection(p: &PointGeometry, chr: &Chr, n: usize) -> Chr {
    let mut out = *chr;
    let v2 = p.v * p.v;
    let u2 = p.u * p.u;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut c = -p.dphi_up[k] * p.g[i][j] / (u2 * v2) + p.dphi_up[k] * p.hess[i][j] / v2;
                if k == j {
                    c += p.dphi[i];
                }
                if k == i {
                    c += p.dphi[j];
                }
                out[k][i][j] += c;
            }
        }
    }
    out
}
