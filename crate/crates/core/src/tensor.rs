//! Small fixed-size tensor helpers.
//!
//! Everything is stored in 2-dimensional arrays even for `n = 1`; the
//! dimension is passed explicitly and unused slots stay zero.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];
/// `c[k][i][j]` = Γ^k_ij.
pub type Chr = [[[f64; 2]; 2]; 2];
/// Fully lowered `r[a][b][c][d]`.
pub type Riem = [[[[f64; 2]; 2]; 2]; 2];

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Chr3 = [[[f64; 3]; 3]; 3];
pub type Riem3 = [[[[f64; 3]; 3]; 3]; 3];

pub const ZERO2: Mat2 = [[0.0; 2]; 2];

pub fn det(m: &Mat2, n: usize) -> f64 {
    if n == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

pub fn inverse(m: &Mat2, n: usize) -> Option<Mat2> {
    let d = det(m, n);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    if n == 1 {
        return Some([[1.0 / d, 0.0], [0.0, 0.0]]);
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Positive definiteness of a symmetric matrix (leading minors).
pub fn is_spd(m: &Mat2, n: usize) -> bool {
    m[0][0] > 0.0 && (n == 1 || det(m, n) > 0.0)
}

pub fn identity(n: usize) -> Mat2 {
    let mut m = ZERO2;
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat2, b: &Mat2, n: usize) -> Mat2 {
    let mut c = ZERO2;
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn trace(m: &Mat2, n: usize) -> f64 {
    (0..n).map(|i| m[i][i]).sum()
}

/// `a^{ij} b_ij`.
pub fn contract(a: &Mat2, b: &Mat2, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

pub fn raise(inv: &Mat2, v: &Vec2, n: usize) -> Vec2 {
    let mut out = [0.0; 2];
    for i in 0..n {
        out[i] = (0..n).map(|j| inv[i][j] * v[j]).sum();
    }
    out
}

/// Norm of a (0,2)-tensor measured with the inverse metric `inv`.
pub fn norm2(inv: &Mat2, t: &Mat2, n: usize) -> f64 {
    // |T|^2 = inv^{ik} inv^{jl} T_ij T_kl
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    s += inv[i][k] * inv[j][l] * t[i][j] * t[k][l];
                }
            }
        }
    }
    s.max(0.0).sqrt()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigen(m: &Mat2, n: usize) -> (f64, f64) {
    if n == 1 {
        return (m[0][0], m[0][0]);
    }
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let d = 0.5 * (m[0][0] - m[1][1]);
    let rad = (d * d + m[0][1] * m[1][0]).max(0.0).sqrt();
    (half_tr - rad, half_tr + rad)
}

/// Eigenvalues of `a` relative to the SPD form `b`, i.e. roots of
/// `det(a - λ b) = 0`, ascending.
pub fn generalized_eigen(a: &Mat2, b: &Mat2, n: usize) -> (f64, f64) {
    if n == 1 {
        let l = a[0][0] / b[0][0];
        return (l, l);
    }
    let qa = det(b, n);
    let qb = -(a[0][0] * b[1][1] + a[1][1] * b[0][0] - a[0][1] * b[1][0] - a[1][0] * b[0][1]);
    let qc = det(a, n);
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    // Stable quadratic roots.
    let q = -0.5 * (qb + qb.signum() * disc);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / qa, qc / q) };
    if r1 <= r2 {
        (r1, r2)
    } else {
        (r2, r1)
    }
}

pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
