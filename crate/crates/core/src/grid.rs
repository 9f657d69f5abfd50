//! Structured chart grids over the base manifold and their finite-difference
//! stencils.
//!
//! Periodic axes carry nodes at `x_j = j h` with `h = 2π / N`. The polar axis
//! of the sphere is cell-centred, `θ_i = (i + ½) π / N`, so no node sits on a
//! pole. A stencil that steps past a pole re-enters on the antipodal
//! meridian: row `-k` maps to row `k - 1` and row `N + k - 1` to row `N - k`,
//! both shifted by half a turn in λ. Crossing the pole reverses the θ
//! direction, so a tensor component changes sign once per θ index.

use crate::error::{FlowError, Result};

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisTopology {
    Periodic,
    PoleBounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    pub topology: Vec<AxisTopology>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    n: usize,
    counts: [usize; 2],
    spacing: [f64; 2],
    topology: [AxisTopology; 2],
}

/// A node reached by a stencil offset, with the pole-crossing flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Site {
    pub index: usize,
    pub crossed: bool,
}

impl ChartGrid {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        let n = spec.counts.len();
        if !(1..=2).contains(&n) || spec.topology.len() != n {
            return Err(FlowError::InvalidGrid(format!(
                "expected 1 or 2 axes with matching topology, got {} counts and {} topologies",
                spec.counts.len(),
                spec.topology.len()
            )));
        }
        for (axis, &c) in spec.counts.iter().enumerate() {
            if c < MIN_NODES {
                return Err(FlowError::InvalidGrid(format!(
                    "node count below minimum: axis {axis} has {c} nodes, at least {MIN_NODES} required"
                )));
            }
        }
        if spec.topology[0] == AxisTopology::PoleBounded && n == 1 {
            return Err(FlowError::InvalidGrid("pole-bounded topology needs a second (periodic) axis".into()));
        }
        if n == 2 && spec.topology[1] == AxisTopology::PoleBounded {
            return Err(FlowError::InvalidGrid("only axis 0 may be pole-bounded".into()));
        }
        if spec.topology[0] == AxisTopology::PoleBounded && !spec.counts[1].is_multiple_of(2) {
            return Err(FlowError::InvalidGrid(format!(
                "pole-bounded grids need an even azimuthal count, got {}",
                spec.counts[1]
            )));
        }
        let mut counts = [1, 1];
        let mut spacing = [0.0, 0.0];
        let mut topology = [AxisTopology::Periodic; 2];
        for axis in 0..n {
            counts[axis] = spec.counts[axis];
            topology[axis] = spec.topology[axis];
            let extent = match topology[axis] {
                AxisTopology::Periodic => 2.0 * std::f64::consts::PI,
                AxisTopology::PoleBounded => std::f64::consts::PI,
            };
            spacing[axis] = extent / counts[axis] as f64;
        }
        Ok(ChartGrid { n, counts, spacing, topology })
    }

    pub fn circle(n0: usize) -> Result<Self> {
        Self::build(&GridSpec { counts: vec![n0], topology: vec![AxisTopology::Periodic] })
    }

    pub fn sphere(n_theta: usize, n_lambda: usize) -> Result<Self> {
        Self::build(&GridSpec {
            counts: vec![n_theta, n_lambda],
            topology: vec![AxisTopology::PoleBounded, AxisTopology::Periodic],
        })
    }

    pub fn torus(n0: usize, n1: usize) -> Result<Self> {
        Self::build(&GridSpec { counts: vec![n0, n1], topology: vec![AxisTopology::Periodic, AxisTopology::Periodic] })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.n]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.n]
    }

    pub fn topology(&self) -> &[AxisTopology] {
        &self.topology[..self.n]
    }

    pub fn has_poles(&self) -> bool {
        self.topology[0] == AxisTopology::PoleBounded
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(0.0, f64::max)
    }

    /// Product of spacings: the quadrature weight of one node.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.counts[1] + j
    }

    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.counts[1], idx % self.counts[1])
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        let x0 = match self.topology[0] {
            AxisTopology::Periodic => i as f64 * self.spacing[0],
            AxisTopology::PoleBounded => (i as f64 + 0.5) * self.spacing[0],
        };
        let x1 = if self.n == 2 { j as f64 * self.spacing[1] } else { 0.0 };
        [x0, x1]
    }

    /// Resolve the node at offset `(di, dj)` from `idx`, mirroring across a
    /// pole when needed. Offsets must be smaller than the axis length.
    pub fn shift(&self, idx: usize, di: isize, dj: isize) -> Site {
        let (i, j) = self.split(idx);
        let n0 = self.counts[0] as isize;
        let n1 = self.counts[1] as isize;
        let mut ii = i as isize + di;
        let mut jj = j as isize + dj;
        let mut crossed = false;
        match self.topology[0] {
            AxisTopology::Periodic => ii = ii.rem_euclid(n0),
            AxisTopology::PoleBounded => {
                if ii < 0 {
                    ii = -ii - 1;
                    jj += n1 / 2;
                    crossed = true;
                } else if ii >= n0 {
                    ii = 2 * n0 - 1 - ii;
                    jj += n1 / 2;
                    crossed = true;
                }
            }
        }
        jj = jj.rem_euclid(n1);
        Site { index: ii as usize * n1 as usize + jj as usize, crossed }
    }

    /// Nodes used for convergence-order measurements.
    ///
    /// Coordinate-component differences lose uniform accuracy next to the
    /// poles of the lat-lon chart, so on pole-bounded grids only the band
    /// `π/4 ≤ θ ≤ 3π/4` is used. Elsewhere every node is included.
    pub fn in_measure_band(&self, idx: usize) -> bool {
        if !self.has_poles() {
            return true;
        }
        let th = self.coords(idx)[0];
        let q = std::f64::consts::FRAC_PI_4;
        th >= q - 1e-12 && th <= 3.0 * q + 1e-12
    }

    /// A grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::build(&GridSpec {
            counts: self.counts().iter().map(|c| c * factor).collect(),
            topology: self.topology().to_vec(),
        })
    }

    /// Canonical text used for checkpoint grid hashes.
    pub fn canonical(&self) -> String {
        let topo: Vec<&str> = self
            .topology()
            .iter()
            .map(|t| match t {
                AxisTopology::Periodic => "periodic",
                AxisTopology::PoleBounded => "pole",
            })
            .collect();
        format!("n={};counts={:?};topology={}", self.n, self.counts(), topo.join(","))
    }
}

/// Second-order centred difference operators on a [`ChartGrid`].
///
/// `odd` marks tensor components that flip sign across a pole. The
/// `defect` factor scales second differences and exists only so that the
/// verification pipeline can be shown to catch a broken stencil; it is zero
/// in every real computation.
#[derive(Debug, Clone, Copy)]
pub struct Stencil<'a> {
    pub grid: &'a ChartGrid,
    pub defect: f64,
}

impl<'a> Stencil<'a> {
    pub fn new(grid: &'a ChartGrid) -> Self {
        Stencil { grid, defect: 0.0 }
    }

    pub fn with_defect(grid: &'a ChartGrid, defect: f64) -> Self {
        Stencil { grid, defect }
    }

    #[inline]
    fn sample(&self, idx: usize, di: isize, dj: isize, odd: bool, f: &impl Fn(usize) -> f64) -> f64 {
        let s = self.grid.shift(idx, di, dj);
        let v = f(s.index);
        if odd && s.crossed {
            -v
        } else {
            v
        }
    }

    fn offset(axis: usize, k: isize) -> (isize, isize) {
        if axis == 0 {
            (k, 0)
        } else {
            (0, k)
        }
    }

    /// `∂_axis f` at `idx`.
    pub fn d1_by(&self, idx: usize, axis: usize, odd: bool, f: impl Fn(usize) -> f64) -> f64 {
        let h = self.grid.spacing[axis];
        let (pi, pj) = Self::offset(axis, 1);
        let (mi, mj) = Self::offset(axis, -1);
        (self.sample(idx, pi, pj, odd, &f) - self.sample(idx, mi, mj, odd, &f)) / (2.0 * h)
    }

    /// `∂_a ∂_b f` at `idx`: three-point rule on the diagonal, four-point
    /// cross rule off it.
    pub fn d2_by(&self, idx: usize, a: usize, b: usize, odd: bool, f: impl Fn(usize) -> f64) -> f64 {
        let scale = 1.0 + self.defect;
        if a == b {
            let h = self.grid.spacing[a];
            let (pi, pj) = Self::offset(a, 1);
            let (mi, mj) = Self::offset(a, -1);
            let c = f(idx);
            scale * (self.sample(idx, pi, pj, odd, &f) - 2.0 * c + self.sample(idx, mi, mj, odd, &f)) / (h * h)
        } else {
            let h0 = self.grid.spacing[0];
            let h1 = self.grid.spacing[1];
            let pp = self.sample(idx, 1, 1, odd, &f);
            let pm = self.sample(idx, 1, -1, odd, &f);
            let mp = self.sample(idx, -1, 1, odd, &f);
            let mm = self.sample(idx, -1, -1, odd, &f);
            scale * (pp - pm - mp + mm) / (4.0 * h0 * h1)
        }
    }

    pub fn d1(&self, field: &[f64], idx: usize, axis: usize, odd: bool) -> f64 {
        self.d1_by(idx, axis, odd, |m| field[m])
    }

    pub fn d2(&self, field: &[f64], idx: usize, a: usize, b: usize, odd: bool) -> f64 {
        self.d2_by(idx, a, b, odd, |m| field[m])
    }

    pub fn gradient(&self, field: &[f64], idx: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (axis, gi) in g.iter_mut().enumerate().take(self.grid.n) {
            *gi = self.d1(field, idx, axis, false);
        }
        g
    }

    /// Coordinate second derivatives of a scalar field.
    pub fn hessian(&self, field: &[f64], idx: usize) -> [[f64; 2]; 2] {
        let n = self.grid.n;
        let mut h = [[0.0; 2]; 2];
        for a in 0..n {
            for b in a..n {
                let v = self.d2(field, idx, a, b, false);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }
}

/// Number of θ indices among the given component indices on a
/// pole-bounded grid, reduced mod 2. Index 0 is θ.
pub fn theta_parity(indices: &[usize]) -> bool {
    indices.iter().filter(|&&i| i == 0).count() % 2 == 1
}

/// Same as [`theta_parity`] for ambient indices where 0 is the radial
/// direction and base index `k` is stored as `k + 1`.
pub fn theta_parity_ambient(indices: &[usize]) -> bool {
    indices.iter().filter(|&&i| i == 1).count() % 2 == 1
}
