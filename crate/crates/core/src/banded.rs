//! Tridiagonal matrices with optional corner entries and their direct solvers.
//!
//! Periodic systems are handled with a Sherman-Morrison correction on top of
//! a Thomas factorization, so every solve is O(n).

use crate::error::{Error, Result};

/// Tridiagonal matrix plus the two corner entries that close a periodic
/// stencil.
///
/// `lower[i]` is entry `(i, i-1)` and `upper[i]` is entry `(i, i+1)`; the
/// unused ends `lower[0]` and `upper[n-1]` are kept at zero. For `n <= 2` the
/// corner entries overlap the band and their contributions add up.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    top_right: f64,
    bottom_left: f64,
}

impl BandedMatrix {
    pub fn tridiagonal(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if lower.len() != n || upper.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "band lengths {}/{}/{} do not match",
                lower.len(),
                n,
                upper.len()
            )));
        }
        let mut m = Self { lower, diag, upper, top_right: 0.0, bottom_left: 0.0 };
        m.lower[0] = 0.0;
        m.upper[n - 1] = 0.0;
        Ok(m)
    }

    /// Sets entries `(0, n-1)` and `(n-1, 0)`.
    pub fn with_corners(mut self, top_right: f64, bottom_left: f64) -> Self {
        self.top_right = top_right;
        self.bottom_left = bottom_left;
        self
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::tridiagonal(vec![0.0; n], vec![0.0; n], vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn corners(&self) -> (f64, f64) {
        (self.top_right, self.bottom_left)
    }

    pub fn has_corners(&self) -> bool {
        self.top_right != 0.0 || self.bottom_left != 0.0
    }

    /// Entry `(i, j)` of the equivalent dense matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.dim();
        assert!(i < n && j < n, "index ({i}, {j}) out of range for dimension {n}");
        let mut v = 0.0;
        if i == j {
            v += self.diag[i];
        }
        if j + 1 == i {
            v += self.lower[i];
        }
        if i + 1 == j {
            v += self.upper[i];
        }
        if i == 0 && j == n - 1 {
            v += self.top_right;
        }
        if i == n - 1 && j == 0 {
            v += self.bottom_left;
        }
        v
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `out = self * x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            out[i] = acc;
        }
        out[0] += self.top_right * x[n - 1];
        out[n - 1] += self.bottom_left * x[0];
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| beta * v).collect(),
            diag: self.diag.iter().map(|v| alpha + beta * v).collect(),
            upper: self.upper.iter().map(|v| beta * v).collect(),
            top_right: beta * self.top_right,
            bottom_left: beta * self.bottom_left,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn factor(&self) -> Result<BandedSolver> {
        BandedSolver::new(self)
    }
}

/// Thomas factorization of a plain tridiagonal matrix.
#[derive(Debug, Clone)]
struct Thomas {
    multipliers: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl Thomas {
    fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut multipliers = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        pivots[0] = diag[0];
        check_pivot(pivots[0], 0)?;
        for i in 1..n {
            multipliers[i] = lower[i] / pivots[i - 1];
            pivots[i] = diag[i] - multipliers[i] * upper[i - 1];
            check_pivot(pivots[i], i)?;
        }
        Ok(Self { multipliers, pivots, upper: upper.to_vec() })
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivots.len();
        for i in 1..n {
            rhs[i] -= self.multipliers[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivots[i];
        }
    }
}

fn check_pivot(p: f64, row: usize) -> Result<()> {
    if p == 0.0 || !p.is_finite() {
        Err(Error::SolverFailure(format!("zero or non-finite pivot at row {row}")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum SolverKind {
    Tridiagonal(Thomas),
    /// Sherman-Morrison correction for the corner entries.
    Cyclic {
        thomas: Thomas,
        correction: Vec<f64>,
        gamma: f64,
        top_right: f64,
        denom: f64,
    },
    Dense2([[f64; 2]; 2]),
}

/// Reusable factorization of a [`BandedMatrix`]. Immutable once built, so a
/// single instance can serve many right-hand sides concurrently.
#[derive(Debug, Clone)]
pub struct BandedSolver {
    n: usize,
    kind: SolverKind,
}

impl BandedSolver {
    pub fn new(m: &BandedMatrix) -> Result<Self> {
        let n = m.dim();
        if m.has_corners() && n <= 2 {
            let a = m.to_dense();
            let (a00, a01, a10, a11) =
                if n == 1 { (a[0][0], 0.0, 0.0, 1.0) } else { (a[0][0], a[0][1], a[1][0], a[1][1]) };
            let det = a00 * a11 - a01 * a10;
            check_pivot(det, 0)?;
            let inv = [[a11 / det, -a01 / det], [-a10 / det, a00 / det]];
            return Ok(Self { n, kind: SolverKind::Dense2(inv) });
        }
        if !m.has_corners() {
            let thomas = Thomas::new(&m.lower, &m.diag, &m.upper)?;
            return Ok(Self { n, kind: SolverKind::Tridiagonal(thomas) });
        }

        let (beta, alpha) = (m.top_right, m.bottom_left);
        let b0 = m.diag[0];
        // Sized so neither modified corner of the diagonal cancels.
        let gamma = if b0 != 0.0 {
            -b0.signum() * (b0.abs() + (alpha * beta).abs() / b0.abs())
        } else {
            -(1.0 + (alpha * beta).abs())
        };
        let mut diag = m.diag.clone();
        diag[0] -= gamma;
        diag[n - 1] -= alpha * beta / gamma;
        let thomas = Thomas::new(&m.lower, &diag, &m.upper)?;

        let mut correction = vec![0.0; n];
        correction[0] = gamma;
        correction[n - 1] = alpha;
        thomas.solve_in_place(&mut correction);
        let denom = 1.0 + correction[0] + beta * correction[n - 1] / gamma;
        check_pivot(denom, n - 1)?;
        Ok(Self { n, kind: SolverKind::Cyclic { thomas, correction, gamma, top_right: beta, denom } })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `rhs` with the solution of `M x = rhs`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.n);
        match &self.kind {
            SolverKind::Tridiagonal(t) => t.solve_in_place(rhs),
            SolverKind::Cyclic { thomas, correction, gamma, top_right, denom } => {
                thomas.solve_in_place(rhs);
                let n = self.n;
                let factor = (rhs[0] + top_right * rhs[n - 1] / gamma) / denom;
                for (x, z) in rhs.iter_mut().zip(correction) {
                    *x -= factor * z;
                }
            }
            SolverKind::Dense2(inv) => {
                if self.n == 1 {
                    rhs[0] *= inv[0][0];
                } else {
                    let (r0, r1) = (rhs[0], rhs[1]);
                    rhs[0] = inv[0][0] * r0 + inv[0][1] * r1;
                    rhs[1] = inv[1][0] * r0 + inv[1][1] * r1;
                }
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
