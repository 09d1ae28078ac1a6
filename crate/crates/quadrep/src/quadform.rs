//! The quadratic form, its matrix, its orthogonal diagonalization, and the
//! box geometry shared by every other module.
//!
//! A form is given by its integer matrix `F` with even diagonal, so that
//! `F(x) = x^T F x / 2` takes integer values on integer vectors. The box `B`
//! is stored natively in the rotated frame: after applying the transpose of
//! the diagonalizing orthogonal matrix `M`, its edges are axis-parallel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Off-diagonal tolerance for the Jacobi eigen-iteration.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// A non-singular integral quadratic form `F(x) = x^T F x / 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawForm")]
pub struct QuadraticFormSpec {
    n: usize,
    mat: Vec<Vec<i64>>,
    det: i128,
}

/// Serde surface for form files: `{"n": 4, "matrix": [[2,0,..],..]}`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForm {
    n: usize,
    matrix: Vec<Vec<i64>>,
}

impl TryFrom<RawForm> for QuadraticFormSpec {
    type Error = Error;
    fn try_from(raw: RawForm) -> Result<Self> {
        QuadraticFormSpec::new(raw.n, raw.matrix)
    }
}

impl QuadraticFormSpec {
    /// Validates symmetry, even diagonal and non-singularity. Dimension 3 is
    /// accepted with a warning on stderr; below 3 is rejected.
    pub fn new(n: usize, mat: Vec<Vec<i64>>) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidForm(format!("dimension {n} < 3")));
        }
        if n == 3 {
            eprintln!("warning: n = 3 is below the theory's n >= 4 regime; results are heuristic");
        }
        if mat.len() != n || mat.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidForm(format!("matrix is not {n}x{n}")));
        }
        for i in 0..n {
            if mat[i][i] % 2 != 0 {
                return Err(Error::InvalidForm(format!(
                    "diagonal entry F[{i}][{i}] = {} is odd",
                    mat[i][i]
                )));
            }
            for j in 0..i {
                if mat[i][j] != mat[j][i] {
                    return Err(Error::InvalidForm(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let det = det_bareiss(&mat);
        if det == 0 {
            return Err(Error::SingularForm);
        }
        Ok(Self { n, mat, det })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The integer matrix `F`.
    pub fn mat(&self) -> &[Vec<i64>] {
        &self.mat
    }

    pub fn det(&self) -> i128 {
        self.det
    }

    /// `F(x) = x^T F x / 2` on an integer vector. Exact in `i128`.
    pub fn evaluate_int(&self, x: &[i64]) -> Result<i128> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut acc: i128 = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.mat[i][j] as i128 * x[i] as i128 * x[j] as i128;
            }
        }
        Ok(acc / 2)
    }

    /// `F(x)` on a real vector.
    pub fn evaluate_real(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.mat[i][j] as f64 * x[i] * x[j];
            }
        }
        Ok(acc / 2.0)
    }

    /// The gradient `grad F(x) = F x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.mat[i][j] as f64 * x[j]).sum())
            .collect()
    }

    /// Half-matrix `F/2` as floats, the matrix whose eigenvalues are the
    /// `lambda_i`.
    pub fn half_matrix(&self) -> Vec<Vec<f64>> {
        self.mat
            .iter()
            .map(|row| row.iter().map(|&v| v as f64 / 2.0).collect())
            .collect()
    }

    /// Coordinate blocks of the form: connected components of the graph with
    /// an edge wherever `F[i][j] != 0`. Variables in different blocks never
    /// interact, which lets mod-q value distributions be convolved per block.
    pub fn coordinate_blocks(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut blocks = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut block = Vec::new();
            seen[start] = true;
            while let Some(i) = stack.pop() {
                block.push(i);
                for j in 0..self.n {
                    if !seen[j] && i != j && self.mat[i][j] != 0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            block.sort_unstable();
            blocks.push(block);
        }
        blocks
    }

    /// The sub-form restricted to one coordinate block.
    pub fn block_value(&self, block: &[usize], vals: &[i64]) -> i128 {
        let mut acc: i128 = 0;
        for (bi, &i) in block.iter().enumerate() {
            for (bj, &j) in block.iter().enumerate() {
                acc += self.mat[i][j] as i128 * vals[bi] as i128 * vals[bj] as i128;
            }
        }
        acc / 2
    }
}

/// Fraction-free determinant (Bareiss) in `i128`.
fn det_bareiss(mat: &[Vec<i64>]) -> i128 {
    let n = mat.len();
    let mut a: Vec<Vec<i128>> = mat
        .iter()
        .map(|r| r.iter().map(|&v| v as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return 0;
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Orthogonal diagonalization of `F/2`.
#[derive(Debug, Clone, Serialize)]
pub struct Diagonalization {
    /// Orthogonal matrix; column `i` is the eigenvector of `lambda_i`.
    pub m: Vec<Vec<f64>>,
    /// Eigenvalues of `F/2`, sorted descending, all nonzero.
    pub lambdas: Vec<f64>,
}

impl Diagonalization {
    /// `M^T x` for a real vector.
    pub fn rotate_to_star(&self, x: &[f64]) -> Vec<f64> {
        let n = self.lambdas.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.m[j][i] * x[j]).sum())
            .collect()
    }

    /// `M x*`: back from the rotated frame.
    pub fn rotate_from_star(&self, xs: &[f64]) -> Vec<f64> {
        let n = self.lambdas.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.m[i][j] * xs[j]).sum())
            .collect()
    }

    /// True when `M` is the identity, i.e. the form was already diagonal and
    /// rotated-frame membership tests are exact.
    pub fn is_identity(&self) -> bool {
        let n = self.lambdas.len();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let want = if i == j { 1.0 } else { 0.0 };
                (self.m[i][j] - want).abs() < 1e-14
            })
        })
    }
}

/// Cyclic Jacobi eigen-decomposition of `F/2`.
///
/// Output is deterministic: eigenvalues sorted descending, and the first
/// nonzero entry of each eigenvector is made positive.
pub fn diagonalize(form: &QuadraticFormSpec) -> Result<Diagonalization> {
    let n = form.n();
    let mut a = form.half_matrix();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1.0);

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(a[i][j].abs());
            }
        }
        if off <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= JACOBI_TOL * scale * 1e-3 {
                    continue;
                }
                // Classical 2x2 rotation annihilating a[p][q].
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNonConvergence(JACOBI_MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());

    let lambdas: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    if lambdas.iter().any(|l| l.abs() < 1e-12 * scale) {
        return Err(Error::SingularForm);
    }

    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();
    // Fix the sign of each column for reproducible output.
    for c in 0..n {
        let lead = (0..n).map(|r| m[r][c]).find(|x| x.abs() > 1e-12);
        if let Some(l) = lead {
            if l < 0.0 {
                for r in 0..n {
                    m[r][c] = -m[r][c];
                }
            }
        }
    }
    Ok(Diagonalization { m, lambdas })
}

/// Hyperrectangle stored in the rotated frame: the box `B` is
/// `M * prod_i [c*_i - g*_i, c*_i + g*_i]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub c_star: Vec<f64>,
    pub gamma_star: Vec<f64>,
}

impl BoxSpec {
    pub fn new(c_star: Vec<f64>, gamma_star: Vec<f64>) -> Result<Self> {
        if c_star.len() != gamma_star.len() {
            return Err(Error::DimensionMismatch {
                expected: c_star.len(),
                got: gamma_star.len(),
            });
        }
        if gamma_star.iter().any(|&g| g <= 0.0) {
            return Err(Error::OutOfRange("all half-widths must be positive".into()));
        }
        Ok(Self { c_star, gamma_star })
    }

    pub fn n(&self) -> usize {
        self.c_star.len()
    }

    /// Rotated-frame edge intervals of the dilated box scaled by `P`:
    /// interval `i` is `[P(c*_i - d g*_i), P(c*_i + d g*_i)]`. The dilation
    /// scales `Gamma = B - c` about the centre, as in the sandwich-weight
    /// construction.
    pub fn rotated_intervals(&self, p: f64, dilation: f64) -> Result<Vec<(f64, f64)>> {
        if dilation < 0.0 {
            return Err(Error::OutOfRange(format!("dilation {dilation} < 0")));
        }
        Ok(self
            .c_star
            .iter()
            .zip(&self.gamma_star)
            .map(|(&c, &g)| (p * (c - dilation * g), p * (c + dilation * g)))
            .collect())
    }

    /// Membership of a rotated-frame point in the dilated, `P`-scaled box.
    /// `tol` absorbs rotation rounding at the boundary.
    pub fn contains_star(&self, xs: &[f64], p: f64, dilation: f64, tol: f64) -> bool {
        xs.iter()
            .zip(self.c_star.iter().zip(&self.gamma_star))
            .all(|(&x, (&c, &g))| (x - p * c).abs() <= p * dilation * g + tol)
    }
}

/// Scale and smoothing parameters of the Gaussian weight.
#[derive(Debug, Clone)]
pub struct SmoothingParams {
    /// Scale `P >= 2`.
    pub p: f64,
    /// Smoothing exponent `A > 0`.
    pub a: f64,
    /// Weight centre parameter; `|x0| <= x0_bound`.
    pub x0: Vec<f64>,
}

/// Default bound on `|x0|`. The theory only needs `x0` bounded; the value is
/// configurable.
pub const DEFAULT_X0_BOUND: f64 = 4.0;

impl SmoothingParams {
    pub fn new(p: f64, a: f64, x0: Vec<f64>) -> Result<Self> {
        Self::with_x0_bound(p, a, x0, DEFAULT_X0_BOUND)
    }

    pub fn with_x0_bound(p: f64, a: f64, x0: Vec<f64>, x0_bound: f64) -> Result<Self> {
        if p < 2.0 {
            return Err(Error::OutOfRange(format!("P = {p} < 2")));
        }
        if a <= 0.0 {
            return Err(Error::OutOfRange(format!("A = {a} <= 0")));
        }
        let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > x0_bound {
            return Err(Error::OutOfRange(format!(
                "|x0| = {norm} exceeds bound {x0_bound}"
            )));
        }
        Ok(Self { p, a, x0 })
    }

    /// `K = log P`.
    pub fn k(&self) -> f64 {
        self.p.ln()
    }

    /// `s = 2 + A`.
    pub fn s(&self) -> f64 {
        2.0 + self.a
    }

    /// `delta = K^{-A}`.
    pub fn delta(&self) -> f64 {
        self.k().powf(-self.a)
    }

    /// `Q = floor(P)`.
    pub fn q_cap(&self) -> i64 {
        self.p.floor() as i64
    }

    /// `K^A`.
    pub fn ka(&self) -> f64 {
        self.k().powf(self.a)
    }
}
