//! Exact and weighted lattice-point counting: the characteristic box count,
//! the Gaussian-weighted count, the sandwich weights `W+-`, the theta sum
//! `S(alpha)`, and toy-scale Poisson / Fourier consistency checks.

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::exact_sqrt_u128;
use crate::error::{Error, Result};
use crate::expsum::{self, ExpSumOptions, ExpSumQuery};
use crate::oscillatory::i_gaussian;
use crate::quadform::{BoxSpec, Diagonalization, QuadraticFormSpec, SmoothingParams};

use std::f64::consts::PI;

/// Work cap on enumeration and lattice-window sweeps.
const ENUM_BUDGET: u128 = 4_000_000_000;

/// Default per-solution truncation tolerance for smooth weights.
pub const DEFAULT_COUNT_TOL: f64 = 1e-9;

fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// Which weight a count uses.
#[derive(Debug, Clone)]
pub enum WeightKind {
    /// Indicator of the dilated box `P ((dilation)(B - c) + c)`.
    Characteristic { box_spec: BoxSpec, dilation: f64 },
    Gaussian,
    SandwichPlus { box_spec: BoxSpec },
    SandwichMinus { box_spec: BoxSpec },
}

impl WeightKind {
    fn label(&self) -> &'static str {
        match self {
            WeightKind::Characteristic { .. } => "characteristic",
            WeightKind::Gaussian => "gaussian",
            WeightKind::SandwichPlus { .. } => "sandwich-plus",
            WeightKind::SandwichMinus { .. } => "sandwich-minus",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountResult {
    pub n_target: i64,
    pub p: f64,
    pub weight: String,
    pub value: f64,
    pub lattice_points_visited: u64,
    pub solutions_found: u64,
}

/// The Gaussian weight `w(x) = pi^{-n/2} K^{An} exp(-|x - P x0|^2 P^{-2} K^{2A})`.
pub fn weight_w(x: &[f64], params: &SmoothingParams) -> f64 {
    let n = params.x0.len();
    debug_assert_eq!(x.len(), n);
    let scale = params.ka() * params.ka() / (params.p * params.p);
    let dist2: f64 = x
        .iter()
        .zip(&params.x0)
        .map(|(&xi, &x0i)| (xi - params.p * x0i).powi(2))
        .sum();
    PI.powf(-(n as f64) / 2.0) * params.ka().powi(n as i32) * (-dist2 * scale).exp()
}

/// The sandwich weight `W+-(x)`: per rotated coordinate, the Gaussian mass of
/// the window `K^A (+-(1 +- K^{-A/2}) gamma* + c* - x*/P)`, i.e. a difference
/// of error functions.
pub fn weight_wpm(
    x: &[f64],
    plus: bool,
    params: &SmoothingParams,
    box_spec: &BoxSpec,
    diag: &Diagonalization,
) -> f64 {
    let xs = diag.rotate_to_star(x);
    let ka = params.ka();
    let dil = if plus {
        1.0 + params.k().powf(-params.a / 2.0)
    } else {
        1.0 - params.k().powf(-params.a / 2.0)
    };
    let mut value = 1.0f64;
    for i in 0..xs.len() {
        let shift = box_spec.c_star[i] - xs[i] / params.p;
        let lo = ka * (-dil * box_spec.gamma_star[i] + shift);
        let hi = ka * (dil * box_spec.gamma_star[i] + shift);
        // pi^{-1/2} int_lo^hi e^{-t^2} dt
        value *= 0.5 * (libm::erf(hi) - libm::erf(lo));
    }
    value
}

/// All integer solutions of `F(x) = N` inside the coordinate region, plus the
/// number of candidate lattice points examined.
///
/// One coordinate (the one with the largest `|F_ii|`) is solved exactly as a
/// quadratic via integer discriminant and exact square root; the remaining
/// `n - 1` coordinates are iterated. If every diagonal entry vanishes the
/// whole region is enumerated directly.
pub fn enumerate_solutions(
    n_target: i64,
    region: &[(i64, i64)],
    form: &QuadraticFormSpec,
) -> Result<(Vec<Vec<i64>>, u64)> {
    let n = form.n();
    if region.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: region.len(),
        });
    }
    if region.iter().any(|&(lo, hi)| lo > hi) {
        return Ok((Vec::new(), 0));
    }
    let pivot = (0..n).max_by_key(|&i| (form.mat()[i][i].abs(), std::cmp::Reverse(i)));
    let pivot = pivot.filter(|&k| form.mat()[k][k] != 0);
    match pivot {
        Some(k) => enumerate_pivot(n_target, region, form, k),
        None => enumerate_full(n_target, region, form),
    }
}

fn region_work(region: &[(i64, i64)], skip: Option<usize>) -> u128 {
    region
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(_, &(lo, hi))| (hi - lo + 1) as u128)
        .fold(1u128, |acc, s| acc.saturating_mul(s))
}

fn enumerate_pivot(
    n_target: i64,
    region: &[(i64, i64)],
    form: &QuadraticFormSpec,
    k: usize,
) -> Result<(Vec<Vec<i64>>, u64)> {
    let n = form.n();
    let work = region_work(region, Some(k));
    if work > ENUM_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: ENUM_BUDGET,
        });
    }
    let a = form.mat()[k][k] / 2; // integer: the diagonal is even
    let mut sols = Vec::new();
    let mut visited = 0u64;
    let mut x: Vec<i64> = region.iter().map(|&(lo, _)| lo).collect();
    x[k] = 0;
    loop {
        // F(x) = a t^2 + B t + C with t the pivot coordinate,
        // B = sum_{j != k} F_kj x_j and C = F(x with t = 0).
        let b: i64 = (0..n)
            .filter(|&j| j != k)
            .map(|j| form.mat()[k][j] * x[j])
            .sum();
        let c = form.evaluate_int(&x)? - n_target as i128;
        let disc = b as i128 * b as i128 - 4 * a as i128 * c;
        visited += 2;
        if disc >= 0 {
            if let Some(s) = exact_sqrt_u128(disc as u128) {
                let s = s as i128;
                let two_a = 2 * a as i128;
                let mut push_root = |num: i128| {
                    if num % two_a == 0 {
                        let t = num / two_a;
                        let (lo, hi) = region[k];
                        if t >= lo as i128 && t <= hi as i128 {
                            let mut sol = x.clone();
                            sol[k] = t as i64;
                            sols.push(sol);
                        }
                    }
                };
                push_root(-(b as i128) + s);
                if s != 0 {
                    push_root(-(b as i128) - s);
                }
            }
        }
        // odometer over the non-pivot coordinates
        let mut i = 0;
        loop {
            if i == k {
                i += 1;
                continue;
            }
            if i >= n {
                return Ok((sols, visited));
            }
            x[i] += 1;
            if x[i] <= region[i].1 {
                break;
            }
            x[i] = region[i].0;
            i += 1;
        }
    }
}

fn enumerate_full(
    n_target: i64,
    region: &[(i64, i64)],
    form: &QuadraticFormSpec,
) -> Result<(Vec<Vec<i64>>, u64)> {
    let work = region_work(region, None);
    if work > ENUM_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: ENUM_BUDGET,
        });
    }
    let n = form.n();
    let mut sols = Vec::new();
    let mut visited = 0u64;
    let mut x: Vec<i64> = region.iter().map(|&(lo, _)| lo).collect();
    loop {
        visited += 1;
        if form.evaluate_int(&x)? == n_target as i128 {
            sols.push(x.clone());
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok((sols, visited));
            }
            x[i] += 1;
            if x[i] <= region[i].1 {
                break;
            }
            x[i] = region[i].0;
            i += 1;
        }
    }
}

/// Integer bounding box, in the standard frame, of the rotated-frame
/// hyperrectangle given by `intervals`, padded by `margin` and then inflated
/// by one unit per coordinate against rotation rounding.
fn standard_bounds(
    diag: &Diagonalization,
    intervals: &[(f64, f64)],
    margin: f64,
) -> Vec<(i64, i64)> {
    let n = intervals.len();
    (0..n)
        .map(|i| {
            let mut lo = 0.0f64;
            let mut hi = 0.0f64;
            for (j, &(a, b)) in intervals.iter().enumerate() {
                let m = diag.m[i][j];
                lo += (m * a).min(m * b);
                hi += (m * a).max(m * b);
            }
            (
                (lo - margin - 1.0).floor() as i64,
                (hi + margin + 1.0).ceil() as i64,
            )
        })
        .collect()
}

/// Weighted (or exact) representation count.
///
/// `tol` is the per-solution truncation tolerance for the smooth weights; for
/// the characteristic weight it only pads the boundary membership test.
pub fn count(
    n_target: i64,
    kind: &WeightKind,
    form: &QuadraticFormSpec,
    diag: &Diagonalization,
    params: &SmoothingParams,
    tol: f64,
) -> Result<CountResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} outside (0,1)")));
    }
    let p = params.p;
    let (value, visited, found) = match kind {
        WeightKind::Characteristic { box_spec, dilation } => {
            let intervals = box_spec.rotated_intervals(p, *dilation)?;
            let region = standard_bounds(diag, &intervals, 0.0);
            let (sols, visited) = enumerate_solutions(n_target, &region, form)?;
            let geom_tol = 1e-9 * (1.0 + p);
            let mut inside = 0u64;
            for sol in &sols {
                let xf: Vec<f64> = sol.iter().map(|&v| v as f64).collect();
                let xs = diag.rotate_to_star(&xf);
                if box_spec.contains_star(&xs, p, *dilation, geom_tol) {
                    inside += 1;
                }
            }
            (inside as f64, visited, inside)
        }
        WeightKind::Gaussian => {
            // beyond radius P K^{-A} sqrt(ln 1/tol) each solution's weight is
            // below tol of the peak
            let r = p * params.delta() * (1.0 / tol).ln().sqrt() + form.n() as f64;
            let region: Vec<(i64, i64)> = params
                .x0
                .iter()
                .map(|&c| (((p * c) - r).floor() as i64, ((p * c) + r).ceil() as i64))
                .collect();
            let (sols, visited) = enumerate_solutions(n_target, &region, form)?;
            let mut total = 0.0;
            for sol in &sols {
                let xf: Vec<f64> = sol.iter().map(|&v| v as f64).collect();
                total += weight_w(&xf, params);
            }
            (total, visited, sols.len() as u64)
        }
        WeightKind::SandwichPlus { box_spec } | WeightKind::SandwichMinus { box_spec } => {
            let plus = matches!(kind, WeightKind::SandwichPlus { .. });
            let dil = 1.0 + params.k().powf(-params.a / 2.0); // widest window
            let intervals = box_spec.rotated_intervals(p, dil)?;
            let margin = p * params.delta() * (1.0 / tol).ln().sqrt();
            let region = standard_bounds(diag, &intervals, margin);
            let (sols, visited) = enumerate_solutions(n_target, &region, form)?;
            let mut total = 0.0;
            for sol in &sols {
                let xf: Vec<f64> = sol.iter().map(|&v| v as f64).collect();
                total += weight_wpm(&xf, plus, params, box_spec, diag);
            }
            (total, visited, sols.len() as u64)
        }
    };
    Ok(CountResult {
        n_target,
        p,
        weight: kind.label().to_string(),
        value,
        lattice_points_visited: visited,
        solutions_found: found,
    })
}

/// Lattice window centred at `P x0` with the given radius.
fn gaussian_window(params: &SmoothingParams, radius: f64) -> Vec<(i64, i64)> {
    params
        .x0
        .iter()
        .map(|&c| {
            (
                (params.p * c - radius).floor() as i64,
                (params.p * c + radius).ceil() as i64,
            )
        })
        .collect()
}

fn window_work(window: &[(i64, i64)]) -> u128 {
    window
        .iter()
        .map(|&(lo, hi)| (hi - lo + 1) as u128)
        .fold(1u128, |acc, s| acc.saturating_mul(s))
}

/// Truncation radius capturing all but `1e-12` of the Gaussian mass.
pub fn theta_truncation_radius(params: &SmoothingParams, n: usize) -> f64 {
    params.p * params.delta() * (1e12f64).ln().sqrt() + n as f64
}

/// The theta sum `S(alpha) = sum_x w(x) e(alpha (F(x) - N))` over the lattice
/// window of the given radius around `P x0`.
pub fn theta_sum(
    alpha: f64,
    params: &SmoothingParams,
    form: &QuadraticFormSpec,
    n_target: i64,
    truncation_radius: f64,
) -> Result<Complex64> {
    let window = gaussian_window(params, truncation_radius);
    let work = window_work(&window);
    if work > ENUM_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: ENUM_BUDGET,
        });
    }
    let n = form.n();
    let mut total = Complex64::new(0.0, 0.0);
    let mut x: Vec<i64> = window.iter().map(|&(lo, _)| lo).collect();
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let f = form.evaluate_int(&x)? - n_target as i128;
        total += weight_w(&xf, params) * e(alpha * f as f64);
        let mut i = 0;
        loop {
            if i == n {
                return Ok(total);
            }
            x[i] += 1;
            if x[i] <= window[i].1 {
                break;
            }
            x[i] = window[i].0;
            i += 1;
        }
    }
}

/// Two routes to the Gaussian count `R_w(N)`: the discretized integral
/// `(1/M) sum_j S(j/M)` and the direct weighted count. The `j`-sum runs on a
/// histogram of weight mass by `(F(x) - N) mod M`, which is an exact
/// regrouping of `M` separate theta sums.
pub fn fourier_count_check(
    n_target: i64,
    params: &SmoothingParams,
    form: &QuadraticFormSpec,
    diag: &Diagonalization,
    m: i64,
) -> Result<(f64, f64)> {
    if m < 1 {
        return Err(Error::OutOfRange(format!("M = {m} < 1")));
    }
    let window = gaussian_window(params, theta_truncation_radius(params, form.n()));
    let work = window_work(&window);
    if work > ENUM_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: ENUM_BUDGET,
        });
    }
    let n = form.n();
    let mut hist = vec![0.0f64; m as usize];
    let mut max_dev: i64 = 0;
    let mut x: Vec<i64> = window.iter().map(|&(lo, _)| lo).collect();
    'outer: loop {
        let f = (form.evaluate_int(&x)? - n_target as i128) as i64;
        max_dev = max_dev.max(f.abs());
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        hist[f.rem_euclid(m) as usize] += weight_w(&xf, params);
        let mut i = 0;
        loop {
            if i == n {
                break 'outer;
            }
            x[i] += 1;
            if x[i] <= window[i].1 {
                break;
            }
            x[i] = window[i].0;
            i += 1;
        }
    }
    if m <= max_dev {
        return Err(Error::ModulusTooSmall { m, max_dev });
    }
    let mut lhs = 0.0;
    for j in 0..m {
        let mut s = Complex64::new(0.0, 0.0);
        for (r, &mass) in hist.iter().enumerate() {
            if mass != 0.0 {
                s += mass * e(j as f64 * r as f64 / m as f64);
            }
        }
        lhs += s.re; // the full sum is real by conjugate symmetry in j
    }
    lhs /= m as f64;
    let rhs = count(
        n_target,
        &WeightKind::Gaussian,
        form,
        diag,
        params,
        DEFAULT_COUNT_TOL,
    )?
    .value;
    Ok((lhs, rhs))
}

/// `B_0 = q K^s (P^{-1} + |z| P)`: the truncation point of the Poisson
/// `b`-expansion.
pub fn b_truncation(q: i64, z: f64, params: &SmoothingParams) -> f64 {
    q as f64 * params.k().powf(params.s()) * (1.0 / params.p + z.abs() * params.p)
}

/// Two routes to `S_u(q, z)`: the direct sum of theta values at the shifted
/// rationals, and the Poisson-expanded form
/// `q^{-n} sum_{|b| <= bRadius} S_u(q, b) I(z, b/q)`.
pub fn poisson_check(
    q: i64,
    u: i64,
    z: f64,
    params: &SmoothingParams,
    form: &QuadraticFormSpec,
    diag: &Diagonalization,
    n_target: i64,
    b_radius: f64,
) -> Result<(Complex64, Complex64)> {
    if q < 1 {
        return Err(Error::OutOfRange(format!("q = {q} < 1")));
    }
    let n = form.n();
    let radius = theta_truncation_radius(params, n);
    let mut direct = Complex64::new(0.0, 0.0);
    for s in 1..=q {
        if expsum::gcd(s, q) != 1 {
            continue;
        }
        let sbar = expsum::mod_inverse(s, q)?;
        let alpha = sbar as f64 / q as f64 + z;
        direct += e(u as f64 * s as f64 / q as f64)
            * theta_sum(alpha, params, form, n_target, radius)?;
    }

    // S_u(q, b) depends on b only mod q; tabulate the q^n values once.
    let opts = ExpSumOptions::default();
    let mut table: Vec<Complex64> = Vec::with_capacity((q as usize).pow(n as u32));
    let mut res = vec![0i64; n];
    loop {
        let query = ExpSumQuery {
            q,
            u,
            b: res.clone(),
            n_target,
        };
        table.push(expsum::expsum(&query, form, &opts)?.value());
        let mut i = 0;
        loop {
            if i == n {
                break;
            }
            res[i] += 1;
            if res[i] < q {
                break;
            }
            res[i] = 0;
            i += 1;
        }
        if res.iter().all(|&v| v == 0) {
            break;
        }
    }
    let index = |b: &[i64]| -> usize {
        b.iter()
            .fold(0usize, |acc, &bi| acc * q as usize + bi.rem_euclid(q) as usize)
    };

    let bmax = b_radius.floor() as i64;
    let mut expanded = Complex64::new(0.0, 0.0);
    let mut b = vec![-bmax; n];
    'sum: loop {
        let norm2: i64 = b.iter().map(|&v| v * v).sum();
        if (norm2 as f64) <= b_radius * b_radius {
            let beta: Vec<f64> = b.iter().map(|&v| v as f64 / q as f64).collect();
            // index order: last coordinate varies fastest in the table build
            let mut key = vec![0i64; n];
            for (i, &v) in b.iter().enumerate() {
                key[n - 1 - i] = v;
            }
            expanded += table[index(&key)] * i_gaussian(z, &beta, n_target, params, diag);
        }
        let mut i = 0;
        loop {
            if i == n {
                break 'sum;
            }
            b[i] += 1;
            if b[i] <= bmax {
                break;
            }
            b[i] = -bmax;
            i += 1;
        }
    }
    expanded /= (q as f64).powi(n as i32);
    Ok((direct, expanded))
}
