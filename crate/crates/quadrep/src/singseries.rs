//! The truncated singular series `S(N) = sum_q q^{-n} S_0(q, 0, N)`, its
//! Euler-product form through local densities, the square-free/square-full
//! modulus split, and tail diagnostics.
//!
//! The direct q-sum and the Euler product are two independent routes to the
//! same quantity and are kept permanently as each other's regression oracle.

use serde::Serialize;

use crate::arith::{is_squarefree, isqrt_u128, primes_up_to};
use crate::error::{Error, Result};
use crate::expsum::{self, ExpSumOptions, ExpSumQuery};
use crate::quadform::QuadraticFormSpec;

/// Absolute stabilization tolerance for local densities.
const STABILIZATION_TOL: f64 = 1e-9;

/// `q = q1 * q2` with `q1` square-free, `q2` square-full, coprime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModulusSplit {
    pub q: i64,
    pub q1: i64,
    pub q2: i64,
}

/// Truncated singular series with dyadic tail diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesEstimate {
    pub n_target: i64,
    pub qmax: i64,
    /// Partial sum over `q <= qmax`.
    pub value: f64,
    /// `(L, |sum over L < q <= 2L|)` for `L = qmax/2, qmax/4, ...`
    pub dyadic_tails: Vec<(i64, f64)>,
    pub euler_value: Option<f64>,
}

impl SeriesEstimate {
    /// Least-squares slope of `log |tail block|` against `log L`, over the
    /// blocks with `L >= min_l`. The theory predicts roughly `(3 - n)/2`.
    /// Small-L blocks can vanish identically and carry only round-off, so
    /// callers should keep `min_l` above the first few blocks.
    pub fn tail_slope(&self, min_l: i64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .dyadic_tails
            .iter()
            .filter(|&&(l, t)| l >= min_l && t > 1e-13)
            .map(|&(l, t)| ((l as f64).ln(), t.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    }
}

/// One term `q^{-n} Re S_0(q, 0, N)` of the singular series.
pub fn series_term(
    q: i64,
    n_target: i64,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<f64> {
    let query = ExpSumQuery {
        q,
        u: 0,
        b: vec![0; form.n()],
        n_target,
    };
    let v = expsum::expsum(&query, form, opts)?;
    let norm = v.value().norm();
    // Round-off in the sum scales with the number of summands and their
    // size, so the sanity floor has to grow with q; a genuine bug would
    // leave an imaginary part on the q^{n/2} scale, far above this.
    let floor = 1e-13 * (q as f64).powi(form.n() as i32);
    if v.im.abs() > (1e-9 * (1.0 + norm)).max(floor) {
        return Err(Error::OutOfRange(format!(
            "S_0({q},0,{n_target}) has non-negligible imaginary part {}",
            v.im
        )));
    }
    Ok(v.re / (q as f64).powi(form.n() as i32))
}

/// Partial sum `sum_{q <= qmax} q^{-n} S_0(q,0,N)` with dyadic tail
/// magnitudes for convergence diagnostics.
pub fn singular_series(
    n_target: i64,
    qmax: i64,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<SeriesEstimate> {
    if qmax < 1 {
        return Err(Error::OutOfRange(format!("Qmax = {qmax} < 1")));
    }
    let mut terms = Vec::with_capacity(qmax as usize);
    for q in 1..=qmax {
        terms.push(series_term(q, n_target, form, opts)?);
    }
    let value: f64 = terms.iter().sum();
    let mut dyadic_tails = Vec::new();
    let mut l = qmax / 2;
    while l >= 1 {
        let hi = (2 * l).min(qmax);
        let block: f64 = terms[l as usize..hi as usize].iter().sum();
        dyadic_tails.push((l, block.abs()));
        l /= 2;
    }
    Ok(SeriesEstimate {
        n_target,
        qmax,
        value,
        dyadic_tails,
        euler_value: None,
    })
}

/// Euler-product route: product over `p <= p_max` of the stabilized local
/// density. Good primes stop at the first `k` where consecutive densities
/// agree to within the stabilization tolerance; primes dividing `2 det F`
/// always use `k_max`.
pub fn singular_series_euler(
    n_target: i64,
    p_max: i64,
    k_max: u32,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<f64> {
    if k_max < 1 {
        return Err(Error::OutOfRange("kMax must be at least 1".into()));
    }
    let bad = 2 * form.det();
    let mut product = 1.0f64;
    for p in primes_up_to(p_max) {
        if bad % p as i128 == 0 {
            product *= expsum::local_density(p, k_max, n_target, form, opts)?;
            continue;
        }
        let mut prev = expsum::local_density(p, 1, n_target, form, opts)?;
        let mut stabilized = false;
        for k in 1..k_max {
            let next = expsum::local_density(p, k + 1, n_target, form, opts)?;
            if (next - prev).abs() <= STABILIZATION_TOL {
                stabilized = true;
                prev = next;
                break;
            }
            prev = next;
        }
        if !stabilized && k_max > 1 {
            let last = expsum::local_density(p, k_max, n_target, form, opts)?;
            if (last - prev).abs() > STABILIZATION_TOL {
                return Err(Error::NonStabilized {
                    k: k_max,
                    last: [prev, last],
                });
            }
        }
        product *= prev;
    }
    Ok(product)
}

/// Square-free/square-full factorization of the modulus.
pub fn split_modulus(q: i64) -> Result<ModulusSplit> {
    if q < 1 {
        return Err(Error::OutOfRange(format!("q = {q} < 1")));
    }
    let mut q1 = 1i64;
    let mut q2 = 1i64;
    for (p, a) in expsum::factorize(q) {
        if a == 1 {
            q1 *= p;
        } else {
            q2 *= p.pow(a);
        }
    }
    Ok(ModulusSplit { q, q1, q2 })
}

/// `nu(X)`: the number of square-full integers up to `X`, counting 1.
/// Every square-full number is uniquely `a^2 b^3` with `b` square-free.
pub fn count_squarefull(x: i64) -> Result<u64> {
    if x < 1 || x > 100_000_000 {
        return Err(Error::OutOfRange(format!("X = {x} outside [1, 1e8]")));
    }
    let mut count = 0u64;
    let mut b = 1i64;
    while b * b * b <= x {
        if is_squarefree(b) {
            count += isqrt_u128((x / (b * b * b)) as u128) as u64;
        }
        b += 1;
    }
    Ok(count)
}
