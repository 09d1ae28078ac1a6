//! Complete exponential sums
//! `S_u(q, b, N) = sum_{(s,q)=1} sum_{v mod q} e_q(sbar (F(v) - N) + u s - b.v)`,
//! their multiplicative factorization over prime powers, and solution counts
//! and local densities mod q.
//!
//! Three evaluation paths are kept side by side: a literal double sum
//! (`expsum_direct`, the oracle), the multiplicative route over prime powers
//! with the inner sum factored over coordinate blocks (`expsum`), and an
//! optional Gauss-sum fast path for good odd primes.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadform::QuadraticFormSpec;

/// Evaluation budgets and switches.
#[derive(Debug, Clone)]
pub struct ExpSumOptions {
    /// Maximum `q^n * phi(q)` for the direct double sum.
    pub direct_budget: u128,
    /// Maximum number of vectors tabulated by `count_solutions_mod`.
    pub count_budget: u128,
    /// Evaluate good odd primes by Gauss sums instead of the v-loop.
    pub use_gauss_fastpath: bool,
}

impl Default for ExpSumOptions {
    fn default() -> Self {
        Self {
            direct_budget: 1_000_000_000,
            count_budget: 1_000_000_000,
            use_gauss_fastpath: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpSumQuery {
    pub q: i64,
    pub u: i64,
    pub b: Vec<i64>,
    pub n_target: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpSumMethod {
    Direct,
    Multiplicative,
    GaussFastpath,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpSumValue {
    pub re: f64,
    pub im: f64,
    pub q: i64,
    pub u: i64,
    pub b: Vec<i64>,
    pub n_target: i64,
    pub method: ExpSumMethod,
}

impl ExpSumValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Modular inverse of `s` mod `q`, in `[0, q)`. Extended Euclid.
pub fn mod_inverse(s: i64, q: i64) -> Result<i64> {
    assert!(q >= 1);
    let s_red = s.rem_euclid(q);
    let (mut r0, mut r1) = (q, s_red);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let quot = r0 / r1;
        (r0, r1) = (r1, r0 - quot * r1);
        (t0, t1) = (t1, t0 - quot * t1);
    }
    if r0 != 1 {
        return Err(Error::NonCoprime(s, q));
    }
    Ok(t0.rem_euclid(q))
}

pub fn factorize(mut q: i64) -> Vec<(i64, u32)> {
    let mut out = Vec::new();
    let mut p = 2i64;
    while p * p <= q {
        if q % p == 0 {
            let mut a = 0;
            while q % p == 0 {
                q /= p;
                a += 1;
            }
            out.push((p, a));
        }
        p += 1;
    }
    if q > 1 {
        out.push((q, 1));
    }
    out
}

pub fn euler_phi(q: i64) -> i64 {
    factorize(q)
        .into_iter()
        .map(|(p, a)| (p - 1) * p.pow(a - 1))
        .product::<i64>()
        .max(1)
}

/// Roots of unity `e_q(m) = exp(2 pi i m / q)` for `m` in `[0, q)`.
fn unit_roots(q: i64) -> Vec<Complex64> {
    let step = 2.0 * std::f64::consts::PI / q as f64;
    (0..q)
        .map(|m| Complex64::from_polar(1.0, step * m as f64))
        .collect()
}

fn checked_pow(q: u128, n: u32) -> u128 {
    let mut acc = 1u128;
    for _ in 0..n {
        acc = acc.saturating_mul(q);
    }
    acc
}

/// Literal brute-force evaluation of `S_u(q, b, N)`.
///
/// A single pass over `v mod q` tabulates the joint distribution of
/// `(F(v) - N, b.v)` mod q; the summation over units then runs on the
/// `q x q` table. This is an exact regrouping of the defining double sum.
pub fn expsum_direct(
    query: &ExpSumQuery,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<ExpSumValue> {
    let q = query.q;
    if q < 1 {
        return Err(Error::OutOfRange(format!("q = {q} < 1")));
    }
    let n = form.n();
    if query.b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: query.b.len(),
        });
    }
    let phi = euler_phi(q) as u128;
    let needed = checked_pow(q as u128, n as u32).saturating_mul(phi);
    if needed > opts.direct_budget {
        return Err(Error::BudgetExceeded {
            needed,
            budget: opts.direct_budget,
        });
    }
    let value = if q == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        let hist = pair_histogram(q, &query.b, query.n_target, form);
        sum_over_units(q, query.u, &hist)
    };
    Ok(ExpSumValue {
        re: value.re,
        im: value.im,
        q,
        u: query.u,
        b: query.b.clone(),
        n_target: query.n_target,
        method: ExpSumMethod::Direct,
    })
}

/// Counts of `(F(v) - N mod q, b.v mod q)` over all `v mod q`.
fn pair_histogram(q: i64, b: &[i64], n_target: i64, form: &QuadraticFormSpec) -> Vec<Vec<u64>> {
    let n = form.n();
    let mut hist = vec![vec![0u64; q as usize]; q as usize];
    let mut v = vec![0i64; n];
    loop {
        let f = form.evaluate_int(&v).expect("dimension checked");
        let fv = (f - n_target as i128).rem_euclid(q as i128) as usize;
        let dot: i128 = b.iter().zip(&v).map(|(&bi, &vi)| bi as i128 * vi as i128).sum();
        let dv = dot.rem_euclid(q as i128) as usize;
        hist[fv][dv] += 1;
        // odometer
        let mut i = 0;
        loop {
            if i == n {
                return hist;
            }
            v[i] += 1;
            if v[i] < q {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

fn sum_over_units(q: i64, u: i64, hist: &[Vec<u64>]) -> Complex64 {
    let roots = unit_roots(q);
    let mut total = Complex64::new(0.0, 0.0);
    for s in 1..=q {
        if gcd(s, q) != 1 {
            continue;
        }
        let sbar = mod_inverse(s, q).expect("unit");
        let us = (u as i128 * s as i128).rem_euclid(q as i128) as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (f, row) in hist.iter().enumerate() {
            let base = (sbar as i128 * f as i128 + us as i128).rem_euclid(q as i128) as i64;
            for (d, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let idx = (base - d as i64).rem_euclid(q);
                acc += roots[idx as usize] * count as f64;
            }
        }
        total += acc;
    }
    total
}

/// `S_u(q, b, N)` via the multiplicative property: writing `q = m * cof`
/// with coprime parts and `cbar` for the inverse of the cofactor mod `m`,
///
/// `S_u(q, b, N) = prod_m S_{cbar^2 u}(m, cbar b, N)`,
///
/// which follows from `1/q = cbar_1/m_1 + cbar_2/m_2 (mod 1)` and the
/// substitution `s -> cof * s` inside each factor. The inner `v`-sum of each
/// factor splits over the coordinate blocks of the form.
pub fn expsum(
    query: &ExpSumQuery,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<ExpSumValue> {
    let q = query.q;
    if q < 1 {
        return Err(Error::OutOfRange(format!("q = {q} < 1")));
    }
    if query.b.len() != form.n() {
        return Err(Error::DimensionMismatch {
            expected: form.n(),
            got: query.b.len(),
        });
    }
    let mut value = Complex64::new(1.0, 0.0);
    let mut method = ExpSumMethod::Multiplicative;
    for (p, a) in factorize(q) {
        let m = p.pow(a);
        let cof = q / m;
        let cbar = mod_inverse(cof, m)? as i128;
        let u_twisted = (cbar * cbar % m as i128 * query.u as i128).rem_euclid(m as i128) as i64;
        let b_twisted: Vec<i64> = query
            .b
            .iter()
            .map(|&bi| (cbar * bi as i128).rem_euclid(m as i128) as i64)
            .collect();
        let n_reduced = query.n_target.rem_euclid(m);
        if opts.use_gauss_fastpath && a == 1 && p % 2 == 1 && form.det() % p as i128 != 0 {
            value *= gauss_prime_value(p, u_twisted, &b_twisted, n_reduced, form)?;
            if q == p {
                method = ExpSumMethod::GaussFastpath;
            }
        } else {
            value *= prime_power_value(m, u_twisted, &b_twisted, n_reduced, form, opts)?;
        }
    }
    Ok(ExpSumValue {
        re: value.re,
        im: value.im,
        q,
        u: query.u,
        b: query.b.clone(),
        n_target: query.n_target,
        method,
    })
}

/// One prime-power factor, inner sum factored over coordinate blocks:
/// `S_u(m, b, N) = sum_{(s,m)=1} e_m(us - sbar N) prod_blocks
///   sum_{v_block mod m} e_m(sbar F_block(v) - b_block . v)`.
fn prime_power_value(
    m: i64,
    u: i64,
    b: &[i64],
    n_target: i64,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<Complex64> {
    if m == 1 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let blocks = form.coordinate_blocks();
    let phi = euler_phi(m) as u128;
    let work: u128 = blocks
        .iter()
        .map(|blk| checked_pow(m as u128, blk.len() as u32))
        .sum::<u128>()
        .saturating_mul(phi);
    if work > opts.direct_budget {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: opts.direct_budget,
        });
    }
    let roots = unit_roots(m);
    let mut total = Complex64::new(0.0, 0.0);
    for s in 1..=m {
        if gcd(s, m) != 1 {
            continue;
        }
        let sbar = mod_inverse(s, m).expect("unit");
        let head = (u as i128 * s as i128 - sbar as i128 * n_target as i128).rem_euclid(m as i128);
        let mut term = roots[head as usize];
        for blk in &blocks {
            term *= block_sum(m, sbar, blk, b, form, &roots);
        }
        total += term;
    }
    Ok(total)
}

fn block_sum(
    m: i64,
    sbar: i64,
    block: &[usize],
    b: &[i64],
    form: &QuadraticFormSpec,
    roots: &[Complex64],
) -> Complex64 {
    let k = block.len();
    let mut vals = vec![0i64; k];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let f = form.block_value(block, &vals);
        let dot: i128 = block
            .iter()
            .zip(&vals)
            .map(|(&i, &v)| b[i] as i128 * v as i128)
            .sum();
        let idx = (sbar as i128 * f - dot).rem_euclid(m as i128) as usize;
        acc += roots[idx];
        let mut i = 0;
        loop {
            if i == k {
                return acc;
            }
            vals[i] += 1;
            if vals[i] < m {
                break;
            }
            vals[i] = 0;
            i += 1;
        }
    }
}

/// Gauss-sum evaluation of `S_u(p, b, N)` for an odd prime `p` not dividing
/// `2 det F`: the form is congruently diagonalized mod p and each coordinate
/// sum is a quadratic Gauss sum with a linear twist.
pub fn expsum_gauss_prime(
    p: i64,
    u: i64,
    b: &[i64],
    n_target: i64,
    form: &QuadraticFormSpec,
) -> Result<ExpSumValue> {
    let value = gauss_prime_value(p, u, b, n_target, form)?;
    Ok(ExpSumValue {
        re: value.re,
        im: value.im,
        q: p,
        u,
        b: b.to_vec(),
        n_target,
        method: ExpSumMethod::GaussFastpath,
    })
}

fn gauss_prime_value(
    p: i64,
    u: i64,
    b: &[i64],
    n_target: i64,
    form: &QuadraticFormSpec,
) -> Result<Complex64> {
    if p < 3 || factorize(p).len() != 1 || factorize(p)[0].1 != 1 {
        return Err(Error::OutOfRange(format!("{p} is not an odd prime")));
    }
    if form.det() % p as i128 == 0 {
        return Err(Error::OutOfRange(format!("p = {p} divides det F")));
    }
    let n = form.n();
    let (diag, t) = diagonalize_mod_p(form, p)?;
    // c = T^T b mod p: the linear coefficients in the diagonal coordinates.
    let c: Vec<i64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|r| (t[r][i] as i128 * b[r] as i128).rem_euclid(p as i128) as i64)
                .sum::<i64>()
                .rem_euclid(p)
        })
        .collect();
    let roots = unit_roots(p);
    // g_p = sum e_p(w^2) = sqrt(p) or i sqrt(p).
    let sqrt_p = (p as f64).sqrt();
    let gauss = if p % 4 == 1 {
        Complex64::new(sqrt_p, 0.0)
    } else {
        Complex64::new(0.0, sqrt_p)
    };
    let inv4 = mod_inverse(4, p)?;
    let mut total = Complex64::new(0.0, 0.0);
    for s in 1..p {
        let sbar = mod_inverse(s, p).expect("unit");
        let head =
            (u as i128 * s as i128 - sbar as i128 * n_target as i128).rem_euclid(p as i128);
        let mut term = roots[head as usize];
        for i in 0..n {
            // sum_w e_p(A w^2 + B w) with A = sbar d_i, B = -c_i:
            //   e_p(-B^2 / 4A) * legendre(A) * g_p
            let a_coef = (sbar as i128 * diag[i] as i128).rem_euclid(p as i128) as i64;
            let b_coef = (-c[i]).rem_euclid(p);
            let a_inv = mod_inverse(a_coef, p).expect("nonzero diag");
            let shift = (-(b_coef as i128 * b_coef as i128 % p as i128) * inv4 as i128 % p as i128
                * a_inv as i128)
                .rem_euclid(p as i128);
            let chi = legendre(a_coef, p);
            term *= roots[shift as usize] * gauss * chi as f64;
        }
        total += term;
    }
    Ok(total)
}

fn legendre(a: i64, p: i64) -> i64 {
    let mut result = 1i64;
    let mut base = a.rem_euclid(p);
    let mut exp = (p - 1) / 2;
    let mut acc = 1i64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    result *= if acc == p - 1 { -1 } else { acc };
    result
}

/// Congruent diagonalization of `F(v) = v^T (F/2) v` over `F_p`: returns
/// `(d, T)` with `T` invertible mod p and `F(T w) = sum d_i w_i^2 mod p`.
fn diagonalize_mod_p(form: &QuadraticFormSpec, p: i64) -> Result<(Vec<i64>, Vec<Vec<i64>>)> {
    let n = form.n();
    let inv2 = mod_inverse(2, p)?;
    // g = (F/2) mod p
    let mut g: Vec<Vec<i64>> = form
        .mat()
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| (v as i128 * inv2 as i128).rem_euclid(p as i128) as i64)
                .collect()
        })
        .collect();
    let mut t: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect();
    for k in 0..n {
        if g[k][k] == 0 {
            if let Some(j) = (k + 1..n).find(|&j| g[j][j] != 0) {
                // swap coordinates k and j
                for r in 0..n {
                    g[r].swap(k, j);
                    t[r].swap(k, j);
                }
                g.swap(k, j);
            } else if let Some((i, j)) = (k..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .find(|&(i, j)| g[i][j] != 0)
            {
                // col_i += col_j creates a nonzero diagonal entry at i
                for r in 0..n {
                    g[r][i] = (g[r][i] + g[r][j]).rem_euclid(p);
                    t[r][i] = (t[r][i] + t[r][j]).rem_euclid(p);
                }
                for cc in 0..n {
                    g[i][cc] = (g[i][cc] + g[j][cc]).rem_euclid(p);
                }
                if i != k {
                    for r in 0..n {
                        g[r].swap(k, i);
                        t[r].swap(k, i);
                    }
                    g.swap(k, i);
                }
            } else {
                return Err(Error::OutOfRange("form degenerate mod p".into()));
            }
        }
        let pivot_inv = mod_inverse(g[k][k], p)?;
        for j in k + 1..n {
            if g[k][j] == 0 {
                continue;
            }
            let factor = (g[k][j] as i128 * pivot_inv as i128).rem_euclid(p as i128) as i64;
            // col_j -= factor * col_k (and symmetric row op)
            for r in 0..n {
                g[r][j] = (g[r][j] as i128 - factor as i128 * g[r][k] as i128)
                    .rem_euclid(p as i128) as i64;
                t[r][j] = (t[r][j] as i128 - factor as i128 * t[r][k] as i128)
                    .rem_euclid(p as i128) as i64;
            }
            for cc in 0..n {
                g[j][cc] = (g[j][cc] as i128 - factor as i128 * g[k][cc] as i128)
                    .rem_euclid(p as i128) as i64;
            }
        }
    }
    let d: Vec<i64> = (0..n).map(|i| g[i][i]).collect();
    if d.iter().any(|&x| x == 0) {
        return Err(Error::OutOfRange("form degenerate mod p".into()));
    }
    Ok((d, t))
}

/// `#{ v mod q : F(v) = N mod q }`, by per-block value distributions
/// convolved mod q.
pub fn count_solutions_mod(
    q: i64,
    n_target: i64,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<u64> {
    if q < 1 {
        return Err(Error::OutOfRange(format!("q = {q} < 1")));
    }
    if q == 1 {
        return Ok(1);
    }
    let blocks = form.coordinate_blocks();
    let work: u128 = blocks
        .iter()
        .map(|blk| checked_pow(q as u128, blk.len() as u32))
        .sum();
    if work > opts.count_budget {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget: opts.count_budget,
        });
    }
    let mut hist = vec![0u64; q as usize];
    hist[0] = 1;
    for blk in &blocks {
        let bh = block_histogram(q, blk, form);
        let mut next = vec![0u64; q as usize];
        for (i, &hi) in hist.iter().enumerate() {
            if hi == 0 {
                continue;
            }
            for (j, &bj) in bh.iter().enumerate() {
                let idx = (i + j) % q as usize;
                next[idx] += hi * bj;
            }
        }
        hist = next;
    }
    Ok(hist[n_target.rem_euclid(q) as usize])
}

fn block_histogram(q: i64, block: &[usize], form: &QuadraticFormSpec) -> Vec<u64> {
    let k = block.len();
    let mut vals = vec![0i64; k];
    let mut hist = vec![0u64; q as usize];
    loop {
        let f = form.block_value(block, &vals).rem_euclid(q as i128) as usize;
        hist[f] += 1;
        let mut i = 0;
        loop {
            if i == k {
                return hist;
            }
            vals[i] += 1;
            if vals[i] < q {
                break;
            }
            vals[i] = 0;
            i += 1;
        }
    }
}

/// Local solution density `p^{k(1-n)} #{ v mod p^k : F(v) = N }`.
pub fn local_density(
    p: i64,
    k: u32,
    n_target: i64,
    form: &QuadraticFormSpec,
    opts: &ExpSumOptions,
) -> Result<f64> {
    let q = p.checked_pow(k).ok_or_else(|| Error::OutOfRange("p^k overflow".into()))?;
    let count = count_solutions_mod(q, n_target, form, opts)?;
    let scale = (p as f64).powi((k as i32) * (1 - form.n() as i32));
    Ok(count as f64 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::QuadraticFormSpec;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn four_squares() -> QuadraticFormSpec {
        QuadraticFormSpec::new(
            4,
            vec![
                vec![2, 0, 0, 0],
                vec![0, 2, 0, 0],
                vec![0, 0, 2, 0],
                vec![0, 0, 0, 2],
            ],
        )
        .unwrap()
    }

    fn cross_form() -> QuadraticFormSpec {
        QuadraticFormSpec::new(
            4,
            vec![
                vec![2, 1, 0, 0],
                vec![1, 2, 0, 0],
                vec![0, 0, 2, 0],
                vec![0, 0, 0, 2],
            ],
        )
        .unwrap()
    }

    /// Test-only oracle: the defining double sum, term by term.
    fn naive_expsum(q: i64, u: i64, b: &[i64], n_target: i64, form: &QuadraticFormSpec) -> Complex64 {
        let n = form.n();
        let mut total = Complex64::new(0.0, 0.0);
        for s in 1..=q {
            if gcd(s, q) != 1 {
                continue;
            }
            let sbar = mod_inverse(s, q).unwrap();
            let mut v = vec![0i64; n];
            loop {
                let f = form.evaluate_int(&v).unwrap();
                let dot: i128 = b.iter().zip(&v).map(|(&bi, &vi)| bi as i128 * vi as i128).sum();
                let phase = (sbar as i128 * (f - n_target as i128) + (u * s) as i128 - dot)
                    .rem_euclid(q as i128) as f64;
                total += Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase / q as f64);
                let mut i = 0;
                loop {
                    if i == n {
                        break;
                    }
                    v[i] += 1;
                    if v[i] < q {
                        break;
                    }
                    v[i] = 0;
                    i += 1;
                }
                if v.iter().all(|&x| x == 0) {
                    break;
                }
            }
            // loop above exits after wrapping back to zero
        }
        total
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(1, 7).unwrap(), 1);
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        assert!(matches!(mod_inverse(2, 4), Err(Error::NonCoprime(..))));
    }

    #[test]
    fn expsum_direct_trivial_modulus() {
        let form = four_squares();
        let opts = ExpSumOptions::default();
        let q = ExpSumQuery { q: 1, u: 3, b: vec![1, 2, 3, 4], n_target: 7 };
        let v = expsum_direct(&q, &form, &opts).unwrap();
        assert!((v.value() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expsum_direct_q2_vanishes() {
        let form = four_squares();
        let opts = ExpSumOptions::default();
        for n_target in [0, 1, 5] {
            let q = ExpSumQuery { q: 2, u: 0, b: vec![0; 4], n_target };
            let v = expsum_direct(&q, &form, &opts).unwrap();
            assert!(v.value().norm() < 1e-12, "S_0(2,0,{n_target}) = {}", v.value());
        }
    }

    #[test]
    fn expsum_direct_matches_naive() {
        let form = four_squares();
        let cross = cross_form();
        let opts = ExpSumOptions::default();
        for (form, q, u, b, nt) in [
            (&form, 3, 0, vec![0, 0, 0, 0], 1),
            (&form, 3, 1, vec![1, 0, 2, 0], 2),
            (&form, 4, 2, vec![0, 1, 0, 3], 5),
            (&cross, 5, 3, vec![1, 1, 0, 2], 3),
        ] {
            let query = ExpSumQuery { q, u, b: b.clone(), n_target: nt };
            let got = expsum_direct(&query, form, &opts).unwrap().value();
            let want = naive_expsum(q, u, &b, nt, form);
            assert!(
                (got - want).norm() <= 1e-9 * (1.0 + want.norm()),
                "q={q} u={u}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn expsum_multiplicative_matches_direct() {
        let form = cross_form();
        let opts = ExpSumOptions::default();
        for (q, u, b, nt) in [
            (6, 1, vec![1, 0, 2, 1], 4),
            (12, 0, vec![0, 0, 0, 0], 1),
            (12, 5, vec![0, 3, 1, 0], 7),
            (15, 2, vec![2, 2, 2, 2], 1),
            (20, 3, vec![1, 2, 0, 4], 9),
        ] {
            let query = ExpSumQuery { q, u, b, n_target: nt };
            let multi = expsum(&query, &form, &opts).unwrap().value();
            let direct = expsum_direct(&query, &form, &opts).unwrap().value();
            assert!(
                (multi - direct).norm() <= 1e-9 * (1.0 + direct.norm()),
                "q={q}: {multi} vs {direct}"
            );
        }
    }

    #[test]
    fn expsum_twisted_product_q12() {
        // q = 12 = 4*3: the factor mod m carries u twisted by the squared
        // inverse cofactor and b by the inverse cofactor; N only reduces.
        let form = cross_form();
        let opts = ExpSumOptions::default();
        let (u, b, nt) = (1i64, vec![1i64, 0, 2, 3], 5i64);
        let twist = |m: i64, cof: i64| -> ExpSumQuery {
            let cbar = mod_inverse(cof, m).unwrap();
            ExpSumQuery {
                q: m,
                u: (cbar * cbar % m * u).rem_euclid(m),
                b: b.iter().map(|&bi| (cbar * bi).rem_euclid(m)).collect(),
                n_target: nt.rem_euclid(m),
            }
        };
        let f4 = expsum_direct(&twist(4, 3), &form, &opts).unwrap().value();
        let f3 = expsum_direct(&twist(3, 4), &form, &opts).unwrap().value();
        let whole = expsum_direct(&ExpSumQuery { q: 12, u, b, n_target: nt }, &form, &opts)
            .unwrap()
            .value();
        assert!(
            (whole - f4 * f3).norm() <= 1e-9 * (1.0 + whole.norm()),
            "{whole} vs {}",
            f4 * f3
        );
    }

    #[test]
    fn trivial_bound_holds() {
        let form = cross_form();
        let opts = ExpSumOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in 1..=30i64 {
            let b: Vec<i64> = (0..4).map(|_| rng.gen_range(0..q.max(2))).collect();
            let query = ExpSumQuery { q, u: rng.gen_range(0..q.max(2)), b, n_target: rng.gen_range(0..50) };
            let v = expsum(&query, &form, &opts).unwrap();
            assert!(v.value().norm() <= (q as f64).powi(5) + 1e-6);
        }
    }

    #[test]
    fn zero_twist_values_are_real() {
        let form = four_squares();
        let opts = ExpSumOptions::default();
        for q in 1..=100i64 {
            let query = ExpSumQuery { q, u: 0, b: vec![0; 4], n_target: 3 };
            let v = expsum(&query, &form, &opts).unwrap().value();
            assert!(v.im.abs() <= 1e-9 * (1.0 + v.norm()), "q={q}: {v}");
        }
    }

    #[test]
    fn gauss_fastpath_matches_direct() {
        let form = cross_form(); // det = 48, so p = 3 is excluded below
        let opts = ExpSumOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [5i64, 7, 11, 13, 29, 61] {
            assert!(form.det() % p as i128 != 0);
            for _ in 0..3 {
                let u = rng.gen_range(0..p);
                let b: Vec<i64> = (0..4).map(|_| rng.gen_range(0..p)).collect();
                let nt = rng.gen_range(0..p);
                let fast = expsum_gauss_prime(p, u, &b, nt, &form).unwrap().value();
                let query = ExpSumQuery { q: p, u, b, n_target: nt };
                let direct = expsum_direct(&query, &form, &opts).unwrap().value();
                assert!(
                    (fast - direct).norm() <= 1e-9 * (1.0 + direct.norm()),
                    "p={p}: {fast} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn count_solutions_examples() {
        let form = four_squares();
        let opts = ExpSumOptions::default();
        assert_eq!(count_solutions_mod(1, 0, &form, &opts).unwrap(), 1);
        assert_eq!(count_solutions_mod(2, 1, &form, &opts).unwrap(), 8);
        assert_eq!(count_solutions_mod(2, 0, &form, &opts).unwrap(), 8);
    }

    #[test]
    fn count_solutions_matches_brute_force() {
        let cross = cross_form();
        let opts = ExpSumOptions::default();
        for q in [3i64, 4, 6] {
            for nt in 0..q {
                let mut brute = 0u64;
                for a in 0..q {
                    for b in 0..q {
                        for c in 0..q {
                            for d in 0..q {
                                let f = cross.evaluate_int(&[a, b, c, d]).unwrap();
                                if f.rem_euclid(q as i128) == nt as i128 {
                                    brute += 1;
                                }
                            }
                        }
                    }
                }
                assert_eq!(count_solutions_mod(q, nt, &cross, &opts).unwrap(), brute);
            }
        }
    }

    #[test]
    fn local_density_examples_and_stabilization() {
        let form = four_squares();
        let opts = ExpSumOptions::default();
        assert!((local_density(2, 1, 1, &form, &opts).unwrap() - 1.0).abs() < 1e-15);
        // Hensel: density stabilizes from k=1 for odd p not dividing 2 det F N.
        for p in [3i64, 5, 7, 11, 13] {
            let nt = 1i64;
            let d1 = local_density(p, 1, nt, &form, &opts).unwrap();
            let d2 = local_density(p, 2, nt, &form, &opts).unwrap();
            assert!((d1 - d2).abs() <= 1e-12, "p={p}: {d1} vs {d2}");
        }
    }

    #[test]
    fn budget_exceeded_is_an_error() {
        let form = four_squares();
        let opts = ExpSumOptions { direct_budget: 10, ..Default::default() };
        let query = ExpSumQuery { q: 5, u: 0, b: vec![0; 4], n_target: 0 };
        assert!(matches!(
            expsum_direct(&query, &form, &opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
