//! The archimedean side: the Gaussian-weight Fourier factor in closed form,
//! the singular integrals for the Gaussian and the characteristic weight,
//! Fresnel-type interval integrals, the `J(alpha, beta)` integrals of the
//! weight-transition argument, and a Monte Carlo shell oracle.

pub mod fresnel;
pub mod quadrature;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadform::{BoxSpec, Diagonalization, QuadraticFormSpec, SmoothingParams};

use std::f64::consts::PI;

pub use fresnel::fresnel_interval;

fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * t)
}

/// Inputs of one closed-form Gaussian Fourier factor.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFactorInputs {
    pub z: f64,
    pub lambda: f64,
    pub beta_star: f64,
    pub x0_star: f64,
    pub p: f64,
    pub k: f64,
    pub a: f64,
}

impl GaussianFactorInputs {
    pub fn new(z: f64, lambda: f64, beta_star: f64, x0_star: f64, params: &SmoothingParams) -> Self {
        Self {
            z,
            lambda,
            beta_star,
            x0_star,
            p: params.p,
            k: params.k(),
            a: params.a,
        }
    }
}

/// One factor of the Poisson-transformed weight integral:
/// `K^A a^{-1/2} exp(c + b^2 / 4a)` with
/// `a = P^{-2} K^{2A} - 2 pi i z lambda`,
/// `b = 2 P x0* P^{-2} K^{2A} + 2 pi i beta*`,
/// `c = -(P x0*)^2 P^{-2} K^{2A}`.
/// The square root is on the principal branch, valid since `Re a > 0`.
pub fn gaussian_factor(inp: &GaussianFactorInputs) -> Complex64 {
    let ka = inp.k.powf(inp.a);
    let u = ka * ka / (inp.p * inp.p); // P^{-2} K^{2A}
    let a = Complex64::new(u, -2.0 * PI * inp.z * inp.lambda);
    let b = Complex64::new(2.0 * inp.p * inp.x0_star * u, 2.0 * PI * inp.beta_star);
    let c = -(inp.p * inp.x0_star).powi(2) * u;
    ka / a.sqrt() * (c + b * b / (4.0 * a)).exp()
}

/// Right-hand side of the modulus identity for `|exp(c + b^2/4a)|`.
pub fn gaussian_factor_modulus(inp: &GaussianFactorInputs) -> f64 {
    let ka = inp.k.powf(inp.a);
    let k2a = ka * ka;
    let num = PI * PI * k2a * (2.0 * inp.z * inp.lambda * inp.x0_star + inp.beta_star / inp.p).powi(2);
    let den = k2a * k2a / inp.p.powi(4) + 4.0 * PI * PI * inp.z * inp.z * inp.lambda * inp.lambda;
    (-num / den).exp()
}

/// `I(z, beta) = e(-zN) prod_i` [closed-form factor], with the rotated-frame
/// coordinates `beta* = M^T beta` and `x0* = M^T x0`.
pub fn i_gaussian(
    z: f64,
    beta: &[f64],
    n_target: i64,
    params: &SmoothingParams,
    diag: &Diagonalization,
) -> Complex64 {
    let beta_star = diag.rotate_to_star(beta);
    let x0_star = diag.rotate_to_star(&params.x0);
    let mut value = e(-z * n_target as f64);
    for i in 0..diag.lambdas.len() {
        value *= gaussian_factor(&GaussianFactorInputs::new(
            z,
            diag.lambdas[i],
            beta_star[i],
            x0_star[i],
            params,
        ));
    }
    value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralMethod {
    ClosedForm,
    AdaptiveQuadrature,
    MonteCarlo,
}

/// An integral value with its error estimate and the tail cutoff used.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimate {
    pub re: f64,
    pub im: f64,
    /// Quadrature error estimate plus analytic tail bound; for Monte Carlo,
    /// one standard error.
    pub abs_error: f64,
    pub z_cut: f64,
    pub method: IntegralMethod,
}

impl IntegralEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Knobs for the z-quadratures.
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_panels: 400_000,
        }
    }
}

/// Shared driver: integrate `f` over `[-z_cut, z_cut]` where `z_cut` is
/// grown until `tail_bound(z_cut)` drops below tolerance relative to the
/// integral. `oscillations_per_unit` controls the pre-split so Gauss-Kronrod
/// panels resolve the `e(-zN)` phase.
fn integrate_with_tail(
    f: &dyn Fn(f64) -> Complex64,
    tail_bound: &dyn Fn(f64) -> f64,
    oscillations_per_unit: f64,
    opts: &QuadOptions,
) -> Result<IntegralEstimate> {
    let panels_per_unit = (2.0 * oscillations_per_unit).max(16.0);
    let mut z_cut = 1.0f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut quad_err = 0.0f64;
    let mut lo = 0.0f64;
    let mut spent = 0usize;
    for _round in 0..16 {
        // add the shells [lo, z_cut] on both sides
        let panels = ((z_cut - lo) * panels_per_unit).ceil() as usize;
        if spent + 2 * panels > opts.max_panels && spent > 0 {
            break; // widening further would blow the budget; keep the tail
        }
        // Best effort within the budget: the achieved error estimate is
        // folded into `abs_error`, so a shell that falls short of the
        // tolerance degrades the error bar instead of failing the run.
        let budget = 4 * panels.max(64);
        let pos = quadrature::integrate_complex_best_effort(
            f,
            lo,
            z_cut,
            opts.rel_tol / 4.0,
            opts.rel_tol * total.norm() / 8.0,
            panels,
            budget,
        );
        let neg = quadrature::integrate_complex_best_effort(
            f,
            -z_cut,
            -lo,
            opts.rel_tol / 4.0,
            opts.rel_tol * total.norm() / 8.0,
            panels,
            budget,
        );
        total += pos.value + neg.value;
        quad_err += pos.abs_error + neg.abs_error;
        spent += pos.panels + neg.panels;
        let tail = tail_bound(z_cut);
        if tail <= opts.rel_tol * total.norm() {
            return Ok(IntegralEstimate {
                re: total.re,
                im: total.im,
                abs_error: quad_err + tail,
                z_cut,
                method: IntegralMethod::AdaptiveQuadrature,
            });
        }
        lo = z_cut;
        z_cut *= 2.0;
    }
    // Tail never met the relative target; report what we have with the tail
    // folded into the error estimate.
    Ok(IntegralEstimate {
        re: total.re,
        im: total.im,
        abs_error: quad_err + tail_bound(lo),
        z_cut: lo,
        method: IntegralMethod::AdaptiveQuadrature,
    })
}

/// Singular integral for the Gaussian weight: `int_R I(z, 0) dz` with an
/// analytic bound on the discarded tail.
pub fn singular_integral_gaussian(
    n_target: i64,
    params: &SmoothingParams,
    diag: &Diagonalization,
    opts: &QuadOptions,
) -> Result<IntegralEstimate> {
    let n = diag.lambdas.len();
    let beta = vec![0.0; n];
    let f = move |z: f64| i_gaussian(z, &beta, n_target, params, diag);
    // |I(z,0)| <= K^{An} (2 pi |z|)^{-n/2} prod |lambda_i|^{-1/2}: each
    // factor has |a|^{-1/2} <= (2 pi |z| |lambda|)^{-1/2} and the
    // exponential has modulus at most 1.
    let lam_prod: f64 = diag.lambdas.iter().map(|l| l.abs().sqrt().recip()).product();
    let c_env = params.ka().powi(n as i32) * (2.0 * PI).powf(-(n as f64) / 2.0) * lam_prod;
    let half = n as f64 / 2.0;
    let x0_zero = params.x0.iter().all(|&v| v == 0.0);
    let nt = n_target.unsigned_abs() as f64;
    let tail = move |zc: f64| -> f64 {
        let crude = 2.0 * c_env * zc.powf(1.0 - half) / (half - 1.0);
        if x0_zero && nt > 0.0 {
            // one integration by parts against e(-zN):
            // |tail| <= (2 / (2 pi N)) (|g(zc)| + int_{zc}^inf |g'|)
            // with |g'| <= g * n / (2z), so int |g'| <= c_env zc^{-n/2}.
            let byparts = 2.0 / (2.0 * PI * nt) * 2.0 * c_env * zc.powf(-half);
            crude.min(byparts)
        } else {
            crude
        }
    };
    integrate_with_tail(&f, &tail, nt, opts)
}

/// Signed list of dilated copies of a box; `(+1, 1.0)` is the box itself,
/// shells are differences of dilations.
pub type SignedBoxes = Vec<(f64, f64)>;

/// Singular integral for the characteristic weight:
/// `int_R e(-zN) sum_boxes sign * prod_i int_{P interval_i} e(z lambda_i v^2) dv dz`.
/// Requires `n >= 4` so the `|z|^{-n/2}` tail is integrable.
pub fn singular_integral_char(
    n_target: i64,
    p: f64,
    boxes: &SignedBoxes,
    box_spec: &BoxSpec,
    diag: &Diagonalization,
    opts: &QuadOptions,
) -> Result<IntegralEstimate> {
    let n = diag.lambdas.len();
    if n < 4 {
        return Err(Error::OutOfRange(format!(
            "characteristic singular integral needs n >= 4, got {n}"
        )));
    }
    let mut intervals = Vec::with_capacity(boxes.len());
    for &(sign, dilation) in boxes {
        intervals.push((sign, box_spec.rotated_intervals(p, dilation)?));
    }
    let lambdas = diag.lambdas.clone();
    let f = move |z: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (sign, iv) in &intervals {
            let mut prod = Complex64::new(*sign, 0.0);
            for (i, &(lo, hi)) in iv.iter().enumerate() {
                prod *= fresnel_interval(z, lambdas[i], lo, hi);
            }
            acc += prod;
        }
        e(-z * n_target as f64) * acc
    };
    // |prod fresnel| <= prod 3 |z lambda_i|^{-1/2}, summed over boxes.
    let lam_prod: f64 = diag.lambdas.iter().map(|l| l.abs().sqrt().recip()).product();
    let c_env = boxes.iter().map(|(s, _)| s.abs()).sum::<f64>() * 3f64.powi(n as i32) * lam_prod;
    let half = n as f64 / 2.0;
    let tail = move |zc: f64| 2.0 * c_env * zc.powf(1.0 - half) / (half - 1.0);
    let nt = n_target.unsigned_abs() as f64;
    integrate_with_tail(&f, &tail, nt, opts)
}

/// `J(alpha, beta) = int e^{-|x|^2} e(z (F(alpha x + x0) - beta)) dx` with
/// `beta = N / P^2`, in closed form: after diagonalization each coordinate
/// is a Gaussian integral.
pub fn j_integral(
    alpha: f64,
    z: f64,
    x0: &[f64],
    n_target: i64,
    p: f64,
    form: &QuadraticFormSpec,
    diag: &Diagonalization,
) -> Result<Complex64> {
    let n = form.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    let beta = n_target as f64 / (p * p);
    let f_x0 = form.evaluate_real(x0)?;
    // F(alpha x + x0) = alpha^2 F(x) + alpha x . grad F(x0) + F(x0)
    let grad_star = diag.rotate_to_star(&form.gradient(x0));
    let mut value = e(z * (f_x0 - beta));
    for i in 0..n {
        let a = Complex64::new(1.0, -2.0 * PI * z * alpha * alpha * diag.lambdas[i]);
        let b = Complex64::new(0.0, 2.0 * PI * z * alpha * grad_star[i]);
        value *= (PI / a).sqrt() * (b * b / (4.0 * a)).exp();
    }
    Ok(value)
}

/// Monte Carlo estimate of the archimedean density as
/// `(2 eps)^{-1} vol{ x in PB : |F(x) - N| < eps }`, sampling uniformly in
/// the rotated frame. Deterministic given the seed.
pub fn volume_density_oracle(
    n_target: i64,
    p: f64,
    box_spec: &BoxSpec,
    diag: &Diagonalization,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<IntegralEstimate> {
    if epsilon <= 0.0 {
        return Err(Error::OutOfRange("epsilon must be positive".into()));
    }
    if samples < 10_000 {
        return Err(Error::OutOfRange(format!(
            "need at least 1e4 samples, got {samples}"
        )));
    }
    let intervals = box_spec.rotated_intervals(p, 1.0)?;
    let volume: f64 = intervals.iter().map(|(lo, hi)| hi - lo).product();
    if volume <= 0.0 {
        return Err(Error::BadRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    let nf = n_target as f64;
    for _ in 0..samples {
        let mut value = 0.0f64;
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            let x = rng.gen_range(lo..hi);
            value += diag.lambdas[i] * x * x;
        }
        if (value - nf).abs() < epsilon {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    let estimate = volume * frac / (2.0 * epsilon);
    let std_err = volume * (frac * (1.0 - frac) / samples as f64).sqrt() / (2.0 * epsilon);
    Ok(IntegralEstimate {
        re: estimate,
        im: 0.0,
        abs_error: std_err,
        z_cut: 0.0,
        method: IntegralMethod::MonteCarlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadform::{diagonalize, QuadraticFormSpec};
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

    #[test]
    fn factor_at_origin_is_p() {
        let params = SmoothingParams::new(10.0, 1.0, vec![0.0; 4]).unwrap();
        let inp = GaussianFactorInputs::new(0.0, 1.0, 0.0, 0.0, &params);
        let v = gaussian_factor(&inp);
        assert!((v - Complex64::new(10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn modulus_identity() {
        let params = SmoothingParams::new(20.0, 1.5, vec![0.3, -0.2, 0.1, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let inp = GaussianFactorInputs::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(0.2..3.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                &params,
            );
            let ka = params.ka();
            let u = ka * ka / (params.p * params.p);
            let a = Complex64::new(u, -2.0 * PI * inp.z * inp.lambda);
            let b = Complex64::new(2.0 * params.p * inp.x0_star * u, 2.0 * PI * inp.beta_star);
            let c = -(params.p * inp.x0_star).powi(2) * u;
            let got = (c + b * b / (4.0 * a)).exp().norm();
            let want = gaussian_factor_modulus(&inp);
            assert!(
                (got - want).abs() <= 1e-10 * (1.0 + want),
                "{inp:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn factor_matches_quadrature() {
        let params = SmoothingParams::new(10.0, 1.0, vec![0.0; 4]).unwrap();
        let k2a = params.ka() * params.ka();
        for z in [-0.4, 0.0, 0.7] {
            for lambda in [0.5, 1.0, -2.0] {
                for beta_star in [0.0, 1.0, -0.5] {
                    for x0_star in [0.0, 0.4, -0.3] {
                        let inp = GaussianFactorInputs::new(z, lambda, beta_star, x0_star, &params);
                        let got = gaussian_factor(&inp);
                        let p = params.p;
                        let f = |x: f64| {
                            let gauss = -(x - p * x0_star).powi(2) / (p * p) * k2a;
                            Complex64::new(gauss, 0.0).exp()
                                * e(z * lambda * x * x + beta_star * x)
                        };
                        // +-8 Gaussian widths is plenty below 1e-6 relative
                        let w = 8.0 * p / params.ka();
                        let c0 = p * x0_star;
                        let want = quadrature::integrate_complex(
                            &f,
                            c0 - w,
                            c0 + w,
                            1e-10,
                            0.0,
                            64,
                            200_000,
                        )
                        .unwrap()
                        .value
                            * params.ka()
                            / PI.sqrt();
                        assert!(
                            (got - want).norm() <= 1e-6 * (1.0 + want.norm()),
                            "z={z} l={lambda} b={beta_star} x0={x0_star}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn i_gaussian_trivial_and_conjugate() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let params = SmoothingParams::new(7.0, 1.0, vec![0.0; 4]).unwrap();
        let v = i_gaussian(0.0, &[0.0; 4], 5, &params, &diag);
        assert!((v - Complex64::new(7.0f64.powi(4), 0.0)).norm() < 1e-8);
        // I(-z, -beta) = conj I(z, beta): negate both z and beta to flip
        // the sign of the whole phase z F(x) + beta . x
        let params2 = SmoothingParams::new(9.0, 2.0, vec![0.2, 0.0, -0.1, 0.3]).unwrap();
        for z in [0.01, 0.3, 2.0] {
            let beta = [0.4, -1.0, 0.0, 2.0];
            let neg: Vec<f64> = beta.iter().map(|v| -v).collect();
            let a = i_gaussian(z, &beta, 3, &params2, &diag);
            let b = i_gaussian(-z, &neg, 3, &params2, &diag);
            assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn i_gaussian_envelope() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let params = SmoothingParams::new(15.0, 1.0, vec![0.1, 0.0, 0.0, -0.2]).unwrap();
        let k2an = params.ka().powi(8);
        let c_mult = 1e4; // 10^n with n = 4, all |lambda| = 1
        let mut z = 1e-6;
        while z <= 1e3 {
            let v = i_gaussian(z, &[0.0; 4], 100, &params, &diag).norm();
            let env = c_mult * k2an * (15.0f64.powi(4)).min(z.powf(-2.0));
            assert!(v <= env, "z={z}: {v} > {env}");
            z *= 3.7;
        }
    }

    #[test]
    fn i_gaussian_matches_tensor_quadrature() {
        // low scale so the 4-d integral is feasible as an iterated product:
        // the integrand factorizes exactly, so the oracle multiplies four
        // independent 1-d quadratures done on the defining integrand.
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let params = SmoothingParams::new(5.0, 1.0, vec![0.0; 4]).unwrap();
        let (z, nt) = (0.1f64, 3i64);
        let got = i_gaussian(z, &[0.0; 4], nt, &params, &diag);
        let k2a = params.ka() * params.ka();
        let one_d = |_: usize| {
            let f = |x: f64| {
                Complex64::new(-(x * x) / 25.0 * k2a, 0.0).exp() * e(z * x * x)
            };
            quadrature::integrate_complex(&f, -40.0, 40.0, 1e-10, 0.0, 64, 100_000)
                .unwrap()
                .value
                * params.ka()
                / PI.sqrt()
        };
        let want = e(-z * nt as f64) * one_d(0).powi(4);
        assert!(
            (got - want).norm() <= 1e-4 * want.norm(),
            "{got} vs {want}"
        );
    }

    #[test]
    fn singular_integral_gaussian_real_and_capped() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let params = SmoothingParams::new(12.0, 1.0, vec![0.0; 4]).unwrap();
        let nt = 144;
        let est = singular_integral_gaussian(nt, &params, &diag, &QuadOptions::default()).unwrap();
        assert!(
            est.im.abs() <= 1e-8 * (1.0 + est.value().norm()),
            "imaginary part {}",
            est.im
        );
        // generous cap C P^{n-2} K^{2An+1}
        let cap = 1e3 * params.p.powi(2) * params.k().powf(2.0 * 4.0 + 1.0);
        assert!(est.re.abs() <= cap);
    }

    #[test]
    fn singular_integral_gaussian_converges() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let params = SmoothingParams::new(50.0, 1.0, vec![0.0; 4]).unwrap();
        let coarse = singular_integral_gaussian(
            2500,
            &params,
            &diag,
            &QuadOptions { rel_tol: 1e-6, ..Default::default() },
        )
        .unwrap();
        let fine = singular_integral_gaussian(
            2500,
            &params,
            &diag,
            &QuadOptions { rel_tol: 5e-7, ..Default::default() },
        )
        .unwrap();
        assert!(
            (coarse.re - fine.re).abs() <= 1e-5 * fine.re.abs(),
            "{} vs {}",
            coarse.re,
            fine.re
        );
    }

    #[test]
    fn char_integral_vanishes_without_real_points() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let box_spec = BoxSpec::new(vec![0.0; 4], vec![2.0; 4]).unwrap();
        // max of F on PB with P=10 is 4 * 400 = 1600 < N
        let est = singular_integral_char(
            5000,
            10.0,
            &vec![(1.0, 1.0)],
            &box_spec,
            &diag,
            &QuadOptions::default(),
        )
        .unwrap();
        assert!(
            est.re.abs() <= est.abs_error + 1e-6,
            "value {} exceeds error bar {}",
            est.re,
            est.abs_error
        );
    }

    #[test]
    fn char_integral_rejects_n3() {
        let form = QuadraticFormSpec::new(
            3,
            vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]],
        )
        .unwrap();
        let diag = diagonalize(&form).unwrap();
        let box_spec = BoxSpec::new(vec![0.0; 3], vec![2.0; 3]).unwrap();
        assert!(singular_integral_char(
            4,
            5.0,
            &vec![(1.0, 1.0)],
            &box_spec,
            &diag,
            &QuadOptions::default()
        )
        .is_err());
    }

    #[test]
    fn j_integral_alpha_zero_closed_form() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let x0 = [0.3, -0.1, 0.0, 0.5];
        let (z, nt, p) = (0.8, 9i64, 6.0);
        let got = j_integral(0.0, z, &x0, nt, p, &form, &diag).unwrap();
        let f_x0 = form.evaluate_real(&x0).unwrap();
        let want = PI.powi(2) * e(z * (f_x0 - nt as f64 / (p * p)));
        assert!((got - want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn j_integral_matches_tensor_quadrature() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let x0 = [0.2, 0.0, -0.4, 0.1];
        let (alpha, z, nt, p) = (0.3, 0.7, 4i64, 5.0);
        let got = j_integral(alpha, z, &x0, nt, p, &form, &diag).unwrap();
        // the integrand factorizes coordinate-wise for the diagonal form
        let beta = nt as f64 / (p * p);
        let f_x0 = form.evaluate_real(&x0).unwrap();
        let mut want = e(z * (f_x0 - beta));
        for i in 0..4 {
            let g = 2.0 * x0[i]; // (grad F)_i for the sum of squares
            let f = |y: f64| {
                Complex64::new(-y * y, 0.0).exp()
                    * e(z * (alpha * alpha * y * y + alpha * g * y))
            };
            want *= quadrature::integrate_complex(&f, -10.0, 10.0, 1e-10, 0.0, 32, 50_000)
                .unwrap()
                .value;
        }
        assert!(
            (got - want).norm() <= 1e-5 * want.norm(),
            "{got} vs {want}"
        );
    }

    #[test]
    fn j_integral_continuity_bound() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let x0 = [0.3, -0.2, 0.1, 0.0];
        let params = SmoothingParams::new(50.0, 2.0, x0.to_vec()).unwrap();
        let delta = params.delta();
        let nt = 2500i64;
        let x0_norm: f64 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let frob: f64 = 4.0; // Frobenius norm of F = 2 Id_4
        let c = 10.0 * (1.0 + x0_norm) * frob;
        let mut z = 0.05f64;
        while z <= params.k().powf(params.a / 3.0) {
            let jd = j_integral(delta, z, &x0, nt, params.p, &form, &diag).unwrap();
            let j0 = j_integral(0.0, z, &x0, nt, params.p, &form, &diag).unwrap();
            assert!(
                (jd - j0).norm() <= c * z * delta,
                "z={z}: diff {} > {}",
                (jd - j0).norm(),
                c * z * delta
            );
            z *= 2.3;
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let form = four_squares();
        let diag = diagonalize(&form).unwrap();
        let box_spec = BoxSpec::new(vec![0.0; 4], vec![2.0; 4]).unwrap();
        // positive definite form, negative N: no mass at all
        let est =
            volume_density_oracle(-50, 10.0, &box_spec, &diag, 5.0, 20_000, 1).unwrap();
        assert_eq!(est.re, 0.0);
        // doubling the samples shrinks the reported standard error by
        // roughly sqrt(2)
        let a = volume_density_oracle(100, 10.0, &box_spec, &diag, 10.0, 200_000, 7).unwrap();
        let b = volume_density_oracle(100, 10.0, &box_spec, &diag, 10.0, 400_000, 7).unwrap();
        let ratio = a.abs_error / b.abs_error;
        assert!((ratio - std::f64::consts::SQRT_2).abs() < 0.3, "ratio {ratio}");
        // determinism
        let c = volume_density_oracle(100, 10.0, &box_spec, &diag, 10.0, 200_000, 7).unwrap();
        assert_eq!(a.re, c.re);
    }
}
