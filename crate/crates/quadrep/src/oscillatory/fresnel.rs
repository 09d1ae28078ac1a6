//! Fresnel integrals and the interval integral `int_a^b e(z lambda v^2) dv`.
//!
//! `C(x) = int_0^x cos(pi t^2 / 2) dt`, `S(x) = int_0^x sin(pi t^2 / 2) dt`.
//! Power series for small arguments, a Lentz continued fraction for the
//! complementary error function beyond that; the regime switch sits at the
//! point where the series starts losing digits to cancellation.

use num_complex::Complex64;

use std::f64::consts::PI;

/// Regime switch between the power series and the continued fraction.
const SERIES_LIMIT: f64 = 1.5;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 200;
const FPMIN: f64 = 1e-300;

/// `(C(x), S(x))` for real `x`. Both are odd functions.
pub fn fresnel_cs(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax < SERIES_LIMIT {
        fresnel_series(ax)
    } else {
        fresnel_continued_fraction(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn fresnel_series(x: f64) -> (f64, f64) {
    // C: sum (-1)^k (pi/2)^{2k}   x^{4k+1} / ((2k)!   (4k+1))
    // S: sum (-1)^k (pi/2)^{2k+1} x^{4k+3} / ((2k+1)! (4k+3))
    let h = PI / 2.0 * x * x; // the half-phase pi x^2 / 2
    let mut c = 0.0f64;
    let mut s = 0.0f64;
    // term_c = (-1)^k h^{2k} / (2k)!, term_s = (-1)^k h^{2k+1} / (2k+1)!
    let mut term = 1.0f64;
    let mut k = 0usize;
    loop {
        c += term / (4 * k + 1) as f64;
        let ts = term * h / (2 * k + 1) as f64;
        s += ts / (4 * k + 3) as f64;
        term = -ts * h / (2 * k + 2) as f64;
        k += 1;
        if term.abs() < EPS && ts.abs() < EPS {
            break;
        }
        if k > MAX_ITER {
            break;
        }
    }
    (c * x, s * x)
}

/// Continued-fraction evaluation via the complex complementary error
/// function (modified Lentz), accurate to near machine precision for
/// `x >= 1.5`.
fn fresnel_continued_fraction(x: f64) -> (f64, f64) {
    let pix2 = PI * x * x;
    let mut b = Complex64::new(1.0, -pix2);
    let mut cc = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1i64;
    for _ in 2..MAX_ITER {
        n += 2;
        let a = (-n * (n + 1)) as f64;
        b += Complex64::new(4.0, 0.0);
        d = (a * d + b).inv();
        cc = b + a / cc;
        let del = cc * d;
        h *= del;
        if (del - 1.0).norm() < EPS {
            break;
        }
    }
    h *= Complex64::new(x, -x);
    let phase = Complex64::new((0.5 * pix2).cos(), (0.5 * pix2).sin());
    let cs = Complex64::new(0.5, 0.5) * (Complex64::new(1.0, 0.0) - phase * h);
    (cs.re, cs.im)
}

/// `int_a^b e(z lambda v^2) dv` with `e(t) = exp(2 pi i t)`.
pub fn fresnel_interval(z: f64, lambda: f64, a: f64, b: f64) -> Complex64 {
    let c = z * lambda;
    if c == 0.0 {
        return Complex64::new(b - a, 0.0);
    }
    let k = 2.0 * c.abs().sqrt();
    let prim = |v: f64| -> Complex64 {
        let (fc, fs) = fresnel_cs(k * v);
        Complex64::new(fc, fs * c.signum()) / k
    };
    prim(b) - prim(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillatory::quadrature::integrate_complex;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn limits_and_symmetry() {
        assert_eq!(fresnel_cs(0.0), (0.0, 0.0));
        // C(x), S(x) -> 1/2 at rate 1/(pi x)
        let (c, s) = fresnel_cs(100.0);
        assert!((c - 0.5).abs() < 5e-3);
        assert!((s - 0.5).abs() < 5e-3);
        let (cp, sp) = fresnel_cs(1.3);
        let (cm, sm) = fresnel_cs(-1.3);
        assert_eq!(cp, -cm);
        assert_eq!(sp, -sm);
    }

    #[test]
    fn regimes_agree_at_the_switch() {
        for x in [1.4f64, 1.5, 1.6, 1.45, 1.55] {
            let s = fresnel_series(x);
            let cf = fresnel_continued_fraction(x);
            assert!((s.0 - cf.0).abs() < 1e-12, "C({x}): {} vs {}", s.0, cf.0);
            assert!((s.1 - cf.1).abs() < 1e-12, "S({x}): {} vs {}", s.1, cf.1);
        }
    }

    #[test]
    fn known_values() {
        // Reference values computed with 30-digit arithmetic.
        let (c1, s1) = fresnel_cs(1.0);
        assert!((c1 - 0.779893400376822829474206413653).abs() < 1e-14);
        assert!((s1 - 0.438259147390354766076756696625).abs() < 1e-14);
        let (c2, s2) = fresnel_cs(2.0);
        assert!((c2 - 0.488253406075340754500223503357).abs() < 1e-13);
        assert!((s2 - 0.343415678363698242195300815958).abs() < 1e-13);
    }

    #[test]
    fn interval_zero_frequency() {
        let v = fresnel_interval(0.0, 3.0, -1.5, 2.5);
        assert_eq!(v, Complex64::new(4.0, 0.0));
    }

    #[test]
    fn interval_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let z = rng.gen_range(-3.0..3.0f64);
            let lambda = rng.gen_range(-2.0..2.0f64);
            let mut a = rng.gen_range(-5.0..5.0f64);
            let mut b = rng.gen_range(-5.0..5.0f64);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let got = fresnel_interval(z, lambda, a, b);
            let f = |v: f64| Complex64::from_polar(1.0, 2.0 * PI * z * lambda * v * v);
            let want = integrate_complex(&f, a, b, 1e-12, 1e-14, 16, 20_000)
                .unwrap()
                .value;
            assert!(
                (got - want).norm() <= 1e-8 * (1.0 + want.norm()),
                "z={z} lambda={lambda} [{a},{b}]: {got} vs {want}"
            );
        }
    }

    #[test]
    fn derivative_bound() {
        // |int_a^b e(z lambda v^2) dv| <= 3 |z lambda|^{-1/2} whenever the
        // stationary point is cleanly inside or outside; asserted on a grid
        // with |z lambda| min(|a|,|b|)^2 >= 1.
        for &zl in &[0.5f64, 1.0, 2.0, 7.5, 40.0] {
            for &(a, b) in &[(-8.0f64, 9.0f64), (1.0, 50.0), (-30.0, -2.0), (0.3, 4.0)] {
                if zl * a.abs().min(b.abs()).powi(2) < 1.0 {
                    continue;
                }
                let v = fresnel_interval(1.0, zl, a, b);
                assert!(
                    v.norm() <= 3.0 / zl.sqrt() + 1e-12,
                    "zl={zl} [{a},{b}]: |{}| > 3/sqrt",
                    v.norm()
                );
            }
        }
    }
}
