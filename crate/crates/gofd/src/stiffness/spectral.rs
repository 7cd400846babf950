//! Ball integrals of `|ξ|^{2s}`: the cube `(-π, π)^d` is replaced by the
//! ball of equal volume and the Fourier coefficient reduces to a radial
//! Bessel integral.

use std::f64::consts::PI;

use crate::error::Result;
use crate::quadrature::QuadratureRule;
use crate::special::{bessel_j0, gamma};

/// Radius of the ball with the volume of `(-π, π)^d`.
pub fn ball_radius(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * PI.sqrt() * gamma(d / 2.0 + 1.0).powf(1.0 / d)
}

/// `(2π)^{-d} ∫_{|ξ|<R} |ξ|^{2s} dξ` in closed form.
pub fn spectral_origin_value(s: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let r = ball_radius(dim);
    2.0 * r.powf(d + 2.0 * s)
        / ((d + 2.0 * s) * 2f64.powi(dim as i32) * PI.powf(d / 2.0) * gamma(d / 2.0))
}

/// `r^{d/2} J_{d/2-1}(r)` for the three supported dimensions.
fn radial_factor(dim: usize) -> fn(f64) -> f64 {
    match dim {
        1 => |r| (2.0 / PI).sqrt() * r.cos(),
        2 => |r| r * bessel_j0(r),
        _ => |r| (2.0 / PI).sqrt() * r * r.sin(),
    }
}

/// Grading exponent for the first radial interval, `r = a u^q`. The
/// integrand behaves like `r^{2s + d - 1}` at the origin; after the
/// substitution it is `u^{q(2s + d) - 1}` and the rule converges quickly.
const FIRST_INTERVAL_GRADING: i32 = 4;

/// Coefficients for `p in [0, n_out)^d`, row-major.
///
/// Offsets are grouped by `|p|^2`; the radial integral is accumulated over
/// consecutive intervals between distinct radii so that each is integrated
/// once. The interval starting at the origin is integrated in a graded
/// variable.
pub(crate) fn ball_coefficients(
    s: f64,
    dim: usize,
    n_out: usize,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    let total = n_out.pow(dim as u32);
    let max_sq = dim * (n_out - 1) * (n_out - 1);
    let mut present = vec![false; max_sq + 1];
    let mut sq_of = Vec::with_capacity(total);
    for flat in 0..total {
        let mut f = flat;
        let mut sq = 0;
        for _ in 0..dim {
            let p = f % n_out;
            sq += p * p;
            f /= n_out;
        }
        present[sq] = true;
        sq_of.push(sq);
    }

    let r_ball = ball_radius(dim);
    let radial = radial_factor(dim);
    let expo = 2.0 * s;
    let integrand = |r: f64| r.powf(expo) * radial(r);
    let scale = (2.0 * PI).powf(-(dim as f64) / 2.0);

    let mut by_sq = vec![0.0; max_sq + 1];
    let mut cum = 0.0;
    let mut lower = 0.0;
    for (sq, &here) in present.iter().enumerate().skip(1) {
        if !here {
            continue;
        }
        let rad = (sq as f64).sqrt();
        let upper = r_ball * rad;
        cum += if lower == 0.0 {
            let q = FIRST_INTERVAL_GRADING;
            rule.integrate(0.0, 1.0, |u| {
                upper * q as f64 * u.powi(q - 1) * integrand(upper * u.powi(q))
            })
        } else {
            rule.integrate(lower, upper, integrand)
        };
        lower = upper;
        by_sq[sq] = scale * cum / rad.powf(2.0 * s + dim as f64);
    }
    by_sq[0] = spectral_origin_value(s, dim);
    Ok(sq_of.into_iter().map(|sq| by_sq[sq]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    /// Composite Gauss–Legendre over many panels.
    fn panels(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let q = gauss_legendre(20).unwrap();
        let h = (b - a) / n as f64;
        (0..n)
            .map(|k| q.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &f))
            .sum()
    }

    #[test]
    fn radius_and_origin_values() {
        assert!((ball_radius(2) - 2.0 * PI.sqrt()).abs() < 1e-14);
        assert!((ball_radius(1) - PI).abs() < 1e-14);
        assert!((spectral_origin_value(0.5, 1) - PI / 2.0).abs() < 1e-14);
        // 1D: (1/π) ∫_0^π ξ^{2s} dξ
        let s = 0.3;
        let want = PI.powf(2.0 * s) / (1.0 + 2.0 * s);
        assert!((spectral_origin_value(s, 1) - want).abs() < 1e-14);
        // volume of the ball equals (2π)^d, so s -> 0 gives 1
        for d in 1..=3 {
            assert!((spectral_origin_value(1e-12, d) - 1.0).abs() < 1e-10);
        }
    }

    /// `(1/π) ∫_0^π ξ^{2s} cos(p ξ) dξ`, substituting `ξ = t^2` to remove the cusp.
    fn cosine_oracle(s: f64, p: usize) -> f64 {
        panels(0.0, PI.sqrt(), 400, |t| {
            2.0 * t * (t * t).powf(2.0 * s) * (p as f64 * t * t).cos()
        }) / PI
    }

    #[test]
    fn one_dimensional_cosine_integral() {
        let rule = gauss_legendre(64).unwrap();
        for &(s, tol) in &[(0.5, 1e-13), (0.1, 1e-13), (0.25, 1e-13), (0.75, 1e-13)] {
            let got = ball_coefficients(s, 1, 12, &rule).unwrap();
            for (p, g) in got.iter().enumerate().skip(1) {
                let want = cosine_oracle(s, p);
                assert!((g - want).abs() < tol, "s={s} p={p}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn two_dimensional_double_integral() {
        let s = 0.5;
        let rule = gauss_legendre(64).unwrap();
        let n_out = 5;
        let got = ball_coefficients(s, 2, n_out, &rule).unwrap();
        let r_ball = ball_radius(2);
        for &(p, q) in &[(1usize, 0usize), (1, 1), (3, 4), (4, 2)] {
            let k = ((p * p + q * q) as f64).sqrt();
            let want = panels(0.0, r_ball, 200, |rho| {
                let ang = panels(0.0, PI, 40, |th| (k * rho * th.cos()).cos());
                2.0 * rho.powf(2.0 * s + 1.0) * ang
            }) / (4.0 * PI * PI);
            let g = got[p * n_out + q];
            assert!((g - want).abs() < 1e-10, "p=({p},{q}): {g} vs {want}");
        }
        assert_eq!(got[n_out], got[1]);
        assert_eq!(got[3 * n_out + 4], got[4 * n_out + 3]);
    }
}
