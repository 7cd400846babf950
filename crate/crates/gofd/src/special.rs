//! Special functions needed by the stiffness kernels and the model problem.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function by the Lanczos approximation (g = 7, 9 terms), with the
/// reflection formula below 1/2. Poles at the non-positive integers return
/// infinity.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (PI * x).sin();
        if s == 0.0 {
            return f64::INFINITY;
        }
        return PI / (s * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEFFS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Bessel function of the first kind of order zero.
///
/// Ascending series up to r = 8, Miller backward recurrence on (8, 20) and
/// the Hankel asymptotic expansion beyond; absolute error stays below 1e-13.
pub fn bessel_j0(r: f64) -> f64 {
    let r = r.abs();
    if r <= 8.0 {
        j0_series(r)
    } else if r < 20.0 {
        j0_miller(r)
    } else {
        j0_hankel(r)
    }
}

fn j0_series(r: f64) -> f64 {
    let q = -0.25 * r * r;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 4 {
            break;
        }
    }
    sum
}

fn j0_miller(r: f64) -> f64 {
    // Start well above r; the normalization 1 = J0 + 2 * sum J_{2k}.
    let start = (r as usize + 30) & !1;
    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / r * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
        }
        // j_cur now holds J_{k-1}
        let order = k - 1;
        if order == 0 {
            j0 = j_cur;
        } else if order % 2 == 0 {
            norm += 2.0 * j_cur;
        }
    }
    norm += j0;
    j0 / norm
}

fn j0_hankel(r: f64) -> f64 {
    // P0 ~ sum (-1)^k a_{2k} / r^{2k}, Q0 ~ -sum (-1)^k a_{2k+1} / r^{2k+1},
    // a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k).
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= odd * odd / (8.0 * k as f64 * r);
        }
        if a > prev {
            break;
        }
        prev = a;
        match k % 4 {
            0 => p += a,
            1 => q -= a,
            2 => p -= a,
            _ => q += a,
        }
        if a < 1e-17 {
            break;
        }
    }
    let phase = r - FRAC_PI_4;
    (2.0 / (PI * r)).sqrt() * (p * phase.cos() - q * phase.sin())
}

/// `J_{d/2-1}(r)` for d in {1, 2, 3}, the Bessel order that appears in the
/// radial Fourier transform in d dimensions.
pub fn bessel_j_half_order(dim: usize, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r", format!("must be positive and finite, got {r}")));
    }
    match dim {
        1 => Ok((2.0 / (PI * r)).sqrt() * r.cos()),
        2 => Ok(bessel_j0(r)),
        3 => Ok((2.0 / (PI * r)).sqrt() * r.sin()),
        _ => Err(Error::invalid("dim", format!("must be 1, 2 or 3, got {dim}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(1.5), PI.sqrt() / 2.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(10.0), 362_880.0, max_relative = 1e-13);
        assert_relative_eq!(gamma(-0.5), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert!(gamma(0.0).is_infinite());
    }

    #[test]
    fn gamma_recurrence_on_unit_interval() {
        for i in 1..100 {
            let x = i as f64 * 0.1;
            assert_relative_eq!(gamma(x + 1.0), x * gamma(x), max_relative = 2e-13);
        }
    }

    fn j0_oracle(r: f64) -> f64 {
        // Ascending series with compensated summation; the reference for r <= 10.
        let q = -0.25 * r * r;
        let mut term = 1.0f64;
        let (mut sum, mut c) = (1.0f64, 0.0f64);
        for k in 1..80 {
            term *= q / (k * k) as f64;
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn j0_matches_series_oracle() {
        for i in 1..=1000 {
            let r = i as f64 * 0.01;
            assert!((bessel_j0(r) - j0_oracle(r)).abs() < 1e-10, "r = {r}");
        }
    }

    #[test]
    fn j0_is_continuous_across_branch_points() {
        for &(a, b) in &[(j0_series(8.0), j0_miller(8.0)), (j0_miller(20.0), j0_hankel(20.0))] {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn j0_reference_values() {
        // Zeros of J0.
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-13);
        assert!(bessel_j0(5.520_078_110_286_311).abs() < 1e-13);
        assert!(bessel_j0(11.791_534_439_014_281).abs() < 1e-13);
        assert!(bessel_j0(30.634_606_468_431_975).abs() < 1e-13, "{}", bessel_j0(30.634_606_468_431_975));
        // J0(10) and J0(50) from tables.
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-13);
        assert!((bessel_j0(50.0) - 0.055_812_327_669_251_6).abs() < 1e-13);
        assert!((bessel_j0(15.0) + 0.014_224_472_826_780_773).abs() < 1e-13);
    }

    #[test]
    fn half_order_closed_forms() {
        assert!(bessel_j_half_order(3, PI).unwrap().abs() < 1e-14);
        let v = bessel_j_half_order(1, PI).unwrap();
        assert_relative_eq!(v, -(2.0 / (PI * PI)).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(v, -0.450_158_158_1, epsilon = 1e-10);
        assert!(bessel_j_half_order(2, 2.404_825_557_7).unwrap().abs() < 1e-8);
    }

    #[test]
    fn half_order_rejects_bad_input() {
        assert!(bessel_j_half_order(2, 0.0).is_err());
        assert!(bessel_j_half_order(2, -1.0).is_err());
        assert!(bessel_j_half_order(4, 1.0).is_err());
    }
}
