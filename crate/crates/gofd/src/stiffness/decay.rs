use std::io::Write;

use super::StiffnessKernel;
use crate::error::{Error, Result};

/// Kernel magnitudes against offset radius and the fitted tail slope.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub radii: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fitted_slope: f64,
}

const MIN_TAIL_POINTS: usize = 8;

/// Entries below this fraction of the largest magnitude count as exact
/// zeros (the 1D ball kernel vanishes at every even offset when s = 1/2).
const ZERO_FRACTION: f64 = 64.0 * f64::EPSILON;

impl DecayProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "abs_p,abs_T")?;
        for (r, m) in self.radii.iter().zip(&self.magnitudes) {
            writeln!(out, "{r:.16e},{m:.16e}")?;
        }
        Ok(())
    }
}

/// Collects `(|p|, |T_p|)` for every nonzero offset, sorted by radius, and
/// fits `log|T|` against `log|p|` by least squares over
/// `|p| in [max|p| / 2, max|p|]`.
pub fn decay_profile(kernel: &StiffnessKernel) -> Result<DecayProfile> {
    let dim = kernel.dim();
    let n = kernel.side();
    let mut pairs: Vec<(f64, f64)> = kernel
        .coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(flat, &t)| {
            let mut f = flat;
            let mut sq = 0usize;
            for _ in 0..dim {
                let p = f % n;
                sq += p * p;
                f /= n;
            }
            ((sq as f64).sqrt(), t.abs())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let r_max = pairs.last().map_or(0.0, |p| p.0);
    let peak = pairs.iter().fold(0.0f64, |acc, p| acc.max(p.1));
    let floor = ZERO_FRACTION * peak;
    let tail: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.0 >= 0.5 * r_max && p.1 > floor)
        .map(|&(r, m)| (r.ln(), m.ln()))
        .collect();
    if tail.len() < MIN_TAIL_POINTS {
        return Err(Error::DecayTailTooShort(tail.len()));
    }
    let c = tail.len() as f64;
    let mx = tail.iter().map(|t| t.0).sum::<f64>() / c;
    let my = tail.iter().map(|t| t.1).sum::<f64>() / c;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in &tail {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let fitted_slope = sxy / sxx;
    let (radii, magnitudes) = pairs.into_iter().unzip();
    Ok(DecayProfile {
        radii,
        magnitudes,
        fitted_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FractionalOrder;
    use crate::stiffness::{analytic_1d, Scheme};

    #[test]
    fn exact_power_law_is_recovered() {
        let s = FractionalOrder::new(0.5).unwrap();
        let n = 20;
        let mut coeffs = vec![0.0; (2 * n + 1) * (2 * n + 1)];
        for p in 0..=2 * n {
            for q in 0..=2 * n {
                let r = ((p * p + q * q) as f64).sqrt();
                coeffs[p * (2 * n + 1) + q] = if r == 0.0 { 1.0 } else { 3.0 * r.powf(-2.7) };
            }
        }
        let k = StiffnessKernel::from_coeffs(2, s, n, Scheme::FftUniform, coeffs).unwrap();
        let prof = decay_profile(&k).unwrap();
        assert!((prof.fitted_slope + 2.7).abs() < 1e-12);
        assert_eq!(prof.radii.len(), (2 * n + 1).pow(2) - 1);
        assert!(prof.radii.windows(2).all(|w| w[0] <= w[1]));
        assert!(prof.radii[0] > 0.0);
    }

    #[test]
    fn analytic_slope() {
        let k = analytic_1d(FractionalOrder::new(0.5).unwrap(), 81).unwrap();
        let prof = decay_profile(&k).unwrap();
        assert!((prof.fitted_slope + 2.0).abs() < 0.1, "{}", prof.fitted_slope);
    }

    #[test]
    fn short_tail_is_rejected() {
        let k = analytic_1d(FractionalOrder::new(0.5).unwrap(), 3).unwrap();
        assert!(matches!(decay_profile(&k), Err(Error::DecayTailTooShort(_))));
    }
}
