//! Type-1 nonuniform transform by Gaussian gridding (Greengard–Lee), used
//! for the clustered-node trapezoidal sum when direct summation is too slow.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const OVERSAMPLING: f64 = 2.0;
/// Grid points spread to on each side of a source.
const HALF_WIDTH: usize = 12;

pub(crate) struct GaussianGridding {
    n_out: usize,
    grid_len: usize,
    tau: f64,
    fft: Arc<dyn Fft<f64>>,
    grid: Vec<Complex64>,
    scratch: Vec<Complex64>,
    /// `exp(-(l h)^2 / 4τ)` for l = 0..=HALF_WIDTH
    e3: Vec<f64>,
    /// `sqrt(π/τ) exp(k^2 τ) / grid_len` for k = 0..n_out
    deconv: Vec<f64>,
}

impl GaussianGridding {
    pub(crate) fn new(n_out: usize) -> Self {
        let modes = (2 * n_out).max(16);
        let grid_len = (OVERSAMPLING * modes as f64) as usize;
        let tau = PI * HALF_WIDTH as f64
            / ((modes * modes) as f64 * OVERSAMPLING * (OVERSAMPLING - 0.5));
        let h = 2.0 * PI / grid_len as f64;
        let e3 = (0..=HALF_WIDTH)
            .map(|l| {
                let d = l as f64 * h;
                (-d * d / (4.0 * tau)).exp()
            })
            .collect();
        let deconv = (0..n_out)
            .map(|k| {
                let k = k as f64;
                (PI / tau).sqrt() * (k * k * tau).exp() / grid_len as f64
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(grid_len);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            n_out,
            grid_len,
            tau,
            fft,
            grid: vec![Complex64::default(); grid_len],
            scratch,
            e3,
            deconv,
        }
    }

    /// `out[k] = sum_j a_j cos(k x_j)` for k < n_out, x_j in [-π, π].
    pub(crate) fn cos_sum(&mut self, x: &[f64], a: &[f64], out: &mut [f64]) {
        let len = self.grid_len;
        let h = 2.0 * PI / len as f64;
        self.grid.iter_mut().for_each(|g| *g = Complex64::default());
        let w = HALF_WIDTH as isize;
        for (&xj, &aj) in x.iter().zip(a) {
            if aj == 0.0 {
                continue;
            }
            let xw = xj.rem_euclid(2.0 * PI);
            let m0 = (xw / h).floor() as isize;
            let diff = xw - m0 as f64 * h;
            let e1 = aj * (-diff * diff / (4.0 * self.tau)).exp();
            let e2 = (diff * h / (2.0 * self.tau)).exp();
            let e2_inv = 1.0 / e2;
            // l = 0 and positive side
            let mut pow = 1.0;
            for l in 0..=w {
                let idx = (m0 + l).rem_euclid(len as isize) as usize;
                self.grid[idx].re += e1 * pow * self.e3[l as usize];
                pow *= e2;
            }
            let mut pow = e2_inv;
            for l in 1..w {
                let idx = (m0 - l).rem_euclid(len as isize) as usize;
                self.grid[idx].re += e1 * pow * self.e3[l as usize];
                pow *= e2_inv;
            }
        }
        self.fft.process_with_scratch(&mut self.grid, &mut self.scratch);
        for (k, o) in out.iter_mut().enumerate().take(self.n_out) {
            *o = self.grid[k].re * self.deconv[k];
        }
    }
}

/// `sum_j a_j cos(k x_j)` for `k in 0..n_out`, points in `[-π, π]`.
pub fn nufft_type1_cos(points: &[f64], strengths: &[f64], n_out: usize) -> Vec<f64> {
    let mut g = GaussianGridding::new(n_out);
    let mut out = vec![0.0; n_out];
    g.cos_sum(points, strengths, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_cosine_sum() {
        let n = 300;
        let x: Vec<f64> = (0..n)
            .map(|j| PI * ((2 * j + 1) as f64 / n as f64 - 1.0).powi(3))
            .collect();
        let a: Vec<f64> = (0..n).map(|j| 1.0 + (j as f64 * 0.37).sin()).collect();
        let n_out = 41;
        let got = nufft_type1_cos(&x, &a, n_out);
        let total: f64 = a.iter().map(|v| v.abs()).sum();
        for (k, g) in got.iter().enumerate() {
            let want: f64 = x.iter().zip(&a).map(|(x, a)| a * (k as f64 * x).cos()).sum();
            assert!((g - want).abs() < 1e-11 * total, "k={k}: {g} vs {want}");
        }
    }
}
