//! Tensor-product trapezoidal sums over `(-π, π)^d`.
//!
//! Both integrands are even in every coordinate and the sample sets are
//! symmetric, so each sum is evaluated on the half grid `ξ <= 0` per axis and
//! reduced one axis at a time by a cosine transform of the half-line.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::nufft::GaussianGridding;
use crate::error::{Error, Result};

/// Above this many samples (`M^d`) the nonuniform sum switches from direct
/// cosine summation to the Gaussian-gridding transform.
pub const NONUNIFORM_DIRECT_LIMIT: usize = 1 << 24;

const IMAG_TOLERANCE: f64 = 1e-10;

/// How the nonuniform trapezoidal sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonUniformPath {
    Auto,
    Direct,
    Gridding,
}

trait LineTransform {
    fn half_len(&self) -> usize;
    /// Half-line samples `h[0..=half]` to `out[0..n_out]`. Returns the
    /// imaginary residue relative to the largest real output.
    fn apply(&mut self, h: &[f64], out: &mut [f64]) -> f64;
}

/// `sum_{j=0}^{M-1} h[j] e^{i 2π p j / M}` for a line symmetric under
/// `j -> M - j`, by one complex FFT of the mirrored samples.
struct UniformLine {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl UniformLine {
    fn new(m: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(m);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Self {
            m,
            fft,
            buf: vec![Complex64::default(); m],
            scratch,
        }
    }
}

impl LineTransform for UniformLine {
    fn half_len(&self) -> usize {
        self.m / 2
    }

    fn apply(&mut self, h: &[f64], out: &mut [f64]) -> f64 {
        let m = self.m;
        self.buf[0] = Complex64::new(h[0], 0.0);
        for j in 1..m {
            self.buf[j] = Complex64::new(h[j.min(m - j)], 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = z.re;
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
        if max_re > 0.0 {
            max_im / max_re
        } else {
            0.0
        }
    }
}

/// Direct weighted cosine sum over the clustered half-line nodes.
struct DirectCosLine {
    half: usize,
    n_out: usize,
    /// `table[j * n_out + p] = a_j cos(p ξ_j)`
    table: Vec<f64>,
}

impl DirectCosLine {
    fn new(nodes: &[f64], coef: &[f64], n_out: usize) -> Self {
        let mut table = Vec::with_capacity(nodes.len() * n_out);
        for (&x, &a) in nodes.iter().zip(coef) {
            for p in 0..n_out {
                table.push(a * (p as f64 * x).cos());
            }
        }
        Self {
            half: nodes.len() - 1,
            n_out,
            table,
        }
    }
}

impl LineTransform for DirectCosLine {
    fn half_len(&self) -> usize {
        self.half
    }

    fn apply(&mut self, h: &[f64], out: &mut [f64]) -> f64 {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.table[j * self.n_out..(j + 1) * self.n_out];
            for (o, t) in out.iter_mut().zip(row) {
                *o += hj * t;
            }
        }
        0.0
    }
}

struct GriddingLine {
    nodes: Vec<f64>,
    coef: Vec<f64>,
    strengths: Vec<f64>,
    grid: GaussianGridding,
}

impl LineTransform for GriddingLine {
    fn half_len(&self) -> usize {
        self.nodes.len() - 1
    }

    fn apply(&mut self, h: &[f64], out: &mut [f64]) -> f64 {
        for ((s, &a), &hj) in self.strengths.iter_mut().zip(&self.coef).zip(h) {
            *s = a * hj;
        }
        self.grid.cos_sum(&self.nodes, &self.strengths, out);
        0.0
    }
}

/// Reduces axis `level` and all later axes for the fixed leading indices in
/// `prefix`; returns a row-major `n_out^(dim - level)` block.
fn reduce_axes(
    level: usize,
    dim: usize,
    prefix: &mut [usize; 3],
    n_out: usize,
    line: &mut dyn LineTransform,
    eval: &dyn Fn(&[usize]) -> f64,
    residue: &mut f64,
) -> Vec<f64> {
    let half = line.half_len();
    let mut h = vec![0.0; half + 1];
    if level + 1 == dim {
        for (j, hj) in h.iter_mut().enumerate() {
            prefix[level] = j;
            *hj = eval(&prefix[..dim]);
        }
        let mut out = vec![0.0; n_out];
        *residue = residue.max(line.apply(&h, &mut out));
        return out;
    }
    let rest = n_out.pow((dim - level - 1) as u32);
    let mut block = vec![0.0; (half + 1) * rest];
    for j in 0..=half {
        prefix[level] = j;
        let sub = reduce_axes(level + 1, dim, prefix, n_out, line, eval, residue);
        block[j * rest..(j + 1) * rest].copy_from_slice(&sub);
    }
    let mut out = vec![0.0; n_out * rest];
    let mut line_out = vec![0.0; n_out];
    for c in 0..rest {
        for (j, hj) in h.iter_mut().enumerate() {
            *hj = block[j * rest + c];
        }
        *residue = residue.max(line.apply(&h, &mut line_out));
        for (p, &v) in line_out.iter().enumerate() {
            out[p * rest + c] = v;
        }
    }
    out
}

/// `((-1)^{|p|_1} / M^d) sum_{j in [0, M)^d} f(ξ_j) e^{i 2π p·j / M}` for
/// `p in [0, n_out)^d`, with `ξ_j = π (2 j / M - 1)`.
///
/// `f` receives `(|ξ|^2, sum_k 4 sin^2(ξ_k / 2))`.
pub(crate) fn uniform_sum<F>(dim: usize, m: usize, n_out: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    let half = m / 2;
    let xi: Vec<f64> = (0..=half)
        .map(|j| PI * (2.0 * j as f64 / m as f64 - 1.0))
        .collect();
    let (xi2, sin2) = axis_tables(&xi);
    let eval = |idx: &[usize]| {
        let (mut a, mut b) = (0.0, 0.0);
        for &j in idx {
            a += xi2[j];
            b += sin2[j];
        }
        f(a, b)
    };
    let mut line = UniformLine::new(m);
    let mut residue = 0.0;
    let mut out = reduce_axes(0, dim, &mut [0; 3], n_out, &mut line, &eval, &mut residue);
    if residue > IMAG_TOLERANCE {
        let scale = out.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        return Err(Error::ComplexResidue { residue, scale });
    }
    let norm = (m as f64).powi(dim as i32);
    apply_scale(&mut out, dim, n_out, |parity| {
        if parity % 2 == 0 {
            1.0 / norm
        } else {
            -1.0 / norm
        }
    });
    Ok(out)
}

/// Clustered nodes `ξ_j = π t |t|`, `t = 2 j / M - 1`, j = 0..=M.
pub(crate) fn clustered_node(j: usize, m: usize) -> f64 {
    let t = 2.0 * j as f64 / m as f64 - 1.0;
    PI * t * t.abs()
}

/// Trapezoid weights on the clustered nodes, one-sided at both ends.
pub(crate) fn clustered_weight(j: usize, m: usize) -> f64 {
    if j == 0 {
        0.5 * (clustered_node(1, m) - clustered_node(0, m))
    } else if j == m {
        0.5 * (clustered_node(m, m) - clustered_node(m - 1, m))
    } else {
        0.5 * (clustered_node(j + 1, m) - clustered_node(j - 1, m))
    }
}

/// `(2π)^{-d} sum_{j in [0, M]^d} prod w_{j_k} f(ξ_j) e^{i p·ξ_j}` on the
/// clustered nodes. `f` receives `sum_k 4 sin^2(ξ_k / 2)`.
pub(crate) fn nonuniform_sum<F>(
    dim: usize,
    m: usize,
    n_out: usize,
    path: NonUniformPath,
    f: F,
) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let half = m / 2;
    let nodes: Vec<f64> = (0..=half).map(|j| clustered_node(j, m)).collect();
    // each half-line node stands for itself and its mirror image
    let coef: Vec<f64> = (0..=half)
        .map(|j| {
            let mult = if 2 * j == m { 1.0 } else { 2.0 };
            mult * clustered_weight(j, m)
        })
        .collect();
    let (_, sin2) = axis_tables(&nodes);
    let eval = |idx: &[usize]| f(idx.iter().map(|&j| sin2[j]).sum());
    let use_direct = match path {
        NonUniformPath::Direct => true,
        NonUniformPath::Gridding => false,
        NonUniformPath::Auto => {
            (m as f64).powi(dim as i32) <= NONUNIFORM_DIRECT_LIMIT as f64
        }
    };
    let mut residue = 0.0;
    let mut out = if use_direct {
        let mut line = DirectCosLine::new(&nodes, &coef, n_out);
        reduce_axes(0, dim, &mut [0; 3], n_out, &mut line, &eval, &mut residue)
    } else {
        let mut line = GriddingLine {
            strengths: vec![0.0; nodes.len()],
            grid: GaussianGridding::new(n_out),
            nodes,
            coef,
        };
        reduce_axes(0, dim, &mut [0; 3], n_out, &mut line, &eval, &mut residue)
    };
    let norm = (2.0 * PI).powi(dim as i32);
    apply_scale(&mut out, dim, n_out, |_| 1.0 / norm);
    out
}

fn axis_tables(xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let xi2 = xi.iter().map(|x| x * x).collect();
    let sin2 = xi
        .iter()
        .map(|x| {
            let h = (0.5 * x).sin();
            4.0 * h * h
        })
        .collect();
    (xi2, sin2)
}

/// Multiplies each entry by `factor(|p|_1)`.
fn apply_scale(out: &mut [f64], dim: usize, n_out: usize, factor: impl Fn(usize) -> f64) {
    for (flat, v) in out.iter_mut().enumerate() {
        let mut f = flat;
        let mut parity = 0;
        for _ in 0..dim {
            parity += f % n_out;
            f /= n_out;
        }
        *v *= factor(parity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal double sum of the trapezoidal formula with complex exponentials.
    fn uniform_oracle_2d(m: usize, n_out: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; n_out * n_out];
        for p in 0..n_out {
            for q in 0..n_out {
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..m {
                    for k in 0..m {
                        let x = PI * (2.0 * j as f64 / m as f64 - 1.0);
                        let y = PI * (2.0 * k as f64 / m as f64 - 1.0);
                        let v = f(x, y);
                        let ph = 2.0 * PI * ((p * j + q * k) as f64) / m as f64;
                        re += v * ph.cos();
                        im += v * ph.sin();
                    }
                }
                assert!(im.abs() < 1e-9 * re.abs().max(1.0));
                let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
                out[p * n_out + q] = sign * re / (m * m) as f64;
            }
        }
        out
    }

    #[test]
    fn uniform_sum_matches_literal_double_sum() {
        let s = 0.5;
        for &m in &[64usize, 33] {
            let got = uniform_sum(2, m, 9, |_, b| if b == 0.0 { 0.0 } else { b.powf(s) }).unwrap();
            let want = uniform_oracle_2d(m, 9, |x, y| {
                let b = 4.0 * (0.5 * x).sin().powi(2) + 4.0 * (0.5 * y).sin().powi(2);
                if b == 0.0 {
                    0.0
                } else {
                    b.powf(s)
                }
            });
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "M={m}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn nonuniform_direct_matches_brute_force_1d() {
        let (m, n_out, s) = (33usize, 9usize, 0.3);
        let got = nonuniform_sum(1, m, n_out, NonUniformPath::Direct, |b| {
            if b == 0.0 {
                0.0
            } else {
                b.powf(s)
            }
        });
        for (p, g) in got.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..=m {
                let x = clustered_node(j, m);
                let v = (4.0 * (0.5 * x).sin().powi(2)).powf(s) * clustered_weight(j, m);
                re += v * (p as f64 * x).cos();
                im += v * (p as f64 * x).sin();
            }
            assert!(im.abs() < 1e-13);
            let want = re / (2.0 * PI);
            assert!((g - want).abs() < 1e-13, "p={p}: {g} vs {want}");
        }
    }

    #[test]
    fn clustered_weights_sum_to_interval_length() {
        for m in [8usize, 33, 1024] {
            let total: f64 = (0..=m).map(|j| clustered_weight(j, m)).sum();
            assert!((total - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn gridding_path_matches_direct_path() {
        let f = |b: f64| if b == 0.0 { 0.0 } else { b.powf(0.4) };
        for (dim, m, n_out) in [(1, 256, 33), (2, 64, 17), (3, 24, 9)] {
            let a = nonuniform_sum(dim, m, n_out, NonUniformPath::Direct, f);
            let b = nonuniform_sum(dim, m, n_out, NonUniformPath::Gridding, f);
            let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10 * scale, "dim={dim}: {x} vs {y}");
            }
        }
    }
}
