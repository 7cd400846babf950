//! Multi-dimensional complex DFT over row-major tensors, with optional
//! pruning of lines known to be zero or not needed.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Sign convention of a transform. `Forward` uses `e^{-i 2π jk/N}` and is
/// unnormalized; `Inverse` uses `e^{+i 2π jk/N}` and divides by the total
/// size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Number of lines gathered together along a strided axis.
const BATCH: usize = 16;

/// Per-axis FFT plans for a fixed tensor shape.
pub(crate) struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("shape", &self.shape).finish()
    }
}

impl NdFft {
    pub(crate) fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.to_vec(),
            forward,
            inverse,
        }
    }

    /// Unnormalized transform along every axis.
    pub(crate) fn transform(&self, buf: &mut [Complex64], dir: Direction) {
        let limits = self.shape.clone();
        for axis in 0..self.shape.len() {
            self.transform_axis(buf, axis, dir, &limits);
        }
    }

    /// Unnormalized transform along `axis`, restricted to the lines whose
    /// index along every other axis `k` is below `limits[k]`.
    pub(crate) fn transform_axis(
        &self,
        buf: &mut [Complex64],
        axis: usize,
        dir: Direction,
        limits: &[usize],
    ) {
        let d = self.shape.len();
        let n = self.shape[axis];
        let fft = match dir {
            Direction::Forward => &self.forward[axis],
            Direction::Inverse => &self.inverse[axis],
        };
        let stride: usize = self.shape[axis + 1..].iter().product();
        let block = n * stride;
        let outer_shape = &limits[..axis];
        let outer_count: usize = outer_shape.iter().product();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

        // inner offsets (axes after `axis`) come in contiguous runs along the last axis
        let inner_runs: Vec<(usize, usize)> = if axis + 1 == d {
            vec![(0, 1)]
        } else {
            let run = limits[d - 1];
            let lead = &limits[axis + 1..d - 1];
            let lead_shape = &self.shape[axis + 1..d - 1];
            let count: usize = lead.iter().product();
            (0..count)
                .map(|c| (offset_of(c, lead, lead_shape) * self.shape[d - 1], run))
                .collect()
        };

        let mut tmp = vec![Complex64::default(); n * BATCH];
        for o in 0..outer_count {
            let base = offset_of(o, outer_shape, &self.shape[..axis]) * block;
            if stride == 1 {
                fft.process_with_scratch(&mut buf[base..base + n], &mut scratch);
                continue;
            }
            for &(start, run) in &inner_runs {
                let mut r = 0;
                while r < run {
                    let width = BATCH.min(run - r);
                    let first = base + start + r;
                    for i in 0..n {
                        let row = &buf[first + i * stride..first + i * stride + width];
                        for (b, v) in row.iter().enumerate() {
                            tmp[b * n + i] = *v;
                        }
                    }
                    fft.process_with_scratch(&mut tmp[..width * n], &mut scratch);
                    for i in 0..n {
                        let row = &mut buf[first + i * stride..first + i * stride + width];
                        for (b, v) in row.iter_mut().enumerate() {
                            *v = tmp[b * n + i];
                        }
                    }
                    r += width;
                }
            }
        }
    }
}

/// Row-major offset (in units of the innermost listed axis) of the `c`-th
/// multi-index of the box `limits` inside a tensor of shape `shape`.
fn offset_of(mut c: usize, limits: &[usize], shape: &[usize]) -> usize {
    let mut off = 0;
    let mut mult = 1;
    for k in (0..limits.len()).rev() {
        off += (c % limits[k]) * mult;
        c /= limits[k];
        mult *= shape[k];
    }
    off
}

/// Multi-dimensional DFT of a row-major complex tensor of the given shape.
pub fn dft(values: &[Complex64], shape: &[usize], direction: Direction) -> Result<Vec<Complex64>> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::invalid("shape", "every axis needs a positive size"));
    }
    let total: usize = shape.iter().product();
    if total != values.len() {
        return Err(Error::ShapeMismatch {
            expected: total,
            got: values.len(),
        });
    }
    let plan = NdFft::new(shape);
    let mut buf = values.to_vec();
    plan.transform(&mut buf, direction);
    if direction == Direction::Inverse {
        let scale = 1.0 / total as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(buf)
}
