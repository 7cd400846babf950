//! The uniform-grid operator `v_j = sum_m T_{j-m} u_m`, applied through a
//! circulant embedding and the FFT.

mod dense;
mod dft;

pub use dense::{dense_materialize, min_eigenvalue, DENSE_LIMIT};
pub use dft::{dft, Direction};
pub(crate) use dft::NdFft;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::OverlayGrid;
use crate::stiffness::StiffnessKernel;

/// Planning refuses embeddings whose buffers would exceed this many bytes.
pub const PLAN_MEMORY_LIMIT: usize = 3 << 30;

/// Values on the nodes of an overlay grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVector {
    dim: usize,
    n_fd: usize,
    values: Vec<f64>,
}

impl GridVector {
    pub fn new(dim: usize, n_fd: usize, values: Vec<f64>) -> Result<Self> {
        crate::grid::check_dim(dim)?;
        let expected = (2 * n_fd + 1).pow(dim as u32);
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "grid vector entries must be finite"));
        }
        Ok(Self { dim, n_fd, values })
    }

    pub fn zeros(grid: &OverlayGrid) -> Self {
        Self {
            dim: grid.dim(),
            n_fd: grid.n_fd(),
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_fd(&self) -> usize {
        self.n_fd
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Smallest integer `>= n` whose prime factors are all in {2, 3, 5, 7}.
pub fn fft_friendly_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Precomputed transform of the circulant embedding of a kernel.
///
/// The `2 n + 1` grid values per axis sit at indices `0..=2n` of a periodic
/// array of length `L >= 4n`, and the generator holds `T_o` at `o mod L` for
/// `|o| <= 2n`. When `L = 4n` the offsets `±2n` share a slot, which is
/// harmless because `T` is even.
pub struct ToeplitzPlan {
    dim: usize,
    n_fd: usize,
    len: usize,
    symbol: Vec<f64>,
    fft: NdFft,
}

impl std::fmt::Debug for ToeplitzPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzPlan")
            .field("dim", &self.dim)
            .field("n_fd", &self.n_fd)
            .field("len", &self.len)
            .finish()
    }
}

impl ToeplitzPlan {
    pub fn new(kernel: &StiffnessKernel) -> Result<Self> {
        let dim = kernel.dim();
        let n_fd = kernel.n_fd();
        let len = fft_friendly_size(4 * n_fd);
        let total = len.pow(dim as u32);
        // one complex work buffer per apply plus the real symbol
        let bytes = total * (16 + 8);
        if bytes > PLAN_MEMORY_LIMIT {
            return Err(Error::MemoryBudget(format!(
                "circulant embedding of {len}^{dim} needs {} MiB",
                bytes >> 20
            )));
        }
        let side = kernel.side();
        let mut gen = vec![Complex64::default(); total];
        let mut idx = [0usize; 3];
        for (flat, &t) in kernel.coeffs().iter().enumerate() {
            let mut f = flat;
            for k in (0..dim).rev() {
                idx[k] = f % side;
                f /= side;
            }
            // write T at every sign combination of the offset
            for signs in 0..(1usize << dim) {
                let mut pos = 0;
                for (k, &p) in idx[..dim].iter().enumerate() {
                    let o = if signs >> k & 1 == 1 { (len - p) % len } else { p };
                    pos = pos * len + o;
                }
                gen[pos] = Complex64::new(t, 0.0);
            }
        }
        let fft = NdFft::new(&vec![len; dim]);
        fft.transform(&mut gen, Direction::Forward);
        let scale = gen.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
        let residue = gen.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
        if residue > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::ComplexResidue { residue, scale });
        }
        let symbol = gen.into_iter().map(|z| z.re).collect();
        Ok(Self {
            dim,
            n_fd,
            len,
            symbol,
            fft,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_fd(&self) -> usize {
        self.n_fd
    }

    /// Transform size per axis.
    pub fn embedding_len(&self) -> usize {
        self.len
    }

    /// Eigenvalues of the embedding circulant, row-major over `[0, L)^d`.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn apply(&self, u: &GridVector) -> Result<GridVector> {
        if u.dim != self.dim || u.n_fd != self.n_fd {
            return Err(Error::ShapeMismatch {
                expected: (2 * self.n_fd + 1).pow(self.dim as u32),
                got: u.values.len(),
            });
        }
        let mut out = vec![0.0; u.values.len()];
        self.apply_slice(&u.values, &mut out)?;
        Ok(GridVector {
            dim: self.dim,
            n_fd: self.n_fd,
            values: out,
        })
    }

    /// [`ToeplitzPlan::apply`] on raw row-major slices.
    pub fn apply_slice(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let side = 2 * self.n_fd + 1;
        let expected = side.pow(self.dim as u32);
        if u.len() != expected || out.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: if u.len() != expected { u.len() } else { out.len() },
            });
        }
        let (d, len) = (self.dim, self.len);
        let mut buf = vec![Complex64::default(); len.pow(d as u32)];
        for_each_node(d, side, |flat, idx| {
            let pos = idx.iter().fold(0, |acc, &i| acc * len + i);
            buf[pos] = Complex64::new(u[flat], 0.0);
        });

        // forward: axes from last to first, skipping lines that are still zero
        let mut limits = vec![side; d];
        for axis in (0..d).rev() {
            self.fft.transform_axis(&mut buf, axis, Direction::Forward, &limits);
            limits[axis] = len;
        }
        for (z, &s) in buf.iter_mut().zip(&self.symbol) {
            *z *= s;
        }
        // inverse: axes from first to last, skipping lines that are not read back
        let mut limits = vec![len; d];
        for axis in 0..d {
            self.fft.transform_axis(&mut buf, axis, Direction::Inverse, &limits);
            limits[axis] = side;
        }
        let scale = 1.0 / buf.len() as f64;
        for_each_node(d, side, |flat, idx| {
            let pos = idx.iter().fold(0, |acc, &i| acc * len + i);
            out[flat] = buf[pos].re * scale;
        });
        Ok(())
    }
}

/// Calls `f(flat, multi_index)` for every node of a `side^d` grid.
fn for_each_node(dim: usize, side: usize, mut f: impl FnMut(usize, &[usize])) {
    let mut idx = [0usize; 3];
    let total = side.pow(dim as u32);
    for flat in 0..total {
        f(flat, &idx[..dim]);
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < side {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Builds the plan for a kernel.
pub fn plan(kernel: &StiffnessKernel) -> Result<ToeplitzPlan> {
    ToeplitzPlan::new(kernel)
}
