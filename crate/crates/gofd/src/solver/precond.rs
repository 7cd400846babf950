//! Preconditioners for the GoFD system: stencil-truncated sparse MIC and the
//! circulant approximation conjugated by the interpolation pseudo-inverse.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, IncompleteCholesky};
use crate::stiffness::StiffnessKernel;
use crate::toeplitz::{Direction, NdFft};
use crate::transfer::TransferMatrix;

use super::GoFDOperator;

/// Drop threshold of every modified incomplete Cholesky factorization.
pub const MIC_DROP_TOL: f64 = 1e-3;

/// Circulant eigenvalue magnitudes below this fraction of the largest are
/// raised to it.
pub const CIRCULANT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerKind {
    None,
    Sparse,
    Circulant,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 3] = [Self::None, Self::Sparse, Self::Circulant];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Sparse => "sparse",
            Self::Circulant => "circulant",
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "sparse" => Ok(Self::Sparse),
            "circulant" => Ok(Self::Circulant),
            other => Err(Error::invalid(
                "precond",
                format!("unknown preconditioner `{other}` (none|sparse|circulant)"),
            )),
        }
    }
}

/// A symmetric positive definite approximation of the inverse operator.
#[derive(Debug)]
pub enum Preconditioner {
    Identity,
    Sparse(SparsePreconditioner),
    Circulant(CirculantPreconditioner),
}

impl Preconditioner {
    pub fn build(op: &GoFDOperator, kind: PreconditionerKind) -> Result<Self> {
        Ok(match kind {
            PreconditionerKind::None => Self::Identity,
            PreconditionerKind::Sparse => Self::Sparse(SparsePreconditioner::new(op)?),
            PreconditionerKind::Circulant => Self::Circulant(CirculantPreconditioner::new(op)?),
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        match self {
            Self::Identity => PreconditionerKind::None,
            Self::Sparse(_) => PreconditionerKind::Sparse,
            Self::Circulant(_) => PreconditionerKind::Circulant,
        }
    }

    /// `z = M r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        match self {
            Self::Identity => {
                z.copy_from_slice(r);
                Ok(())
            }
            Self::Sparse(p) => {
                z.copy_from_slice(r);
                p.factor.solve_in_place(z);
                Ok(())
            }
            Self::Circulant(p) => p.apply(r, z),
        }
    }
}

/// Offsets with Chebyshev norm at most 1: 3, 9 or 27 of them.
pub fn stencil_offsets(dim: usize) -> Vec<[i64; 3]> {
    let count = 3usize.pow(dim as u32);
    (0..count)
        .map(|mut c| {
            let mut o = [0i64; 3];
            for k in (0..dim).rev() {
                o[k] = (c % 3) as i64 - 1;
                c /= 3;
            }
            o
        })
        .collect()
}

/// `I^T A_st I` where `A_st` keeps only the stencil couplings of the grid
/// operator.
pub fn stencil_operator(op: &GoFDOperator) -> CsrMatrix {
    let t = op.transfer();
    let kernel = op.kernel();
    let d = kernel.dim();
    let side = kernel.side();
    let offsets = stencil_offsets(d);
    let values: Vec<f64> = offsets.iter().map(|o| kernel.at_offset(&o[..d])).collect();
    let n = t.n_cols();
    let mut acc = vec![0.0; n];
    let mut hit = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut row_ptr = vec![0usize; n + 1];
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    let mut idx = [0usize; 3];
    for i in 0..n {
        let (nodes, a) = t.column(i);
        for (&k, &ak) in nodes.iter().zip(a) {
            let mut f = k;
            for ax in (0..d).rev() {
                idx[ax] = f % side;
                f /= side;
            }
            'offsets: for (o, &tv) in offsets.iter().zip(&values) {
                let mut l = 0usize;
                for ax in 0..d {
                    let q = idx[ax] as i64 + o[ax];
                    if q < 0 || q >= side as i64 {
                        continue 'offsets;
                    }
                    l = l * side + q as usize;
                }
                let (js, b) = t.row(l);
                for (&j, &bj) in js.iter().zip(b) {
                    if !hit[j] {
                        hit[j] = true;
                        touched.push(j);
                    }
                    acc[j] += ak * tv * bj;
                }
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            col_idx.push(j);
            vals.push(acc[j]);
            acc[j] = 0.0;
            hit[j] = false;
        }
        touched.clear();
        row_ptr[i + 1] = col_idx.len();
    }
    CsrMatrix::from_raw(n, n, row_ptr, col_idx, vals)
}

/// MIC factorization of the stencil-truncated system matrix.
#[derive(Debug)]
pub struct SparsePreconditioner {
    factor: IncompleteCholesky,
}

impl SparsePreconditioner {
    pub fn new(op: &GoFDOperator) -> Result<Self> {
        let a = stencil_operator(op);
        Ok(Self {
            factor: IncompleteCholesky::mic_with_retry(&a, MIC_DROP_TOL)?,
        })
    }

    pub fn factor(&self) -> &IncompleteCholesky {
        &self.factor
    }
}

/// Circulant approximation of the grid operator on the periodic grid of
/// `2 n_fd` nodes per axis, generated by the kernel at offsets
/// `-n_fd..n_fd - 1`.
#[derive(Debug)]
pub struct CirculantInverse {
    dim: usize,
    n_fd: usize,
    eigenvalues: Vec<f64>,
    clamped: usize,
    fft: NdFft,
}

impl CirculantInverse {
    pub fn new(kernel: &StiffnessKernel) -> Result<Self> {
        let dim = kernel.dim();
        let n_fd = kernel.n_fd();
        let period = 2 * n_fd;
        let total = period.pow(dim as u32);
        let mut gen = vec![Complex64::default(); total];
        let mut off = [0i64; 3];
        for (flat, g) in gen.iter_mut().enumerate() {
            let mut f = flat;
            for k in (0..dim).rev() {
                let q = (f % period) as i64;
                f /= period;
                off[k] = if q < n_fd as i64 { q } else { q - period as i64 };
            }
            *g = Complex64::new(kernel.at_offset(&off[..dim]), 0.0);
        }
        let fft = NdFft::new(&vec![period; dim]);
        fft.transform(&mut gen, Direction::Forward);
        let scale = gen.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
        let residue = gen.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
        if residue > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::ComplexResidue { residue, scale });
        }
        let floor = CIRCULANT_FLOOR * scale;
        let mut clamped = 0;
        let eigenvalues = gen
            .into_iter()
            .map(|z| {
                let v = z.re.abs();
                if v < floor {
                    clamped += 1;
                    floor
                } else {
                    v
                }
            })
            .collect();
        Ok(Self {
            dim,
            n_fd,
            eigenvalues,
            clamped,
            fft,
        })
    }

    /// Eigenvalue magnitudes after clamping, row-major over `[0, 2 n_fd)^d`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues raised to the floor.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn period(&self) -> usize {
        2 * self.n_fd
    }

    fn multiply(&self, v: &mut [f64], invert: bool) {
        let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.transform(&mut buf, Direction::Forward);
        for (z, &e) in buf.iter_mut().zip(&self.eigenvalues) {
            if invert {
                *z /= e;
            } else {
                *z *= e;
            }
        }
        self.fft.transform(&mut buf, Direction::Inverse);
        let scale = 1.0 / buf.len() as f64;
        for (x, z) in v.iter_mut().zip(&buf) {
            *x = z.re * scale;
        }
    }

    /// Circulant product on a periodic vector of `(2 n_fd)^d` values.
    pub fn apply_periodic(&self, v: &mut [f64]) {
        self.multiply(v, false);
    }

    /// Circulant solve on a periodic vector of `(2 n_fd)^d` values.
    pub fn solve_periodic(&self, v: &mut [f64]) {
        self.multiply(v, true);
    }

    /// Circulant solve for a vector on the full `(2 n_fd + 1)^d` grid: the
    /// last node of each axis is dropped on input and filled with the
    /// periodic copy of the first on output.
    pub fn solve_grid(&self, v: &[f64], out: &mut [f64]) {
        let side = 2 * self.n_fd + 1;
        let period = self.period();
        let mut periodic = vec![0.0; period.pow(self.dim as u32)];
        let mut idx = [0usize; 3];
        for (p, slot) in periodic.iter_mut().enumerate() {
            *slot = v[self.grid_index(p, period, side, &mut idx)];
        }
        self.solve_periodic(&mut periodic);
        for (k, o) in out.iter_mut().enumerate() {
            let mut f = k;
            let mut p = 0;
            for ax in (0..self.dim).rev() {
                idx[ax] = (f % side) % period;
                f /= side;
            }
            for &i in &idx[..self.dim] {
                p = p * period + i;
            }
            *o = periodic[p];
        }
    }

    fn grid_index(&self, mut p: usize, period: usize, side: usize, idx: &mut [usize; 3]) -> usize {
        for ax in (0..self.dim).rev() {
            idx[ax] = p % period;
            p /= period;
        }
        idx[..self.dim].iter().fold(0, |acc, &i| acc * side + i)
    }
}

/// `G^{-1} I^T C^{-1} I G^{-1}` with `G = I^T I` replaced by its MIC factor
/// and `C` the circulant approximation of the grid operator.
#[derive(Debug)]
pub struct CirculantPreconditioner {
    circulant: CirculantInverse,
    gram: IncompleteCholesky,
    transfer: TransferMatrix,
}

impl CirculantPreconditioner {
    pub fn new(op: &GoFDOperator) -> Result<Self> {
        let transfer = op.transfer().clone();
        Ok(Self {
            circulant: CirculantInverse::new(op.kernel())?,
            gram: IncompleteCholesky::mic_with_retry(&transfer.gram(), MIC_DROP_TOL)?,
            transfer,
        })
    }

    pub fn circulant(&self) -> &CirculantInverse {
        &self.circulant
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let y = self.gram.solve(r);
        let g = self.transfer.apply(&y)?;
        let mut w = vec![0.0; g.len()];
        self.circulant.solve_grid(&g, &mut w);
        self.transfer.apply_transpose_into(&w, z)?;
        self.gram.solve_in_place(z);
        Ok(())
    }
}
