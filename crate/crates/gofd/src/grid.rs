//! Overlay-grid geometry, the fractional order and the discrete symbol.

use std::fmt;

use crate::error::{Error, Result};

/// Fractional order `s`, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidOrder(s))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Uniform grid on the cube `(-r_fd, r_fd)^dim` with `2 n_fd + 1` nodes per
/// axis. Node multi-indices run over `0..=2 n_fd` per axis and are stored
/// row-major (last axis fastest); index `i` sits at coordinate `(i - n_fd) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayGrid {
    dim: usize,
    r_fd: f64,
    n_fd: usize,
}

impl OverlayGrid {
    pub fn new(dim: usize, r_fd: f64, n_fd: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(r_fd > 0.0) || !r_fd.is_finite() {
            return Err(Error::invalid("r_fd", format!("must be positive, got {r_fd}")));
        }
        if n_fd == 0 {
            return Err(Error::invalid("n_fd", "must be positive"));
        }
        Ok(Self { dim, r_fd, n_fd })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_fd(&self) -> f64 {
        self.r_fd
    }

    pub fn n_fd(&self) -> usize {
        self.n_fd
    }

    pub fn h_fd(&self) -> f64 {
        self.r_fd / self.n_fd as f64
    }

    pub fn nodes_per_axis(&self) -> usize {
        2 * self.n_fd + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Flat index of a node multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.nodes_per_axis();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    /// Multi-index of a flat node index, written into `out[..dim]`.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.nodes_per_axis();
        for k in (0..self.dim).rev() {
            out[k] = flat % n;
            flat /= n;
        }
    }

    /// Coordinate of the node at signed axis index `k` in `-n_fd..=n_fd`.
    pub fn coordinate(&self, k: i64) -> f64 {
        k as f64 * self.h_fd()
    }

    /// Coordinates of a node given its multi-index.
    pub fn node_position(&self, idx: &[usize], out: &mut [f64]) {
        let h = self.h_fd();
        for (o, &i) in out.iter_mut().zip(idx) {
            *o = (i as f64 - self.n_fd as f64) * h;
        }
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid("dim", format!("must be 1, 2 or 3, got {dim}")))
    }
}

/// The discrete fractional symbol `(4 sum_j sin^2(xi_j / 2))^s`.
pub fn symbol_psi(xi: &[f64], s: FractionalOrder) -> f64 {
    let sum: f64 = xi
        .iter()
        .map(|&x| {
            let h = (0.5 * x).sin();
            4.0 * h * h
        })
        .sum();
    if sum == 0.0 {
        0.0
    } else {
        sum.powf(s.value())
    }
}
