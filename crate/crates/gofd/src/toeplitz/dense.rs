//! Dense materialization of the grid operator, for small test instances.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::stiffness::StiffnessKernel;

/// Largest number of grid nodes [`dense_materialize`] accepts.
pub const DENSE_LIMIT: usize = 20_000;

/// `A[(j), (m)] = T_{j-m}` over all pairs of grid nodes.
pub fn dense_materialize(kernel: &StiffnessKernel) -> Result<DMatrix<f64>> {
    let d = kernel.dim();
    let side = kernel.side();
    let n = side.pow(d as u32);
    if n > DENSE_LIMIT {
        return Err(Error::OracleTooLarge {
            size: n,
            limit: DENSE_LIMIT,
        });
    }
    let idx: Vec<[i64; 3]> = (0..n)
        .map(|mut f| {
            let mut out = [0i64; 3];
            for k in (0..d).rev() {
                out[k] = (f % side) as i64;
                f /= side;
            }
            out
        })
        .collect();
    let mut off = [0i64; 3];
    Ok(DMatrix::from_fn(n, n, |j, m| {
        for k in 0..d {
            off[k] = idx[j][k] - idx[m][k];
        }
        kernel.at_offset(&off[..d])
    }))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}
