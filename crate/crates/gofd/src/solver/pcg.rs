//! Preconditioned conjugate gradients.

use crate::error::Result;

use super::precond::Preconditioner;

/// Outcome of [`cg_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `|z_k| / |z_0|` with `z = M r`, one entry per iteration.
    pub residual_history: Vec<f64>,
    /// `|r_k| / |b|`, for comparison across preconditioners.
    pub unpreconditioned_history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// PCG from the zero initial guess, stopped when the preconditioned residual
/// has dropped by `tol` relative to its initial value.
pub fn cg_solve<A>(apply: A, b: &[f64], precond: &Preconditioner, tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            residual_history: Vec::new(),
            unpreconditioned_history: Vec::new(),
            converged: true,
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z)?;
    let z0 = dot(&z, &z).sqrt();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut history = Vec::new();
    let mut plain = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        apply(&p, &mut q)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !(rz > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        precond.apply(&r, &mut z)?;
        let rel = dot(&z, &z).sqrt() / z0;
        history.push(rel);
        plain.push(dot(&r, &r).sqrt() / b_norm);
        if rel <= tol {
            converged = true;
            break;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome {
        solution: x,
        iterations: history.len(),
        residual_history: history,
        unpreconditioned_history: plain,
        converged,
    })
}
