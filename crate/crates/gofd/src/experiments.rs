//! Experiment drivers behind the command-line tool: kernel accuracy, decay,
//! the kernel-error impact bound, convergence studies and preconditioner
//! comparisons.

use crate::error::{Error, Result};
use crate::grid::FractionalOrder;
use crate::mesh::SimplicialMesh;
use crate::solver::{solve_bvp, BvpConfig, PreconditionerKind, SolveReport};
use crate::stiffness::{analytic_1d, KernelSpec};

/// Max-norm distance of a 1D kernel from the closed form.
pub fn kernel_error_1d(spec: &KernelSpec, s: FractionalOrder, n_fd: usize) -> Result<f64> {
    let approx = spec.build(s, 1, n_fd)?;
    approx.max_abs_diff(&analytic_1d(s, n_fd)?)
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("fit", "need at least two paired points"));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("fit", "log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit", "abscissae are all equal"));
    }
    Ok(sxy / sxx)
}

/// One `n_fd` sample of the impact bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactRow {
    pub n_fd: usize,
    pub bound: f64,
    pub first_order: f64,
    pub second_order: f64,
}

/// Impact bound against model discretization errors, with the points where
/// the bound first reaches each model error.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactStudy {
    pub rows: Vec<ImpactRow>,
    pub first_crossing: Option<(f64, f64)>,
    pub second_crossing: Option<(f64, f64)>,
}

/// `(2n + 1)^d n^{2s} 10^{-delta} / r_fd^{2s}`: the effect on the solution
/// of a kernel known to accuracy `10^{-delta}`.
pub fn impact_bound(dim: usize, s: FractionalOrder, delta: u32, r_fd: f64, n_fd: usize) -> f64 {
    let n = n_fd as f64;
    let two_s = 2.0 * s.value();
    (2.0 * n + 1.0).powi(dim as i32) * n.powf(two_s) * 10f64.powi(-(delta as i32)) / r_fd.powf(two_s)
}

/// Tabulates the bound for `n_fd = 1..=n_max` against `1/n` and `1/n^2`.
/// Crossings are located on the continuous extension in `n` by bisection.
pub fn impact_study(dim: usize, s: FractionalOrder, delta: u32, r_fd: f64, n_max: usize) -> Result<ImpactStudy> {
    if delta < 1 {
        return Err(Error::invalid("delta", "must be at least 1"));
    }
    if n_max < 2 {
        return Err(Error::invalid("n_max", "must be at least 2"));
    }
    let rows = (1..=n_max)
        .map(|n| {
            let x = n as f64;
            ImpactRow {
                n_fd: n,
                bound: impact_bound(dim, s, delta, r_fd, n),
                first_order: 1.0 / x,
                second_order: 1.0 / (x * x),
            }
        })
        .collect();
    let bound = |x: f64| {
        let two_s = 2.0 * s.value();
        (2.0 * x + 1.0).powi(dim as i32) * x.powf(two_s) * 10f64.powi(-(delta as i32)) / r_fd.powf(two_s)
    };
    let crossing = |order: i32| -> Option<(f64, f64)> {
        let gap = |x: f64| bound(x) - x.powi(-order);
        let (mut lo, mut hi) = (1.0, n_max as f64);
        if gap(lo) >= 0.0 || gap(hi) < 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some((hi, hi.powi(-order)))
    };
    Ok(ImpactStudy {
        rows,
        first_crossing: crossing(1),
        second_crossing: crossing(2),
    })
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub label: String,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted order of the error in `h_bar`.
    pub order: f64,
}

/// Solves on each mesh in turn and fits the error order in `h_bar`.
/// Failures abort the study and name the level.
pub fn convergence_study<I>(levels: I, config: &BvpConfig) -> Result<ConvergenceStudy>
where
    I: IntoIterator<Item = (String, Result<SimplicialMesh>)>,
{
    let mut rows = Vec::new();
    for (i, (label, mesh)) in levels.into_iter().enumerate() {
        let report = solve_level(i, &label, mesh, config)?;
        rows.push(ConvergenceRow { label, report });
    }
    finish_study(rows)
}

/// As [`convergence_study`], with one thread per level.
pub fn convergence_study_parallel(
    levels: Vec<(String, Result<SimplicialMesh>)>,
    config: &BvpConfig,
) -> Result<ConvergenceStudy> {
    let results: Vec<(String, Result<SolveReport>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .into_iter()
            .enumerate()
            .map(|(i, (label, mesh))| {
                scope.spawn(move || {
                    let report = solve_level(i, &label, mesh, config);
                    (label, report)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("level thread panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for (label, report) in results {
        rows.push(ConvergenceRow { label, report: report? });
    }
    finish_study(rows)
}

fn solve_level(i: usize, label: &str, mesh: Result<SimplicialMesh>, config: &BvpConfig) -> Result<SolveReport> {
    mesh.and_then(|m| solve_bvp(&m, config))
        .map(|s| s.report)
        .map_err(|e| Error::invalid("level", format!("level {i} ({label}) failed: {e}")))
}

fn finish_study(rows: Vec<ConvergenceRow>) -> Result<ConvergenceStudy> {
    if rows.len() < 3 {
        return Err(Error::invalid("levels", format!("need at least 3 levels, got {}", rows.len())));
    }
    let h: Vec<f64> = rows.iter().map(|r| r.report.h_bar).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.report.l2_error).collect();
    Ok(ConvergenceStudy {
        order: fit_log_slope(&h, &e)?,
        rows,
    })
}

/// True when the smallest entry sits strictly inside the sequence.
pub fn has_interior_minimum(values: &[f64]) -> bool {
    let Some((k, _)) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
    else {
        return false;
    };
    k > 0 && k + 1 < values.len()
}

/// Result of one preconditioner variant; failures are kept so that the
/// remaining variants still run.
#[derive(Debug)]
pub struct PrecondRun {
    pub kind: PreconditionerKind,
    pub outcome: Result<SolveReport>,
}

/// Solves the same system under each preconditioner.
pub fn precond_comparison(mesh: &SimplicialMesh, config: &BvpConfig, kinds: &[PreconditionerKind]) -> Vec<PrecondRun> {
    kinds
        .iter()
        .map(|&kind| {
            let cfg = BvpConfig {
                precond: kind,
                ..config.clone()
            };
            PrecondRun {
                kind,
                outcome: solve_bvp(mesh, &cfg).map(|s| s.report),
            }
        })
        .collect()
}
