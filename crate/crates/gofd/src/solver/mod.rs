//! The GoFD linear system `I^T A_FD I u = h^{2s} D f`, its solution by PCG
//! and evaluation against the closed-form solution on the unit ball.

mod pcg;
mod precond;

use std::io::Write;
use std::time::Instant;

pub use pcg::{cg_solve, CgOutcome};
pub use precond::{
    stencil_offsets, stencil_operator, CirculantInverse, CirculantPreconditioner, Preconditioner,
    PreconditionerKind, SparsePreconditioner, CIRCULANT_FLOOR, MIC_DROP_TOL,
};

use crate::error::{Error, Result};
use crate::grid::{FractionalOrder, OverlayGrid};
use crate::mesh::{lumped_l2_error, mesh_quality, SimplicialMesh};
use crate::special::gamma;
use crate::stiffness::{KernelSpec, StiffnessKernel};
use crate::toeplitz::ToeplitzPlan;
use crate::transfer::{build_transfer, choose_grid_capped, column_rank_check, default_nfd_cap, GridCondition, TransferMatrix};

/// `I^T A_FD I` acting on interior-vertex vectors.
#[derive(Debug)]
pub struct GoFDOperator {
    transfer: TransferMatrix,
    kernel: StiffnessKernel,
    plan: ToeplitzPlan,
    grid: OverlayGrid,
}

impl GoFDOperator {
    pub fn new(transfer: TransferMatrix, kernel: StiffnessKernel, grid: OverlayGrid) -> Result<Self> {
        if kernel.dim() != grid.dim() || kernel.n_fd() != grid.n_fd() {
            return Err(Error::invalid(
                "kernel",
                format!(
                    "kernel is {}D with n_fd = {}, grid is {}D with n_fd = {}",
                    kernel.dim(),
                    kernel.n_fd(),
                    grid.dim(),
                    grid.n_fd()
                ),
            ));
        }
        if transfer.n_rows() != grid.node_count() {
            return Err(Error::ShapeMismatch {
                expected: grid.node_count(),
                got: transfer.n_rows(),
            });
        }
        let plan = ToeplitzPlan::new(&kernel)?;
        Ok(Self {
            transfer,
            kernel,
            plan,
            grid,
        })
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.transfer.n_cols()
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    pub fn kernel(&self) -> &StiffnessKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &OverlayGrid {
        &self.grid
    }

    pub fn order(&self) -> FractionalOrder {
        self.kernel.order()
    }

    /// `v = I^T A_FD I u`.
    pub fn apply(&self, u: &[f64], v: &mut [f64]) -> Result<()> {
        let g = self.transfer.apply(u)?;
        let mut ag = vec![0.0; g.len()];
        self.plan.apply_slice(&g, &mut ag)?;
        self.transfer.apply_transpose_into(&ag, v)
    }
}

pub fn operator_apply(op: &GoFDOperator, u: &[f64]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; op.dim()];
    op.apply(u, &mut v)?;
    Ok(v)
}

/// `b_j = h_fd^{2s} d_j f(x_j)` over interior vertices.
pub fn assemble_rhs<F>(
    mesh: &SimplicialMesh,
    transfer: &TransferMatrix,
    grid: &OverlayGrid,
    s: FractionalOrder,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if transfer.n_cols() != mesh.n_interior() {
        return Err(Error::ShapeMismatch {
            expected: mesh.n_interior(),
            got: transfer.n_cols(),
        });
    }
    let scale = grid.h_fd().powf(2.0 * s.value());
    Ok(transfer
        .col_sums()
        .iter()
        .enumerate()
        .map(|(j, d)| scale * d * f(mesh.vertex(j)))
        .collect())
}

/// Solution of `(-Δ)^s u = 1` in the unit ball with `u = 0` outside:
/// `Γ(d/2) / (2^{2s} Γ(1+s) Γ(d/2+s)) (1 - |x|^2)_+^s`.
pub fn exact_solution(dim: usize, s: FractionalOrder, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        return 0.0;
    }
    let s = s.value();
    let half = 0.5 * dim as f64;
    gamma(half) / (2f64.powf(2.0 * s) * gamma(1.0 + s) * gamma(half + s)) * (1.0 - r2).powf(s)
}

/// Parameters of [`solve_bvp`] besides the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpConfig {
    pub s: FractionalOrder,
    pub kernel: KernelSpec,
    pub r_fd: f64,
    pub grid_condition: GridCondition,
    /// Overrides the grid chosen from the mesh quality.
    pub n_fd: Option<usize>,
    /// Largest automatically chosen `n_fd`; the per-dimension default when
    /// `None`.
    pub n_fd_cap: Option<usize>,
    pub precond: PreconditionerKind,
    pub tol: f64,
    pub max_iter: usize,
    /// Constant right-hand side; the exact solution scales with it.
    pub rhs: f64,
}

impl BvpConfig {
    pub fn new(s: FractionalOrder, kernel: KernelSpec) -> Self {
        Self {
            s,
            kernel,
            r_fd: 1.2,
            grid_condition: GridCondition::Practical,
            n_fd: None,
            n_fd_cap: None,
            precond: PreconditionerKind::None,
            tol: 1e-10,
            max_iter: 5000,
            rhs: 1.0,
        }
    }
}

/// Summary of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub dim: usize,
    pub s: f64,
    pub scheme: String,
    pub precond: PreconditionerKind,
    pub n_vertices: usize,
    pub n_interior: usize,
    pub n_elements: usize,
    pub h_bar: f64,
    pub a_h: f64,
    pub n_fd: usize,
    pub full_rank: bool,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub unpreconditioned_history: Vec<f64>,
    pub l2_error: f64,
    /// Seconds per phase, in execution order.
    pub wall_times: Vec<(&'static str, f64)>,
}

impl SolveReport {
    /// Flat `key=value` lines. Timings are omitted when `timings` is false,
    /// which makes the text reproducible run to run.
    pub fn write_summary<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        writeln!(out, "dim={}", self.dim)?;
        writeln!(out, "s={}", self.s)?;
        writeln!(out, "scheme={}", self.scheme)?;
        writeln!(out, "precond={}", self.precond)?;
        writeln!(out, "n_vertices={}", self.n_vertices)?;
        writeln!(out, "n_interior={}", self.n_interior)?;
        writeln!(out, "n_elements={}", self.n_elements)?;
        writeln!(out, "h_bar={:e}", self.h_bar)?;
        writeln!(out, "a_h={:e}", self.a_h)?;
        writeln!(out, "n_fd={}", self.n_fd)?;
        writeln!(out, "full_rank={}", self.full_rank)?;
        writeln!(out, "iterations={}", self.iterations)?;
        writeln!(out, "converged={}", self.converged)?;
        let last = self.residual_history.last().copied().unwrap_or(0.0);
        writeln!(out, "final_residual={last:e}")?;
        writeln!(out, "l2_error={:e}", self.l2_error)?;
        if timings {
            for (phase, t) in &self.wall_times {
                writeln!(out, "time_{phase}={t:.6}")?;
            }
        }
        Ok(())
    }

    pub fn summary(&self, timings: bool) -> String {
        let mut buf = Vec::new();
        self.write_summary(&mut buf, timings).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("summary is ASCII")
    }

    /// `iteration,residual,unpreconditioned` rows.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,residual,unpreconditioned")?;
        for (i, (r, u)) in self.residual_history.iter().zip(&self.unpreconditioned_history).enumerate() {
            writeln!(out, "{},{r:e},{u:e}", i + 1)?;
        }
        Ok(())
    }
}

/// Nodal solution on every mesh vertex (zero on the boundary) and its report.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub nodal: Vec<f64>,
    pub report: SolveReport,
}

struct Timer {
    start: Instant,
    times: Vec<(&'static str, f64)>,
}

impl Timer {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            times: Vec::new(),
        }
    }

    fn lap(&mut self, phase: &'static str) {
        let now = Instant::now();
        self.times.push((phase, (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

/// Solves `(-Δ)^s u = rhs` on the domain of `mesh` with `u = 0` outside:
/// grid selection, kernel, transfer, rank check, preconditioner, PCG and the
/// error against [`exact_solution`] (meaningful for the unit ball).
pub fn solve_bvp(mesh: &SimplicialMesh, config: &BvpConfig) -> Result<BvpSolution> {
    let dim = mesh.dim();
    let mut timer = Timer::new();

    let quality = mesh_quality(mesh);
    let grid = match config.n_fd {
        Some(n) => OverlayGrid::new(dim, config.r_fd, n),
        None => {
            let cap = config.n_fd_cap.unwrap_or_else(|| default_nfd_cap(dim));
            choose_grid_capped(&quality, dim, config.r_fd, config.grid_condition, cap)
        }
    }
    .map_err(|e| e.in_phase("grid"))?;
    timer.lap("grid");

    let kernel = config
        .kernel
        .build(config.s, dim, grid.n_fd())
        .map_err(|e| e.in_phase("kernel"))?;
    timer.lap("kernel");

    let transfer = build_transfer(mesh, &grid).map_err(|e| e.in_phase("transfer"))?;
    timer.lap("transfer");

    transfer.check_columns().map_err(|e| e.in_phase("rank"))?;
    let full_rank = column_rank_check(&transfer);
    timer.lap("rank");

    let op = GoFDOperator::new(transfer, kernel, grid).map_err(|e| e.in_phase("operator"))?;
    let precond = Preconditioner::build(&op, config.precond).map_err(|e| e.in_phase("precond"))?;
    let rhs = config.rhs;
    let b = assemble_rhs(mesh, op.transfer(), &grid, config.s, |_| rhs).map_err(|e| e.in_phase("rhs"))?;
    timer.lap("precond");

    let out = cg_solve(|u, v| op.apply(u, v), &b, &precond, config.tol, config.max_iter)
        .map_err(|e| e.in_phase("solve"))?;
    timer.lap("solve");

    let mut nodal = vec![0.0; mesh.n_vertices()];
    nodal[..mesh.n_interior()].copy_from_slice(&out.solution);
    let l2_error = lumped_l2_error(mesh, &nodal, |x| rhs * exact_solution(dim, config.s, x))
        .map_err(|e| e.in_phase("error"))?;
    timer.lap("error");

    let report = SolveReport {
        dim,
        s: config.s.value(),
        scheme: config.kernel.scheme.name().to_string(),
        precond: config.precond,
        n_vertices: mesh.n_vertices(),
        n_interior: mesh.n_interior(),
        n_elements: quality.n_elements,
        h_bar: quality.h_bar,
        a_h: quality.a_h,
        n_fd: grid.n_fd(),
        full_rank,
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.residual_history,
        unpreconditioned_history: out.unpreconditioned_history,
        l2_error,
        wall_times: timer.times,
    };
    Ok(BvpSolution { nodal, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_ball_mesh;
    use crate::stiffness::{fft_uniform, Scheme};
    use crate::toeplitz::dense_materialize;
    use nalgebra::{DMatrix, DVector};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    fn small_op(s: f64) -> (SimplicialMesh, GoFDOperator) {
        let mesh = generate_ball_mesh(2, 0.34).unwrap();
        let grid = OverlayGrid::new(2, 1.2, 6).unwrap();
        let t = build_transfer(&mesh, &grid).unwrap();
        let op = GoFDOperator::new(t, fft_uniform(order(s), 2, 6, 64).unwrap(), grid).unwrap();
        (mesh, op)
    }

    fn dense_system(op: &GoFDOperator) -> DMatrix<f64> {
        let t = op.transfer();
        let i = DMatrix::from_fn(t.n_rows(), t.n_cols(), |k, j| t.as_csr().get(k, j));
        i.transpose() * dense_materialize(op.kernel()).unwrap() * i
    }

    #[test]
    fn exact_solution_values() {
        assert!((exact_solution(2, order(0.5), &[0.0, 0.0]) - 2.0 / PI).abs() < 1e-14);
        assert!((exact_solution(3, order(0.5), &[0.0; 3]) - 0.5).abs() < 1e-14);
        assert_eq!(exact_solution(2, order(0.3), &[1.0, 0.0]), 0.0);
        assert_eq!(exact_solution(2, order(0.3), &[2.0, 1.0]), 0.0);
        // 1D, s = 1/2: (1 - x^2)^{1/2}
        assert!((exact_solution(1, order(0.5), &[0.6]) - 0.8).abs() < 1e-14);
    }

    #[test]
    fn operator_matches_dense_oracle_and_is_symmetric() {
        let (mesh, op) = small_op(0.5);
        assert!(mesh.n_interior() <= 50);
        let a = dense_system(&op);
        let mut rng = StdRng::seed_from_u64(3);
        let n = op.dim();
        for _ in 0..5 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let au = operator_apply(&op, &u).unwrap();
            let want = &a * DVector::from_column_slice(&u);
            let scale = want.amax();
            for i in 0..n {
                assert!((au[i] - want[i]).abs() <= 1e-11 * scale);
            }
            let aw = operator_apply(&op, &w).unwrap();
            let l: f64 = au.iter().zip(&w).map(|(x, y)| x * y).sum();
            let r: f64 = aw.iter().zip(&u).map(|(x, y)| x * y).sum();
            assert!((l - r).abs() <= 1e-11 * l.abs().max(r.abs()));
            let uau: f64 = au.iter().zip(&u).map(|(x, y)| x * y).sum();
            assert!(uau > 0.0);
        }
        assert!(operator_apply(&op, &vec![0.0; n]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pcg_agrees_with_dense_solve() {
        let (mesh, op) = small_op(0.75);
        let a = dense_system(&op);
        let b = assemble_rhs(&mesh, op.transfer(), op.grid(), op.order(), |x| 1.0 + x[0]).unwrap();
        let want = a.cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for kind in PreconditionerKind::ALL {
            let p = Preconditioner::build(&op, kind).unwrap();
            let out = cg_solve(|u, v| op.apply(u, v), &b, &p, 1e-10, 1000).unwrap();
            assert!(out.converged, "{kind}");
            let err = out.solution.iter().zip(want.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * want.norm(), "{kind}: {err}");
            assert!(*out.unpreconditioned_history.last().unwrap() <= 1e-8);
        }
    }

    #[test]
    fn rhs_scaling() {
        let (mesh, op) = small_op(0.5);
        let b = assemble_rhs(&mesh, op.transfer(), op.grid(), order(0.5), |_| 1.0).unwrap();
        let h = op.grid().h_fd();
        for (bj, dj) in b.iter().zip(op.transfer().col_sums()) {
            assert!((bj - h * dj).abs() < 1e-15);
        }
        let zero = assemble_rhs(&mesh, op.transfer(), op.grid(), order(0.5), |_| 0.0).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pipeline_is_deterministic_and_handles_zero_rhs() {
        let mesh = generate_ball_mesh(2, 0.2).unwrap();
        let mut cfg = BvpConfig::new(order(0.5), KernelSpec::new(Scheme::FftUniform, 256, 64));
        cfg.precond = PreconditionerKind::Circulant;
        let a = solve_bvp(&mesh, &cfg).unwrap();
        let b = solve_bvp(&mesh, &cfg).unwrap();
        assert!(a.report.converged);
        assert!(a.report.l2_error.is_finite() && a.report.l2_error < 0.1);
        assert_eq!(a.report.summary(false), b.report.summary(false));
        assert_eq!(a.nodal, b.nodal);
        let phases: Vec<_> = a.report.wall_times.iter().map(|p| p.0).collect();
        assert_eq!(phases, ["grid", "kernel", "transfer", "rank", "precond", "solve", "error"]);

        cfg.rhs = 0.0;
        let z = solve_bvp(&mesh, &cfg).unwrap();
        assert_eq!(z.report.iterations, 0);
        assert!(z.nodal.iter().all(|&x| x == 0.0));
        assert_eq!(z.report.l2_error, 0.0);
    }

    #[test]
    fn phase_labels_on_failure() {
        let mesh = generate_ball_mesh(2, 0.3).unwrap();
        let mut cfg = BvpConfig::new(order(0.5), KernelSpec::new(Scheme::FftUniform, 8, 64));
        cfg.n_fd = Some(10);
        match solve_bvp(&mesh, &cfg) {
            Err(Error::Phase { phase, .. }) => assert_eq!(phase, "kernel"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.kernel.m = 64;
        cfg.n_fd = Some(1);
        match solve_bvp(&mesh, &cfg) {
            Err(Error::Phase { phase, source }) => {
                assert_eq!(phase, "rank");
                assert!(matches!(*source, Error::EmptyColumns { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn report_serialization() {
        let mesh = generate_ball_mesh(2, 0.3).unwrap();
        let cfg = BvpConfig::new(order(0.5), KernelSpec::new(Scheme::FftUniform, 128, 64));
        let r = solve_bvp(&mesh, &cfg).unwrap().report;
        let text = r.summary(true);
        assert!(text.lines().all(|l| l.contains('=')));
        assert!(text.contains("converged=true"));
        assert!(text.contains("time_solve="));
        let mut csv = Vec::new();
        r.write_history_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), r.iterations + 1);
    }
}
