//! Randomized invariants across the public API.

use gofd::toeplitz::dense_materialize;
use gofd::{
    build_transfer, cg_solve, choose_grid, dft, fft_uniform, gauss_legendre, generate_ball_mesh, mesh_quality,
    Direction, FractionalOrder, GoFDOperator, GridCondition, KernelSpec, OverlayGrid, Preconditioner,
    PreconditionerKind, Scheme, SimplicialMesh, ToeplitzPlan,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn order(s: f64) -> FractionalOrder {
    FractionalOrder::new(s).unwrap()
}

/// Small 2D instance: mesh, grid and operator.
fn instance(h: f64, n_fd: usize, s: f64, scheme: Scheme) -> GoFDOperator {
    let mesh = generate_ball_mesh(2, h).unwrap();
    let grid = OverlayGrid::new(2, 1.2, n_fd).unwrap();
    operator(&mesh, grid, s, scheme)
}

/// Instance on the grid of the strict spacing condition, which guarantees
/// full column rank.
fn full_rank_instance(h: f64, s: f64, scheme: Scheme) -> GoFDOperator {
    let mesh = generate_ball_mesh(2, h).unwrap();
    let grid = choose_grid(&mesh_quality(&mesh), 2, 1.2, GridCondition::Strict).unwrap();
    operator(&mesh, grid, s, scheme)
}

fn operator(mesh: &SimplicialMesh, grid: OverlayGrid, s: f64, scheme: Scheme) -> GoFDOperator {
    let n_fd = grid.n_fd();
    let t = build_transfer(mesh, &grid).unwrap();
    let kernel = KernelSpec::new(scheme, 64, 32).build(order(s), 2, n_fd).unwrap();
    GoFDOperator::new(t, kernel, grid).unwrap()
}

/// `I^T T I` built from dense pieces.
fn dense_system(op: &GoFDOperator) -> DMatrix<f64> {
    let t = op.transfer();
    let mut i = DMatrix::zeros(t.n_rows(), t.n_cols());
    for r in 0..t.n_rows() {
        let (cols, w) = t.row(r);
        for (&c, &v) in cols.iter().zip(w) {
            i[(r, c)] = v;
        }
    }
    let a = dense_materialize(op.kernel()).unwrap();
    i.transpose() * a * i
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_round_trip(
        shape in prop::collection::vec(1usize..10, 1..4),
        seed in prop::collection::vec(-1.0f64..1.0, 2 * 729),
    ) {
        let n: usize = shape.iter().product();
        let values: Vec<Complex64> = (0..n).map(|k| Complex64::new(seed[2 * k], seed[2 * k + 1])).collect();
        let there = dft(&values, &shape, Direction::Forward).unwrap();
        let back = dft(&there, &shape, Direction::Inverse).unwrap();
        for (a, b) in back.iter().zip(&values) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1(
        n in 1usize..40,
        coeffs in prop::collection::vec(-1.0f64..1.0, 79),
        a in -2.0f64..0.0,
        len in 0.1f64..2.0,
    ) {
        let b = a + len;
        let degree = 2 * n - 1;
        let c = &coeffs[..=degree];
        let poly = |x: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck);
        let antider = |x: f64| c.iter().enumerate().rev().fold(0.0, |acc, (k, &ck)| acc * x + ck / (k + 1) as f64) * x;
        let exact = antider(b) - antider(a);
        let got = gauss_legendre(n).unwrap().integrate(a, b, poly);
        let scale: f64 = c.iter().enumerate().map(|(k, ck)| ck.abs() * 2f64.powi(k as i32 + 1)).sum();
        prop_assert!((got - exact).abs() <= 1e-13 * scale, "n={n}: {got} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn transfer_adjoint_identity(
        h in 0.15f64..0.45,
        n_fd in 3usize..20,
        r_fd in 1.05f64..1.6,
        seed in any::<u64>(),
    ) {
        let mesh = generate_ball_mesh(2, h).unwrap();
        let grid = OverlayGrid::new(2, r_fd, n_fd).unwrap();
        let t = build_transfer(&mesh, &grid).unwrap();
        let u: Vec<f64> = (0..t.n_cols()).map(|k| ((k as u64 ^ seed) % 97) as f64 / 97.0 - 0.5).collect();
        let g: Vec<f64> = (0..t.n_rows()).map(|k| ((k as u64).wrapping_mul(seed | 1) % 89) as f64 / 89.0 - 0.5).collect();
        let lhs = dot(&t.apply(&u).unwrap(), &g);
        let rhs = dot(&u, &t.apply_transpose(&g).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn partition_of_unity_and_constant_preservation(
        h in 0.12f64..0.4,
        n_fd in 4usize..24,
        r_fd in 1.05f64..1.5,
    ) {
        let mesh = generate_ball_mesh(2, h).unwrap();
        let grid = OverlayGrid::new(2, r_fd, n_fd).unwrap();
        let t = build_transfer(&mesh, &grid).unwrap();
        let g = t.apply(&vec![1.0; t.n_cols()]).unwrap();
        let (mut idx, mut x) = ([0usize; 2], [0.0; 2]);
        // the outermost ring of elements reaches the boundary, where the
        // dropped boundary columns break the partition of unity
        let inner = 1.0 - 2.0 * h;
        for k in 0..t.n_rows() {
            grid.multi_index(k, &mut idx);
            grid.node_position(&idx, &mut x);
            let r = x[0].hypot(x[1]);
            if r < inner {
                prop_assert!((g[k] - 1.0).abs() < 1e-12, "node {k} at r={r}: {}", g[k]);
            }
            if r > 1.0 + 1e-12 {
                prop_assert_eq!(g[k], 0.0);
            }
        }
        let back = t.apply_transpose(&vec![1.0; t.n_rows()]).unwrap();
        // empty columns have no mass to preserve
        for (b, d) in back.iter().zip(t.col_sums()).filter(|(_, d)| **d > 0.0) {
            prop_assert!((b / d - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn operator_adjoint_identity(
        h in 0.2f64..0.45,
        n_fd in 4usize..14,
        s in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let op = instance(h, n_fd, s, Scheme::FftUniform);
        let n = op.dim();
        let u: Vec<f64> = (0..n).map(|k| ((k as u64 + 3).wrapping_mul(seed | 1) % 101) as f64 / 101.0 - 0.5).collect();
        let v: Vec<f64> = (0..n).map(|k| ((k as u64 ^ seed) % 103) as f64 / 103.0 - 0.5).collect();
        let (mut au, mut av) = (vec![0.0; n], vec![0.0; n]);
        op.apply(&u, &mut au).unwrap();
        op.apply(&v, &mut av).unwrap();
        let (a, b) = (dot(&au, &v), dot(&u, &av));
        prop_assert!((a - b).abs() <= 1e-12 * norm(&au) * norm(&v));
    }

    #[test]
    fn toeplitz_apply_matches_dense(
        dim in 1usize..4,
        n_fd in 1usize..5,
        s in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let kernel = fft_uniform(order(s), dim, n_fd, 32).unwrap();
        let plan = ToeplitzPlan::new(&kernel).unwrap();
        let a = dense_materialize(&kernel).unwrap();
        let n = a.nrows();
        let u: Vec<f64> = (0..n).map(|k| ((k as u64 ^ seed) % 37) as f64 / 37.0 - 0.5).collect();
        let mut out = vec![0.0; n];
        plan.apply_slice(&u, &mut out).unwrap();
        let want = &a * DVector::from_column_slice(&u);
        let scale = want.amax().max(1e-300);
        for (x, y) in out.iter().zip(want.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn pcg_matches_dense_solve(
        h in 0.3f64..0.5,
        s in 0.2f64..0.85,
        scheme in prop_oneof![Just(Scheme::FftUniform), Just(Scheme::ModifiedSpectral)],
    ) {
        let op = full_rank_instance(h, s, scheme);
        let n = op.dim();
        let b: Vec<f64> = (0..n).map(|k| 1.0 + 0.25 * (k as f64).sin()).collect();
        let want = dense_system(&op).cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        for kind in [PreconditionerKind::None, PreconditionerKind::Circulant] {
            let p = Preconditioner::build(&op, kind).unwrap();
            let out = cg_solve(|u, v| op.apply(u, v), &b, &p, 1e-10, 5000).unwrap();
            prop_assert!(out.converged);
            let err: f64 = out.solution.iter().zip(want.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-8 * want.norm(), "{kind}: {}", err / want.norm());
            prop_assert!(*out.unpreconditioned_history.last().unwrap() <= 1e-8);
        }
    }
}

#[test]
fn sparse_preconditioned_pcg_matches_dense_solve() {
    let op = full_rank_instance(0.35, 0.75, Scheme::FftUniform);
    let n = op.dim();
    let b = vec![1.0; n];
    let want = dense_system(&op).cholesky().unwrap().solve(&DVector::from_column_slice(&b));
    let p = Preconditioner::build(&op, PreconditionerKind::Sparse).unwrap();
    let out = cg_solve(|u, v| op.apply(u, v), &b, &p, 1e-10, 5000).unwrap();
    assert!(out.converged);
    let err: f64 = out.solution.iter().zip(want.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    assert!(err <= 1e-8 * want.norm());
    assert!(*out.unpreconditioned_history.last().unwrap() <= 1e-8);
}
