//! Linear interpolation from mesh interior vertices to overlay-grid nodes.

use std::io::Write;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::grid::OverlayGrid;
use crate::mesh::{MeshQuality, SimplicialMesh};
use crate::sparse::{cholesky_is_definite, CsrMatrix};

/// Barycentric containment tolerance.
const CONTAINMENT_TOL: f64 = 1e-12;

/// Largest column count for which [`column_rank_check`] factorizes the Gram
/// matrix instead of using the structural test.
pub const EXACT_RANK_LIMIT: usize = 5000;

/// Relative pivot floor of the exact rank test.
const RANK_PIVOT_TOL: f64 = 1e-10;

/// Which mesh-to-grid spacing condition [`choose_grid`] enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCondition {
    /// `h_fd <= a_h`.
    Practical,
    /// `h_fd <= a_h / ((d + 1) sqrt(d))`, which guarantees full column rank.
    Strict,
}

/// Default cap on `n_fd` for [`choose_grid`].
pub fn default_nfd_cap(dim: usize) -> usize {
    if dim >= 3 {
        256
    } else {
        4096
    }
}

/// Smallest overlay grid on `(-r_fd, r_fd)^d` meeting the spacing condition,
/// with the default cap.
pub fn choose_grid(quality: &MeshQuality, dim: usize, r_fd: f64, mode: GridCondition) -> Result<OverlayGrid> {
    choose_grid_capped(quality, dim, r_fd, mode, default_nfd_cap(dim))
}

pub fn choose_grid_capped(
    quality: &MeshQuality,
    dim: usize,
    r_fd: f64,
    mode: GridCondition,
    cap: usize,
) -> Result<OverlayGrid> {
    if !(quality.a_h > 0.0) {
        return Err(Error::invalid("a_h", format!("must be positive, got {}", quality.a_h)));
    }
    let bound = match mode {
        GridCondition::Practical => quality.a_h,
        GridCondition::Strict => quality.a_h / ((dim + 1) as f64 * (dim as f64).sqrt()),
    };
    let n = smallest_n(r_fd, bound);
    if n > cap {
        return Err(Error::MemoryBudget(format!(
            "overlay grid needs n_fd = {n}, above the cap {cap}"
        )));
    }
    OverlayGrid::new(dim, r_fd, n)
}

/// Smallest `n >= 1` with `r / n <= bound`, robust to rounding in `r / bound`.
fn smallest_n(r: f64, bound: f64) -> usize {
    let q = r / bound;
    if !q.is_finite() || q > 1e15 {
        return usize::MAX;
    }
    let mut n = (q.ceil() as usize).max(1);
    while n > 1 && r / (n - 1) as f64 <= bound {
        n -= 1;
    }
    while r / n as f64 > bound {
        n += 1;
    }
    n
}

/// Sparse `(grid nodes) x (interior vertices)` interpolation matrix with its
/// column sums `d_j`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    rows: CsrMatrix,
    cols: CsrMatrix,
    col_sums: Vec<f64>,
}

impl TransferMatrix {
    /// Builds from `(grid node, interior vertex, weight)` entries.
    pub fn from_entries(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(Self::from_csr(CsrMatrix::from_triplets(n_rows, n_cols, entries)?))
    }

    fn from_csr(rows: CsrMatrix) -> Self {
        let cols = rows.transpose();
        let col_sums = (0..cols.n_rows()).map(|j| cols.row(j).1.iter().sum()).collect();
        Self { rows, cols, col_sums }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.n_cols()
    }

    pub fn nnz(&self) -> usize {
        self.rows.nnz()
    }

    /// The diagonal `D_h`.
    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// Interior-vertex indices and weights of grid node `k`.
    pub fn row(&self, k: usize) -> (&[usize], &[f64]) {
        self.rows.row(k)
    }

    /// Grid-node indices and weights of interior vertex `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        self.cols.row(j)
    }

    pub fn as_csr(&self) -> &CsrMatrix {
        &self.rows
    }

    /// Mesh vector to grid vector.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_rows()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.n_cols(), u.len())?;
        check_len(self.n_rows(), out.len())?;
        self.rows.mul_vec(u, out);
        Ok(())
    }

    /// Grid vector to mesh vector by the transpose.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_cols()];
        self.apply_transpose_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.n_rows(), v.len())?;
        check_len(self.n_cols(), out.len())?;
        self.cols.mul_vec(v, out);
        Ok(())
    }

    /// Interior vertices whose column is empty.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.col_sums[j] == 0.0).collect()
    }

    pub fn check_columns(&self) -> Result<()> {
        let columns = self.empty_columns();
        if columns.is_empty() {
            Ok(())
        } else {
            Err(Error::EmptyColumns { columns })
        }
    }

    /// The Gram matrix `I^T I` over interior vertices.
    pub fn gram(&self) -> CsrMatrix {
        let n = self.n_cols();
        let mut acc = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (nodes, a) = self.cols.row(i);
            for (&k, &ak) in nodes.iter().zip(a) {
                let (js, b) = self.rows.row(k);
                for (&j, &bj) in js.iter().zip(b) {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += ak * bj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
            }
            touched.clear();
            row_ptr[i + 1] = col_idx.len();
        }
        CsrMatrix::from_raw(n, n, row_ptr, col_idx, values)
    }

    /// Writes `row col value` lines, 0-based.
    pub fn write_coordinates<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for k in 0..self.n_rows() {
            let (js, w) = self.rows.row(k);
            for (&j, &v) in js.iter().zip(w) {
                writeln!(out, "{k} {j} {v:?}")?;
            }
        }
        Ok(())
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}

/// Affine map from a point to the barycentric coordinates of one simplex.
struct Barycentric {
    dim: usize,
    origin: [f64; 3],
    inverse: Matrix3<f64>,
}

impl Barycentric {
    fn new(mesh: &SimplicialMesh, simplex: &[usize]) -> Option<Self> {
        let d = mesh.dim();
        let x0 = mesh.vertex(simplex[0]);
        let mut e = Matrix3::identity();
        for c in 0..d {
            let xc = mesh.vertex(simplex[c + 1]);
            for r in 0..d {
                e[(r, c)] = xc[r] - x0[r];
            }
        }
        let mut origin = [0.0; 3];
        origin[..d].copy_from_slice(x0);
        Some(Self {
            dim: d,
            origin,
            inverse: e.try_inverse()?,
        })
    }

    /// Writes `lambda[0..=d]`.
    fn coords(&self, x: &[f64], lambda: &mut [f64; 4]) {
        let d = self.dim;
        let mut r = nalgebra::Vector3::zeros();
        for i in 0..d {
            r[i] = x[i] - self.origin[i];
        }
        let t = self.inverse * r;
        let mut sum = 0.0;
        for i in 0..d {
            lambda[i + 1] = t[i];
            sum += t[i];
        }
        lambda[0] = 1.0 - sum;
    }
}

/// Interpolation matrix from the mesh to the grid. A grid node lying in
/// several simplices (on a shared facet) takes its weights from the one with
/// the lowest index; nodes outside every simplex give empty rows. Columns of
/// boundary vertices are dropped because the solution vanishes there.
pub fn build_transfer(mesh: &SimplicialMesh, grid: &OverlayGrid) -> Result<TransferMatrix> {
    let d = mesh.dim();
    if grid.dim() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            got: grid.dim(),
        });
    }
    let r = grid.r_fd();
    for v in 0..mesh.n_vertices() {
        if mesh.vertex(v).iter().any(|c| c.abs() > r) {
            return Err(Error::invalid(
                "grid",
                format!("mesh vertex {v} lies outside the overlay cube of half-width {r}"),
            ));
        }
    }
    let n_fd = grid.n_fd() as f64;
    let side = grid.nodes_per_axis();
    let h = grid.h_fd();
    let n_int = mesh.n_interior();
    let mut assigned = vec![false; grid.node_count()];
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut lambda = [0.0; 4];
    let mut idx = [0usize; 3];
    let mut x = [0.0; 3];
    for k in 0..mesh.n_simplices() {
        let s = mesh.simplex(k);
        let Some(bary) = Barycentric::new(mesh, s) else {
            continue;
        };
        // index box of grid nodes inside the bounding box
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..d {
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in s {
                mn = mn.min(mesh.vertex(v)[a]);
                mx = mx.max(mesh.vertex(v)[a]);
            }
            let l = ((mn / h + n_fd) - 1e-9).ceil().max(0.0) as usize;
            let u = ((mx / h + n_fd) + 1e-9).floor().min((side - 1) as f64);
            if u < l as f64 {
                lo[a] = 1;
                hi[a] = 0;
            } else {
                lo[a] = l;
                hi[a] = u as usize;
            }
        }
        if (0..d).any(|a| hi[a] < lo[a]) {
            continue;
        }
        idx[..d].copy_from_slice(&lo[..d]);
        'nodes: loop {
            let flat = grid.flat_index(&idx[..d]);
            if !assigned[flat] {
                grid.node_position(&idx[..d], &mut x[..d]);
                bary.coords(&x[..d], &mut lambda);
                if lambda[..=d].iter().all(|&l| l >= -CONTAINMENT_TOL) {
                    assigned[flat] = true;
                    let mut total = 0.0;
                    for l in &mut lambda[..=d] {
                        *l = l.clamp(0.0, 1.0);
                        total += *l;
                    }
                    for (i, &v) in s.iter().enumerate() {
                        let w = lambda[i] / total;
                        if v < n_int && w > 0.0 {
                            entries.push((flat, v, w));
                        }
                    }
                }
            }
            // odometer over the index box, last axis fastest
            let mut a = d;
            loop {
                if a == 0 {
                    break 'nodes;
                }
                a -= 1;
                if idx[a] < hi[a] {
                    idx[a] += 1;
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }
    TransferMatrix::from_entries(grid.node_count(), n_int, &entries)
}

/// Full-column-rank test. Up to [`EXACT_RANK_LIMIT`] columns the Gram matrix
/// is Cholesky factorized with a relative pivot floor; beyond that the test
/// is structural: every column nonempty and no two columns sharing their
/// first nonzero row (which makes the matrix column-echelon, hence full rank).
/// The structural test can report false for a matrix that has full rank.
pub fn column_rank_check(t: &TransferMatrix) -> bool {
    if t.n_cols() == 0 {
        return true;
    }
    if t.col_sums().iter().any(|&d| !(d > 0.0)) {
        return false;
    }
    if t.n_cols() <= EXACT_RANK_LIMIT {
        return cholesky_is_definite(&t.gram(), RANK_PIVOT_TOL);
    }
    let mut leading: Vec<usize> = (0..t.n_cols()).map(|j| t.column(j).0[0]).collect();
    leading.sort_unstable();
    leading.windows(2).all(|w| w[0] != w[1])
}
