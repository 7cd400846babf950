//! Simplicial meshes of the domain: storage with interior vertices first,
//! boundary detection, element geometry and the lumped L² norm.

mod ball;
mod io;

use std::collections::HashMap;

pub use ball::generate_ball_mesh;
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};

use crate::error::{Error, Result};
use crate::grid::check_dim;

/// Conforming simplicial mesh. Vertices `0..n_interior` are interior; the
/// rest lie on the boundary of the complex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    simplices: Vec<usize>,
    n_interior: usize,
}

/// Element size measures used to pick the overlay grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Minimum element height.
    pub a_h: f64,
    /// `n_elements^{-1/d}`.
    pub h_bar: f64,
    pub n_elements: usize,
}

impl SimplicialMesh {
    /// Validates and normalizes a mesh. Negatively oriented simplices are
    /// flipped; boundary vertices come from `boundary` when given, otherwise
    /// from facets that belong to exactly one simplex. Vertices are then
    /// renumbered interior-first, keeping the relative order within each
    /// group.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        mut simplices: Vec<usize>,
        boundary: Option<Vec<usize>>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if coords.len() % dim != 0 {
            return Err(Error::invalid("coords", "length is not a multiple of dim"));
        }
        if simplices.len() % (dim + 1) != 0 {
            return Err(Error::invalid("simplices", "length is not a multiple of dim + 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coords", "vertex coordinates must be finite"));
        }
        let nv = coords.len() / dim;
        if let Some(bad) = simplices.iter().find(|&&v| v >= nv) {
            return Err(Error::invalid(
                "simplices",
                format!("vertex index {bad} out of range ({nv} vertices)"),
            ));
        }
        let mut raw = Self {
            dim,
            coords,
            simplices: Vec::new(),
            n_interior: 0,
        };
        for (k, s) in simplices.chunks_mut(dim + 1).enumerate() {
            let vol = raw.signed_volume_of(s);
            let scale = raw.max_edge_of(s).powi(dim as i32);
            if !(vol.abs() > 1e-12 * scale) {
                return Err(Error::DegenerateSimplex {
                    index: k,
                    vertices: s.to_vec(),
                    volume: vol,
                });
            }
            if vol < 0.0 {
                s.swap(0, 1);
            }
        }
        raw.simplices = simplices;

        let on_boundary = match boundary {
            Some(list) => {
                let mut flags = vec![false; nv];
                for v in list {
                    if v >= nv {
                        return Err(Error::invalid(
                            "boundary",
                            format!("vertex index {v} out of range ({nv} vertices)"),
                        ));
                    }
                    flags[v] = true;
                }
                flags
            }
            None => raw.boundary_flags(),
        };

        // interior-first renumbering, stable within each group
        let mut new_index = vec![0usize; nv];
        let mut next = 0;
        for pass in [false, true] {
            for (v, &b) in on_boundary.iter().enumerate() {
                if b == pass {
                    new_index[v] = next;
                    next += 1;
                }
            }
        }
        let n_interior = on_boundary.iter().filter(|&&b| !b).count();
        let mut coords = vec![0.0; raw.coords.len()];
        for v in 0..nv {
            let (src, dst) = (v * dim, new_index[v] * dim);
            coords[dst..dst + dim].copy_from_slice(&raw.coords[src..src + dim]);
        }
        let simplices = raw.simplices.iter().map(|&v| new_index[v]).collect();
        Ok(Self {
            dim,
            coords,
            simplices,
            n_interior,
        })
    }

    /// Vertex flags for facets shared by exactly one simplex.
    fn boundary_flags(&self) -> Vec<bool> {
        let d = self.dim;
        let mut count: HashMap<[usize; 3], u32> = HashMap::new();
        for s in self.simplices.chunks(d + 1) {
            for skip in 0..=d {
                let mut facet = [usize::MAX; 3];
                let mut n = 0;
                for (i, &v) in s.iter().enumerate() {
                    if i != skip {
                        facet[n] = v;
                        n += 1;
                    }
                }
                facet[..d].sort_unstable();
                *count.entry(facet).or_insert(0) += 1;
            }
        }
        let mut flags = vec![false; self.n_vertices()];
        for (facet, c) in count {
            if c == 1 {
                for &v in &facet[..d] {
                    flags[v] = true;
                }
            }
        }
        flags
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len() / (self.dim + 1)
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn is_interior(&self, v: usize) -> bool {
        v < self.n_interior
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn simplex(&self, k: usize) -> &[usize] {
        &self.simplices[k * (self.dim + 1)..(k + 1) * (self.dim + 1)]
    }

    pub fn simplices(&self) -> impl Iterator<Item = &[usize]> {
        self.simplices.chunks(self.dim + 1)
    }

    /// Unsigned volume of simplex `k`.
    pub fn volume(&self, k: usize) -> f64 {
        self.signed_volume_of(self.simplex(k)).abs()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_simplices()).map(|k| self.volume(k)).sum()
    }

    /// Longest edge of simplex `k`.
    pub fn diameter(&self, k: usize) -> f64 {
        self.max_edge_of(self.simplex(k))
    }

    fn signed_volume_of(&self, s: &[usize]) -> f64 {
        let d = self.dim;
        let x0 = self.vertex(s[0]);
        let mut e = [[0.0; 3]; 3];
        for i in 0..d {
            let xi = self.vertex(s[i + 1]);
            for k in 0..d {
                e[i][k] = xi[k] - x0[k];
            }
        }
        match d {
            1 => e[0][0],
            2 => 0.5 * (e[0][0] * e[1][1] - e[0][1] * e[1][0]),
            _ => {
                (e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                    - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                    + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]))
                    / 6.0
            }
        }
    }

    fn max_edge_of(&self, s: &[usize]) -> f64 {
        let mut m = 0.0f64;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                m = m.max(distance(self.vertex(s[i]), self.vertex(s[j])));
            }
        }
        m
    }

    /// Measure of the facet of simplex `k` opposite local vertex `skip`.
    fn facet_measure(&self, k: usize, skip: usize) -> f64 {
        let s = self.simplex(k);
        let f: Vec<&[f64]> = s
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &v)| self.vertex(v))
            .collect();
        match self.dim {
            1 => 1.0,
            2 => distance(f[0], f[1]),
            _ => {
                let a: Vec<f64> = (0..3).map(|i| f[1][i] - f[0][i]).collect();
                let b: Vec<f64> = (0..3).map(|i| f[2][i] - f[0][i]).collect();
                let c = [
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ];
                0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            }
        }
    }

    /// Smallest height of simplex `k`: `d · volume / largest facet`.
    pub fn min_height(&self, k: usize) -> f64 {
        let largest = (0..=self.dim)
            .map(|i| self.facet_measure(k, i))
            .fold(0.0, f64::max);
        self.dim as f64 * self.volume(k) / largest
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn mesh_quality(mesh: &SimplicialMesh) -> MeshQuality {
    let n = mesh.n_simplices();
    let a_h = (0..n)
        .map(|k| mesh.min_height(k))
        .fold(f64::INFINITY, f64::min);
    MeshQuality {
        a_h,
        h_bar: (n as f64).powf(-1.0 / mesh.dim() as f64),
        n_elements: n,
    }
}

/// `sqrt(sum_K |K|/(d+1) sum_{v in K} (u_v - exact(x_v))^2)`.
pub fn lumped_l2_error<F>(mesh: &SimplicialMesh, nodal: &[f64], exact: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if nodal.len() != mesh.n_vertices() {
        return Err(Error::ShapeMismatch {
            expected: mesh.n_vertices(),
            got: nodal.len(),
        });
    }
    let err2: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| {
            let e = nodal[v] - exact(mesh.vertex(v));
            e * e
        })
        .collect();
    let w = 1.0 / (mesh.dim() + 1) as f64;
    let sum: f64 = (0..mesh.n_simplices())
        .map(|k| mesh.volume(k) * w * mesh.simplex(k).iter().map(|&v| err2[v]).sum::<f64>())
        .sum();
    Ok(sum.sqrt())
}
