//! Deterministic quasi-uniform meshes of the unit ball.

use std::f64::consts::PI;

use super::SimplicialMesh;
use crate::error::{Error, Result};

/// Largest element count the generator will produce.
const MAX_ELEMENTS: usize = 20_000_000;

/// Quasi-uniform mesh of the unit ball with element size about `target_h`.
///
/// 2D: concentric rings at radii `k/K`, ring `k` carrying `6k` equally spaced
/// vertices, adjacent rings joined by a zipper of triangles (`6K^2`
/// elements). 3D: the cube `[-1, 1]^3` split into `(2K)^3` cells, each cut
/// into six Kuhn tetrahedra reflected per octant, then mapped onto the ball
/// by `x -> x |x|_inf / |x|_2` (`48 K^3` elements). `K = ceil(1 / target_h)`.
pub fn generate_ball_mesh(dim: usize, target_h: f64) -> Result<SimplicialMesh> {
    if !(target_h > 0.0 && target_h < 1.0) {
        return Err(Error::invalid(
            "target_h",
            format!("must lie in (0, 1), got {target_h}"),
        ));
    }
    let k = (1.0 / target_h).ceil() as usize;
    let elements = match dim {
        2 => 6.0 * (k * k) as f64,
        3 => 48.0 * (k as f64).powi(3),
        _ => {
            return Err(Error::invalid(
                "dim",
                format!("ball meshes exist for dim 2 and 3, got {dim}"),
            ))
        }
    };
    if elements > MAX_ELEMENTS as f64 {
        return Err(Error::MemoryBudget(format!(
            "ball mesh with target_h = {target_h} would have {elements:.0} elements"
        )));
    }
    match dim {
        2 => disk(k),
        _ => ball3(k),
    }
}

fn disk(k: usize) -> Result<SimplicialMesh> {
    let mut coords = vec![0.0, 0.0];
    let mut ring_start = vec![0usize];
    for ring in 1..=k {
        ring_start.push(coords.len() / 2);
        let n = 6 * ring;
        let r = ring as f64 / k as f64;
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            coords.extend([r * t.cos(), r * t.sin()]);
        }
    }
    let mut tris = Vec::with_capacity(6 * k * k * 3);
    for ring in 1..=k {
        let (na, nb) = (6 * (ring - 1), 6 * ring);
        let (a0, b0) = (ring_start[ring - 1], ring_start[ring]);
        if na == 0 {
            for j in 0..nb {
                tris.extend([a0, b0 + j, b0 + (j + 1) % nb]);
            }
            continue;
        }
        // advance along whichever ring has the smaller next angle
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if i < na && (j == nb || next_a <= next_b) {
                tris.extend([a0 + i, b0 + j % nb, a0 + (i + 1) % na]);
                i += 1;
            } else {
                tris.extend([a0 + i % na, b0 + j, b0 + (j + 1) % nb]);
                j += 1;
            }
        }
    }
    let boundary: Vec<usize> = (ring_start[k]..coords.len() / 2).collect();
    SimplicialMesh::new(2, coords, tris, Some(boundary))
}

fn ball3(k: usize) -> Result<SimplicialMesh> {
    let side = 2 * k + 1;
    let id = |i: usize, j: usize, l: usize| (i * side + j) * side + l;
    let mut coords = Vec::with_capacity(side * side * side * 3);
    let mut boundary = Vec::new();
    for i in 0..side {
        for j in 0..side {
            for l in 0..side {
                let x = [i, j, l].map(|a| (a as f64 - k as f64) / k as f64);
                let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let two = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                let f = if two == 0.0 { 0.0 } else { inf / two };
                let on_sphere = i == 0 || j == 0 || l == 0 || i + 1 == side || j + 1 == side || l + 1 == side;
                if on_sphere {
                    boundary.push(id(i, j, l));
                    // normalize exactly onto the sphere
                    coords.extend(x.map(|v| v / two));
                } else {
                    coords.extend(x.map(|v| v * f));
                }
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(48 * k * k * k * 4);
    for ci in 0..2 * k {
        for cj in 0..2 * k {
            for cl in 0..2 * k {
                let cell = [ci, cj, cl];
                // start at the corner nearest the origin and step outward
                let mut start = [0usize; 3];
                let mut step = [0isize; 3];
                for a in 0..3 {
                    if cell[a] >= k {
                        start[a] = cell[a];
                        step[a] = 1;
                    } else {
                        start[a] = cell[a] + 1;
                        step[a] = -1;
                    }
                }
                for p in perms {
                    let mut cur = start;
                    let mut tet = [id(cur[0], cur[1], cur[2]); 4];
                    for (n, &a) in p.iter().enumerate() {
                        cur[a] = (cur[a] as isize + step[a]) as usize;
                        tet[n + 1] = id(cur[0], cur[1], cur[2]);
                    }
                    tets.extend(tet);
                }
            }
        }
    }
    SimplicialMesh::new(3, coords, tets, Some(boundary))
}
