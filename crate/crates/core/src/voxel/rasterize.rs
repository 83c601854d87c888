use std::collections::VecDeque;

use rayon::prelude::*;

use crate::mesh::TriangleMesh;
use crate::sq::Vec3;

use super::{cell_center, check_resolution, OccupancyGrid, VoxelError, BOUNDS_MIN};

// Keeps rays off shared edges and vertices of axis-aligned geometry.
const JITTER_Y: f64 = 1.0e-7 * std::f64::consts::SQRT_2;
const JITTER_Z: f64 = 1.0e-7 * std::f64::consts::E / 3.0;

/// Solid voxelization. Closed meshes use ray parity along +x; open meshes
/// fall back to a surface shell plus exterior flood fill.
pub fn voxelize_mesh(mesh: &TriangleMesh, n: usize) -> Result<OccupancyGrid, VoxelError> {
    check_resolution(n)?;
    if mesh.is_empty() {
        return OccupancyGrid::empty(n);
    }
    if mesh.is_closed() {
        parity(mesh, n)
    } else {
        shell_fill(mesh, n)
    }
}

fn row_range(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let nf = n as f64;
    let a = ((lo - BOUNDS_MIN) * nf - 0.5).ceil().max(0.0);
    let b = ((hi - BOUNDS_MIN) * nf - 0.5).floor().min(nf - 1.0);
    (a <= b).then_some((a as usize, b as usize))
}

fn parity(mesh: &TriangleMesh, n: usize) -> Result<OccupancyGrid, VoxelError> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for f in 0..mesh.faces.len() {
        let t = mesh.triangle(f);
        let (ylo, yhi) = (t[0].y.min(t[1].y).min(t[2].y), t[0].y.max(t[1].y).max(t[2].y));
        let (zlo, zhi) = (t[0].z.min(t[1].z).min(t[2].z), t[0].z.max(t[1].z).max(t[2].z));
        let (Some((j0, j1)), Some((k0, k1))) = (row_range(ylo - JITTER_Y, yhi, n), row_range(zlo - JITTER_Z, zhi, n))
        else {
            continue;
        };
        for k in k0..=k1 {
            for j in j0..=j1 {
                rows[j + n * k].push(f);
            }
        }
    }
    let cells: Vec<bool> = rows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(row, faces)| {
            let y = cell_center(n, row % n) + JITTER_Y;
            let z = cell_center(n, row / n) + JITTER_Z;
            let mut hits: Vec<f64> = faces.iter().filter_map(|&f| ray_hit(&mesh.triangle(f), y, z)).collect();
            hits.sort_by(f64::total_cmp);
            (0..n).map(move |i| {
                let x = cell_center(n, i);
                hits.iter().take_while(|&&h| h < x).count() % 2 == 1
            })
        })
        .collect();
    OccupancyGrid::from_cells(n, cells)
}

/// x coordinate where the line `(·, y, z)` crosses the triangle.
fn ray_hit(t: &[Vec3; 3], y: f64, z: f64) -> Option<f64> {
    // Evaluated in a canonical endpoint order so neighbors sharing an edge
    // agree bit for bit on which side the ray passes.
    let edge = |a: &Vec3, b: &Vec3| {
        let f = |a: &Vec3, b: &Vec3| (b.y - a.y) * (z - a.z) - (b.z - a.z) * (y - a.y);
        if (a.y, a.z) <= (b.y, b.z) {
            f(a, b)
        } else {
            -f(b, a)
        }
    };
    let w0 = edge(&t[1], &t[2]);
    let w1 = edge(&t[2], &t[0]);
    let w2 = edge(&t[0], &t[1]);
    let inside = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
    let sum = w0 + w1 + w2;
    if !inside || sum == 0.0 {
        return None;
    }
    Some((w0 * t[0].x + w1 * t[1].x + w2 * t[2].x) / sum)
}

fn shell_fill(mesh: &TriangleMesh, n: usize) -> Result<OccupancyGrid, VoxelError> {
    let mut shell = OccupancyGrid::empty(n)?;
    for p in mesh.sample_surface(0.25 / n as f64).iter().chain(&mesh.vertices) {
        if let Some(idx) = shell.cell_of(p) {
            shell.set_at(idx, true);
        }
    }
    let mut outside = vec![false; n * n * n];
    let mut queue = VecDeque::new();
    for (idx, out) in outside.iter_mut().enumerate() {
        let (i, j, k) = shell.coords(idx);
        let border = [i, j, k].iter().any(|&c| c == 0 || c == n - 1);
        if border && !shell.at(idx) {
            *out = true;
            queue.push_back(idx);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let (i, j, k) = shell.coords(idx);
        let mut visit = |i: usize, j: usize, k: usize| {
            let id = shell.index(i, j, k);
            if !outside[id] && !shell.at(id) {
                outside[id] = true;
                queue.push_back(id);
            }
        };
        if i > 0 {
            visit(i - 1, j, k);
        }
        if i + 1 < n {
            visit(i + 1, j, k);
        }
        if j > 0 {
            visit(i, j - 1, k);
        }
        if j + 1 < n {
            visit(i, j + 1, k);
        }
        if k > 0 {
            visit(i, j, k - 1);
        }
        if k + 1 < n {
            visit(i, j, k + 1);
        }
    }
    OccupancyGrid::from_cells(n, outside.into_iter().map(|o| !o).collect())
}
