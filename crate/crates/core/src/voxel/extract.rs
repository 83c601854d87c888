use std::collections::HashMap;

use crate::mesh::TriangleMesh;
use crate::sq::Vec3;

use super::{OccupancyGrid, BOUNDS_MIN};

// Cube corner offsets by bit pattern (x = bit 0, y = bit 1, z = bit 2).
const CORNER: [[usize; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

// Six tetrahedra sharing the 0-7 diagonal, one per axis ordering.
const TETS: [[usize; 4]; 6] =
    [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]];

/// Closed, outward-oriented iso-surface at level 0.5 of the occupancy field
/// sampled at cell centers, with zero padding outside the cube.
pub fn extract_mesh(grid: &OccupancyGrid) -> TriangleMesh {
    let n = grid.resolution();
    let m = n + 2;
    let occ = |p: [usize; 3]| -> bool {
        let inner = p.iter().all(|&c| (1..=n).contains(&c));
        inner && grid.get(p[0] - 1, p[1] - 1, p[2] - 1)
    };
    let lattice = |p: [usize; 3]| p[0] + m * (p[1] + m * p[2]);
    let position = |p: [usize; 3]| p.map(|c| BOUNDS_MIN + (c as f64 - 0.5) / n as f64);

    let mut mesh = TriangleMesh::default();
    let mut welded: HashMap<(usize, usize), u32> = HashMap::new();
    for k in 0..m - 1 {
        for j in 0..m - 1 {
            for i in 0..m - 1 {
                let corners = CORNER.map(|o| [i + o[0], j + o[1], k + o[2]]);
                let inside = corners.map(occ);
                if inside.iter().all(|&b| b == inside[0]) {
                    continue;
                }
                for tet in TETS {
                    let (ins, outs): (Vec<usize>, Vec<usize>) = tet.iter().partition(|&&c| inside[c]);
                    if ins.is_empty() || outs.is_empty() {
                        continue;
                    }
                    let mut vertex = |a: usize, b: usize| {
                        let (pa, pb) = (corners[a], corners[b]);
                        let key = (lattice(pa).min(lattice(pb)), lattice(pa).max(lattice(pb)));
                        *welded.entry(key).or_insert_with(|| {
                            let (x, y) = (position(pa), position(pb));
                            mesh.vertices.push(Vec3::new(
                                (x[0] + y[0]) / 2.0,
                                (x[1] + y[1]) / 2.0,
                                (x[2] + y[2]) / 2.0,
                            ));
                            mesh.vertices.len() as u32 - 1
                        })
                    };
                    let polygon: Vec<u32> = match (ins.len(), outs.len()) {
                        (1, 3) => outs.iter().map(|&o| vertex(ins[0], o)).collect(),
                        (3, 1) => ins.iter().map(|&i| vertex(i, outs[0])).collect(),
                        _ => vec![
                            vertex(ins[0], outs[0]),
                            vertex(ins[0], outs[1]),
                            vertex(ins[1], outs[1]),
                            vertex(ins[1], outs[0]),
                        ],
                    };
                    let centroid = |set: &[usize]| {
                        set.iter().map(|&c| Vec3::from(position(corners[c]))).sum::<Vec3>() / set.len() as f64
                    };
                    let outward = centroid(&outs) - centroid(&ins);
                    for t in 1..polygon.len() - 1 {
                        let mut face = [polygon[0], polygon[t], polygon[t + 1]];
                        let [a, b, c] = face.map(|v| mesh.vertices[v as usize]);
                        if (b - a).cross(&(c - a)).dot(&outward) < 0.0 {
                            face.swap(1, 2);
                        }
                        mesh.faces.push(face);
                    }
                }
            }
        }
    }
    mesh
}
