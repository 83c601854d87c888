//! Indexed triangle meshes.

use std::collections::HashMap;

use crate::sq::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        TriangleMesh { vertices, faces }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        self.faces[f].map(|i| self.vertices[i as usize])
    }

    /// Every undirected edge is shared by exactly two faces.
    pub fn is_closed(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }

    /// Signed volume by the divergence theorem; positive for outward-facing
    /// closed meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn translated(&self, offset: Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Concatenates two meshes.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let base = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.faces.extend(other.faces.iter().map(|f| f.map(|i| i + base)));
        out
    }

    /// Area-proportional deterministic surface samples: each face receives
    /// points on a barycentric lattice fine enough for `spacing`.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vec3> {
        let mut out = Vec::new();
        for f in 0..self.faces.len() {
            let [a, b, c] = self.triangle(f);
            let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let steps = ((longest / spacing).ceil() as usize).max(1);
            for i in 0..steps {
                for j in 0..steps - i {
                    // Centroids of the sub-triangles pointing the same way as the face.
                    let u = (i as f64 + 1.0 / 3.0) / steps as f64;
                    let v = (j as f64 + 1.0 / 3.0) / steps as f64;
                    out.push(a + (b - a) * u + (c - a) * v);
                }
            }
        }
        out
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> TriangleMesh {
        let v = |x: bool, y: bool, z: bool| {
            Vec3::new(if x { max.x } else { min.x }, if y { max.y } else { min.y }, if z { max.z } else { min.z })
        };
        let vertices = vec![
            v(false, false, false),
            v(true, false, false),
            v(true, true, false),
            v(false, true, false),
            v(false, false, true),
            v(true, false, true),
            v(true, true, true),
            v(false, true, true),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriangleMesh { vertices, faces }
    }

    /// Subdivided icosahedron projected onto a sphere.
    pub fn icosphere(radius: f64, center: Vec3, subdivisions: usize) -> TriangleMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Vec3::from(*v).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                    verts.len() as u32 - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriangleMesh {
            vertices: verts.into_iter().map(|v| center + v * radius).collect(),
            faces,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cuboid_is_closed_with_positive_volume() {
        let m = TriangleMesh::cuboid(Vec3::repeat(-0.25), Vec3::repeat(0.25));
        assert!(m.is_closed());
        assert!((m.signed_volume() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn icosphere_volume_approaches_ball() {
        let m = TriangleMesh::icosphere(0.4, Vec3::zeros(), 4);
        assert!(m.is_closed());
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 0.4f64.powi(3);
        assert!((m.signed_volume() - ball).abs() / ball < 0.01);
        for v in &m.vertices {
            assert!((v.norm() - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_samples_stay_on_faces() {
        let m = TriangleMesh::cuboid(Vec3::repeat(-0.25), Vec3::repeat(0.25));
        let pts = m.sample_surface(0.05);
        assert!(pts.len() > 100);
        for p in pts {
            let on_face = (0..3).any(|k| (p[k].abs() - 0.25).abs() < 1e-12);
            assert!(on_face && p.amax() <= 0.25 + 1e-12);
        }
    }
}
