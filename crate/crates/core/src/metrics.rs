//! Geometric evaluation: Chamfer distance, localized Chamfer outside an edit
//! region, and grid IoU.

use rayon::prelude::*;

use crate::sq::{PreparedSq, SuperquadricParams, Vec3};
use crate::voxel::{OccupancyGrid, VoxelError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("empty complement: every point lies inside the edit region")]
    EmptyComplement,
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

fn brute_nearest(p: &Vec3, cloud: &[Vec3]) -> f64 {
    cloud.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min)
}

fn mean(xs: Vec<f64>) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean squared nearest-neighbor distance from `a` to `b` plus the same
/// from `b` to `a`, by exhaustive search.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let ab = a.par_iter().map(|p| brute_nearest(p, b)).collect();
    let ba = b.par_iter().map(|p| brute_nearest(p, a)).collect();
    Ok(mean(ab) + mean(ba))
}

/// Uniform bucket grid over a point set for exact nearest-neighbor queries.
struct Buckets<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    h: f64,
    dims: [i64; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> Buckets<'a> {
    fn new(points: &'a [Vec3]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max().max(1e-12);
        // About two points per bucket along the populated volume.
        let per_axis = ((points.len() as f64 / 2.0).cbrt().ceil() as i64).clamp(1, 128);
        let h = extent / per_axis as f64;
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / h).floor() as i64 + 1).max(1));
        let mut b = Buckets { points, origin: lo, h, dims, starts: Vec::new(), order: Vec::new() };
        let total = (dims[0] * dims[1] * dims[2]) as usize;
        let keys: Vec<usize> = points.iter().map(|p| b.flat(b.cell(p))).collect();
        let mut counts = vec![0usize; total + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        b.starts = counts;
        b.order = order;
        b
    }

    fn cell(&self, p: &Vec3) -> [i64; 3] {
        [0, 1, 2].map(|a| (((p[a] - self.origin[a]) / self.h).floor() as i64).clamp(0, self.dims[a] - 1))
    }

    fn flat(&self, c: [i64; 3]) -> usize {
        (c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])) as usize
    }

    /// Lower bound on the distance from `p` to any point of bucket `c`.
    fn gap(&self, p: &Vec3, c: [i64; 3]) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let lo = self.origin[a] + c[a] as f64 * self.h;
            let hi = lo + self.h;
            let d = if p[a] < lo {
                lo - p[a]
            } else if p[a] > hi {
                p[a] - hi
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    fn nearest(&self, p: &Vec3) -> f64 {
        let home = self.cell(p);
        let reach = (0..3).map(|a| home[a].max(self.dims[a] - 1 - home[a])).max().unwrap_or(0);
        let mut best = f64::INFINITY;
        for r in 0..=reach {
            for k in (home[2] - r).max(0)..=(home[2] + r).min(self.dims[2] - 1) {
                for j in (home[1] - r).max(0)..=(home[1] + r).min(self.dims[1] - 1) {
                    for i in (home[0] - r).max(0)..=(home[0] + r).min(self.dims[0] - 1) {
                        let ring = (i - home[0]).abs().max((j - home[1]).abs()).max((k - home[2]).abs());
                        if ring != r || self.gap(p, [i, j, k]) > best {
                            continue;
                        }
                        let f = self.flat([i, j, k]);
                        for &q in &self.order[self.starts[f]..self.starts[f + 1]] {
                            best = best.min((p - self.points[q]).norm_squared());
                        }
                    }
                }
            }
            // Buckets beyond ring r are at least r·h away from the home bucket.
            let bound = r as f64 * self.h;
            if best <= bound * bound {
                break;
            }
        }
        best
    }
}

/// Same value as [`chamfer`], using bucketed nearest-neighbor search.
pub fn chamfer_accelerated(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let (ga, gb) = (Buckets::new(a), Buckets::new(b));
    let ab = a.par_iter().map(|p| gb.nearest(p)).collect();
    let ba = b.par_iter().map(|p| ga.nearest(p)).collect();
    Ok(mean(ab) + mean(ba))
}

/// Union of primitive supports inflated by `delta` on the implicit value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EditRegion {
    pub primitives: Vec<SuperquadricParams>,
    pub delta: f64,
}

impl EditRegion {
    pub fn new(primitives: Vec<SuperquadricParams>, delta: f64) -> Self {
        EditRegion { primitives, delta: delta.max(0.0) }
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Points with implicit value above `1 + delta` for every primitive.
    pub fn outside(&self, points: &[Vec3]) -> Vec<Vec3> {
        let prepared: Vec<PreparedSq> = self.primitives.iter().map(|q| q.prepare()).collect();
        let limit = 1.0 + self.delta;
        points
            .iter()
            .filter(|p| prepared.iter().all(|q| q.implicit_value(p) > limit))
            .copied()
            .collect()
    }
}

/// Chamfer distance between the parts of `a` and `b` outside `region`.
pub fn l_gd(a: &[Vec3], b: &[Vec3], region: &EditRegion) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let (oa, ob) = (region.outside(a), region.outside(b));
    if oa.is_empty() || ob.is_empty() {
        return Err(MetricsError::EmptyComplement);
    }
    chamfer_accelerated(&oa, &ob)
}

/// `|a ∧ b| / |a ∨ b|`, and 1 when both grids are empty.
pub fn grid_iou(a: &OccupancyGrid, b: &OccupancyGrid) -> Result<f64, MetricsError> {
    let inter = a.intersection(b)?.count();
    let union = a.union(b)?.count();
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}
