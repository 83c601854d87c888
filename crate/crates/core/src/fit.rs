//! Classical superquadric decomposition of point clouds: principal-axis
//! initialization, size-weighted Levenberg–Marquardt fitting, and an
//! EM-style multi-primitive decomposition seeded by k-means.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::lm::{self, LeastSquares, LmConfig, LmStatus};
use crate::proxy::{palette_color, Primitive, Proxy};
use crate::sq::{euler_xyz_to_matrix, matrix_to_euler_xyz, wrap_angle, SuperquadricParams, Vec3, SHAPE_MAX, SHAPE_MIN};

/// Fewest points a primitive may be fitted to (one per parameter).
pub const MIN_FIT_POINTS: usize = 11;
pub const MIN_POINTS_PER_PRIMITIVE: usize = 50;
const MIN_SCALE: f64 = 1e-4;
const MIN_STD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("primitive count must be at least 1")]
    ZeroPrimitives,
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("decomposition failed")]
    DecompositionFailed,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, FitError> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(FitError::NonFinite(i));
        }
        Ok(PointCloud { points, normals: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Center at the centroid, local z along the largest principal axis,
/// scale = 1.5 × per-axis standard deviation, ε = (1, 1).
pub fn moments_init(points: &[Vec3]) -> Result<SuperquadricParams, FitError> {
    if points.len() < 10 {
        return Err(FitError::TooFewPoints { needed: 10, got: points.len() });
    }
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut axes = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if axes.determinant() < 0.0 {
        axes.set_column(0, &(-axes.column(0)));
    }
    let scale = order.map(|i| 1.5 * eig.eigenvalues[i].max(0.0).sqrt().max(MIN_STD));
    SuperquadricParams::new(scale, [1.0, 1.0], c.into(), matrix_to_euler_xyz(&axes))
        .map_err(|_| FitError::DecompositionFailed)
}

/// The size-weighted inside-outside objective over a fixed point set.
struct SqProblem<'a> {
    points: &'a [Vec3],
}

fn implicit_raw(theta: &[f64], rot_t: &Matrix3<f64>, p: &Vec3) -> f64 {
    let d = rot_t * (p - Vec3::new(theta[5], theta[6], theta[7]));
    let (e1, e2) = (theta[3], theta[4]);
    let pw = |x: f64, k: f64| if x == 0.0 { 0.0 } else { x.abs().powf(k) };
    let xy = pw(d.x / theta[0], 2.0 / e2) + pw(d.y / theta[1], 2.0 / e2);
    pw(xy, e2 / e1) + pw(d.z / theta[2], 2.0 / e1)
}

impl LeastSquares for SqProblem<'_> {
    fn num_params(&self) -> usize {
        11
    }

    fn residuals(&self, theta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let rot_t = euler_xyz_to_matrix([theta[8], theta[9], theta[10]]).transpose();
        let weight = (theta[0] * theta[1] * theta[2]).abs().sqrt();
        let e1 = theta[3];
        out.extend(
            self.points
                .iter()
                .map(|p| weight * (implicit_raw(theta, &rot_t, p).powf(e1) - 1.0)),
        );
    }

    fn project(&self, theta: &mut [f64]) {
        for a in &mut theta[0..3] {
            *a = a.max(MIN_SCALE);
        }
        for e in &mut theta[3..5] {
            *e = e.clamp(SHAPE_MIN, SHAPE_MAX);
        }
        for r in &mut theta[8..11] {
            *r = wrap_angle(*r);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: SuperquadricParams,
    /// Sum of squared size-weighted residuals.
    pub residual: f64,
    pub iterations: usize,
    /// True when damping overflowed before any improvement; `params` is then the init.
    pub diverged: bool,
}

/// Objective value of `params` on `points`.
pub fn fit_residual(points: &[Vec3], params: &SuperquadricParams) -> f64 {
    let mut r = Vec::new();
    SqProblem { points }.residuals(&params.to_array(), &mut r);
    r.iter().map(|x| x * x).sum()
}

/// Refines `init` on `points` with at most 200 LM iterations.
pub fn fit_single(points: &[Vec3], init: &SuperquadricParams) -> Result<FitResult, FitError> {
    if points.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints { needed: MIN_FIT_POINTS, got: points.len() });
    }
    let problem = SqProblem { points };
    let out = lm::minimize(&problem, &init.to_array(), &LmConfig::default());
    let params = if out.status == LmStatus::Diverged {
        *init
    } else {
        SuperquadricParams::from_array(out.params.as_slice().try_into().expect("11 parameters"))
            .map_err(|_| FitError::DecompositionFailed)?
    };
    Ok(FitResult {
        params,
        residual: out.cost,
        iterations: out.iterations,
        diverged: out.status == LmStatus::Diverged,
    })
}

/// Fits from the moment initialization with each principal axis tried as
/// the local z axis, keeping the lowest objective. The z axis carries ε1,
/// so the axis assignment is not symmetric.
pub fn fit_superquadric(points: &[Vec3]) -> Result<FitResult, FitError> {
    let init = moments_init(points)?;
    let axes = init.rotation_matrix();
    let a = init.scale();
    let candidates: Vec<SuperquadricParams> = (0..3)
        .map(|shift| {
            let cols = [(shift) % 3, (shift + 1) % 3, (shift + 2) % 3];
            let rot = Matrix3::from_columns(&[
                axes.column(cols[0]).into_owned(),
                axes.column(cols[1]).into_owned(),
                axes.column(cols[2]).into_owned(),
            ]);
            init.with_scale([a[cols[0]], a[cols[1]], a[cols[2]]])
                .and_then(|q| q.with_rotation(matrix_to_euler_xyz(&rot)))
                .expect("permuted moments stay valid")
        })
        .collect();
    let fits: Vec<FitResult> = candidates
        .par_iter()
        .map(|c| fit_single(points, c))
        .collect::<Result<_, _>>()?;
    Ok(fits
        .into_iter()
        .min_by(|x, y| x.residual.total_cmp(&y.residual))
        .expect("three candidates"))
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeConfig {
    pub max_rounds: usize,
    /// Stop once fewer than this fraction of points change assignment.
    pub min_change: f64,
    pub kmeans_iterations: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig { max_rounds: 20, min_change: 0.01, kmeans_iterations: 50 }
    }
}

fn nearest_center(p: &Vec3, centers: &[Vec3]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Seeded k-means++ followed by Lloyd iterations. Returns one label per point.
pub fn kmeans(points: &[Vec3], k: usize, seed: u64, iterations: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - c).norm_squared());
        }
        centers.push(c);
    }

    let mut labels: Vec<usize> = points.par_iter().map(|p| nearest_center(p, &centers)).collect();
    for _ in 0..iterations {
        let mut sums = vec![Vec3::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        for i in 0..k {
            if counts[i] > 0 {
                centers[i] = sums[i] / counts[i] as f64;
            }
        }
        let next: Vec<usize> = points.par_iter().map(|p| nearest_center(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn assign(points: &[Vec3], prims: &[SuperquadricParams]) -> Vec<usize> {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (i, q) in prims.iter().enumerate() {
                let d = q.radial_distance(p);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect()
}

fn partition(points: &[Vec3], labels: &[usize], k: usize) -> Vec<Vec<Vec3>> {
    let mut groups = vec![Vec::new(); k];
    for (p, &l) in points.iter().zip(labels) {
        groups[l].push(*p);
    }
    groups
}

pub fn decompose(points: &[Vec3], k: usize, seed: u64) -> Result<Proxy, FitError> {
    decompose_with(points, k, seed, &DecomposeConfig::default())
}

/// Decomposes `points` into at most `k` superquadrics. Output ids run
/// `0..K'` with palette colors; primitives left with fewer than 11 points
/// are dropped.
pub fn decompose_with(points: &[Vec3], k: usize, seed: u64, cfg: &DecomposeConfig) -> Result<Proxy, FitError> {
    if k == 0 {
        return Err(FitError::ZeroPrimitives);
    }
    let needed = MIN_POINTS_PER_PRIMITIVE * k;
    if points.len() < needed {
        return Err(FitError::TooFewPoints { needed, got: points.len() });
    }
    if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(FitError::NonFinite(i));
    }

    let labels = kmeans(points, k, seed, cfg.kmeans_iterations);
    let mut prims: Vec<SuperquadricParams> = partition(points, &labels, k)
        .par_iter()
        .filter(|g| g.len() >= MIN_FIT_POINTS)
        .map(|g| fit_superquadric(g).map(|f| f.params))
        .collect::<Result<_, _>>()?;
    if prims.is_empty() {
        return Err(FitError::DecompositionFailed);
    }

    let mut labels = assign(points, &prims);
    for _ in 0..cfg.max_rounds {
        let groups = partition(points, &labels, prims.len());
        prims = groups
            .par_iter()
            .zip(prims.par_iter())
            .filter(|(g, _)| g.len() >= MIN_FIT_POINTS)
            .map(|(g, q)| fit_single(g, q).map(|f| f.params))
            .collect::<Result<_, _>>()?;
        if prims.is_empty() {
            return Err(FitError::DecompositionFailed);
        }
        let next = assign(points, &prims);
        let changed = next.iter().zip(&labels).filter(|(a, b)| a != b).count();
        let shrunk = groups.len() != prims.len();
        labels = next;
        if !shrunk && (changed as f64) < cfg.min_change * points.len() as f64 {
            break;
        }
    }

    let counts = partition(points, &labels, prims.len());
    let kept: Vec<Primitive> = prims
        .into_iter()
        .zip(counts)
        .filter(|(_, g)| g.len() >= MIN_FIT_POINTS)
        .enumerate()
        .map(|(i, (q, _))| Primitive { id: i as u32, color: palette_color(i as u32), params: q })
        .collect();
    if kept.is_empty() {
        return Err(FitError::DecompositionFailed);
    }
    Proxy::new("shape", kept).map_err(|_| FitError::DecompositionFailed)
}
