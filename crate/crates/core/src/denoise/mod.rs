//! Latent grids, a deterministic exactly invertible flow and the masked
//! blending scheduler.
//!
//! Latent values live on a dyadic lattice of spacing `2⁻²⁰`. Every velocity
//! is snapped to the same lattice before it is applied, so a forward Euler
//! step undoes a backward one bit for bit and trajectories survive `f32`
//! serialization unchanged.

mod blend;
mod features;

pub use blend::{blended_denoise, blended_denoise_with, Background, BlendOptions, BlendSchedule, Trajectories};
pub use features::{transfer_features, FeatureGrid, DEFAULT_FILL_ITERS};

use rayon::prelude::*;

use crate::voxel::{check_resolution, OccupancyGrid, VoxelError};

const LATTICE: f64 = (1u64 << 20) as f64;

/// Rounds to the nearest multiple of `2⁻²⁰`.
pub fn quantize(x: f64) -> f64 {
    (x * LATTICE).round() / LATTICE
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DenoiseError {
    #[error("cannot decode noisy latent (t = {0})")]
    NoisyDecode(usize),
    #[error("timestep {t} outside 0..={total}")]
    StepRange { t: usize, total: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("{which} trajectory reaches t = {got}, need {needed}")]
    TrajectoryTooShort { which: &'static str, needed: usize, got: usize },
    #[error("latent resolution {got} does not match {expected}")]
    Mismatch { expected: usize, got: usize },
    #[error("latent value {0} is not finite")]
    NonFinite(usize),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// Scalar field over an `N³` grid at timestep `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    n: usize,
    t: usize,
    values: Vec<f64>,
}

impl LatentGrid {
    /// Values are snapped to the latent lattice.
    pub fn new(n: usize, t: usize, values: Vec<f64>) -> Result<Self, DenoiseError> {
        check_resolution(n)?;
        if values.len() != n * n * n {
            return Err(VoxelError::CellCount { expected: n * n * n, got: values.len() }.into());
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DenoiseError::NonFinite(i));
        }
        Ok(LatentGrid { n, t, values: values.into_iter().map(quantize).collect() })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn timestep(&self) -> usize {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub(crate) fn set(&mut self, idx: usize, v: f64) {
        self.values[idx] = v;
    }

    #[cfg(test)]
    pub(crate) fn with_timestep(mut self, t: usize) -> Self {
        self.t = t;
        self
    }

    /// True when every value is identical bit for bit.
    pub fn bit_eq(&self, other: &LatentGrid) -> bool {
        self.n == other.n
            && self.t == other.t
            && self.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Occupied cells to `+1`, empty to `-1`, at `t = 0`.
pub fn encode(grid: &OccupancyGrid) -> LatentGrid {
    LatentGrid {
        n: grid.resolution(),
        t: 0,
        values: grid.cells().iter().map(|&c| if c { 1.0 } else { -1.0 }).collect(),
    }
}

/// Cells with value strictly above zero. Only clean (`t = 0`) latents decode.
pub fn decode(z: &LatentGrid) -> Result<OccupancyGrid, DenoiseError> {
    if z.t != 0 {
        return Err(DenoiseError::NoisyDecode(z.t));
    }
    Ok(OccupancyGrid::from_cells(z.n, z.values.iter().map(|&v| v > 0.0).collect())?)
}

/// A flow model over latent grids. `velocity(z, t)` drives the interval
/// between steps `t` and `t + 1`; stepping up adds it, stepping down
/// subtracts it.
pub trait Denoiser: Sync {
    fn num_steps(&self) -> usize;
    fn velocity(&self, z: &LatentGrid, t: usize) -> Vec<f64>;
}

fn apply(z: &LatentGrid, v: Vec<f64>, sign: f64, t: usize) -> LatentGrid {
    let values = z.values.par_iter().zip(v).map(|(&a, b)| a + sign * quantize(b)).collect();
    LatentGrid { n: z.n, t, values }
}

/// One inversion step `t → t + 1`.
pub fn step_backward(d: &dyn Denoiser, z: &LatentGrid) -> Result<LatentGrid, DenoiseError> {
    if z.t >= d.num_steps() {
        return Err(DenoiseError::StepRange { t: z.t + 1, total: d.num_steps() });
    }
    Ok(apply(z, d.velocity(z, z.t), 1.0, z.t + 1))
}

/// One denoising step `t → t - 1`.
pub fn step_forward(d: &dyn Denoiser, z: &LatentGrid) -> Result<LatentGrid, DenoiseError> {
    if z.t == 0 || z.t > d.num_steps() {
        return Err(DenoiseError::StepRange { t: z.t, total: d.num_steps() });
    }
    Ok(apply(z, d.velocity(z, z.t - 1), -1.0, z.t - 1))
}

/// Inverted latents for `t = 0..=t_stop`, starting from a clean latent.
pub fn invert(z0: &LatentGrid, d: &dyn Denoiser, t_stop: usize) -> Result<Vec<LatentGrid>, DenoiseError> {
    if z0.t != 0 {
        return Err(DenoiseError::StepRange { t: z0.t, total: 0 });
    }
    if t_stop > d.num_steps() {
        return Err(DenoiseError::StepRange { t: t_stop, total: d.num_steps() });
    }
    let mut traj = vec![z0.clone()];
    for _ in 0..t_stop {
        let next = step_backward(d, traj.last().expect("non-empty"))?;
        traj.push(next);
    }
    Ok(traj)
}

/// Runs forward steps from `z` down to `t = 0`.
pub fn denoise(z: &LatentGrid, d: &dyn Denoiser) -> Result<LatentGrid, DenoiseError> {
    let mut z = z.clone();
    while z.t > 0 {
        z = step_forward(d, &z)?;
    }
    Ok(z)
}

/// Per-cell pseudo-noise in `[-1, 1]`.
pub fn hash_noise(seed: u64, idx: usize) -> f64 {
    let mut x = seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    (x >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// 3×3×3 mean over in-bounds neighbors.
pub fn box_smooth(z: &LatentGrid) -> LatentGrid {
    let n = z.n;
    let values = (0..z.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx % n, idx / n % n, idx / (n * n));
            let (mut sum, mut count) = (0.0, 0usize);
            for c in k.saturating_sub(1)..=(k + 1).min(n - 1) {
                for b in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                    for a in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                        sum += z.values[a + n * (b + n * c)];
                        count += 1;
                    }
                }
            }
            quantize(sum / count as f64)
        })
        .collect();
    LatentGrid { n, t: 0, values }
}

pub const DEFAULT_NOISE_SEED: u64 = 0;

/// Straight-line flow from the smoothed condition `x₀` to hashed noise `η`
/// with constant velocity `(η − x₀) / T`.
#[derive(Debug, Clone)]
pub struct ReferenceDenoiser {
    steps: usize,
    x0: LatentGrid,
    noise: Vec<f64>,
    velocity: Vec<f64>,
}

impl ReferenceDenoiser {
    pub fn new(condition: &LatentGrid, steps: usize) -> Result<Self, DenoiseError> {
        Self::with_seed(condition, steps, DEFAULT_NOISE_SEED)
    }

    pub fn with_seed(condition: &LatentGrid, steps: usize, seed: u64) -> Result<Self, DenoiseError> {
        if condition.t != 0 {
            return Err(DenoiseError::StepRange { t: condition.t, total: 0 });
        }
        if steps == 0 {
            return Err(DenoiseError::Schedule("T must be at least 1".into()));
        }
        let x0 = box_smooth(condition);
        let noise: Vec<f64> = (0..x0.len()).map(|i| quantize(hash_noise(seed, i))).collect();
        let velocity = noise.iter().zip(&x0.values).map(|(e, x)| quantize((e - x) / steps as f64)).collect();
        Ok(ReferenceDenoiser { steps, x0, noise, velocity })
    }

    pub fn x0(&self) -> &LatentGrid {
        &self.x0
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }
}

impl Denoiser for ReferenceDenoiser {
    fn num_steps(&self) -> usize {
        self.steps
    }

    fn velocity(&self, _z: &LatentGrid, _t: usize) -> Vec<f64> {
        self.velocity.clone()
    }
}
