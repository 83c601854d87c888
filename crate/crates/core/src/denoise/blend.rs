use crate::voxel::MaskSet;

use super::{step_forward, DenoiseError, Denoiser, LatentGrid};

/// Step indices of the masked schedule: `0 ≤ t_uc < t_warp < t_init ≤ T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlendSchedule {
    pub total: usize,
    pub t_init: usize,
    pub t_warp: usize,
    pub t_uc: usize,
}

impl BlendSchedule {
    pub const DEFAULT_TOTAL: usize = 25;
    pub const INIT_OFFSET: usize = 12;
    pub const WARP_OFFSET: usize = 16;
    pub const UC_OFFSET: usize = 20;

    pub fn new(total: usize, t_init: usize, t_warp: usize, t_uc: usize) -> Result<Self, DenoiseError> {
        let s = BlendSchedule { total, t_init, t_warp, t_uc };
        s.validate()?;
        Ok(s)
    }

    /// `t_init = T − 12`, `t_warp = T − 16`, `t_uc = T − 20`.
    pub fn from_total(total: usize) -> Result<Self, DenoiseError> {
        if total < Self::UC_OFFSET {
            return Err(DenoiseError::Schedule(format!("T = {total} is below the offset {}", Self::UC_OFFSET)));
        }
        Self::new(total, total - Self::INIT_OFFSET, total - Self::WARP_OFFSET, total - Self::UC_OFFSET)
    }

    pub fn validate(&self) -> Result<(), DenoiseError> {
        let s = self;
        if s.t_uc >= s.t_warp {
            return Err(DenoiseError::Schedule(format!("t_uc = {} must be below t_warp = {}", s.t_uc, s.t_warp)));
        }
        if s.t_warp >= s.t_init {
            return Err(DenoiseError::Schedule(format!("t_warp = {} must be below t_init = {}", s.t_warp, s.t_init)));
        }
        if s.t_init > s.total {
            return Err(DenoiseError::Schedule(format!("t_init = {} exceeds T = {}", s.t_init, s.total)));
        }
        Ok(())
    }
}

impl Default for BlendSchedule {
    fn default() -> Self {
        Self::from_total(Self::DEFAULT_TOTAL).expect("default schedule is valid")
    }
}

/// Initial content of cells outside `uc`, `ed` and `new`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Background {
    /// Inverted original outside the footprint, inverted proxy inside it.
    #[default]
    Composite,
    /// Inverted proxy everywhere.
    Proxy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlendOptions {
    pub background: Background,
}

/// Inverted trajectories indexed by timestep.
#[derive(Debug, Clone, Copy)]
pub struct Trajectories<'a> {
    pub proxy: &'a [LatentGrid],
    pub orig: &'a [LatentGrid],
    pub warp: &'a [LatentGrid],
}

impl Trajectories<'_> {
    fn check(&self, sched: &BlendSchedule, n: usize) -> Result<(), DenoiseError> {
        for (which, traj) in [("proxy", self.proxy), ("orig", self.orig), ("warp", self.warp)] {
            if traj.len() <= sched.t_init {
                return Err(DenoiseError::TrajectoryTooShort {
                    which,
                    needed: sched.t_init,
                    got: traj.len().saturating_sub(1),
                });
            }
            for (t, z) in traj.iter().take(sched.t_init + 1).enumerate() {
                if z.resolution() != n {
                    return Err(DenoiseError::Mismatch { expected: n, got: z.resolution() });
                }
                if z.timestep() != t {
                    return Err(DenoiseError::StepRange { t: z.timestep(), total: t });
                }
            }
        }
        Ok(())
    }
}

fn inject(z: &mut LatentGrid, source: &LatentGrid, mask: &[bool]) {
    for (idx, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        z.set(idx, source.get(idx));
    }
}

pub fn blended_denoise(
    trajs: Trajectories<'_>,
    masks: &MaskSet,
    sched: &BlendSchedule,
    d: &dyn Denoiser,
) -> Result<LatentGrid, DenoiseError> {
    blended_denoise_with(trajs, masks, sched, d, BlendOptions::default(), |_| {})
}

/// Masked denoising from `t_init` to 0. After each step to `t`, cells in
/// `uc` take the original latent while `t > t_uc` and cells in `ed` take the
/// warped latent while `t > t_warp`; `new` is never overridden. `observe`
/// sees the latent at `t_init` and after every step's injection.
pub fn blended_denoise_with(
    trajs: Trajectories<'_>,
    masks: &MaskSet,
    sched: &BlendSchedule,
    d: &dyn Denoiser,
    opts: BlendOptions,
    mut observe: impl FnMut(&LatentGrid),
) -> Result<LatentGrid, DenoiseError> {
    sched.validate()?;
    if sched.total != d.num_steps() {
        return Err(DenoiseError::Schedule(format!(
            "T = {} differs from the denoiser's {} steps",
            sched.total,
            d.num_steps()
        )));
    }
    let n = masks.resolution();
    trajs.check(sched, n)?;

    let ti = sched.t_init;
    let mut z = match opts.background {
        Background::Composite => {
            let mut z = trajs.orig[ti].clone();
            inject(&mut z, &trajs.proxy[ti], masks.footprint.cells());
            inject(&mut z, &trajs.proxy[ti], masks.new.cells());
            z
        }
        Background::Proxy => trajs.proxy[ti].clone(),
    };
    inject(&mut z, &trajs.orig[ti], masks.uc.cells());
    inject(&mut z, &trajs.warp[ti], masks.ed.cells());
    observe(&z);

    while z.timestep() > 0 {
        z = step_forward(d, &z)?;
        let t = z.timestep();
        if t > sched.t_uc {
            inject(&mut z, &trajs.orig[t], masks.uc.cells());
        }
        if t > sched.t_warp {
            inject(&mut z, &trajs.warp[t], masks.ed.cells());
        }
        observe(&z);
    }
    Ok(z)
}
