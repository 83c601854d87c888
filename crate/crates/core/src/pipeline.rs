//! End-to-end edit pipeline over persisted stage files.
//!
//! Stages: apply the script, voxelize the original mesh, derive masks, warp,
//! invert three latents, blend-denoise, extract the output mesh, transfer
//! primitive colors, and score the result against the original.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::denoise::{
    self, blended_denoise_with, encode, invert, transfer_features, Background, BlendOptions, BlendSchedule,
    FeatureGrid, LatentGrid, ReferenceDenoiser, Trajectories, DEFAULT_FILL_ITERS,
};
use crate::dsl::{apply_script, EditScript};
use crate::error::{Error, Result, StageExt};
use crate::io;
use crate::mesh::TriangleMesh;
use crate::metrics::{chamfer_accelerated, grid_iou, l_gd, EditRegion};
use crate::proxy::{diff_proxies, PrimitiveDiff, Proxy, DEFAULT_DIFF_TOLERANCE};
use crate::sq::PreparedSq;
use crate::voxel::{
    check_resolution, extract_mesh, masks_from_diff, voxelize_mesh, voxelize_proxy, MaskOptions, MaskSet,
    OccupancyGrid, DEFAULT_RESOLUTION,
};
use crate::warp::{build_warp_field, warp_grid, DEFAULT_DELTA};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub resolution: usize,
    pub total_steps: usize,
    pub init_offset: usize,
    pub warp_offset: usize,
    pub uc_offset: usize,
    pub delta: f64,
    pub diff_tolerance: f64,
    /// Seed of the reference denoiser's pseudo-noise.
    pub seed: u64,
    pub fill_iters: usize,
    pub dilation: usize,
    pub background: Background,
    /// Also write the three inverted trajectories as `PXLF` files.
    pub save_latents: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution: DEFAULT_RESOLUTION,
            total_steps: BlendSchedule::DEFAULT_TOTAL,
            init_offset: BlendSchedule::INIT_OFFSET,
            warp_offset: BlendSchedule::WARP_OFFSET,
            uc_offset: BlendSchedule::UC_OFFSET,
            delta: DEFAULT_DELTA,
            diff_tolerance: DEFAULT_DIFF_TOLERANCE,
            seed: denoise::DEFAULT_NOISE_SEED,
            fill_iters: DEFAULT_FILL_ITERS,
            dilation: 0,
            background: Background::Composite,
            save_latents: false,
        }
    }
}

impl PipelineConfig {
    /// Checks every bound and derives the schedule.
    pub fn schedule(&self) -> Result<BlendSchedule> {
        check_resolution(self.resolution).map_err(|e| Error::Config(e.to_string()))?;
        let off = |name: &str, o: usize| {
            self.total_steps
                .checked_sub(o)
                .ok_or_else(|| Error::Config(format!("{name} offset {o} exceeds T = {}", self.total_steps)))
        };
        let s = BlendSchedule {
            total: self.total_steps,
            t_init: off("init", self.init_offset)?,
            t_warp: off("warp", self.warp_offset)?,
            t_uc: off("uc", self.uc_offset)?,
        };
        s.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be a finite value >= 0, got {}", self.delta)));
        }
        if !(self.diff_tolerance >= 0.0 && self.diff_tolerance.is_finite()) {
            return Err(Error::Config(format!("diff tolerance must be >= 0, got {}", self.diff_tolerance)));
        }
        Ok(s)
    }
}

/// Scores of the output against the original shape. Point metrics use the
/// vertices of meshes extracted from the output and original grids.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub chamfer: Option<f64>,
    pub l_gd: Option<f64>,
    pub iou: f64,
    pub notes: Vec<String>,
}

/// `%g`-style formatting with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..6).contains(&exp) {
        trim(format!("{:.*}", (5 - exp).max(0) as usize, x))
    } else {
        let s = format!("{x:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent");
        let e: i32 = e.parse().expect("integer exponent");
        format!("{}e{}{:02}", trim(mant.to_string()), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

impl MetricsReport {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), format_sig6);
        let mut s = String::new();
        writeln!(s, "chamfer {}", opt(self.chamfer)).unwrap();
        writeln!(s, "l_gd {}", opt(self.l_gd)).unwrap();
        writeln!(s, "iou {}", format_sig6(self.iou)).unwrap();
        for n in &self.notes {
            writeln!(s, "# {n}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub edited: Proxy,
    pub diff: PrimitiveDiff,
    pub grid_orig: OccupancyGrid,
    pub grid_proxy: OccupancyGrid,
    pub masks: MaskSet,
    pub grid_warp: OccupancyGrid,
    pub latent: LatentGrid,
    pub grid_out: OccupancyGrid,
    pub mesh_out: TriangleMesh,
    pub features: FeatureGrid,
    pub report: MetricsReport,
}

/// Region touched by the edit: edited primitives at both poses, added and
/// deleted primitives.
pub fn edit_region(diff: &PrimitiveDiff, delta: f64) -> EditRegion {
    let prims = diff
        .edited
        .iter()
        .flat_map(|(o, e)| [o.params, e.params])
        .chain(diff.added.iter().chain(&diff.deleted).map(|p| p.params))
        .collect();
    EditRegion::new(prims, delta)
}

/// Latent stage: inverts the proxy, original and warped grids under the
/// reference denoiser conditioned on the proxy, then blends.
pub fn denoise_stage(
    grid_orig: &OccupancyGrid,
    grid_warp: &OccupancyGrid,
    grid_proxy: &OccupancyGrid,
    masks: &MaskSet,
    cfg: &PipelineConfig,
) -> Result<(LatentGrid, [Vec<LatentGrid>; 3])> {
    let sched = cfg.schedule()?;
    let d = ReferenceDenoiser::with_seed(&encode(grid_proxy), sched.total, cfg.seed).stage("invert")?;
    let tp = invert(&encode(grid_proxy), &d, sched.t_init).stage("invert")?;
    let to = invert(&encode(grid_orig), &d, sched.t_init).stage("invert")?;
    let tw = invert(&encode(grid_warp), &d, sched.t_init).stage("invert")?;
    let trajs = Trajectories { proxy: &tp, orig: &to, warp: &tw };
    let opts = BlendOptions { background: cfg.background };
    let z = blended_denoise_with(trajs, masks, &sched, &d, opts, |_| {}).stage("denoise")?;
    Ok((z, [tp, to, tw]))
}

/// Colors each occupied original cell with the palette color of the
/// primitive whose implicit value there is smallest.
pub fn primitive_colors(grid: &OccupancyGrid, proxy: &Proxy) -> FeatureGrid {
    let prepared: Vec<(PreparedSq, [u8; 3])> =
        proxy.primitives().iter().map(|p| (p.params.prepare(), p.color)).collect();
    FeatureGrid::from_occupancy(grid, |idx| {
        let c = grid.center(idx);
        prepared
            .iter()
            .map(|(q, col)| (q.implicit_value(&c), col))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or([0.5; 3], |(_, col)| col.map(|x| x as f64 / 255.0))
    })
}

fn vertex_colors(mesh: &TriangleMesh, feat: &FeatureGrid, grid: &OccupancyGrid) -> Vec<[f64; 3]> {
    let n = grid.resolution() as i64;
    mesh.vertices
        .iter()
        .map(|v| {
            let base = v.map(|x| ((x + 0.5) * n as f64 - 0.5).round() as i64);
            let mut best: Option<(f64, [f64; 3])> = None;
            for dk in -1..=1 {
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (i, j, k) = (base.x + di, base.y + dj, base.z + dk);
                        if ![i, j, k].iter().all(|c| (0..n).contains(c)) {
                            continue;
                        }
                        let idx = grid.index(i as usize, j as usize, k as usize);
                        if let Some(col) = feat.get(idx) {
                            let d = (grid.center(idx) - v).norm_squared();
                            if !matches!(best, Some((b, _)) if d >= b) {
                                best = Some((d, col));
                            }
                        }
                    }
                }
            }
            best.map_or([0.5; 3], |(_, c)| c)
        })
        .collect()
}

/// Runs every stage in memory.
pub fn run_pipeline(
    orig_mesh: &TriangleMesh,
    proxy: &Proxy,
    script: &EditScript,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    cfg.schedule()?;
    let n = cfg.resolution;
    let edited = apply_script(script, proxy).stage("edit")?;
    let diff = diff_proxies(proxy, &edited, cfg.diff_tolerance);

    let grid_orig = voxelize_mesh(orig_mesh, n).stage("voxelize")?;
    let grid_proxy = voxelize_proxy(&edited, None, n).stage("voxelize")?;
    let masks =
        masks_from_diff(&diff, &grid_orig, proxy, &edited, MaskOptions { dilation: cfg.dilation }).stage("masks")?;
    let field = build_warp_field(&diff, cfg.delta);
    let grid_warp = warp_grid(&grid_orig, &field);

    let (latent, _) = denoise_stage(&grid_orig, &grid_warp, &grid_proxy, &masks, cfg)?;
    let grid_out = denoise::decode(&latent).stage("denoise")?;
    let mesh_out = extract_mesh(&grid_out);
    let features = transfer_features(&primitive_colors(&grid_orig, proxy), &masks, &field, cfg.fill_iters);

    let report = score(&grid_orig, &grid_out, &mesh_out, &diff, cfg.delta)?;
    Ok(PipelineOutput {
        edited,
        diff,
        grid_orig,
        grid_proxy,
        masks,
        grid_warp,
        latent,
        grid_out,
        mesh_out,
        features,
        report,
    })
}

fn score(
    grid_orig: &OccupancyGrid,
    grid_out: &OccupancyGrid,
    mesh_out: &TriangleMesh,
    diff: &PrimitiveDiff,
    delta: f64,
) -> Result<MetricsReport> {
    let reference = extract_mesh(grid_orig);
    let mut notes = Vec::new();
    let mut note = |r: std::result::Result<f64, crate::metrics::MetricsError>, name: &str| match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{name}: {e}"));
            None
        }
    };
    let chamfer = note(chamfer_accelerated(&mesh_out.vertices, &reference.vertices), "chamfer");
    let lgd = note(l_gd(&mesh_out.vertices, &reference.vertices, &edit_region(diff, delta)), "l_gd");
    let iou = grid_iou(grid_out, grid_orig).stage("metrics")?;
    Ok(MetricsReport { chamfer, l_gd: lgd, iou, notes })
}

/// File names written into the output directory.
pub mod files {
    pub const EDITED: &str = "edited.json";
    pub const GRID_ORIG: &str = "orig.pxvg";
    pub const GRID_PROXY: &str = "proxy.pxvg";
    pub const MASK_UC: &str = "mask_uc.pxvg";
    pub const MASK_ED: &str = "mask_ed.pxvg";
    pub const MASK_NEW: &str = "mask_new.pxvg";
    pub const MASK_FOOTPRINT: &str = "mask_footprint.pxvg";
    pub const WARPED: &str = "warped.pxvg";
    pub const DENOISED: &str = "denoised.pxvg";
    pub const MESH: &str = "output.obj";
    pub const METRICS: &str = "metrics.txt";
    pub const LATENT_PROXY: &str = "latent_proxy.pxlf";
    pub const LATENT_ORIG: &str = "latent_orig.pxlf";
    pub const LATENT_WARP: &str = "latent_warp.pxlf";
}

/// Masks as written by [`write_outputs`].
pub fn read_masks(dir: &Path) -> Result<MaskSet> {
    Ok(MaskSet {
        uc: io::read_pxvg(&dir.join(files::MASK_UC))?,
        ed: io::read_pxvg(&dir.join(files::MASK_ED))?,
        new: io::read_pxvg(&dir.join(files::MASK_NEW))?,
        footprint: io::read_pxvg(&dir.join(files::MASK_FOOTPRINT))?,
    })
}

pub fn write_outputs(out: &PipelineOutput, cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let w = |e: io::IoError| Error::from(e).in_stage("write");
    fs::create_dir_all(dir).map_err(|source| w(io::IoError::File { path: dir.to_path_buf(), source }))?;
    io::write_file(&dir.join(files::EDITED), out.edited.to_json().as_bytes()).map_err(w)?;
    for (name, grid) in [
        (files::GRID_ORIG, &out.grid_orig),
        (files::GRID_PROXY, &out.grid_proxy),
        (files::MASK_UC, &out.masks.uc),
        (files::MASK_ED, &out.masks.ed),
        (files::MASK_NEW, &out.masks.new),
        (files::MASK_FOOTPRINT, &out.masks.footprint),
        (files::WARPED, &out.grid_warp),
        (files::DENOISED, &out.grid_out),
    ] {
        io::write_pxvg(&dir.join(name), grid).map_err(w)?;
    }
    let colors = vertex_colors(&out.mesh_out, &out.features, &out.grid_out);
    io::save_obj_colored(&dir.join(files::MESH), &out.mesh_out, &colors).map_err(w)?;
    io::write_file(&dir.join(files::METRICS), out.report.to_text().as_bytes()).map_err(w)?;
    if cfg.save_latents {
        let (_, [tp, to, tw]) = denoise_stage(&out.grid_orig, &out.grid_warp, &out.grid_proxy, &out.masks, cfg)?;
        io::write_pxlf(&dir.join(files::LATENT_PROXY), &tp).map_err(w)?;
        io::write_pxlf(&dir.join(files::LATENT_ORIG), &to).map_err(w)?;
        io::write_pxlf(&dir.join(files::LATENT_WARP), &tw).map_err(w)?;
    }
    Ok(())
}

/// Loads inputs from disk, runs, and writes every stage file into `dir`.
pub fn run_files(mesh: &Path, proxy: &Path, script: &Path, dir: &Path, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let orig_mesh = io::load_obj(mesh).stage("load")?;
    let proxy = Proxy::from_bytes(&io::read_file(proxy).stage("load")?)
        .map_err(|e| Error::input(proxy, e).in_stage("load"))?;
    let text = String::from_utf8(io::read_file(script).stage("load")?)
        .map_err(|_| Error::input(script, "not UTF-8 text").in_stage("load"))?;
    let script_path = script;
    let script = crate::dsl::parse_script(&text).map_err(|e| Error::input(script_path, e).in_stage("parse"))?;
    let out = run_pipeline(&orig_mesh, &proxy, &script, cfg)?;
    write_outputs(&out, cfg, dir)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.123456789), "0.123457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(1.5e-7), "1.5e-07");
        assert_eq!(format_sig6(-2.5), "-2.5");
    }

    #[test]
    fn config_bounds_are_named() {
        let mut c = PipelineConfig::default();
        assert_eq!(c.schedule().unwrap(), BlendSchedule::default());
        c.resolution = 4;
        assert!(c.schedule().unwrap_err().to_string().contains("resolution 4"));
        c.resolution = 16;
        c.total_steps = 15;
        assert!(c.schedule().unwrap_err().to_string().contains("offset"));
        c.total_steps = 25;
        c.warp_offset = 20;
        assert!(c.schedule().unwrap_err().to_string().contains("t_uc"));
    }
}
