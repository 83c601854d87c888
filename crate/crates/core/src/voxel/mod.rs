//! Occupancy grids: proxy and mesh voxelization, edit masks, iso-surface
//! extraction.

mod extract;
mod grid;
mod rasterize;

pub use extract::extract_mesh;
pub use grid::{
    cell_center, check_resolution, OccupancyGrid, BOUNDS_MIN, DEFAULT_RESOLUTION, MAX_RESOLUTION, MIN_RESOLUTION,
};
pub use rasterize::voxelize_mesh;

use crate::proxy::{PrimitiveDiff, Proxy};
use crate::sq::PreparedSq;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VoxelError {
    #[error("grid resolution {0} outside [8, 256]")]
    Resolution(usize),
    #[error("expected {expected} cells, got {got}")]
    CellCount { expected: usize, got: usize },
    #[error("grid resolutions differ ({left} vs {right})")]
    Mismatch { left: usize, right: usize },
    #[error("primitive id {0} not in proxy")]
    UnknownId(u32),
}

/// Cells whose centers lie inside any selected primitive. `None` selects
/// every primitive; an empty slice selects none.
pub fn voxelize_proxy(proxy: &Proxy, ids: Option<&[u32]>, n: usize) -> Result<OccupancyGrid, VoxelError> {
    let selected: Vec<PreparedSq> = match ids {
        None => proxy.primitives().iter().map(|p| p.params.prepare()).collect(),
        Some(ids) => ids
            .iter()
            .map(|&id| proxy.get(id).map(|p| p.params.prepare()).ok_or(VoxelError::UnknownId(id)))
            .collect::<Result<_, _>>()?,
    };
    if selected.is_empty() {
        return OccupancyGrid::empty(n);
    }
    OccupancyGrid::from_fn(n, |c| selected.iter().any(|q| q.inside(c)))
}

/// The three edit masks plus the footprint of every touched primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    /// Original occupancy outside every touched primitive.
    pub uc: OccupancyGrid,
    /// Edited primitives at their new pose.
    pub ed: OccupancyGrid,
    /// Added primitives (edited proxy) and deleted ones (original proxy).
    pub new: OccupancyGrid,
    /// `ed ∪ new ∪` edited primitives at their old pose. Cells here that
    /// are in no mask take their content from the edited proxy.
    pub footprint: OccupancyGrid,
}

impl MaskSet {
    pub fn resolution(&self) -> usize {
        self.uc.resolution()
    }

    pub fn is_disjoint(&self) -> bool {
        self.uc.is_disjoint(&self.ed) && self.uc.is_disjoint(&self.new) && self.ed.is_disjoint(&self.new)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskOptions {
    /// Chebyshev dilation applied to `ed` and `new` before overlap resolution.
    pub dilation: usize,
}

/// Derives the edit masks. Overlaps resolve with priority new > ed > uc.
pub fn masks_from_diff(
    diff: &PrimitiveDiff,
    grid_orig: &OccupancyGrid,
    orig: &Proxy,
    edit: &Proxy,
    opts: MaskOptions,
) -> Result<MaskSet, VoxelError> {
    let n = grid_orig.resolution();
    let edited = diff.edited_ids();
    let ed = voxelize_proxy(edit, Some(&edited), n)?.dilate(opts.dilation);
    let old_ed = voxelize_proxy(orig, Some(&edited), n)?;
    let new = voxelize_proxy(edit, Some(&diff.added_ids()), n)?
        .union(&voxelize_proxy(orig, Some(&diff.deleted_ids()), n)?)?
        .dilate(opts.dilation);
    let ed = ed.difference(&new)?;
    let footprint = ed.union(&new)?.union(&old_ed)?;
    let uc = grid_orig.difference(&footprint)?;
    Ok(MaskSet { uc, ed, new, footprint })
}
