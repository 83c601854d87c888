//! Piecewise-rigid relocation of the original shape along edited primitives.

use rayon::prelude::*;

use crate::proxy::PrimitiveDiff;
use crate::sq::{Mat4, PreparedSq, SuperquadricParams, Vec3};
use crate::voxel::OccupancyGrid;

/// Default membership slack on the implicit value.
pub const DEFAULT_DELTA: f64 = 0.1;

/// `pose(q_edit) · pose(q_orig)⁻¹`.
pub fn relative_transform(q_orig: &SuperquadricParams, q_edit: &SuperquadricParams) -> Mat4 {
    q_edit.pose_matrix() * q_orig.pose_inverse()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpEntry {
    pub id: u32,
    pub rel: Mat4,
    pub rel_inv: Mat4,
    /// Support before the edit.
    pub orig: SuperquadricParams,
    pub edit: SuperquadricParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    pub entries: Vec<WarpEntry>,
    pub delta: f64,
}

impl WarpField {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One entry per edited pair, in diff order.
pub fn build_warp_field(diff: &PrimitiveDiff, delta: f64) -> WarpField {
    let entries = diff
        .edited
        .iter()
        .map(|(o, e)| WarpEntry {
            id: o.id,
            rel: relative_transform(&o.params, &e.params),
            rel_inv: relative_transform(&e.params, &o.params),
            orig: o.params,
            edit: e.params,
        })
        .collect();
    WarpField { entries, delta }
}

/// Index of the support with the smallest implicit value not above
/// `1 + delta`.
fn owner(supports: &[PreparedSq], delta: f64, p: &Vec3) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in supports.iter().enumerate() {
        let f = s.implicit_value(p);
        if f <= 1.0 + delta && !matches!(best, Some((_, b)) if f >= b) {
            best = Some((i, f));
        }
    }
    best.map(|(i, _)| i)
}

/// Moves each point by the transform of the original support containing it.
pub fn warp_points(points: &[Vec3], field: &WarpField) -> Vec<Vec3> {
    if field.is_empty() {
        return points.to_vec();
    }
    let supports: Vec<PreparedSq> = field.entries.iter().map(|e| e.orig.prepare()).collect();
    points
        .par_iter()
        .map(|p| match owner(&supports, field.delta, p) {
            Some(i) => field.entries[i].rel.transform_point(p),
            None => *p,
        })
        .collect()
}

/// Grid analog of [`warp_points`] by inverse lookup: cells claimed by an
/// edited support read the original occupancy at their pre-edit location.
pub fn warp_grid(grid_orig: &OccupancyGrid, field: &WarpField) -> OccupancyGrid {
    if field.is_empty() {
        return grid_orig.clone();
    }
    let supports: Vec<PreparedSq> = field.entries.iter().map(|e| e.edit.prepare()).collect();
    let cells = (0..grid_orig.len())
        .into_par_iter()
        .map(|idx| {
            let c = grid_orig.center(idx);
            match owner(&supports, field.delta, &c) {
                Some(i) => {
                    let src = field.entries[i].rel_inv.transform_point(&c);
                    grid_orig.cell_of(&src).is_some_and(|s| grid_orig.at(s))
                }
                None => grid_orig.at(idx),
            }
        })
        .collect();
    OccupancyGrid::from_cells(grid_orig.resolution(), cells).expect("same resolution")
}

/// Entry index owning `c` under the edited supports, shared with feature
/// transfer.
pub(crate) fn edit_owner(field: &WarpField, supports: &[PreparedSq], c: &Vec3) -> Option<usize> {
    owner(supports, field.delta, c)
}
