use crate::sq::PreparedSq;
use crate::voxel::{MaskSet, OccupancyGrid, VoxelError};
use crate::warp::{edit_owner, WarpField};

pub const DEFAULT_FILL_ITERS: usize = 32;

/// Per-cell RGB with a defined flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    n: usize,
    colors: Vec<[f64; 3]>,
    defined: Vec<bool>,
}

impl FeatureGrid {
    pub fn new(n: usize) -> Result<Self, VoxelError> {
        crate::voxel::check_resolution(n)?;
        Ok(FeatureGrid { n, colors: vec![[0.0; 3]; n * n * n], defined: vec![false; n * n * n] })
    }

    /// Colors `f(idx)` on the occupied cells of `grid`.
    pub fn from_occupancy(grid: &OccupancyGrid, f: impl Fn(usize) -> [f64; 3]) -> Self {
        let mut out = FeatureGrid::new(grid.resolution()).expect("valid resolution");
        for idx in (0..grid.len()).filter(|&i| grid.at(i)) {
            out.set(idx, f(idx));
        }
        out
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.defined.iter().any(|&d| d)
    }

    pub fn get(&self, idx: usize) -> Option<[f64; 3]> {
        self.defined[idx].then_some(self.colors[idx])
    }

    pub fn set(&mut self, idx: usize, c: [f64; 3]) {
        self.colors[idx] = c;
        self.defined[idx] = true;
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }
}

/// Carries colors onto the edited shape: `uc` copies, `ed` gathers from the
/// pre-edit location of its owning primitive, and `new` or unmapped cells
/// are filled by `fill_iters` rounds of 6-neighbor averaging.
pub fn transfer_features(feat: &FeatureGrid, masks: &MaskSet, field: &WarpField, fill_iters: usize) -> FeatureGrid {
    let n = feat.n;
    let grid = &masks.uc;
    let mut out = FeatureGrid::new(n).expect("valid resolution");
    let mut pending = Vec::new();
    let supports: Vec<PreparedSq> = field.entries.iter().map(|e| e.edit.prepare()).collect();
    for idx in 0..feat.len() {
        if masks.uc.at(idx) {
            match feat.get(idx) {
                Some(c) => out.set(idx, c),
                None => pending.push(idx),
            }
        } else if masks.ed.at(idx) {
            let c = grid.center(idx);
            let src = edit_owner(field, &supports, &c)
                .and_then(|e| grid.cell_of(&field.entries[e].rel_inv.transform_point(&c)))
                .and_then(|s| feat.get(s));
            match src {
                Some(col) => out.set(idx, col),
                None => pending.push(idx),
            }
        } else if masks.new.at(idx) {
            pending.push(idx);
        }
    }

    for _ in 0..fill_iters {
        if pending.is_empty() {
            break;
        }
        let mut filled = Vec::new();
        pending.retain(|&idx| {
            let (i, j, k) = grid.coords(idx);
            let mut sum = [0.0; 3];
            let mut count = 0;
            let mut take = |i: usize, j: usize, k: usize| {
                if let Some(c) = out.get(grid.index(i, j, k)) {
                    for a in 0..3 {
                        sum[a] += c[a];
                    }
                    count += 1;
                }
            };
            if i > 0 {
                take(i - 1, j, k);
            }
            if i + 1 < n {
                take(i + 1, j, k);
            }
            if j > 0 {
                take(i, j - 1, k);
            }
            if j + 1 < n {
                take(i, j + 1, k);
            }
            if k > 0 {
                take(i, j, k - 1);
            }
            if k + 1 < n {
                take(i, j, k + 1);
            }
            if count == 0 {
                return true;
            }
            filled.push((idx, sum.map(|s| s / count as f64)));
            false
        });
        for (idx, c) in filled {
            out.set(idx, c);
        }
    }
    out
}
