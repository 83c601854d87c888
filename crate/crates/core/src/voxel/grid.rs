use rayon::prelude::*;

use crate::sq::Vec3;

use super::VoxelError;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 256;
/// Lower corner of the normalized object cube `[-0.5, 0.5]³`.
pub const BOUNDS_MIN: f64 = -0.5;

pub fn check_resolution(n: usize) -> Result<(), VoxelError> {
    if (MIN_RESOLUTION..=MAX_RESOLUTION).contains(&n) {
        Ok(())
    } else {
        Err(VoxelError::Resolution(n))
    }
}

/// Center coordinate of cell `i` along one axis.
pub fn cell_center(n: usize, i: usize) -> f64 {
    BOUNDS_MIN + (i as f64 + 0.5) / n as f64
}

/// Dense `N³` occupancy over the normalized cube, x-fastest.
#[derive(Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    n: usize,
    cells: Vec<bool>,
}

impl std::fmt::Debug for OccupancyGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OccupancyGrid {{ n: {}, occupied: {} }}", self.n, self.count())
    }
}

impl OccupancyGrid {
    pub fn empty(n: usize) -> Result<Self, VoxelError> {
        check_resolution(n)?;
        Ok(OccupancyGrid { n, cells: vec![false; n * n * n] })
    }

    pub fn full(n: usize) -> Result<Self, VoxelError> {
        check_resolution(n)?;
        Ok(OccupancyGrid { n, cells: vec![true; n * n * n] })
    }

    pub fn from_cells(n: usize, cells: Vec<bool>) -> Result<Self, VoxelError> {
        check_resolution(n)?;
        if cells.len() != n * n * n {
            return Err(VoxelError::CellCount { expected: n * n * n, got: cells.len() });
        }
        Ok(OccupancyGrid { n, cells })
    }

    /// Occupancy from a predicate on cell centers, evaluated in parallel.
    pub fn from_fn<F>(n: usize, f: F) -> Result<Self, VoxelError>
    where
        F: Fn(&Vec3) -> bool + Sync,
    {
        check_resolution(n)?;
        let cells = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n, idx / n % n, idx / (n * n));
                f(&Vec3::new(cell_center(n, i), cell_center(n, j), cell_center(n, k)))
            })
            .collect();
        Ok(OccupancyGrid { n, cells })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        (idx % self.n, idx / self.n % self.n, idx / (self.n * self.n))
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.coords(idx);
        Vec3::new(cell_center(self.n, i), cell_center(self.n, j), cell_center(self.n, k))
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn at(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.cells[idx] = value;
    }

    pub fn set_at(&mut self, idx: usize, value: bool) {
        self.cells[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Index of the cell containing `p`, or `None` outside the cube.
    pub fn cell_of(&self, p: &Vec3) -> Option<usize> {
        let n = self.n as f64;
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - BOUNDS_MIN) * n).floor();
            if !(0.0..n).contains(&f) {
                return None;
            }
            ijk[a] = f as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }

    fn same_size(&self, other: &OccupancyGrid) -> Result<(), VoxelError> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(VoxelError::Mismatch { left: self.n, right: other.n })
        }
    }

    fn zip_with(&self, other: &OccupancyGrid, f: impl Fn(bool, bool) -> bool) -> Result<Self, VoxelError> {
        self.same_size(other)?;
        Ok(OccupancyGrid {
            n: self.n,
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &OccupancyGrid) -> Result<Self, VoxelError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &OccupancyGrid) -> Result<Self, VoxelError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &OccupancyGrid) -> Result<Self, VoxelError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Self {
        OccupancyGrid { n: self.n, cells: self.cells.iter().map(|c| !c).collect() }
    }

    pub fn is_disjoint(&self, other: &OccupancyGrid) -> bool {
        self.n == other.n && !self.cells.iter().zip(&other.cells).any(|(&a, &b)| a && b)
    }

    /// Chebyshev-ball dilation by `radius` cells.
    pub fn dilate(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let n = self.n as isize;
        let r = radius as isize;
        let mut out = self.clone();
        for idx in 0..self.cells.len() {
            if !self.cells[idx] {
                continue;
            }
            let (i, j, k) = self.coords(idx);
            let (i, j, k) = (i as isize, j as isize, k as isize);
            for dk in -r..=r {
                for dj in -r..=r {
                    for di in -r..=r {
                        let (x, y, z) = (i + di, j + dj, k + dk);
                        if (0..n).contains(&x) && (0..n).contains(&y) && (0..n).contains(&z) {
                            let id = out.index(x as usize, y as usize, z as usize);
                            out.cells[id] = true;
                        }
                    }
                }
            }
        }
        out
    }
}
