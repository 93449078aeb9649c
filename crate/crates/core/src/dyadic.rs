//! Dyadic geometry on the periodic torus: grids, cubes, cell masks,
//! conditional expectations and the dyadic maximal function.
//!
//! Cells of a depth-`K` grid are indexed row-major with the first coordinate
//! varying slowest. A generation-`k` cube is identified by the integer vector
//! `coords >> (K - k)` of any cell it contains.

use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::matfun::GridFunction;
use crate::{Mat, C64};

/// Largest supported number of cells, `2^(K n)`.
pub const MAX_CELL_LOG2: u32 = 24;

/// A depth-`K` dyadic grid on `[0,1)^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    depth: u32,
}

impl TorusGrid {
    pub fn new(n: usize, depth: u32) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(CzError::Unsupported(format!("dimension n = {n}; only 1 and 2 are supported")));
        }
        if depth as usize * n > MAX_CELL_LOG2 as usize {
            return Err(CzError::Range(format!("grid with 2^({depth}*{n}) cells exceeds the limit 2^{MAX_CELL_LOG2}")));
        }
        Ok(Self { n, depth })
    }

    /// Spatial dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Finest generation `K`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of cells along each axis.
    pub fn side(&self) -> usize {
        1usize << self.depth
    }

    pub fn cell_count(&self) -> usize {
        1usize << (self.depth as usize * self.n)
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.cell_count() as f64
    }

    /// Number of cubes in generation `k` (no range check).
    pub fn cube_count(&self, k: u32) -> usize {
        1usize << (k as usize * self.n)
    }

    /// Errors unless `lo <= k <= K`.
    pub fn check_generation(&self, k: u32, lo: u32) -> Result<()> {
        if k < lo || k > self.depth {
            return Err(CzError::GenerationOutOfRange { k: k as i64, lo: lo as i64, hi: self.depth as i64 });
        }
        Ok(())
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 2] {
        if self.n == 1 {
            [cell, 0]
        } else {
            [cell >> self.depth, cell & (self.side() - 1)]
        }
    }

    pub fn cell_from_coords(&self, c: [usize; 2]) -> usize {
        let mask = self.side() - 1;
        if self.n == 1 {
            c[0] & mask
        } else {
            ((c[0] & mask) << self.depth) | (c[1] & mask)
        }
    }

    /// The generation-`k` cube containing `cell`.
    pub fn cube_of(&self, cell: usize, k: u32) -> DyadicCube {
        let c = self.cell_coords(cell);
        let shift = self.depth - k;
        DyadicCube { n: self.n, generation: k, index: [c[0] >> shift, c[1] >> shift] }
    }

    /// Linear index of the generation-`k` cube containing `cell`.
    pub fn cube_index_of(&self, cell: usize, k: u32) -> usize {
        self.cube_of(cell, k).linear()
    }

    pub fn cube_from_linear(&self, k: u32, idx: usize) -> DyadicCube {
        let index = if self.n == 1 { [idx, 0] } else { [idx >> k, idx & ((1usize << k) - 1)] };
        DyadicCube { n: self.n, generation: k, index }
    }

    /// All cubes of generation `k` in linear order.
    pub fn cubes(&self, k: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.cube_count(k)).map(move |i| self.cube_from_linear(k, i))
    }

    /// Cells contained in `cube`, in increasing order.
    pub fn cube_cells(&self, cube: &DyadicCube) -> Vec<usize> {
        let w = 1usize << (self.depth - cube.generation);
        let o0 = cube.index[0] * w;
        if self.n == 1 {
            (o0..o0 + w).collect()
        } else {
            let o1 = cube.index[1] * w;
            let mut out = Vec::with_capacity(w * w);
            for a in o0..o0 + w {
                for b in o1..o1 + w {
                    out.push(self.cell_from_coords([a, b]));
                }
            }
            out
        }
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let c = self.cell_coords(cell);
        let h = 1.0 / self.side() as f64;
        if self.n == 1 {
            [(c[0] as f64 + 0.5) * h, 0.0]
        } else {
            [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h]
        }
    }

    /// Wrapped ℓ∞ distance between two points of the torus.
    pub fn distance(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        (0..self.n)
            .map(|i| {
                let d = (x[i] - y[i]).rem_euclid(1.0);
                d.min(1.0 - d)
            })
            .fold(0.0, f64::max)
    }

    /// Wrapped ℓ∞ distance between cell centers, computed exactly in integers.
    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        self.cell_offset_steps(a, b) as f64 / self.side() as f64
    }

    /// Wrapped ℓ∞ distance between cell centers in units of the cell side.
    pub fn cell_offset_steps(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.cell_coords(a), self.cell_coords(b));
        let side = self.side();
        (0..self.n)
            .map(|i| {
                let d = (ca[i] + side - cb[i]) % side;
                d.min(side - d)
            })
            .max()
            .unwrap_or(0)
    }
}

/// A dyadic cube: generation plus integer index vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    n: usize,
    generation: u32,
    index: [usize; 2],
}

impl DyadicCube {
    pub fn new(grid: &TorusGrid, generation: u32, index: &[usize]) -> Result<Self> {
        grid.check_generation(generation, 0)?;
        if index.len() != grid.n() {
            return Err(CzError::Shape(format!("cube index has {} entries, expected {}", index.len(), grid.n())));
        }
        let mut ix = [0usize; 2];
        for (i, &v) in index.iter().enumerate() {
            if v >= 1usize << generation {
                return Err(CzError::Range(format!("cube index {v} not below 2^{generation}")));
            }
            ix[i] = v;
        }
        Ok(Self { n: grid.n(), generation, index: ix })
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn index(&self) -> &[usize] {
        &self.index[..self.n]
    }

    pub fn side_length(&self) -> f64 {
        (-(self.generation as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        self.side_length().powi(self.n as i32)
    }

    /// Position among the cubes of the same generation.
    pub fn linear(&self) -> usize {
        if self.n == 1 {
            self.index[0]
        } else {
            (self.index[0] << self.generation) | self.index[1]
        }
    }

    pub fn father(&self) -> Option<DyadicCube> {
        (self.generation > 0).then(|| DyadicCube {
            n: self.n,
            generation: self.generation - 1,
            index: [self.index[0] >> 1, self.index[1] >> 1],
        })
    }

    /// Ancestor `steps` generations up (`steps = 0` is the cube itself).
    pub fn ancestor(&self, steps: u32) -> Option<DyadicCube> {
        (steps <= self.generation).then(|| DyadicCube {
            n: self.n,
            generation: self.generation - steps,
            index: [self.index[0] >> steps, self.index[1] >> steps],
        })
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let g = self.generation + 1;
        let [a, b] = self.index;
        if self.n == 1 {
            vec![
                DyadicCube { n: 1, generation: g, index: [2 * a, 0] },
                DyadicCube { n: 1, generation: g, index: [2 * a + 1, 0] },
            ]
        } else {
            let mut out = Vec::with_capacity(4);
            for da in 0..2 {
                for db in 0..2 {
                    out.push(DyadicCube { n: 2, generation: g, index: [2 * a + da, 2 * b + db] });
                }
            }
            out
        }
    }

    pub fn center(&self) -> [f64; 2] {
        let l = self.side_length();
        let c0 = (self.index[0] as f64 + 0.5) * l;
        if self.n == 1 {
            [c0, 0.0]
        } else {
            [c0, (self.index[1] as f64 + 0.5) * l]
        }
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.generation >= self.generation && other.ancestor(other.generation - self.generation) == Some(*self)
    }

    /// The 9-concentric father, rasterized on `grid`.
    pub fn nine_fold(&self, grid: &TorusGrid) -> CellMask {
        let mut m = CellMask::empty(grid);
        for c in dilation_cells(grid, self, 9.0) {
            m.insert(c);
        }
        m
    }
}

/// A set of generation-`K` cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    grid: TorusGrid,
    bits: Vec<bool>,
}

impl CellMask {
    pub fn empty(grid: &TorusGrid) -> Self {
        Self { grid: *grid, bits: vec![false; grid.cell_count()] }
    }

    pub fn full(grid: &TorusGrid) -> Self {
        Self { grid: *grid, bits: vec![true; grid.cell_count()] }
    }

    pub fn from_cells(grid: &TorusGrid, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m = Self::empty(grid);
        for c in cells {
            if c >= grid.cell_count() {
                return Err(CzError::Range(format!("cell {c} outside grid of {} cells", grid.cell_count())));
            }
            m.bits[c] = true;
        }
        Ok(m)
    }

    pub fn from_bits(grid: &TorusGrid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.cell_count() {
            return Err(CzError::Shape(format!(
                "mask of length {} on grid of {} cells",
                bits.len(),
                grid.cell_count()
            )));
        }
        Ok(Self { grid: *grid, bits })
    }

    /// Cells where `pred(cell)` holds.
    pub fn from_predicate(grid: &TorusGrid, pred: impl Fn(usize) -> bool) -> Self {
        Self { grid: *grid, bits: (0..grid.cell_count()).map(pred).collect() }
    }

    /// The cells of a single cube.
    pub fn from_cube(grid: &TorusGrid, cube: &DyadicCube) -> Self {
        let mut m = Self::empty(grid);
        for c in grid.cube_cells(cube) {
            m.bits[c] = true;
        }
        m
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.bits[cell]
    }

    pub fn insert(&mut self, cell: usize) {
        self.bits[cell] = true;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn union(&self, other: &CellMask) -> CellMask {
        assert_eq!(self.grid, other.grid, "mask grids differ");
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        CellMask { grid: self.grid, bits }
    }

    pub fn union_with(&mut self, other: &CellMask) {
        assert_eq!(self.grid, other.grid, "mask grids differ");
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn intersection(&self, other: &CellMask) -> CellMask {
        assert_eq!(self.grid, other.grid, "mask grids differ");
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        CellMask { grid: self.grid, bits }
    }

    pub fn complement(&self) -> CellMask {
        CellMask { grid: self.grid, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn is_subset_of(&self, other: &CellMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// True when the mask is a union of whole generation-`k` cubes.
    pub fn is_rk_set(&self, k: u32) -> bool {
        if k > self.grid.depth() {
            return false;
        }
        let mut state = vec![None::<bool>; self.grid.cube_count(k)];
        for cell in 0..self.bits.len() {
            let q = self.grid.cube_index_of(cell, k);
            match state[q] {
                None => state[q] = Some(self.bits[cell]),
                Some(v) if v != self.bits[cell] => return false,
                _ => {}
            }
        }
        true
    }

    /// Generation-`k` cubes fully contained in the mask.
    pub fn cubes(&self, k: u32) -> Vec<DyadicCube> {
        let mut inside = vec![true; self.grid.cube_count(k)];
        for cell in 0..self.bits.len() {
            if !self.bits[cell] {
                inside[self.grid.cube_index_of(cell, k)] = false;
            }
        }
        inside.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| self.grid.cube_from_linear(k, i)).collect()
    }
}

/// Union of the generation-`k` cubes meeting `support`.
pub fn smallest_rk_set(support: &CellMask, k: u32) -> Result<CellMask> {
    let grid = *support.grid();
    grid.check_generation(k, 0)?;
    let mut hit = vec![false; grid.cube_count(k)];
    for cell in support.cells() {
        hit[grid.cube_index_of(cell, k)] = true;
    }
    Ok(CellMask::from_predicate(&grid, |cell| hit[grid.cube_index_of(cell, k)]))
}

/// Cells whose centers lie in the wrapped ℓ∞ ball of radius `factor/2 · ℓ(Q)`
/// around the center of `cube`; boundary centers are included.
pub fn dilation_cells(grid: &TorusGrid, cube: &DyadicCube, factor: f64) -> Vec<usize> {
    let side = grid.side();
    let k = cube.generation();
    if factor * (-(k as f64)).exp2() >= 1.0 {
        return (0..grid.cell_count()).collect();
    }
    // Half-cell units: cell i has center 2i+1, the cube center is
    // 2^{K-k}(2j+1) and the radius is factor * 2^{K-k}.
    let scale = (1usize << (grid.depth() - k)) as f64;
    let radius = factor * scale;
    let ranges: Vec<Vec<usize>> = (0..grid.n())
        .map(|axis| {
            let c = scale * (2 * cube.index[axis] + 1) as f64;
            let lo = ((c - radius - 1.0) / 2.0).ceil() as i64;
            let hi = ((c + radius - 1.0) / 2.0).floor() as i64;
            if hi - lo + 1 >= side as i64 {
                (0..side).collect()
            } else {
                (lo..=hi).map(|i| i.rem_euclid(side as i64) as usize).collect()
            }
        })
        .collect();
    if grid.n() == 1 {
        ranges[0].clone()
    } else {
        let mut out = Vec::with_capacity(ranges[0].len() * ranges[1].len());
        for &a in &ranges[0] {
            for &b in &ranges[1] {
                out.push(grid.cell_from_coords([a, b]));
            }
        }
        out
    }
}

/// Dilation of an `R_k`-set by `factor`, cube by cube.
pub fn dilate(omega: &CellMask, k: u32, factor: f64) -> Result<CellMask> {
    let grid = *omega.grid();
    grid.check_generation(k, 0)?;
    if !omega.is_rk_set(k) {
        return Err(CzError::Contract(format!("mask is not a union of generation-{k} cubes")));
    }
    let mut out = CellMask::empty(&grid);
    for cube in omega.cubes(k) {
        if factor * (-(k as f64)).exp2() >= 1.0 {
            return Ok(CellMask::full(&grid));
        }
        for c in dilation_cells(&grid, &cube, factor) {
            out.insert(c);
        }
    }
    Ok(out)
}

pub fn dilate_9(omega: &CellMask, k: u32) -> Result<CellMask> {
    dilate(omega, k, 9.0)
}

pub fn dilate_3(omega: &CellMask, k: u32) -> Result<CellMask> {
    dilate(omega, k, 3.0)
}

/// Values that can be averaged over cubes.
pub trait Averageable: Clone {
    fn add_to(&mut self, other: &Self);
    fn scaled(self, factor: f64) -> Self;
}

impl Averageable for f64 {
    fn add_to(&mut self, other: &Self) {
        *self += *other;
    }
    fn scaled(self, factor: f64) -> Self {
        self * factor
    }
}

impl Averageable for C64 {
    fn add_to(&mut self, other: &Self) {
        *self += *other;
    }
    fn scaled(self, factor: f64) -> Self {
        self * factor
    }
}

impl Averageable for Mat {
    fn add_to(&mut self, other: &Self) {
        *self += other;
    }
    fn scaled(self, factor: f64) -> Self {
        self * C64::new(factor, 0.0)
    }
}

/// Cube averages of cell values for every generation, `out[k][cube]`.
///
/// Computed bottom-up, so every average is a balanced tree of sums and the
/// result does not depend on thread scheduling or call order.
pub fn cube_means<T: Averageable>(grid: &TorusGrid, values: &[T]) -> Vec<Vec<T>> {
    assert_eq!(values.len(), grid.cell_count(), "value count does not match grid");
    let depth = grid.depth();
    let mut levels: Vec<Vec<T>> = Vec::with_capacity(depth as usize + 1);
    levels.push(values.to_vec());
    let inv = 1.0 / (1usize << grid.n()) as f64;
    for k in (0..depth).rev() {
        let finer = levels.last().expect("finest level present");
        let coarse = grid
            .cubes(k)
            .map(|cube| {
                let kids = cube.children();
                let mut acc = finer[kids[0].linear()].clone();
                for kid in &kids[1..] {
                    acc.add_to(&finer[kid.linear()]);
                }
                acc.scaled(inv)
            })
            .collect();
        levels.push(coarse);
    }
    levels.reverse();
    levels
}

/// Spread per-cube values of generation `k` back onto cells.
pub fn expand_level<T: Clone>(grid: &TorusGrid, level: &[T], k: u32) -> Vec<T> {
    (0..grid.cell_count()).map(|c| level[grid.cube_index_of(c, k)].clone()).collect()
}

/// `E_k` on a slice of scalars.
pub fn cond_expectation_values<T: Averageable>(grid: &TorusGrid, values: &[T], k: u32) -> Result<Vec<T>> {
    grid.check_generation(k, 0)?;
    let means = cube_means(grid, values);
    Ok(expand_level(grid, &means[k as usize], k))
}

/// `E_k f`: cube averages of generation `k`, spread back onto cells.
pub fn cond_expectation(f: &GridFunction, k: u32) -> Result<GridFunction> {
    let grid = *f.grid();
    grid.check_generation(k, 0)?;
    let means = cube_means(&grid, f.values());
    let out = GridFunction::from_values_unchecked(grid, f.m(), expand_level(&grid, &means[k as usize], k));
    Ok(out.with_flags_of(f))
}

/// `Δ_k f = E_k f − E_{k−1} f`, defined for `1 ≤ k ≤ K`.
pub fn mart_diff(f: &GridFunction, k: u32) -> Result<GridFunction> {
    let grid = *f.grid();
    grid.check_generation(k, 1)?;
    let means = cube_means(&grid, f.values());
    Ok(mart_diff_from_means(&grid, f.m(), &means, k).with_hermitian_of(f))
}

pub(crate) fn mart_diff_from_means(grid: &TorusGrid, m: usize, means: &[Vec<Mat>], k: u32) -> GridFunction {
    let values = (0..grid.cell_count())
        .map(|c| &means[k as usize][grid.cube_index_of(c, k)] - &means[k as usize - 1][grid.cube_index_of(c, k - 1)])
        .collect();
    GridFunction::from_values_unchecked(*grid, m, values)
}

/// All conditional expectations `E_0 f, …, E_K f` at once.
pub fn filtration(f: &GridFunction) -> Vec<GridFunction> {
    let grid = *f.grid();
    let means = cube_means(&grid, f.values());
    (0..=grid.depth())
        .map(|k| {
            GridFunction::from_values_unchecked(grid, f.m(), expand_level(&grid, &means[k as usize], k))
                .with_flags_of(f)
        })
        .collect()
}

/// The dyadic maximal function of a nonnegative scalar function together
/// with the averages needed to answer level-set queries.
#[derive(Clone, Debug)]
pub struct DyadicMaximal {
    grid: TorusGrid,
    means: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl DyadicMaximal {
    /// `M_d f` on cells.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Average of `f` on a cube.
    pub fn mean(&self, cube: &DyadicCube) -> f64 {
        self.means[cube.generation() as usize][cube.linear()]
    }

    /// Maximal cubes with average above `lambda`; every strict ancestor has
    /// average at most `lambda`.
    pub fn maximal_cubes(&self, lambda: f64) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        for k in 0..=self.grid.depth() {
            for cube in self.grid.cubes(k) {
                if self.mean(&cube) > lambda
                    && (1..=k).all(|j| self.mean(&cube.ancestor(j).expect("ancestor exists")) <= lambda)
                {
                    out.push(cube);
                }
            }
        }
        out
    }

    /// The level set `{M_d f > λ}` as the union of maximal cubes.
    pub fn level_set(&self, lambda: f64) -> CellMask {
        let mut m = CellMask::empty(&self.grid);
        for cube in self.maximal_cubes(lambda) {
            for c in self.grid.cube_cells(&cube) {
                m.insert(c);
            }
        }
        m
    }
}

/// Dyadic maximal function of a nonnegative scalar grid function.
pub fn dyadic_maximal(f: &GridFunction) -> Result<DyadicMaximal> {
    if f.m() != 1 {
        return Err(CzError::Unsupported(
            "dyadic maximal function needs scalar values; matrices carry no total order".into(),
        ));
    }
    let grid = *f.grid();
    let mut vals = Vec::with_capacity(grid.cell_count());
    for (cell, v) in f.values().iter().enumerate() {
        let z = v[(0, 0)];
        if z.im.abs() > 1e-12 * z.norm().max(1.0) || z.re < -1e-12 {
            return Err(CzError::Precondition(format!("cell {cell} value {z} is not a nonnegative real")));
        }
        vals.push(z.re);
    }
    let means = cube_means(&grid, &vals);
    let values = (0..grid.cell_count())
        .map(|c| (0..=grid.depth()).map(|k| means[k as usize][grid.cube_index_of(c, k)]).fold(f64::MIN, f64::max))
        .collect();
    Ok(DyadicMaximal { grid, means, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(grid: TorusGrid, v: &[f64]) -> GridFunction {
        GridFunction::from_real_scalars(grid, v).unwrap()
    }

    #[test]
    fn conditional_expectation_of_ramp() {
        let g = TorusGrid::new(1, 2).unwrap();
        let e = cond_expectation(&scalar(g, &[1.0, 2.0, 3.0, 4.0]), 1).unwrap();
        let got: Vec<f64> = e.values().iter().map(|v| v[(0, 0)].re).collect();
        assert_eq!(got, vec![1.5, 1.5, 3.5, 3.5]);
    }

    #[test]
    fn generation_errors() {
        let g = TorusGrid::new(1, 3).unwrap();
        let f = scalar(g, &[0.0; 8]);
        assert!(matches!(cond_expectation(&f, 4), Err(CzError::GenerationOutOfRange { .. })));
        assert!(matches!(mart_diff(&f, 0), Err(CzError::GenerationOutOfRange { .. })));
        assert!(TorusGrid::new(3, 2).is_err());
    }

    #[test]
    fn rk_set_of_single_cell() {
        let g = TorusGrid::new(1, 3).unwrap();
        let s = CellMask::from_cells(&g, [5]).unwrap();
        let r = smallest_rk_set(&s, 1).unwrap();
        assert_eq!(r.cells().collect::<Vec<_>>(), vec![4, 5, 6, 7]);
        assert!(smallest_rk_set(&CellMask::empty(&g), 2).unwrap().is_empty());
        assert!(smallest_rk_set(&CellMask::full(&g), 0).unwrap().is_full());
    }

    #[test]
    fn nine_fold_of_finest_cube_by_enumeration() {
        let g = TorusGrid::new(1, 4).unwrap();
        let q = DyadicCube::new(&g, 4, &[0]).unwrap();
        let m = dilate_9(&CellMask::from_cube(&g, &q), 4).unwrap();
        let c = q.center();
        let expect: Vec<usize> = (0..16).filter(|&i| g.distance(g.cell_center(i), c) <= 4.5 / 16.0 + 1e-15).collect();
        assert_eq!(m.cells().collect::<Vec<_>>(), expect);
        assert_eq!(m.count(), 9);
        assert!((m.measure() - 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn dilation_saturates_and_rejects_non_rk_sets() {
        let g = TorusGrid::new(2, 4).unwrap();
        let q = DyadicCube::new(&g, 3, &[1, 2]).unwrap();
        assert!(dilate_9(&CellMask::from_cube(&g, &q), 3).unwrap().is_full());
        let odd = CellMask::from_cells(&g, [0]).unwrap();
        assert!(matches!(dilate_9(&odd, 3), Err(CzError::Contract(_))));
    }

    #[test]
    fn three_fold_in_two_dimensions() {
        let g = TorusGrid::new(2, 4).unwrap();
        let q = DyadicCube::new(&g, 3, &[0, 0]).unwrap();
        let m = dilate_3(&CellMask::from_cube(&g, &q), 3).unwrap();
        // radius 1.5 * 1/8 = 3/16 around (1/16, 1/16): cells −2..=3 per axis.
        assert_eq!(m.count(), 36);
    }

    #[test]
    fn maximal_function_of_spike() {
        let g = TorusGrid::new(1, 3).unwrap();
        let mut v = vec![0.0; 8];
        v[0] = 8.0;
        let md = dyadic_maximal(&scalar(g, &v)).unwrap();
        assert_eq!(md.values()[0], 8.0);
        assert_eq!(md.values()[1], 4.0);
        assert_eq!(md.values()[2], 2.0);
        assert_eq!(md.values()[7], 1.0);
        // brute force over all cubes containing each cell
        for cell in 0..8 {
            let best = (0..=3).map(|k| md.mean(&g.cube_of(cell, k))).fold(f64::MIN, f64::max);
            assert_eq!(best, md.values()[cell]);
        }
        let cubes = md.maximal_cubes(3.0);
        assert_eq!(cubes, vec![DyadicCube::new(&g, 2, &[0]).unwrap()]);
    }

    #[test]
    fn maximal_function_rejects_matrices() {
        let g = TorusGrid::new(1, 2).unwrap();
        let f = GridFunction::identity(&g, 2);
        assert!(matches!(dyadic_maximal(&f), Err(CzError::Unsupported(_))));
    }

    #[test]
    fn cube_family_relations() {
        let g = TorusGrid::new(2, 4).unwrap();
        let q = DyadicCube::new(&g, 3, &[5, 2]).unwrap();
        let f = q.father().unwrap();
        assert_eq!(f.index(), &[2, 1]);
        assert!(f.contains(&q));
        for ch in q.children() {
            assert_eq!(ch.father(), Some(q));
        }
        assert_eq!(g.cube_cells(&q).len(), 4);
        for c in g.cube_cells(&q) {
            assert_eq!(g.cube_of(c, 3), q);
        }
    }
}
