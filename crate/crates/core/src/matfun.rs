//! Matrix-valued grid functions and the trace calculus on them: the trace
//! `φ(f) = ∫ tr f`, `L_p` and weak-`L_1` norms, spectral projections and
//! projection order.

use std::ops::{Add, Mul, Neg, Sub};

use crate::dyadic::{expand_level, TorusGrid};
use crate::error::{CzError, Result};
use crate::linalg::{self, frobenius, herm_eigen, projection_basis, real};
use crate::{Mat, C64};

/// Per-cell constant map from a dyadic grid to `m × m` complex matrices.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: TorusGrid,
    m: usize,
    values: Vec<Mat>,
    hermitian: bool,
    psd: bool,
}

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

impl GridFunction {
    /// Builds a function from per-cell values; flags start unset.
    pub fn new(grid: TorusGrid, m: usize, values: Vec<Mat>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(CzError::Shape(format!("{} values for {} cells", values.len(), grid.cell_count())));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.nrows() != m || v.ncols() != m) {
            return Err(CzError::Shape(format!(
                "cell {i} holds a {}x{} matrix, expected {m}x{m}",
                v.nrows(),
                v.ncols()
            )));
        }
        Ok(Self::from_values_unchecked(grid, m, values))
    }

    pub(crate) fn from_values_unchecked(grid: TorusGrid, m: usize, values: Vec<Mat>) -> Self {
        Self { grid, m, values, hermitian: false, psd: false }
    }

    pub fn from_fn(grid: &TorusGrid, m: usize, f: impl Fn(usize) -> Mat) -> Result<Self> {
        Self::new(*grid, m, (0..grid.cell_count()).map(f).collect())
    }

    pub fn zeros(grid: &TorusGrid, m: usize) -> Self {
        let mut z = Self::from_values_unchecked(*grid, m, vec![Mat::zeros(m, m); grid.cell_count()]);
        z.hermitian = true;
        z.psd = true;
        z
    }

    pub fn identity(grid: &TorusGrid, m: usize) -> Self {
        Self::constant(grid, &linalg::identity(m)).with_psd().expect("identity is PSD")
    }

    pub fn constant(grid: &TorusGrid, value: &Mat) -> Self {
        Self::from_values_unchecked(*grid, value.nrows(), vec![value.clone(); grid.cell_count()])
    }

    /// Values of a generation-`k` cube family spread onto cells.
    pub fn from_cube_values(grid: &TorusGrid, k: u32, m: usize, cube_values: &[Mat]) -> Result<Self> {
        grid.check_generation(k, 0)?;
        if cube_values.len() != grid.cube_count(k) {
            return Err(CzError::Shape(format!("{} cube values for generation {k}", cube_values.len())));
        }
        Self::new(*grid, m, expand_level(grid, cube_values, k))
    }

    /// Real scalar function (`m = 1`), flagged Hermitian.
    pub fn from_real_scalars(grid: TorusGrid, v: &[f64]) -> Result<Self> {
        let f = Self::new(grid, 1, v.iter().map(|&x| Mat::from_element(1, 1, real(x))).collect())?;
        Ok(Self { hermitian: true, ..f })
    }

    pub fn from_scalars(grid: TorusGrid, v: &[C64]) -> Result<Self> {
        Self::new(grid, 1, v.iter().map(|&x| Mat::from_element(1, 1, x)).collect())
    }

    /// Matrix entry `(i, j)` as a scalar field.
    pub fn entry(&self, i: usize, j: usize) -> Vec<C64> {
        self.values.iter().map(|v| v[(i, j)]).collect()
    }

    /// Assembles a function from `m²` entry fields (row-major).
    pub fn from_entries(grid: &TorusGrid, m: usize, entries: &[Vec<C64>]) -> Result<Self> {
        if entries.len() != m * m || entries.iter().any(|e| e.len() != grid.cell_count()) {
            return Err(CzError::Shape("entry fields do not match matrix size or grid".into()));
        }
        Self::from_fn(grid, m, |c| Mat::from_fn(m, m, |i, j| entries[i * m + j][c]))
    }

    pub fn scalar_values(&self) -> Result<Vec<C64>> {
        if self.m != 1 {
            return Err(CzError::Unsupported(format!("expected scalar values, found {0}x{0} matrices", self.m)));
        }
        Ok(self.entry(0, 0))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> &Mat {
        &self.values[cell]
    }

    pub fn into_values(self) -> Vec<Mat> {
        self.values
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    /// Validates and sets the Hermitian flag.
    pub fn with_hermitian(mut self) -> Result<Self> {
        for (i, v) in self.values.iter().enumerate() {
            let d = linalg::hermitian_defect(v);
            if d > HERMITIAN_TOL * frobenius(v) {
                return Err(CzError::Contract(format!("cell {i} is not Hermitian (defect {d:.3e})")));
            }
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Validates and sets both the Hermitian and PSD flags.
    pub fn with_psd(self) -> Result<Self> {
        let mut f = self.with_hermitian()?;
        for (i, v) in f.values.iter().enumerate() {
            let ev = linalg::herm_eigenvalues(v);
            let top = ev.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let low = ev.first().copied().unwrap_or(0.0);
            if low < -PSD_TOL * top {
                return Err(CzError::Contract(format!(
                    "cell {i} is not positive semidefinite (min eigenvalue {low:.3e})"
                )));
            }
        }
        f.psd = true;
        Ok(f)
    }

    /// Symmetrizes every value and sets the Hermitian flag.
    pub fn hermitian_part(&self) -> Self {
        let values = self.values.iter().map(|v| (v + v.adjoint()) * real(0.5)).collect();
        Self { hermitian: true, ..Self::from_values_unchecked(self.grid, self.m, values) }
    }

    pub(crate) fn with_flags_of(mut self, src: &GridFunction) -> Self {
        self.hermitian = src.hermitian;
        self.psd = src.psd;
        self
    }

    pub(crate) fn with_hermitian_of(mut self, src: &GridFunction) -> Self {
        self.hermitian = src.hermitian;
        self
    }

    pub fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self::from_values_unchecked(self.grid, self.m, self.values.iter().map(f).collect())
    }

    pub fn map_indexed(&self, f: impl Fn(usize, &Mat) -> Mat) -> Self {
        Self::from_values_unchecked(self.grid, self.m, self.values.iter().enumerate().map(|(i, v)| f(i, v)).collect())
    }

    pub fn adjoint(&self) -> Self {
        self.map(|v| v.adjoint()).with_flags_of(self)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.map(|v| v * real(c));
        out.hermitian = self.hermitian;
        out.psd = self.psd && c >= 0.0;
        out
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    /// `a · f · b` cellwise.
    pub fn sandwich(&self, a: &GridFunction, b: &GridFunction) -> Self {
        self.assert_compatible(a);
        self.assert_compatible(b);
        self.map_indexed(|i, v| &a.values[i] * v * &b.values[i])
    }

    /// `A f B` for constant matrices.
    pub fn const_sandwich(&self, a: &Mat, b: &Mat) -> Self {
        self.map(|v| a * v * b)
    }

    /// Largest cellwise Frobenius distance.
    pub fn max_diff(&self, other: &GridFunction) -> f64 {
        self.assert_compatible(other);
        self.values.iter().zip(&other.values).map(|(a, b)| frobenius(&(a - b))).fold(0.0, f64::max)
    }

    pub fn max_norm_frobenius(&self) -> f64 {
        self.values.iter().map(frobenius).fold(0.0, f64::max)
    }

    fn assert_compatible(&self, other: &GridFunction) {
        assert!(self.grid == other.grid && self.m == other.m, "grid functions live on different grids or sizes");
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.assert_compatible(rhs);
        let mut out = GridFunction::from_values_unchecked(
            self.grid,
            self.m,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        );
        out.hermitian = self.hermitian && rhs.hermitian;
        out.psd = self.psd && rhs.psd;
        out
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.assert_compatible(rhs);
        let mut out = GridFunction::from_values_unchecked(
            self.grid,
            self.m,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        );
        out.hermitian = self.hermitian && rhs.hermitian;
        out
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;
    fn neg(self) -> GridFunction {
        self.map(|v| -v).with_hermitian_of(self)
    }
}

/// Cellwise matrix product.
impl Mul for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        self.assert_compatible(rhs);
        GridFunction::from_values_unchecked(
            self.grid,
            self.m,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect(),
        )
    }
}

/// Balanced pairwise summation; the order depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Complex pairwise summation.
pub fn pairwise_sum_complex(v: &[C64]) -> C64 {
    match v.len() {
        0 => C64::new(0.0, 0.0),
        1 => v[0],
        n => pairwise_sum_complex(&v[..n / 2]) + pairwise_sum_complex(&v[n / 2..]),
    }
}

/// `φ(f) = Σ_cells tr f(x) · |cell|`, complex valued.
pub fn trace_phi_complex(f: &GridFunction) -> C64 {
    let traces: Vec<C64> = f.values.iter().map(|v| v.trace()).collect();
    pairwise_sum_complex(&traces) * f.grid.cell_volume()
}

/// Real part of `φ(f)`.
pub fn trace_phi(f: &GridFunction) -> f64 {
    let t = trace_phi_complex(f);
    debug_assert!(
        !f.hermitian || t.im.abs() <= 1e-12 * t.re.abs().max(1.0),
        "trace of a Hermitian function has imaginary part {}",
        t.im
    );
    t.re
}

/// `⟨f, g⟩ = φ(f* g)`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> C64 {
    f.assert_compatible(g);
    let cells: Vec<C64> =
        f.values.iter().zip(&g.values).map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()).collect();
    pairwise_sum_complex(&cells) * f.grid.cell_volume()
}

fn cell_singular_values(f: &GridFunction, v: &Mat) -> Vec<f64> {
    if f.m == 1 {
        vec![v[(0, 0)].norm()]
    } else if f.hermitian {
        linalg::herm_eigenvalues(v).into_iter().map(f64::abs).collect()
    } else {
        linalg::singular_values(v)
    }
}

/// Noncommutative `L_p` norm, `1 ≤ p ≤ ∞`.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(CzError::Range(format!("L_p exponent p = {p} must be at least 1")));
    }
    if p.is_infinite() {
        return Ok(f
            .values
            .iter()
            .map(|v| cell_singular_values(f, v).into_iter().fold(0.0, f64::max))
            .fold(0.0, f64::max));
    }
    let per_cell: Vec<f64> = if p == 2.0 {
        f.values.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum()).collect()
    } else {
        f.values.iter().map(|v| cell_singular_values(f, v).iter().map(|s| s.powf(p)).sum()).collect()
    };
    Ok((pairwise_sum(&per_cell) * f.grid.cell_volume()).powf(1.0 / p))
}

/// `φ{|f| > λ}`: weighted count of singular values above `λ`.
pub fn distribution(f: &GridFunction, lambda: f64) -> f64 {
    let counts: Vec<f64> =
        f.values.iter().map(|v| cell_singular_values(f, v).iter().filter(|&&s| s > lambda).count() as f64).collect();
    pairwise_sum(&counts) * f.grid.cell_volume()
}

/// Exact weak-`L_1` quasinorm `sup_λ λ φ{|f| > λ}`, evaluated at the
/// singular-value breakpoints.
pub fn weak_l1(f: &GridFunction) -> f64 {
    let mut sv: Vec<f64> = f.values.iter().flat_map(|v| cell_singular_values(f, v)).filter(|&s| s > 0.0).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let w = f.grid.cell_volume();
    let mut best = 0.0f64;
    let mut i = 0;
    while i < sv.len() {
        let mut j = i;
        while j < sv.len() && sv[j] == sv[i] {
            j += 1;
        }
        best = best.max(sv[i] * j as f64 * w);
        i = j;
    }
    best
}

/// Per-cell `|f| = (f* f)^{1/2}`.
pub fn op_abs(f: &GridFunction) -> GridFunction {
    let mut out = f.map(linalg::abs);
    out.hermitian = true;
    out.psd = true;
    out
}

/// `P ≤ Q` in projection order.
pub fn proj_leq(p: &Mat, q: &Mat) -> bool {
    linalg::proj_leq(p, q)
}

/// How the zero eigenspace is treated by [`spectral_proj_leq`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpectralMode {
    /// Eigenvalues in `[0, λ]`; kernel directions inside `within` are kept.
    #[default]
    Inclusive,
    /// Eigenvalues in `(0, λ]` only.
    Strict,
}

/// Projection onto the eigenvectors of `a` inside `range(within)` with
/// eigenvalue at most `λ + 1e-10·max(1, ‖a‖)`.
pub fn spectral_proj_leq(a: &Mat, lambda: f64, within: &Mat, mode: SpectralMode) -> Result<Mat> {
    let m = a.nrows();
    if a.ncols() != m || within.nrows() != m || within.ncols() != m {
        return Err(CzError::Shape("matrix and projection sizes differ".into()));
    }
    let scale = linalg::op_norm(a).max(1.0);
    let tol = 1e-10 * scale;
    if linalg::hermitian_defect(a) > tol {
        return Err(CzError::Contract("spectral projection of a non-Hermitian matrix".into()));
    }
    linalg::check_projection(within, 1e-10, "`within`")?;
    if frobenius(&(a - within * a * within)) > tol {
        return Err(CzError::Contract("matrix is not supported inside `within`".into()));
    }
    let basis = projection_basis(within);
    if basis.ncols() == 0 {
        return Ok(Mat::zeros(m, m));
    }
    let compressed = basis.adjoint() * a * &basis;
    let (vals, vecs) = herm_eigen(&compressed);
    if let Some(&low) = vals.first() {
        if low < -tol {
            return Err(CzError::Contract(format!("matrix is not positive semidefinite (eigenvalue {low:.3e})")));
        }
    }
    let keep: Vec<bool> =
        vals.iter().map(|&v| v <= lambda + tol && (mode == SpectralMode::Inclusive || v > tol)).collect();
    // Whole or empty selections return exact projections, so differences of
    // consecutive projections vanish exactly when nothing changes.
    if keep.iter().all(|&k| k) {
        return Ok(within.clone());
    }
    if !keep.iter().any(|&k| k) {
        return Ok(Mat::zeros(m, m));
    }
    let lifted = &basis * vecs;
    Ok(linalg::projector_from_columns(&lifted, keep.into_iter()))
}

/// A grid function whose values are orthogonal projections, constant on the
/// cubes of a declared generation.
#[derive(Clone, Debug)]
pub struct ProjectionField {
    func: GridFunction,
    generation: u32,
}

impl ProjectionField {
    /// Validates projection values and exact constancy on generation cubes.
    pub fn new(func: GridFunction, generation: u32) -> Result<Self> {
        let grid = *func.grid();
        grid.check_generation(generation, 0)?;
        for cube in grid.cubes(generation) {
            let cells = grid.cube_cells(&cube);
            let first = &func.values[cells[0]];
            linalg::check_projection(first, 1e-10, &format!("value on cube {:?}", cube.index()))?;
            if cells.iter().any(|&c| func.values[c] != *first) {
                return Err(CzError::Contract(format!(
                    "projection field not constant on generation-{generation} cube {:?}",
                    cube.index()
                )));
            }
        }
        Ok(Self::new_unchecked(func, generation))
    }

    pub(crate) fn new_unchecked(mut func: GridFunction, generation: u32) -> Self {
        func.hermitian = true;
        func.psd = true;
        Self { func, generation }
    }

    pub fn from_cube_values(grid: &TorusGrid, k: u32, m: usize, cube_values: &[Mat]) -> Result<Self> {
        Self::new(GridFunction::from_cube_values(grid, k, m, cube_values)?, k)
    }

    pub fn identity(grid: &TorusGrid, m: usize) -> Self {
        Self::new_unchecked(GridFunction::identity(grid, m), 0)
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn function(&self) -> &GridFunction {
        &self.func
    }

    pub fn value(&self, cell: usize) -> &Mat {
        self.func.value(cell)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.func.grid()
    }

    pub fn m(&self) -> usize {
        self.func.m()
    }

    /// `1 − P` cellwise.
    pub fn complement(&self) -> ProjectionField {
        let id = linalg::identity(self.m());
        Self::new_unchecked(self.func.map(|v| &id - v), self.generation)
    }

    /// Cellwise `P ≤ Q`.
    pub fn leq(&self, other: &ProjectionField) -> bool {
        self.func.values.iter().zip(other.func.values.iter()).all(|(p, q)| proj_leq(p, q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { real(v[i]) } else { real(0.0) })
    }

    #[test]
    fn trace_of_identity() {
        let g = TorusGrid::new(2, 3).unwrap();
        assert!((trace_phi(&GridFunction::identity(&g, 3)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn lp_norm_examples() {
        let g = TorusGrid::new(1, 3).unwrap();
        let half = GridFunction::from_real_scalars(g, &[1., 1., 1., 1., 0., 0., 0., 0.]).unwrap();
        assert!((lp_norm(&half, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let d = GridFunction::constant(&g, &diag(&[3.0, 4.0]));
        assert!((lp_norm(&d, 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((lp_norm(&d, 1.0).unwrap() - 7.0).abs() < 1e-14);
        assert!((lp_norm(&d, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
        assert!(matches!(lp_norm(&d, 0.5), Err(CzError::Range(_))));
    }

    #[test]
    fn weak_l1_examples() {
        let g = TorusGrid::new(1, 3).unwrap();
        let half = GridFunction::from_real_scalars(g, &[1., 1., 1., 1., 0., 0., 0., 0.]).unwrap();
        assert!((weak_l1(&half) - 0.5).abs() < 1e-15);
        let d = GridFunction::constant(&g, &diag(&[2.0, 1.0]));
        assert!((weak_l1(&d) - 2.0).abs() < 1e-14);
        assert_eq!(weak_l1(&GridFunction::zeros(&g, 2)), 0.0);
    }

    #[test]
    fn spectral_projection_examples() {
        let p = spectral_proj_leq(&diag(&[0.5, 2.0]), 1.0, &linalg::identity(2), SpectralMode::Inclusive).unwrap();
        assert!(frobenius(&(p - diag(&[1.0, 0.0]))) < 1e-14);
        let q = diag(&[1.0, 0.0, 1.0]);
        let z = spectral_proj_leq(&Mat::zeros(3, 3), 0.0, &q, SpectralMode::Inclusive).unwrap();
        assert!(frobenius(&(z - &q)) < 1e-14);
        let s = spectral_proj_leq(&Mat::zeros(3, 3), 0.0, &q, SpectralMode::Strict).unwrap();
        assert!(frobenius(&s) < 1e-14);
    }

    #[test]
    fn spectral_projection_rejects_bad_input() {
        let mut a = diag(&[1.0, 1.0]);
        a[(0, 1)] = real(1.0);
        assert!(matches!(
            spectral_proj_leq(&a, 1.0, &linalg::identity(2), SpectralMode::Inclusive),
            Err(CzError::Contract(_))
        ));
        let neg = diag(&[-1.0, 1.0]);
        assert!(spectral_proj_leq(&neg, 1.0, &linalg::identity(2), SpectralMode::Inclusive).is_err());
        let outside = diag(&[1.0, 1.0]);
        assert!(spectral_proj_leq(&outside, 1.0, &diag(&[1.0, 0.0]), SpectralMode::Inclusive).is_err());
    }

    #[test]
    fn tie_at_threshold_is_included() {
        let p = spectral_proj_leq(&diag(&[1.0, 3.0]), 1.0, &linalg::identity(2), SpectralMode::Strict).unwrap();
        assert!(frobenius(&(p - diag(&[1.0, 0.0]))) < 1e-14);
    }

    #[test]
    fn psd_flag_validation() {
        let g = TorusGrid::new(1, 2).unwrap();
        assert!(GridFunction::constant(&g, &diag(&[1.0, -1.0])).with_psd().is_err());
        assert!(GridFunction::constant(&g, &diag(&[1.0, -1.0])).with_hermitian().is_ok());
        let mut nh = diag(&[1.0, 1.0]);
        nh[(0, 1)] = real(2.0);
        assert!(GridFunction::constant(&g, &nh).with_hermitian().is_err());
    }

    #[test]
    fn projection_field_constancy() {
        let g = TorusGrid::new(1, 2).unwrap();
        let vals = vec![diag(&[1.0, 0.0]), diag(&[1.0, 0.0]), diag(&[0.0, 1.0]), diag(&[0.0, 1.0])];
        let f = GridFunction::new(g, 2, vals).unwrap();
        assert!(ProjectionField::new(f.clone(), 1).is_ok());
        assert!(ProjectionField::new(f, 0).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499500.0);
    }
}
