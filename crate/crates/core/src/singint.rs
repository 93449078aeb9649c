//! Discretized singular integral operators on the torus: Fourier
//! multipliers, kernel tables with truncation, kernel validation, the dyadic
//! paraproduct and the band operators of the operator-valued counterexample.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::dyadic::{cube_means, expand_level, TorusGrid};
use crate::error::{CzError, Result};
use crate::linalg::{self, real};
use crate::matfun::GridFunction;
use crate::{Mat, C64};

/// A linear map on scalar fields over a fixed grid, together with its
/// adjoint for the inner product `Σ conj(u) v · |cell|`.
pub trait LinearMap: Sync {
    fn grid(&self) -> &TorusGrid;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64>;
}

/// Cached forward and inverse transforms for one grid.
#[derive(Clone)]
pub struct FftPlan {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

impl FftPlan {
    pub fn new(grid: &TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let side = grid.side();
        Self { grid: *grid, fwd: planner.plan_fft_forward(side), inv: planner.plan_fft_inverse(side) }
    }

    fn run(&self, data: &mut [C64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let side = self.grid.side();
        if self.grid.n() == 1 {
            plan.process(data);
        } else {
            for row in data.chunks_mut(side) {
                plan.process(row);
            }
            let mut col = vec![C64::new(0.0, 0.0); side];
            for j in 0..side {
                for i in 0..side {
                    col[i] = data[i * side + j];
                }
                plan.process(&mut col);
                for i in 0..side {
                    data[i * side + j] = col[i];
                }
            }
        }
        if inverse {
            let s = 1.0 / self.grid.cell_count() as f64;
            for z in data.iter_mut() {
                *z *= s;
            }
        }
    }

    /// Unnormalized forward DFT over cells.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, false)
    }

    /// Inverse DFT including the `1/N` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, true)
    }

    /// `F⁻¹(symbol · F v)`.
    pub fn multiply(&self, symbol: &[C64], v: &[C64]) -> Vec<C64> {
        let mut w = v.to_vec();
        self.forward(&mut w);
        for (z, s) in w.iter_mut().zip(symbol) {
            *z *= s;
        }
        self.inverse(&mut w);
        w
    }
}

/// Signed frequency of DFT index `i` on an axis of length `side`; the
/// Nyquist index maps to `None`.
pub fn signed_frequency(i: usize, side: usize) -> Option<i64> {
    let half = side / 2;
    if side > 1 && i == half {
        None
    } else if i < half || side == 1 {
        Some(i as i64)
    } else {
        Some(i as i64 - side as i64)
    }
}

/// Symbol `−i·sign(ν)` with zero at `ν = 0` and at Nyquist.
pub fn hilbert_symbol(grid: &TorusGrid) -> Result<Vec<C64>> {
    if grid.n() != 1 {
        return Err(CzError::Unsupported("the Hilbert multiplier is defined for n = 1 only".into()));
    }
    Ok((0..grid.side())
        .map(|i| match signed_frequency(i, grid.side()) {
            Some(nu) if nu > 0 => C64::new(0.0, -1.0),
            Some(nu) if nu < 0 => C64::new(0.0, 1.0),
            _ => C64::new(0.0, 0.0),
        })
        .collect())
}

/// Kernel values on cell-center pairs.
#[derive(Clone, Debug)]
pub enum KernelTable {
    /// `k(x, y) = κ(x − y)`, indexed by the offset cell.
    Convolution(Vec<C64>),
    /// `k(x_i, y_j)` stored row-major.
    Dense(Vec<C64>),
}

impl KernelTable {
    fn check(&self, grid: &TorusGrid) -> Result<()> {
        let n = grid.cell_count();
        let (len, want) = match self {
            KernelTable::Convolution(v) => (v.len(), n),
            KernelTable::Dense(v) => (v.len(), n * n),
        };
        if len != want {
            return Err(CzError::Shape(format!("kernel table has {len} entries, expected {want}")));
        }
        Ok(())
    }

    /// `k(x_i, y_j)` with the diagonal forced to zero.
    pub fn value(&self, grid: &TorusGrid, i: usize, j: usize) -> C64 {
        if i == j {
            return C64::new(0.0, 0.0);
        }
        match self {
            KernelTable::Convolution(v) => v[offset_cell(grid, i, j)],
            KernelTable::Dense(v) => v[i * grid.cell_count() + j],
        }
    }
}

/// Cell index of the wrapped offset `x_i − y_j`.
pub fn offset_cell(grid: &TorusGrid, i: usize, j: usize) -> usize {
    let (a, b) = (grid.cell_coords(i), grid.cell_coords(j));
    let side = grid.side();
    grid.cell_from_coords([(a[0] + side - b[0]) % side, (a[1] + side - b[1]) % side])
}

/// Periodic cotangent kernel `cot(π(x − y))`, the kernel of the Hilbert
/// multiplier on the circle.
pub fn cotangent_kernel(grid: &TorusGrid) -> Result<KernelTable> {
    if grid.n() != 1 {
        return Err(CzError::Unsupported("the cotangent kernel is defined for n = 1 only".into()));
    }
    let side = grid.side() as f64;
    Ok(KernelTable::Convolution(
        (0..grid.side())
            .map(|j| if j == 0 { C64::new(0.0, 0.0) } else { real(1.0 / (PI * j as f64 / side).tan()) })
            .collect(),
    ))
}

/// Radial kernel `φ(d(x, y))` evaluated on offsets.
pub fn radial_kernel(grid: &TorusGrid, profile: impl Fn(f64) -> f64) -> KernelTable {
    let origin = 0;
    KernelTable::Convolution(
        (0..grid.cell_count())
            .map(|c| if c == origin { C64::new(0.0, 0.0) } else { real(profile(grid.cell_distance(c, origin))) })
            .collect(),
    )
}

#[derive(Clone, Debug)]
enum Form {
    Multiplier(Vec<C64>),
    Explicit { table: KernelTable, epsilon: f64, symbol: Option<Vec<C64>> },
}

/// A linear operator on grid functions, acting entrywise on matrix values.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    grid: TorusGrid,
    gamma: f64,
    form: Form,
    /// Kernel used when a truncation of a multiplier is requested.
    companion: Option<KernelTable>,
    plan: FftPlan,
}

impl KernelOperator {
    /// Fourier multiplier with the given symbol (DFT index order).
    pub fn multiplier(grid: &TorusGrid, symbol: Vec<C64>, gamma: f64) -> Result<Self> {
        if symbol.len() != grid.cell_count() {
            return Err(CzError::Shape(format!("symbol has {} entries for {} cells", symbol.len(), grid.cell_count())));
        }
        Ok(Self { grid: *grid, gamma, form: Form::Multiplier(symbol), companion: None, plan: FftPlan::new(grid) })
    }

    /// Explicit kernel with truncation radius `epsilon`.
    pub fn explicit(grid: &TorusGrid, table: KernelTable, gamma: f64, epsilon: f64) -> Result<Self> {
        table.check(grid)?;
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(CzError::Range(format!("truncation radius {epsilon} must be nonnegative")));
        }
        let plan = FftPlan::new(grid);
        let symbol = match &table {
            KernelTable::Convolution(kappa) => {
                let mut t: Vec<C64> = (0..grid.cell_count())
                    .map(|c| if c != 0 && grid.cell_distance(c, 0) > epsilon { kappa[c] } else { C64::new(0.0, 0.0) })
                    .collect();
                plan.forward(&mut t);
                let vol = grid.cell_volume();
                Some(t.into_iter().map(|z| z * vol).collect())
            }
            KernelTable::Dense(_) => None,
        };
        Ok(Self { grid: *grid, gamma, form: Form::Explicit { table, epsilon, symbol }, companion: None, plan })
    }

    /// The Hilbert multiplier, with the cotangent kernel for truncations.
    pub fn hilbert(grid: &TorusGrid) -> Result<Self> {
        let mut op = Self::multiplier(grid, hilbert_symbol(grid)?, 1.0)?;
        op.companion = Some(cotangent_kernel(grid)?);
        Ok(op)
    }

    /// The cotangent kernel operator truncated at `epsilon`.
    pub fn cotangent(grid: &TorusGrid, epsilon: f64) -> Result<Self> {
        Self::explicit(grid, cotangent_kernel(grid)?, 1.0, epsilon)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_multiplier(&self) -> bool {
        matches!(self.form, Form::Multiplier(_))
    }

    pub fn epsilon(&self) -> Option<f64> {
        match &self.form {
            Form::Explicit { epsilon, .. } => Some(*epsilon),
            Form::Multiplier(_) => None,
        }
    }

    pub fn table(&self) -> Option<&KernelTable> {
        match &self.form {
            Form::Explicit { table, .. } => Some(table),
            Form::Multiplier(_) => None,
        }
    }

    /// Truncation `T_ε`: the explicit kernel restricted to `d(x, y) > ε`.
    pub fn truncated(&self, epsilon: f64) -> Result<KernelOperator> {
        match &self.form {
            Form::Explicit { table, .. } => Self::explicit(&self.grid, table.clone(), self.gamma, epsilon),
            Form::Multiplier(_) => match &self.companion {
                Some(k) => Self::explicit(&self.grid, k.clone(), self.gamma, epsilon),
                None => Err(CzError::Unsupported("truncation of a multiplier without a kernel".into())),
            },
        }
    }

    /// Applies the operator to one scalar field.
    pub fn apply_field(&self, v: &[C64]) -> Vec<C64> {
        match &self.form {
            Form::Multiplier(sym) => self.plan.multiply(sym, v),
            Form::Explicit { symbol: Some(sym), .. } => self.plan.multiply(sym, v),
            Form::Explicit { table: KernelTable::Dense(t), epsilon, .. } => self.dense_apply(t, *epsilon, v, false),
            Form::Explicit { .. } => unreachable!("convolution tables carry a symbol"),
        }
    }

    pub fn adjoint_field(&self, v: &[C64]) -> Vec<C64> {
        match &self.form {
            Form::Multiplier(sym) | Form::Explicit { symbol: Some(sym), .. } => {
                let conj: Vec<C64> = sym.iter().map(|z| z.conj()).collect();
                self.plan.multiply(&conj, v)
            }
            Form::Explicit { table: KernelTable::Dense(t), epsilon, .. } => self.dense_apply(t, *epsilon, v, true),
            Form::Explicit { .. } => unreachable!("convolution tables carry a symbol"),
        }
    }

    fn dense_apply(&self, t: &[C64], epsilon: f64, v: &[C64], adjoint: bool) -> Vec<C64> {
        let n = self.grid.cell_count();
        let vol = self.grid.cell_volume();
        (0..n)
            .map(|i| {
                let terms: Vec<C64> = (0..n)
                    .filter(|&j| j != i && self.grid.cell_distance(i, j) > epsilon)
                    .map(|j| if adjoint { t[j * n + i].conj() * v[j] } else { t[i * n + j] * v[j] })
                    .collect();
                crate::matfun::pairwise_sum_complex(&terms) * vol
            })
            .collect()
    }

    /// Applies the operator to every matrix entry of `f`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.entrywise(f, false)
    }

    pub fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction> {
        self.entrywise(f, true)
    }

    fn entrywise(&self, f: &GridFunction, adjoint: bool) -> Result<GridFunction> {
        if f.grid() != &self.grid {
            return Err(CzError::Shape("operator and function live on different grids".into()));
        }
        let m = f.m();
        let entries: Vec<Vec<C64>> = (0..m * m)
            .map(|e| {
                let v = f.entry(e / m, e % m);
                if adjoint {
                    self.adjoint_field(&v)
                } else {
                    self.apply_field(&v)
                }
            })
            .collect();
        GridFunction::from_entries(&self.grid, m, &entries)
    }
}

impl LinearMap for KernelOperator {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.apply_field(v)
    }
    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.adjoint_field(v)
    }
}

/// Discrete Hilbert transform of each matrix entry (`n = 1`).
pub fn hilbert(f: &GridFunction) -> Result<GridFunction> {
    let op = KernelOperator::hilbert(f.grid())?;
    let out = op.apply(f)?;
    // The symbol is odd and purely imaginary, so Hermitian inputs stay Hermitian.
    Ok(if f.is_hermitian() { out.hermitian_part() } else { out })
}

/// `T_ε f` for an explicit kernel.
pub fn kernel_apply(op: &KernelOperator, f: &GridFunction, epsilon: f64) -> Result<GridFunction> {
    if op.is_multiplier() {
        return Err(CzError::Unsupported("kernel truncation requested on a multiplier form".into()));
    }
    op.truncated(epsilon)?.apply(f)
}

/// Size and smoothness constants of a kernel table.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct KernelReport {
    pub size_const: f64,
    pub smooth_y_const: f64,
    pub smooth_x_const: f64,
}

/// Grid suprema of `|k(x,y)| d(x,y)^n` and of the Hölder ratios in `y` and
/// `x` over triples with `d(y, y') ≤ d(x, y)/2` (resp. `d(x, x') ≤ d(x, y)/2`).
pub fn validate_kernel(op: &KernelOperator, gamma: f64) -> Result<KernelReport> {
    let table = op.table().ok_or_else(|| CzError::Unsupported("validation needs an explicit kernel".into()))?;
    let grid = *op.grid();
    let n = grid.n() as i32;
    let cells = grid.cell_count();
    let mut rep = KernelReport::default();
    let hold = |num: C64, dxy: f64, step: f64| num.norm() * dxy.powf(n as f64 + gamma) / step.powf(gamma);
    match table {
        KernelTable::Convolution(kappa) => {
            // With u = x − y and v the displacement, both ratios reduce to offsets.
            for u in 1..cells {
                let du = grid.cell_distance(u, 0);
                rep.size_const = rep.size_const.max(kappa[u].norm() * du.powi(n));
                for v in 1..cells {
                    let dv = grid.cell_distance(v, 0);
                    if dv > du / 2.0 {
                        continue;
                    }
                    let minus = offset_cell(&grid, u, v);
                    let plus = offset_cell(&grid, u, offset_cell(&grid, 0, v));
                    rep.smooth_y_const = rep.smooth_y_const.max(hold(kappa[u] - kappa[minus], du, dv));
                    rep.smooth_x_const = rep.smooth_x_const.max(hold(kappa[u] - kappa[plus], du, dv));
                }
            }
        }
        KernelTable::Dense(_) => {
            for x in 0..cells {
                for y in 0..cells {
                    if x == y {
                        continue;
                    }
                    let dxy = grid.cell_distance(x, y);
                    let kxy = table.value(&grid, x, y);
                    rep.size_const = rep.size_const.max(kxy.norm() * dxy.powi(n));
                    for z in 0..cells {
                        if z == y || z == x {
                            continue;
                        }
                        let dyz = grid.cell_distance(y, z);
                        if dyz <= dxy / 2.0 {
                            rep.smooth_y_const = rep.smooth_y_const.max(hold(kxy - table.value(&grid, x, z), dxy, dyz));
                        }
                        let dxz = grid.cell_distance(x, z);
                        if dxz <= dxy / 2.0 {
                            rep.smooth_x_const = rep.smooth_x_const.max(hold(kxy - table.value(&grid, z, y), dxy, dxz));
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// An operator-valued kernel `k(x, y) = κ(x − y) ∈ M_m`.
#[derive(Clone, Debug)]
pub struct OperatorValuedKernel {
    grid: TorusGrid,
    m: usize,
    offsets: Vec<Mat>,
    epsilon: f64,
}

impl OperatorValuedKernel {
    pub fn new(grid: &TorusGrid, m: usize, offsets: Vec<Mat>, epsilon: f64) -> Result<Self> {
        if offsets.len() != grid.cell_count() || offsets.iter().any(|v| v.nrows() != m || v.ncols() != m) {
            return Err(CzError::Shape("operator-valued kernel table has the wrong shape".into()));
        }
        Ok(Self { grid: *grid, m, offsets, epsilon })
    }

    /// `T f(x) = Σ_{d(x,y) > ε, y ≠ x} κ(x − y) f(y) |cell|`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != &self.grid || f.m() != self.m {
            return Err(CzError::Shape("kernel and function shapes differ".into()));
        }
        let vol = real(self.grid.cell_volume());
        GridFunction::from_fn(&self.grid, self.m, |x| {
            let mut acc = Mat::zeros(self.m, self.m);
            for y in 0..self.grid.cell_count() {
                if y != x && self.grid.cell_distance(x, y) > self.epsilon {
                    acc += &self.offsets[offset_cell(&self.grid, x, y)] * f.value(y);
                }
            }
            acc * vol
        })
    }

    /// Size constant `max ‖κ(u)‖ d(u)^n` in the operator norm.
    pub fn size_const(&self) -> f64 {
        (1..self.grid.cell_count())
            .map(|u| linalg::op_norm(&self.offsets[u]) * self.grid.cell_distance(u, 0).powi(self.grid.n() as i32))
            .fold(0.0, f64::max)
    }
}

/// `Π_ρ f = Σ_{j=1}^K Δ_jρ · E_{j−1} f`.
pub fn paraproduct(rho: &GridFunction, f: &GridFunction) -> Result<GridFunction> {
    check_pair(rho, f)?;
    let grid = *f.grid();
    let (rm, fm) = (cube_means(&grid, rho.values()), cube_means(&grid, f.values()));
    let mut acc = GridFunction::zeros(&grid, f.m());
    for j in 1..=grid.depth() {
        let d = crate::dyadic::mart_diff_from_means(&grid, rho.m(), &rm, j);
        let e = GridFunction::from_values_unchecked(grid, f.m(), expand_level(&grid, &fm[j as usize - 1], j - 1));
        acc = &acc + &(&d * &e);
    }
    Ok(acc)
}

/// `Π*_ρ h = Σ_{j=1}^K E_{j−1}(Δ_jρ* · h)`.
pub fn paraproduct_adjoint(rho: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
    check_pair(rho, h)?;
    let grid = *h.grid();
    let rm = cube_means(&grid, rho.values());
    let mut acc = GridFunction::zeros(&grid, h.m());
    for j in 1..=grid.depth() {
        let d = crate::dyadic::mart_diff_from_means(&grid, rho.m(), &rm, j).adjoint();
        let prod = &d * h;
        acc = &acc + &crate::dyadic::cond_expectation(&prod, j - 1)?;
    }
    Ok(acc)
}

fn check_pair(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.grid() != b.grid() || a.m() != b.m() {
        return Err(CzError::Shape("paraproduct arguments differ in grid or matrix size".into()));
    }
    Ok(())
}

/// How the frequency bands of the counterexample operators are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum BandLayout {
    /// Band `k` is `2^k ≤ |ν| < 2^{k+1}`.
    Dyadic,
    /// Band `k` is `k w ≤ |ν| < (k+1) w`.
    Uniform { width: usize },
}

impl BandLayout {
    /// Dyadic bands when they fit below Nyquist, equal-width bands otherwise.
    pub fn auto(grid: &TorusGrid, m: usize) -> Result<Self> {
        let half = grid.side() / 2;
        if m < usize::BITS as usize - 2 && (1usize << (m + 1)) <= half {
            return Ok(BandLayout::Dyadic);
        }
        let width = half / (m + 1);
        if width < 2 {
            return Err(CzError::Range(format!("{m} frequency bands do not fit below Nyquist frequency {half}")));
        }
        Ok(BandLayout::Uniform { width })
    }

    /// Half-open range `[lo, hi)` of band `k` (`1 ≤ k ≤ m`).
    pub fn band(&self, k: usize) -> (usize, usize) {
        match *self {
            BandLayout::Dyadic => (1 << k, 1 << (k + 1)),
            BandLayout::Uniform { width } => (k * width, (k + 1) * width),
        }
    }
}

/// Which counterexample operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum BandOperator {
    /// `T₁ f = Σ_k e_{k1} (Ψ_k ∗ f)`.
    T1,
    /// `T₂ f = Σ_k e_{1k} (Ψ_k ∗ f)`.
    T2,
}

/// The operators `T₁`, `T₂` with sharp band projectors `Ψ_k`.
#[derive(Clone, Debug)]
pub struct BandCounterexample {
    grid: TorusGrid,
    m: usize,
    which: BandOperator,
    layout: BandLayout,
    symbols: Vec<Vec<C64>>,
    plan: FftPlan,
}

/// Builds `T₁` or `T₂` with `m` bands on matrices of size `m`.
pub fn lp_counterexample_ops(
    grid: &TorusGrid,
    m: usize,
    which: BandOperator,
    layout: BandLayout,
) -> Result<BandCounterexample> {
    if grid.n() != 1 {
        return Err(CzError::Unsupported("band operators are defined for n = 1 only".into()));
    }
    if m == 0 {
        return Err(CzError::Range("at least one band is required".into()));
    }
    let half = grid.side() / 2;
    let (_, top) = layout.band(m);
    if top > half {
        return Err(CzError::Range(format!("band {m} reaches frequency {top} beyond Nyquist {half}")));
    }
    let symbols = (1..=m)
        .map(|k| {
            let (lo, hi) = layout.band(k);
            (0..grid.side())
                .map(|i| match signed_frequency(i, grid.side()) {
                    Some(nu) if (lo as i64..hi as i64).contains(&nu.abs()) => real(1.0),
                    _ => real(0.0),
                })
                .collect()
        })
        .collect();
    Ok(BandCounterexample { grid: *grid, m, which, layout, symbols, plan: FftPlan::new(grid) })
}

impl BandCounterexample {
    pub fn layout(&self) -> BandLayout {
        self.layout
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `Ψ_k ∗` on a scalar field (`1 ≤ k ≤ m`).
    pub fn band_project(&self, k: usize, v: &[C64]) -> Vec<C64> {
        self.plan.multiply(&self.symbols[k - 1], v)
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != &self.grid || f.m() != self.m {
            return Err(CzError::Shape(format!("band operator expects {0}x{0} values on its grid", self.m)));
        }
        let m = self.m;
        let mut out = vec![Mat::zeros(m, m); self.grid.cell_count()];
        for k in 1..=m {
            // Only row 1 (resp. row k) of Ψ_k ∗ f survives the matrix unit.
            let src_row = match self.which {
                BandOperator::T1 => 0,
                BandOperator::T2 => k - 1,
            };
            let dst_row = match self.which {
                BandOperator::T1 => k - 1,
                BandOperator::T2 => 0,
            };
            for col in 0..m {
                let v = self.band_project(k, &f.entry(src_row, col));
                for (cell, z) in v.into_iter().enumerate() {
                    out[cell][(dst_row, col)] += z;
                }
            }
        }
        GridFunction::new(self.grid, m, out)
    }
}
