//! Pseudo-localization experiments: localization sets, residual masses,
//! shifted-T1 operator norms, Schur diagnostics and decay fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cuculescu::{shift_check, zeta_fs};
use crate::czdecomp::decompose;
use crate::dyadic::{cube_means, dilate, expand_level, smallest_rk_set, CellMask, TorusGrid};
use crate::error::{CzError, Result};
use crate::fixtures::complex_gaussian;
use crate::matfun::{distribution, lp_norm, pairwise_sum, GridFunction};
use crate::singint::{KernelOperator, LinearMap};
use crate::{Mat, C64};

/// Points below this fraction of the largest value are treated as zero in
/// slope fits.
pub const FIT_FLOOR: f64 = 1e-12;

/// A measured series with its reference envelope and a least-squares fit of
/// `log₂(value)` against the abscissa.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DecaySeries {
    /// Parameter values (`s`, `ξ` or `λ`).
    pub params: Vec<f64>,
    /// Abscissa used for the fit (`s`, or `log₂ ξ`).
    pub fit_x: Vec<f64>,
    pub values: Vec<f64>,
    pub envelope: Vec<f64>,
    pub slope: Option<f64>,
    pub fit_residual: Option<f64>,
    /// `max value / envelope`: the smallest constant putting the series under
    /// the envelope.
    pub fitted_constant: f64,
}

impl DecaySeries {
    pub fn new(params: Vec<f64>, fit_x: Vec<f64>, values: Vec<f64>, envelope: Vec<f64>) -> Self {
        let fit = fit_log2_slope(&fit_x, &values);
        let fitted_constant =
            values.iter().zip(&envelope).filter(|(_, e)| **e > 0.0).map(|(v, e)| v / e).fold(0.0, f64::max);
        Self {
            params,
            fit_x,
            values,
            envelope,
            slope: fit.map(|f| f.0),
            fit_residual: fit.map(|f| f.1),
            fitted_constant,
        }
    }

    /// Series indexed by `s` itself.
    pub fn over_s(s: &[u32], values: Vec<f64>, envelope: Vec<f64>) -> Self {
        let x: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        Self::new(x.clone(), x, values, envelope)
    }

    pub fn nonzero_points(&self) -> usize {
        let top = self.values.iter().copied().fold(0.0, f64::max);
        self.values.iter().filter(|&&v| v > FIT_FLOOR * top && v > 0.0).count()
    }
}

/// Least-squares slope of `log₂ y` against `x` over points with `y` above
/// [`FIT_FLOOR`] times the maximum; `None` with fewer than three points.
/// Returns `(slope, rms residual)`.
pub fn fit_log2_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let top = y.iter().copied().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0 && v > FIT_FLOOR * top && v.is_finite())
        .map(|(&a, &b)| (a, b.log2()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Some((slope, rms))
}

fn scalar_field(f: &GridFunction) -> Result<Vec<C64>> {
    f.scalar_values()
        .map_err(|_| CzError::Unsupported("localization sets are defined for scalar functions (m = 1)".into()))
}

fn sup_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Union over `1 ≤ k ≤ K − s` of `factor · Ω_k`, where `Ω_k` is the smallest
/// `R_k`-set containing the support of `Δ_{k+s} f`.
pub fn localization_set(f: &GridFunction, s: u32, factor: f64) -> Result<CellMask> {
    let v = scalar_field(f)?;
    let grid = *f.grid();
    let depth = grid.depth();
    if s < 1 || s >= depth.max(1) {
        return Err(CzError::Range(format!("shift s = {s} outside 1..={}", depth.saturating_sub(1))));
    }
    let thr = 1e-12 * sup_abs(&v);
    let means = cube_means(&grid, &v);
    let mut out = CellMask::empty(&grid);
    for k in 1..=depth - s {
        let j = (k + s) as usize;
        let support = CellMask::from_predicate(&grid, |c| {
            (means[j][grid.cube_index_of(c, j as u32)] - means[j - 1][grid.cube_index_of(c, j as u32 - 1)]).norm() > thr
        });
        if support.is_empty() {
            continue;
        }
        out.union_with(&dilate(&smallest_rk_set(&support, k)?, k, factor)?);
    }
    Ok(out)
}

/// `Σ_{f,s} = ∪_k 9 Ω_k`.
pub fn sigma_fs(f: &GridFunction, s: u32) -> Result<CellMask> {
    localization_set(f, s, 9.0)
}

fn apply_scalar<T: LinearMap + ?Sized>(t: &T, f: &GridFunction) -> Result<Vec<C64>> {
    let v = scalar_field(f)?;
    if t.grid() != f.grid() {
        return Err(CzError::Shape("operator and function live on different grids".into()));
    }
    Ok(t.apply(&v))
}

/// `‖Tf‖_{L₂(outside mask)} / ‖f‖₂`.
pub fn l2_residual_masked<T: LinearMap + ?Sized>(t: &T, f: &GridFunction, mask: &CellMask) -> Result<f64> {
    let tf = apply_scalar(t, f)?;
    let norm = lp_norm(f, 2.0)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let outside: Vec<f64> =
        tf.iter().enumerate().map(|(c, z)| if mask.contains(c) { 0.0 } else { z.norm_sqr() }).collect();
    Ok((pairwise_sum(&outside) * f.grid().cell_volume()).sqrt() / norm)
}

/// `‖Tf‖_{L₂(outside Σ_{f,s})} / ‖f‖₂`.
pub fn l2_residual<T: LinearMap + ?Sized>(t: &T, f: &GridFunction, s: u32) -> Result<f64> {
    l2_residual_masked(t, f, &sigma_fs(f, s)?)
}

/// `‖Tf‖_{L₁(outside mask)} / ‖f‖₁`.
pub fn l1_residual_masked<T: LinearMap + ?Sized>(t: &T, f: &GridFunction, mask: &CellMask) -> Result<f64> {
    let tf = apply_scalar(t, f)?;
    let norm = lp_norm(f, 1.0)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let outside: Vec<f64> = tf.iter().enumerate().map(|(c, z)| if mask.contains(c) { 0.0 } else { z.norm() }).collect();
    Ok(pairwise_sum(&outside) * f.grid().cell_volume() / norm)
}

/// L₁ mass of `Tf` outside `∪_k 3 Ω_k`, relative to `‖f‖₁`, for `f` with
/// `E_j f = 0` at the declared generation `j`.
pub fn l1_atomic_residual<T: LinearMap + ?Sized>(t: &T, f: &GridFunction, j: Option<u32>, s: u32) -> Result<f64> {
    let j = j.ok_or_else(|| CzError::Precondition("no generation with vanishing expectation declared".into()))?;
    let v = scalar_field(f)?;
    let grid = *f.grid();
    grid.check_generation(j, 0)?;
    let ej = crate::dyadic::cond_expectation_values(&grid, &v, j)?;
    if sup_abs(&ej) > 1e-12 * sup_abs(&v).max(f64::MIN_POSITIVE) {
        return Err(CzError::Precondition(format!("E_{j} f does not vanish")));
    }
    if sup_abs(&v) == 0.0 {
        return Ok(0.0);
    }
    l1_residual_masked(t, f, &localization_set(f, s, 3.0)?)
}

/// `ξ Σ_f = ∪_k (9ξ) Γ_k` with `Γ_k = supp Δ_k f`.
pub fn dilated_support_set(f: &GridFunction, xi: f64) -> Result<CellMask> {
    let v = scalar_field(f)?;
    let grid = *f.grid();
    let thr = 1e-12 * sup_abs(&v);
    let means = cube_means(&grid, &v);
    let mut out = CellMask::empty(&grid);
    for k in 1..=grid.depth() {
        let ku = k as usize;
        let gamma = CellMask::from_predicate(&grid, |c| {
            (means[ku][grid.cube_index_of(c, k)] - means[ku - 1][grid.cube_index_of(c, k - 1)]).norm() > thr
        });
        if !gamma.is_empty() {
            out.union_with(&dilate(&gamma, k, 9.0 * xi)?);
        }
    }
    Ok(out)
}

/// Residual L₂ mass outside `ξ Σ_f` for each `ξ > 4` against `ξ^{−γ/4} log₂ ξ`.
/// Values `ξ ≤ 4` are skipped and returned separately.
pub fn corollary_decay<T: LinearMap + ?Sized>(
    t: &T,
    f: &GridFunction,
    xis: &[f64],
    gamma: f64,
) -> Result<(DecaySeries, Vec<f64>)> {
    let (keep, skipped): (Vec<f64>, Vec<f64>) = xis.iter().partition(|&&x| x > 4.0);
    let mut values = Vec::with_capacity(keep.len());
    for &xi in &keep {
        values.push(l2_residual_masked(t, f, &dilated_support_set(f, xi)?)?);
    }
    let env = keep.iter().map(|&x| x.powf(-gamma / 4.0) * x.log2()).collect();
    let fit_x = keep.iter().map(|x| x.log2()).collect();
    Ok((DecaySeries::new(keep, fit_x, values, env), skipped))
}

/// Which shifted operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum ShiftedKind {
    /// `Φ_s = Σ_k E_k T Δ_{k+s}`.
    Phi,
    /// `Ψ_s = Σ_k (id − E_k) T_{4·2^{−k}} Δ_{k+s}`.
    Psi,
}

/// `Φ_s` or `Ψ_s` as a linear map on scalar fields.
#[derive(Clone, Debug)]
pub struct ShiftedT1 {
    grid: TorusGrid,
    kind: ShiftedKind,
    s: u32,
    terms: Vec<(u32, KernelOperator)>,
}

/// `Φ_s = Σ_{k=1}^{K−s} E_k T Δ_{k+s}` with the untruncated `T`.
pub fn phi_s(t: &KernelOperator, s: u32) -> ShiftedT1 {
    let depth = t.grid().depth();
    let terms = if s >= depth { Vec::new() } else { (1..=depth - s).map(|k| (k, t.clone())).collect() };
    ShiftedT1 { grid: *t.grid(), kind: ShiftedKind::Phi, s, terms }
}

/// `Ψ_s = Σ_{k ≥ 3, k+s ≤ K} (id − E_k) T_{4·2^{−k}} Δ_{k+s}`.
pub fn psi_s(t: &KernelOperator, s: u32) -> Result<ShiftedT1> {
    let depth = t.grid().depth();
    let mut terms = Vec::new();
    if s < depth {
        for k in 3..=depth - s {
            terms.push((k, t.truncated(4.0 * (-(k as f64)).exp2())?));
        }
    }
    Ok(ShiftedT1 { grid: *t.grid(), kind: ShiftedKind::Psi, s, terms })
}

/// The single term `E_k T Δ_{k+s}`.
pub fn phi_term(t: &KernelOperator, s: u32, k: u32) -> Result<ShiftedT1> {
    let depth = t.grid().depth();
    if k < 1 || k + s > depth {
        return Err(CzError::Range(format!("term (s, k) = ({s}, {k}) needs 1 ≤ k and k + s ≤ {depth}")));
    }
    Ok(ShiftedT1 { grid: *t.grid(), kind: ShiftedKind::Phi, s, terms: vec![(k, t.clone())] })
}

impl ShiftedT1 {
    pub fn kind(&self) -> ShiftedKind {
        self.kind
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn generations(&self) -> Vec<u32> {
        self.terms.iter().map(|t| t.0).collect()
    }

    fn mart_diff(&self, means: &[Vec<C64>], j: u32) -> Vec<C64> {
        let g = &self.grid;
        (0..g.cell_count())
            .map(|c| means[j as usize][g.cube_index_of(c, j)] - means[j as usize - 1][g.cube_index_of(c, j - 1)])
            .collect()
    }
}

impl LinearMap for ShiftedT1 {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        let g = self.grid;
        let mut acc = vec![C64::new(0.0, 0.0); g.cell_count()];
        if self.terms.is_empty() {
            return acc;
        }
        let means = cube_means(&g, v);
        for (k, op) in &self.terms {
            let u = op.apply_field(&self.mart_diff(&means, k + self.s));
            let eu = expand_level(&g, &cube_means(&g, &u)[*k as usize], *k);
            for c in 0..acc.len() {
                acc[c] += match self.kind {
                    ShiftedKind::Phi => eu[c],
                    ShiftedKind::Psi => u[c] - eu[c],
                };
            }
        }
        acc
    }

    fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        let g = self.grid;
        let mut acc = vec![C64::new(0.0, 0.0); g.cell_count()];
        if self.terms.is_empty() {
            return acc;
        }
        let means = cube_means(&g, v);
        for (k, op) in &self.terms {
            let ev = expand_level(&g, &means[*k as usize], *k);
            let w: Vec<C64> = match self.kind {
                ShiftedKind::Phi => ev,
                ShiftedKind::Psi => v.iter().zip(&ev).map(|(a, b)| a - b).collect(),
            };
            let u = op.adjoint_field(&w);
            let d = self.mart_diff(&cube_means(&g, &u), k + self.s);
            for c in 0..acc.len() {
                acc[c] += d[c];
            }
        }
        acc
    }
}

/// Result of a largest-singular-value computation.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OpNorm {
    /// `‖L v‖` for the final unit iterate `v`: an estimate of the largest
    /// singular value and a certified lower bound for it.
    pub value: f64,
    /// Applications of `L*L`.
    pub iterations: usize,
    pub converged: bool,
}

pub const OP_NORM_MAX_ITER: usize = 10_000;
pub const OP_NORM_TOL: f64 = 1e-6;
/// Krylov block length between restarts of [`op_norm`].
pub const KRYLOV_DIM: usize = 32;
const OP_NORM_SEED: u64 = 0x5eed_0f0e;

fn norm2(v: &[C64]) -> f64 {
    pairwise_sum(&v.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn seeded_unit(n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(OP_NORM_SEED);
    let v: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
    let nv = norm2(&v);
    v.into_iter().map(|z| z / nv).collect()
}

/// `(σ, ‖L*L v − σ² v‖)` for unit `v`.
fn certify<L: LinearMap + ?Sized>(l: &L, v: &[C64]) -> (f64, f64) {
    let w = l.apply(v);
    let sigma = norm2(&w);
    let u = l.apply_adjoint(&w);
    let s2 = sigma * sigma;
    (sigma, norm2(&u.iter().zip(v).map(|(a, b)| a - b * s2).collect::<Vec<_>>()))
}

/// Plain power iteration on `L*L` from the seeded start. Stops when the
/// eigen-residual of `L*L` drops below `1e-6 σ²`.
pub fn power_iteration<L: LinearMap + ?Sized>(l: &L, max_iter: usize) -> OpNorm {
    let mut v = seeded_unit(l.grid().cell_count());
    let mut value = 0.0;
    for it in 1..=max_iter {
        let w = l.apply(&v);
        let sigma = norm2(&w);
        value = sigma;
        if sigma == 0.0 {
            return OpNorm { value: 0.0, iterations: it, converged: true };
        }
        let u = l.apply_adjoint(&w);
        let s2 = sigma * sigma;
        let resid = norm2(&u.iter().zip(&v).map(|(a, b)| a - b * s2).collect::<Vec<_>>());
        if resid <= OP_NORM_TOL * s2 {
            return OpNorm { value, iterations: it, converged: true };
        }
        let nu = norm2(&u);
        v = u.into_iter().map(|z| z / nu).collect();
    }
    OpNorm { value, iterations: max_iter, converged: false }
}

/// Largest singular value of `L`: power iteration on `L*L` in which each
/// step is replaced by the top Ritz vector of a [`KRYLOV_DIM`]-step Lanczos
/// block started from the current iterate. Same seeded start, stopping rule
/// and iteration cap as [`power_iteration`].
pub fn op_norm<L: LinearMap + ?Sized>(l: &L) -> OpNorm {
    let n = l.grid().cell_count();
    let mut v = seeded_unit(n);
    let mut used = 0;
    loop {
        let (sigma, resid) = certify(l, &v);
        used += 1;
        if sigma == 0.0 || resid <= OP_NORM_TOL * sigma * sigma {
            return OpNorm { value: sigma, iterations: used, converged: true };
        }
        if used >= OP_NORM_MAX_ITER {
            return OpNorm { value: sigma, iterations: used, converged: false };
        }
        let dim = KRYLOV_DIM.min(n).min(OP_NORM_MAX_ITER - used).max(1);
        let mut basis: Vec<Vec<C64>> = vec![v.clone()];
        let mut alpha = Vec::with_capacity(dim);
        let mut beta: Vec<f64> = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut w = l.apply_adjoint(&l.apply(&basis[j]));
            used += 1;
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= b * c);
                }
            }
            let b = norm2(&w);
            if j + 1 == dim || b <= 1e-14 * alpha[0].abs().max(f64::MIN_POSITIVE) {
                break;
            }
            beta.push(b);
            basis.push(w.into_iter().map(|z| z / b).collect());
        }
        let k = alpha.len();
        let t = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i.abs_diff(j) == 1 {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(t);
        let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);
        let y = eig.eigenvectors.column(top);
        let mut u = vec![C64::new(0.0, 0.0); n];
        for (i, q) in basis.iter().enumerate().take(k) {
            u.iter_mut().zip(q).for_each(|(a, b)| *a += b * y[i]);
        }
        let nu = norm2(&u);
        v = u.into_iter().map(|z| z / nu).collect();
    }
}

/// Operator norms of `Φ_s` and `Ψ_s` over a range of shifts.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ShiftedScan {
    pub phi: DecaySeries,
    pub psi: DecaySeries,
    pub phi_converged: Vec<bool>,
    pub psi_converged: Vec<bool>,
}

pub fn shifted_t1_scan(t: &KernelOperator, s_values: &[u32]) -> Result<ShiftedScan> {
    let gamma = t.gamma();
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for &s in s_values {
        phi.push(op_norm(&phi_s(t, s)));
        psi.push(op_norm(&psi_s(t, s)?));
    }
    let sf = |s: u32| s as f64;
    Ok(ShiftedScan {
        phi: DecaySeries::over_s(
            s_values,
            phi.iter().map(|r| r.value).collect(),
            s_values.iter().map(|&s| sf(s) * (-gamma * sf(s) / 4.0).exp2()).collect(),
        ),
        psi: DecaySeries::over_s(
            s_values,
            psi.iter().map(|r| r.value).collect(),
            s_values.iter().map(|&s| (-gamma * sf(s) / 2.0).exp2()).collect(),
        ),
        phi_converged: phi.iter().map(|r| r.converged).collect(),
        psi_converged: psi.iter().map(|r| r.converged).collect(),
    })
}

/// Largest number of cells for which an operator may be materialized.
pub const MATERIALIZE_LIMIT: usize = 1 << 14;

/// Cell-basis matrix `M[x, y] = (L e_y)(x)`.
pub fn materialize<L: LinearMap + ?Sized>(l: &L) -> Result<Mat> {
    let n = l.grid().cell_count();
    if n > MATERIALIZE_LIMIT {
        return Err(CzError::Range(format!(
            "refusing to materialize {n} × {n} matrix (limit {MATERIALIZE_LIMIT} cells)"
        )));
    }
    let mut m = Mat::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    for y in 0..n {
        e[y] = C64::new(1.0, 0.0);
        let col = l.apply(&e);
        e[y] = C64::new(0.0, 0.0);
        for (x, z) in col.into_iter().enumerate() {
            m[(x, y)] = z;
        }
    }
    Ok(m)
}

/// `(S¹, S²)`: the largest row and column sums of `|M|` for the term
/// `E_k T Δ_{k+s}`.
pub fn schur_diagnostics(t: &KernelOperator, s: u32, k: u32) -> Result<(f64, f64)> {
    let m = materialize(&phi_term(t, s, k)?)?;
    Ok(schur_sums(&m))
}

/// Largest row and column sums of `|M|`.
pub fn schur_sums(m: &Mat) -> (f64, f64) {
    let rows = (0..m.nrows())
        .map(|x| pairwise_sum(&m.row(x).iter().map(|z| z.norm()).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let cols = (0..m.ncols())
        .map(|y| pairwise_sum(&m.column(y).iter().map(|z| z.norm()).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    (rows, cols)
}

/// Noncommutative localization series.
#[derive(Clone, Debug, serde::Serialize)]
pub struct NcPseudoloc {
    pub series: DecaySeries,
    /// `‖g_(s)‖₂` per shift.
    pub g_norms: Vec<f64>,
    pub shift_ok: Vec<bool>,
}

/// For each `s`, the ratio `‖ζ_{g(s),s} T(g_(s)) ζ_{g(s),s}‖₂ / ‖g_(s)‖₂` with
/// `g_(s) = Σ_k g_{k,s}` against `s 2^{−γs/4}`. Shifts where `‖g_(s)‖₂` is
/// at round-off level relative to `‖f‖₂` record a zero ratio.
pub fn nc_pseudoloc_check(f: &GridFunction, lambda: f64, t: &KernelOperator, s_values: &[u32]) -> Result<NcPseudoloc> {
    let parts = decompose(f, lambda)?;
    let qs = parts.cuculescu().qs();
    let gamma = t.gamma();
    let floor = 1e-12 * lp_norm(f, 2.0)?;
    let mut values = Vec::new();
    let mut g_norms = Vec::new();
    let mut shift_ok = Vec::new();
    for &s in s_values {
        let gs = parts.g_s(s);
        if !shift_check(&gs, qs, s)? {
            return Err(CzError::Contract(format!("shift condition fails for g_(s) at s = {s}")));
        }
        shift_ok.push(true);
        let norm = lp_norm(&gs, 2.0)?;
        g_norms.push(norm);
        if norm <= floor {
            values.push(0.0);
            continue;
        }
        let z = zeta_fs(qs, s)?;
        let tg = t.apply(&gs)?;
        let loc = tg.sandwich(z.function(), z.function());
        values.push(lp_norm(&loc, 2.0)? / norm);
    }
    let env = s_values.iter().map(|&s| s as f64 * (-gamma * s as f64 / 4.0).exp2()).collect();
    Ok(NcPseudoloc { series: DecaySeries::over_s(s_values, values, env), g_norms, shift_ok })
}

/// Cells where some `q_k` (`k + s ≤ K`) is not the identity, dilated by 9
/// generation by generation: the scalar picture of `1 − ζ_{f,s}`.
pub fn scalar_zeta_fs_mask(qs: &[crate::matfun::ProjectionField], s: u32) -> Result<CellMask> {
    let grid = *qs[0].grid();
    let mut out = CellMask::empty(&grid);
    for (k, q) in qs.iter().enumerate() {
        let k = k as u32;
        if k + s > grid.depth() {
            continue;
        }
        let supp = CellMask::from_predicate(&grid, |c| q.value(c)[(0, 0)].re < 0.5);
        if !supp.is_empty() {
            out.union_with(&dilate(&supp, k, 9.0)?);
        }
    }
    Ok(out)
}

/// Weak-type profile `λ φ{|Tf| > λ} / ‖f‖₁` over a grid of thresholds.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Weak11Profile {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub max: f64,
}

pub fn weak11_profile(t: &KernelOperator, f: &GridFunction, lambdas: &[f64]) -> Result<Weak11Profile> {
    let norm = lp_norm(f, 1.0)?;
    let tf = t.apply(f)?;
    let values: Vec<f64> =
        lambdas.iter().map(|&l| if norm == 0.0 { 0.0 } else { l * distribution(&tf, l) / norm }).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    Ok(Weak11Profile { lambdas: lambdas.to_vec(), values, max })
}

/// Logarithmic grid of `count` thresholds between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}
