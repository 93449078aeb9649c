//! Finite-matrix counterexamples: martingale transforms on a matrix
//! filtration, `L_p` blow-up of band operators with matrix-valued kernels,
//! and the failure of the classical `L₂` good-part estimate.

use std::f64::consts::PI;

use crate::cuculescu::cuculescu_chain;
use crate::dyadic::TorusGrid;
use crate::error::{CzError, Result};
use crate::linalg::{identity, matrix_unit, max_abs_entry, real, schatten};
use crate::matfun::{lp_norm, GridFunction, SpectralMode};
use crate::singint::{lp_counterexample_ops, BandLayout, BandOperator};
use crate::{Mat, C64};

/// The ladder `A_1 ⊂ … ⊂ A_d` in the `d × d` matrices, where `A_s` is spanned
/// by `e_{ij}` (`i, j ≤ s`) and `e_{kk}` (`k > s`). Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixFiltration {
    size: usize,
}

impl MatrixFiltration {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(CzError::Range("matrix filtration needs a positive size".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Whether the matrix unit `e_{ij}` (1-based) lies in `A_s`.
    pub fn keeps(&self, s: usize, i: usize, j: usize) -> bool {
        (i <= s && j <= s) || i == j
    }

    /// `E_s a`: zero the entries outside `A_s`. `s = 0` keeps the diagonal.
    pub fn expect(&self, s: usize, a: &Mat) -> Result<Mat> {
        self.check(a)?;
        Ok(Mat::from_fn(
            self.size,
            self.size,
            |i, j| if self.keeps(s, i + 1, j + 1) { a[(i, j)] } else { C64::new(0.0, 0.0) },
        ))
    }

    /// `d_s a = E_s a − E_{s−1} a` for `s ≥ 1`.
    pub fn mart_diff(&self, s: usize, a: &Mat) -> Result<Mat> {
        if s == 0 {
            return Err(CzError::GenerationOutOfRange { k: 0, lo: 1, hi: self.size as i64 });
        }
        Ok(self.expect(s, a)? - self.expect(s - 1, a)?)
    }

    fn check(&self, a: &Mat) -> Result<()> {
        if a.nrows() != self.size || a.ncols() != self.size {
            return Err(CzError::Shape(format!("expected a {0}x{0} matrix", self.size)));
        }
        Ok(())
    }
}

/// Which martingale-transform construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TransformCase {
    /// `f = Σ_{k≥2} e_{1k}`, `ξ_k = e_{k1}`; used for `p ≤ 2`.
    Primary,
    /// `f = Σ_{k≥2} e_{k−1,k}`, `ξ_k = e_{1k}`; used for `p > 2`.
    Dual,
}

/// Schatten norms of `Σ_k d_k f` and `Σ_k ξ_{k−1} d_k f`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MartTransform {
    pub m: usize,
    pub p: f64,
    pub case: TransformCase,
    pub plain: f64,
    pub transformed: f64,
    /// Norm of the shift-type matrix, `(m−1)^{1/p}` in closed form.
    pub lhs: f64,
    /// Norm of the row-type matrix, `(m−1)^{1/2}` in closed form.
    pub rhs: f64,
    pub expected: (f64, f64),
}

impl MartTransform {
    pub fn abs_error(&self) -> f64 {
        (self.lhs - self.expected.0).abs().max((self.rhs - self.expected.1).abs())
    }
}

/// Builds the transform on the `m × m` ladder and computes both Schatten-`p`
/// norms by singular value decomposition.
pub fn mart_transform_example(m: usize, p: f64) -> Result<MartTransform> {
    if m < 2 {
        return Err(CzError::Range("the martingale transform example needs m ≥ 2".into()));
    }
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(CzError::Range(format!("Schatten exponent p = {p} must lie in [1, ∞)")));
    }
    let filt = MatrixFiltration::new(m)?;
    let case = if p <= 2.0 { TransformCase::Primary } else { TransformCase::Dual };
    let (f, xi): (Mat, Box<dyn Fn(usize) -> Mat>) = match case {
        TransformCase::Primary => {
            ((2..=m).map(|k| matrix_unit(m, 0, k - 1)).sum(), Box::new(move |k| matrix_unit(m, k - 1, 0)))
        }
        TransformCase::Dual => {
            ((2..=m).map(|k| matrix_unit(m, k - 2, k - 1)).sum(), Box::new(move |k| matrix_unit(m, 0, k - 1)))
        }
    };
    let mut plain = Mat::zeros(m, m);
    let mut transformed = Mat::zeros(m, m);
    for k in 2..=m {
        let d = filt.mart_diff(k, &f)?;
        transformed += xi(k - 1) * &d;
        plain += d;
    }
    let (plain, transformed) = (schatten(&plain, p), schatten(&transformed, p));
    let (lhs, rhs) = match case {
        TransformCase::Primary => (transformed, plain),
        TransformCase::Dual => (plain, transformed),
    };
    let mm = (m - 1) as f64;
    Ok(MartTransform { m, p, case, plain, transformed, lhs, rhs, expected: (mm.powf(1.0 / p), mm.sqrt()) })
}

/// Ratios `‖T₁f₁‖_p/‖f₁‖_p` and `‖T₂f₂‖_p/‖f₂‖_p`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LpBlowup {
    pub m: usize,
    pub p: f64,
    pub depth: u32,
    pub layout: BandLayout,
    pub t1_ratio: f64,
    pub t1_expected: f64,
    pub t2_ratio: f64,
    pub t2_expected: f64,
}

impl LpBlowup {
    pub fn abs_error(&self) -> f64 {
        (self.t1_ratio - self.t1_expected).abs().max((self.t2_ratio - self.t2_expected).abs())
    }
}

/// `g_k`: the inverse DFT of the indicator of the two lowest frequencies of
/// band `k`, scaled by `N`. All `|g_k|` coincide cellwise.
pub fn band_function(grid: &TorusGrid, layout: BandLayout, k: usize) -> Vec<C64> {
    let (lo, _) = layout.band(k);
    let side = grid.side() as f64;
    (0..grid.side())
        .map(|c| {
            let t = 2.0 * PI * c as f64 / side;
            C64::from_polar(1.0, lo as f64 * t) * (C64::new(1.0, 0.0) + C64::from_polar(1.0, t))
        })
        .collect()
}

fn assemble(grid: &TorusGrid, m: usize, entries: &[((usize, usize), Vec<C64>)]) -> Result<GridFunction> {
    let vals = (0..grid.cell_count())
        .map(|c| {
            let mut a = Mat::zeros(m, m);
            for ((i, j), g) in entries {
                a[(*i, *j)] += g[c];
            }
            a
        })
        .collect();
    GridFunction::new(*grid, m, vals)
}

pub fn lp_blowup(m: usize, p: f64, depth: u32) -> Result<LpBlowup> {
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(CzError::Range(format!("L_p exponent p = {p} must lie in [1, ∞)")));
    }
    let grid = TorusGrid::new(1, depth)?;
    let layout = BandLayout::auto(&grid, m)?;
    if let BandLayout::Uniform { width } = layout {
        if width < 2 {
            return Err(CzError::Range("bands too narrow for a two-frequency window".into()));
        }
    }
    let g: Vec<Vec<C64>> = (1..=m).map(|k| band_function(&grid, layout, k)).collect();
    let f1 = assemble(&grid, m, &g.iter().enumerate().map(|(k, v)| ((0, k), v.clone())).collect::<Vec<_>>())?;
    let f2 = assemble(&grid, m, &g.iter().enumerate().map(|(k, v)| ((k, k), v.clone())).collect::<Vec<_>>())?;
    let t1 = lp_counterexample_ops(&grid, m, BandOperator::T1, layout)?;
    let t2 = lp_counterexample_ops(&grid, m, BandOperator::T2, layout)?;
    let mf = m as f64;
    Ok(LpBlowup {
        m,
        p,
        depth,
        layout,
        t1_ratio: lp_norm(&t1.apply(&f1)?, p)? / lp_norm(&f1, p)?,
        t1_expected: mf.powf(1.0 / p - 0.5),
        t2_ratio: lp_norm(&t2.apply(&f2)?, p)? / lp_norm(&f2, p)?,
        t2_expected: mf.powf(0.5 - 1.0 / p),
    })
}

/// Outcome of the ladder construction in `2m × 2m` matrices.
#[derive(Clone, Debug, serde::Serialize)]
pub struct AppendixB {
    pub m: usize,
    /// `‖f‖₁`.
    pub l1: f64,
    /// `‖Σ_k f_k p_k‖₂²` from the assembled matrix.
    pub l2sq: f64,
    /// `Σ_{k=1}^m 4k`.
    pub l2sq_closed: f64,
    /// Largest entrywise deviation of `q_0, …, q_{2m}` and `p_1, …, p_{2m}`
    /// from the hand-derived projections.
    pub projection_defect: f64,
    #[serde(skip)]
    pub q: Vec<Mat>,
    #[serde(skip)]
    pub p: Vec<Mat>,
}

impl AppendixB {
    /// `‖Σ f_k p_k‖₂² / (λ‖f‖₁)` with `λ = 1`.
    pub fn ratio(&self) -> f64 {
        self.l2sq / self.l1
    }
}

/// Expected `q_k` (`0 ≤ k ≤ 2m`): identity for `k ≤ 1`, else `Σ_{i > 2⌊k/2⌋} e_{ii}`.
pub fn appendix_b_expected_q(m: usize, k: usize) -> Mat {
    let d = 2 * m;
    if k <= 1 {
        return identity(d);
    }
    let cut = 2 * (k / 2);
    Mat::from_fn(d, d, |i, j| if i == j && i + 1 > cut { real(1.0) } else { C64::new(0.0, 0.0) })
}

pub fn appendix_b(m: usize) -> Result<AppendixB> {
    if m == 0 {
        return Err(CzError::Range("m must be at least 1".into()));
    }
    let d = 2 * m;
    let filt = MatrixFiltration::new(d)?;
    let f = Mat::from_element(d, d, real(1.0));
    let averages: Vec<Mat> = (1..=d).map(|s| filt.expect(s, &f)).collect::<Result<_>>()?;
    let q = cuculescu_chain(&averages, &identity(d), 1.0, SpectralMode::Strict)?;
    let p: Vec<Mat> = (1..=d).map(|k| &q[k - 1] - &q[k]).collect();
    let mut defect: f64 = 0.0;
    for (k, qk) in q.iter().enumerate() {
        defect = defect.max(max_abs_entry(&(qk - appendix_b_expected_q(m, k))));
    }
    for (k, pk) in p.iter().enumerate() {
        let k = k + 1;
        let expect =
            if k % 2 == 1 { Mat::zeros(d, d) } else { matrix_unit(d, k - 2, k - 2) + matrix_unit(d, k - 1, k - 1) };
        defect = defect.max(max_abs_entry(&(pk - expect)));
    }
    let sum: Mat = averages.iter().zip(&p).map(|(fk, pk)| fk * pk).sum();
    let l2sq = sum.iter().map(|z| z.norm_sqr()).sum();
    Ok(AppendixB {
        m,
        l1: schatten(&f, 1.0),
        l2sq,
        l2sq_closed: (1..=m).map(|k| 4.0 * k as f64).sum(),
        projection_defect: defect,
        q,
        p,
    })
}
