//! Good/bad splitting of a positive grid function over its Cuculescu
//! projections.
//!
//! With `p_∞ = q_K` and `f_∞ = f` the parts are
//! `g = Σ_{i,j} p_i f_{i∨j} p_j` and `b = Σ_{i,j} p_i (f − f_{i∨j}) p_j`,
//! the indices running over `{0, …, K, ∞}`.

use std::collections::BTreeMap;

use crate::cuculescu::{cuculescu_with_mode, CuculescuData, PROPERTY_TOL};
use crate::dyadic::{cube_means, filtration, TorusGrid};
use crate::error::{CzError, Result};
use crate::linalg::{self, frobenius, op_norm};
use crate::matfun::{inner, lp_norm, trace_phi, GridFunction, SpectralMode};
use crate::Mat;

/// `C_n = 2 (2^{n/2} + 1)²`, the constant of the `ℓ∞(ℓ₂)` bound.
pub fn linf_l2_constant(n: usize) -> f64 {
    2.0 * (2f64.powf(n as f64 / 2.0) + 1.0).powi(2)
}

/// Constant of the weighted bound `Σ_k ‖b_{k,s}‖₁ ≤ C s ‖f‖₁`.
pub const WEIGHTED_B_CONSTANT: f64 = 8.0;

/// The full decomposition.
#[derive(Clone, Debug)]
pub struct CZParts {
    cuc: CuculescuData,
    filt: Vec<GridFunction>,
    g: GridFunction,
    b: GridFunction,
    g_d: GridFunction,
    b_d: GridFunction,
    gks: BTreeMap<(u32, u32), GridFunction>,
    bks: BTreeMap<(u32, u32), GridFunction>,
}

impl CZParts {
    pub fn f(&self) -> &GridFunction {
        self.cuc.source()
    }

    pub fn lambda(&self) -> f64 {
        self.cuc.lambda()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.cuc.grid()
    }

    pub fn cuculescu(&self) -> &CuculescuData {
        &self.cuc
    }

    /// `f_k = E_k f`.
    pub fn f_k(&self, k: u32) -> &GridFunction {
        &self.filt[k as usize]
    }

    pub fn g(&self) -> &GridFunction {
        &self.g
    }

    pub fn b(&self) -> &GridFunction {
        &self.b
    }

    pub fn g_d(&self) -> &GridFunction {
        &self.g_d
    }

    pub fn b_d(&self) -> &GridFunction {
        &self.b_d
    }

    pub fn g_off(&self) -> GridFunction {
        &self.g - &self.g_d
    }

    pub fn b_off(&self) -> GridFunction {
        &self.b - &self.b_d
    }

    /// Nonzero `g_{k,s} = p_k Δ_{k+s}f q_{k+s−1} + h.c.`, keyed by `(k, s)`.
    pub fn gks(&self) -> &BTreeMap<(u32, u32), GridFunction> {
        &self.gks
    }

    /// Nonzero `b_{k,s} = p_k (f − f_{k+s}) p_{k+s} + h.c.`, keyed by `(k, s)`.
    pub fn bks(&self) -> &BTreeMap<(u32, u32), GridFunction> {
        &self.bks
    }

    /// `g_(s) = Σ_k g_{k,s}`.
    pub fn g_s(&self, s: u32) -> GridFunction {
        let mut acc = GridFunction::zeros(self.grid(), self.f().m());
        for ((_, ss), v) in &self.gks {
            if *ss == s {
                acc = &acc + v;
            }
        }
        acc
    }

    /// `b_{d,k} = p_k (f − f_k) p_k`.
    pub fn b_d_k(&self, k: u32) -> GridFunction {
        let p = self.cuc.p(k).function();
        (self.f() - self.f_k(k)).sandwich(p, p).hermitian_part()
    }

    /// `Δ_k f` for `1 ≤ k ≤ K`.
    pub fn df(&self, k: u32) -> GridFunction {
        self.f_k(k) - self.f_k(k - 1)
    }
}

/// Decomposition with the default spectral convention.
pub fn decompose(f: &GridFunction, lambda: f64) -> Result<CZParts> {
    decompose_with_mode(f, lambda, SpectralMode::Inclusive)
}

pub fn decompose_with_mode(f: &GridFunction, lambda: f64, mode: SpectralMode) -> Result<CZParts> {
    let cuc = cuculescu_with_mode(f, lambda, mode)?;
    Ok(decompose_from(cuc))
}

/// Assembles all parts from existing Cuculescu data.
pub fn decompose_from(cuc: CuculescuData) -> CZParts {
    let f = cuc.source().clone();
    let grid = *f.grid();
    let depth = grid.depth();
    let m = f.m();
    let filt = filtration(&f);
    // Index K+1 stands for ∞.
    let proj = |i: u32, c: usize| -> &Mat {
        if i > depth {
            cuc.terminal().value(c)
        } else {
            cuc.p(i).value(c)
        }
    };
    let level = |i: u32, c: usize| -> &Mat {
        if i > depth {
            f.value(c)
        } else {
            filt[i as usize].value(c)
        }
    };
    let mut gv = Vec::with_capacity(grid.cell_count());
    let mut bv = Vec::with_capacity(grid.cell_count());
    let mut gdv = Vec::with_capacity(grid.cell_count());
    let mut bdv = Vec::with_capacity(grid.cell_count());
    for c in 0..grid.cell_count() {
        let active: Vec<u32> = (0..=depth + 1).filter(|&i| frobenius(proj(i, c)) > 0.0).collect();
        let fc = f.value(c);
        let (mut g, mut b) = (Mat::zeros(m, m), Mat::zeros(m, m));
        let (mut gd, mut bd) = (Mat::zeros(m, m), Mat::zeros(m, m));
        for &i in &active {
            for &j in &active {
                let fl = level(i.max(j), c);
                let good = proj(i, c) * fl * proj(j, c);
                let bad = proj(i, c) * (fc - fl) * proj(j, c);
                if i == j {
                    gd += &good;
                    bd += &bad;
                }
                g += good;
                b += bad;
            }
        }
        gv.push(g);
        bv.push(b);
        gdv.push(gd);
        bdv.push(bd);
    }
    let herm = |v: Vec<Mat>| GridFunction::from_values_unchecked(grid, m, v).hermitian_part();
    let (g, b, g_d, b_d) = (herm(gv), herm(bv), herm(gdv), herm(bdv));

    let mut gks = BTreeMap::new();
    let mut bks = BTreeMap::new();
    for k in 1..depth {
        let pk = cuc.p(k).function();
        if pk.max_norm_frobenius() == 0.0 {
            continue;
        }
        for s in 1..=depth - k {
            let j = k + s;
            let d = &filt[j as usize] - &filt[j as usize - 1];
            let q = cuc.q(j - 1).function();
            let half = d.sandwich(pk, q);
            let gk = &half + &half.adjoint();
            if gk.max_norm_frobenius() > 0.0 {
                gks.insert((k, s), gk.hermitian_part());
            }
            let pj = cuc.p(j).function();
            if pj.max_norm_frobenius() > 0.0 {
                let half = (&f - &filt[j as usize]).sandwich(pk, pj);
                let bk = &half + &half.adjoint();
                if bk.max_norm_frobenius() > 0.0 {
                    bks.insert((k, s), bk.hermitian_part());
                }
            }
        }
    }
    CZParts { cuc, filt, g, b, g_d, b_d, gks, bks }
}

/// Identities that hold up to round-off.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityReport {
    pub f_l2: f64,
    /// `‖f − g − b‖₂`.
    pub reconstruction: f64,
    /// `‖g_off − Σ g_{k,s}‖₂`.
    pub g_off_identity: f64,
    /// `‖b_off − Σ b_{k,s}‖₂`.
    pub b_off_identity: f64,
    /// `max ‖p_i f_{i∧j} p_j‖` over `i ≠ j`.
    pub cross_min: f64,
    /// `max ‖(1 − p_k) g_{k,s} (1 − p_k)‖`.
    pub shift: f64,
}

impl IdentityReport {
    pub fn holds(&self) -> bool {
        let tol = 1e-10 * self.f_l2.max(f64::MIN_POSITIVE);
        self.reconstruction <= tol
            && self.g_off_identity <= tol
            && self.b_off_identity <= tol
            && self.cross_min <= PROPERTY_TOL
            && self.shift <= PROPERTY_TOL
    }
}

fn l2(f: &GridFunction) -> f64 {
    lp_norm(f, 2.0).expect("p = 2 is valid")
}

fn sum_of(map: &BTreeMap<(u32, u32), GridFunction>, grid: &TorusGrid, m: usize) -> GridFunction {
    map.values().fold(GridFunction::zeros(grid, m), |acc, v| &acc + v)
}

/// Measures the exact identities of the decomposition.
pub fn identities(parts: &CZParts) -> IdentityReport {
    let grid = *parts.grid();
    let m = parts.f().m();
    let depth = grid.depth();
    let f = parts.f();
    let recon = l2(&(f - &(&parts.g + &parts.b)));
    let g_off = l2(&(&parts.g_off() - &sum_of(&parts.gks, &grid, m)));
    let b_off = l2(&(&parts.b_off() - &sum_of(&parts.bks, &grid, m)));
    let mut cross_min = 0.0f64;
    for i in 0..=depth {
        for j in 0..=depth {
            if i == j {
                continue;
            }
            let fmin = parts.f_k(i.min(j));
            let (pi, pj) = (parts.cuc.p(i).function(), parts.cuc.p(j).function());
            for c in 0..grid.cell_count() {
                cross_min = cross_min.max(op_norm(&(pi.value(c) * fmin.value(c) * pj.value(c))));
            }
        }
    }
    let id = linalg::identity(m);
    let mut shift = 0.0f64;
    for ((k, _), gk) in &parts.gks {
        let p = parts.cuc.p(*k).function();
        for c in 0..grid.cell_count() {
            let co = &id - p.value(c);
            shift = shift.max(op_norm(&(&co * gk.value(c) * &co)));
        }
    }
    IdentityReport {
        f_l2: l2(f),
        reconstruction: recon,
        g_off_identity: g_off,
        b_off_identity: b_off,
        cross_min,
        shift,
    }
}

/// Diagonal estimates.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DiagonalReport {
    pub trace_g_d: f64,
    pub l1_f: f64,
    pub g_d_sup: f64,
    /// `2^n λ`.
    pub g_d_bound: f64,
    /// Largest Frobenius norm of a cube mean of `b_{d,k}` over `Q ∈ Q_k`.
    pub b_d_max_cube_mean: f64,
    pub sum_b_d_l1: f64,
    /// `2 ‖f‖₁`.
    pub b_d_bound: f64,
}

impl DiagonalReport {
    pub fn holds(&self) -> bool {
        (self.trace_g_d - self.l1_f).abs() <= 1e-10 * self.l1_f.max(1.0)
            && self.g_d_sup <= self.g_d_bound + PROPERTY_TOL
            && self.b_d_max_cube_mean <= 1e-10 * self.l1_f.max(1.0)
            && self.sum_b_d_l1 <= self.b_d_bound * (1.0 + 1e-12)
    }
}

pub fn diagonal_estimates(parts: &CZParts) -> DiagonalReport {
    let grid = *parts.grid();
    let l1_f = lp_norm(parts.f(), 1.0).expect("p = 1 is valid");
    let mut worst_mean = 0.0f64;
    let mut sum_b = 0.0;
    for k in 0..=grid.depth() {
        let bdk = parts.b_d_k(k);
        sum_b += lp_norm(&bdk, 1.0).expect("p = 1 is valid");
        let means = cube_means(&grid, bdk.values());
        for v in &means[k as usize] {
            worst_mean = worst_mean.max(frobenius(v));
        }
    }
    DiagonalReport {
        trace_g_d: trace_phi(&parts.g_d),
        l1_f,
        g_d_sup: lp_norm(&parts.g_d, f64::INFINITY).expect("p = ∞ is valid"),
        g_d_bound: (1u32 << grid.n()) as f64 * parts.lambda(),
        b_d_max_cube_mean: worst_mean,
        sum_b_d_l1: sum_b,
        b_d_bound: 2.0 * l1_f,
    }
}

/// Orthogonality of the `g_{k,s}` family.
#[derive(Clone, Debug, serde::Serialize)]
pub struct OrthogonalityReport {
    /// `max |φ(g_{k,s} g_{k',s'}*)|` over distinct pairs.
    pub max_cross: f64,
    /// `max ‖g_{k,s}‖₂²`.
    pub max_norm_sq: f64,
    /// `‖g_off‖₂²`.
    pub g_off_norm_sq: f64,
    /// `Σ ‖g_{k,s}‖₂²`.
    pub sum_norm_sq: f64,
    /// `‖f‖₂²`, the floor below which values count as round-off.
    pub f_norm_sq: f64,
}

impl OrthogonalityReport {
    pub fn holds(&self) -> bool {
        let floor = 1e-20 * self.f_norm_sq;
        self.max_cross <= 1e-10 * self.max_norm_sq.max(floor).max(f64::MIN_POSITIVE)
            && (self.g_off_norm_sq - self.sum_norm_sq).abs()
                <= 1e-8 * self.sum_norm_sq.max(floor).max(f64::MIN_POSITIVE)
    }
}

pub fn gks_orthogonality(parts: &CZParts) -> OrthogonalityReport {
    let items: Vec<&GridFunction> = parts.gks.values().collect();
    let mut max_cross = 0.0f64;
    for (a, x) in items.iter().enumerate() {
        for y in &items[a + 1..] {
            max_cross = max_cross.max(inner(x, y).norm());
        }
    }
    let norms: Vec<f64> = items.iter().map(|g| l2(g).powi(2)).collect();
    OrthogonalityReport {
        max_cross,
        max_norm_sq: norms.iter().copied().fold(0.0, f64::max),
        g_off_norm_sq: l2(&parts.g_off()).powi(2),
        sum_norm_sq: crate::matfun::pairwise_sum(&norms),
        f_norm_sq: l2(parts.f()).powi(2),
    }
}

/// The `ℓ∞(ℓ₂)` estimate.
#[derive(Clone, Debug, serde::Serialize)]
pub struct LinfL2Report {
    /// `(s, Σ_k ‖g_{k,s}‖₂²)`.
    pub per_s: Vec<(u32, f64)>,
    pub sup: f64,
    /// `C_n λ ‖f‖₁`.
    pub bound: f64,
}

impl LinfL2Report {
    pub fn holds(&self) -> bool {
        self.sup <= self.bound * (1.0 + 1e-12)
    }
}

pub fn linf_l2_estimate(parts: &CZParts) -> LinfL2Report {
    let depth = parts.grid().depth();
    let per_s: Vec<(u32, f64)> = (1..depth)
        .map(|s| {
            let v: Vec<f64> = parts.gks.iter().filter(|((_, ss), _)| *ss == s).map(|(_, g)| l2(g).powi(2)).collect();
            (s, crate::matfun::pairwise_sum(&v))
        })
        .collect();
    let sup = per_s.iter().map(|x| x.1).fold(0.0, f64::max);
    let l1 = lp_norm(parts.f(), 1.0).expect("p = 1 is valid");
    LinfL2Report { per_s, sup, bound: linf_l2_constant(parts.grid().n()) * parts.lambda() * l1 }
}

/// Term-by-term check of the bound behind [`linf_l2_constant`]: with
/// `q = q_{k+s−1}`, `p = p_k` and `a = φ(p f p)`,
/// `A = ‖q f_{k+s} p‖₂² ≤ 2^n λ a`, `D = ‖q f_{k+s−1} p‖₂² ≤ λ a`, and
/// `‖g_{k,s}‖₂² = 2 ‖q Δ_{k+s}f p‖₂² ≤ 2 (√A + √D)²`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct L2ChainReport {
    pub terms: usize,
    /// `max (A − 2^n λ a)`.
    pub a_excess: f64,
    /// `max (D − λ a)`.
    pub d_excess: f64,
    /// `max |‖g_{k,s}‖₂² − 2 ‖q Δ p‖₂²|`.
    pub expansion_error: f64,
    /// `max (‖g_{k,s}‖₂² − 2(√A+√D)²)`.
    pub triangle_excess: f64,
    /// `max_k a_k`-weighted check: `Σ_k a_k ≤ ‖f‖₁`.
    pub sum_a: f64,
    pub l1_f: f64,
}

impl L2ChainReport {
    pub fn holds(&self) -> bool {
        self.a_excess <= 1e-10
            && self.d_excess <= 1e-10
            && self.expansion_error <= 1e-10
            && self.triangle_excess <= 1e-10
            && self.sum_a <= self.l1_f * (1.0 + 1e-12)
    }
}

pub fn l2_chain(parts: &CZParts) -> L2ChainReport {
    let grid = *parts.grid();
    let depth = grid.depth();
    let lam = parts.lambda();
    let dbl = (1u32 << grid.n()) as f64;
    let f = parts.f();
    let mut rep = L2ChainReport {
        terms: 0,
        a_excess: f64::NEG_INFINITY,
        d_excess: f64::NEG_INFINITY,
        expansion_error: 0.0,
        triangle_excess: f64::NEG_INFINITY,
        sum_a: 0.0,
        l1_f: lp_norm(f, 1.0).expect("p = 1 is valid"),
    };
    for k in 1..=depth {
        let p = parts.cuc.p(k).function();
        let a = trace_phi(&f.sandwich(p, p));
        rep.sum_a += a;
        for s in 1..=depth - k {
            let j = k + s;
            let q = parts.cuc.q(j - 1).function();
            let big_a = l2(&parts.f_k(j).sandwich(q, p)).powi(2);
            let big_d = l2(&parts.f_k(j - 1).sandwich(q, p)).powi(2);
            let qdp = l2(&parts.df(j).sandwich(q, p)).powi(2);
            let gk = parts.gks.get(&(k, s)).map(|g| l2(g).powi(2)).unwrap_or(0.0);
            rep.terms += 1;
            rep.a_excess = rep.a_excess.max(big_a - dbl * lam * a);
            rep.d_excess = rep.d_excess.max(big_d - lam * a);
            rep.expansion_error = rep.expansion_error.max((gk - 2.0 * qdp).abs());
            rep.triangle_excess = rep.triangle_excess.max(gk - 2.0 * (big_a.sqrt() + big_d.sqrt()).powi(2));
        }
    }
    rep
}

fn range_sum(parts: &CZParts, from: u32, to: u32) -> GridFunction {
    let m = parts.f().m();
    (from..=to).fold(GridFunction::zeros(parts.grid(), m), |acc, r| &acc + parts.cuc.p(r).function())
}

/// The four boxes `b^i = P^i (f − f_{k+s}) P^i` with `P^1 = Σ_{r=0}^{s} p_{k+r}`,
/// `P^2 = Σ_{r=0}^{s−1}`, `P^3 = Σ_{r=1}^{s}`, `P^4 = Σ_{r=1}^{s−1}`.
pub fn bks_fourbox(parts: &CZParts, k: u32, s: u32) -> Result<[GridFunction; 4]> {
    let depth = parts.grid().depth();
    if k == 0 || s == 0 || k + s > depth {
        return Err(CzError::Range(format!("(k, s) = ({k}, {s}) outside 1 ≤ k, 1 ≤ s, k + s ≤ {depth}")));
    }
    let h = parts.f() - parts.f_k(k + s);
    let m = parts.f().m();
    let boxed = |lo: u32, hi: u32| {
        if lo > hi {
            GridFunction::zeros(parts.grid(), m)
        } else {
            let p = range_sum(parts, lo, hi);
            h.sandwich(&p, &p).hermitian_part()
        }
    };
    Ok([boxed(k, k + s), boxed(k, k + s - 1), boxed(k + 1, k + s), boxed(k + 1, k + s - 1)])
}

/// `(‖b¹ − b² − b³ + b⁴ − b_{k,s}‖₂, max cube mean over Q_{k+s})`.
pub fn fourbox_defects(parts: &CZParts, k: u32, s: u32) -> Result<(f64, f64)> {
    let [b1, b2, b3, b4] = bks_fourbox(parts, k, s)?;
    let combo = &(&(&b1 - &b2) - &b3) + &b4;
    let target = parts.bks.get(&(k, s)).cloned().unwrap_or_else(|| GridFunction::zeros(parts.grid(), parts.f().m()));
    let recon = l2(&(&combo - &target));
    let grid = *parts.grid();
    let mut worst = 0.0f64;
    for b in [&b1, &b2, &b3, &b4] {
        for v in &cube_means(&grid, b.values())[(k + s) as usize] {
            worst = worst.max(frobenius(v));
        }
    }
    Ok((recon, worst))
}

/// Weighted off-diagonal sums.
#[derive(Clone, Debug, serde::Serialize)]
pub struct WeightedReport {
    /// `Σ_s α_s Σ_k ‖b_{k,s}‖₁`.
    pub b_weighted: f64,
    /// `C (Σ_s s α_s) ‖f‖₁`.
    pub b_bound: f64,
    /// `‖Σ_s β_s Σ_k g_{k,s}‖₂²`.
    pub g_norm_sq: f64,
    /// `Σ_s β_s² Σ_k ‖g_{k,s}‖₂²`.
    pub g_weighted_sum: f64,
    /// `C_n (Σ_s β_s²) λ ‖f‖₁`.
    pub g_bound: f64,
}

impl WeightedReport {
    pub fn holds(&self) -> bool {
        self.b_weighted <= self.b_bound * (1.0 + 1e-12)
            && (self.g_norm_sq - self.g_weighted_sum).abs() <= 1e-8 * self.g_weighted_sum.max(1e-300)
            && self.g_weighted_sum <= self.g_bound * (1.0 + 1e-12)
    }
}

/// Weights are indexed from `s = 1`: `alpha[0]` multiplies `s = 1`.
pub fn weighted_offdiag(parts: &CZParts, alpha: &[f64], beta: &[f64]) -> Result<WeightedReport> {
    if alpha.iter().chain(beta).any(|w| w.is_nan() || *w < 0.0) {
        return Err(CzError::Range("weights must be nonnegative".into()));
    }
    let weight = |w: &[f64], s: u32| w.get(s as usize - 1).copied().unwrap_or(0.0);
    let l1 = lp_norm(parts.f(), 1.0)?;
    let b_weighted: f64 = parts.bks.iter().map(|((_, s), b)| weight(alpha, *s) * lp_norm(b, 1.0).unwrap_or(0.0)).sum();
    let s_alpha: f64 = alpha.iter().enumerate().map(|(i, a)| (i + 1) as f64 * a).sum();
    let mut comb = GridFunction::zeros(parts.grid(), parts.f().m());
    let mut g_weighted_sum = 0.0;
    for ((_, s), g) in &parts.gks {
        let w = weight(beta, *s);
        if w != 0.0 {
            comb = &comb + &g.scale(w);
            g_weighted_sum += w * w * l2(g).powi(2);
        }
    }
    let beta_sq: f64 = beta.iter().map(|b| b * b).sum();
    Ok(WeightedReport {
        b_weighted,
        b_bound: WEIGHTED_B_CONSTANT * s_alpha * l1,
        g_norm_sq: l2(&comb).powi(2),
        g_weighted_sum,
        g_bound: linf_l2_constant(parts.grid().n()) * beta_sq * parts.lambda() * l1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn parts(n: usize, depth: u32, m: usize, seed: u64) -> CZParts {
        let g = TorusGrid::new(n, depth).unwrap();
        let f = fixtures::random_psd(&g, m, seed).unwrap();
        decompose(&f, 1.25 * fixtures::root_norm(&f)).unwrap()
    }

    #[test]
    fn bounded_function_is_all_good() {
        let g = TorusGrid::new(1, 5).unwrap();
        let f = fixtures::random_psd(&g, 2, 4).unwrap();
        let p = decompose(&f, 2.0 * lp_norm(&f, f64::INFINITY).unwrap()).unwrap();
        assert!(p.g().max_diff(&f) < 1e-14);
        assert!(p.b().max_norm_frobenius() < 1e-14);
        assert!(p.gks().is_empty() && p.bks().is_empty());
    }

    #[test]
    fn identities_and_estimates() {
        for (n, depth, m) in [(1, 6, 2), (2, 3, 2), (1, 5, 3)] {
            let p = parts(n, depth, m, 5);
            let id = identities(&p);
            assert!(id.holds(), "{id:?}");
            let d = diagonal_estimates(&p);
            assert!(d.holds(), "{d:?}");
            let o = gks_orthogonality(&p);
            assert!(o.holds(), "{o:?}");
            let c = l2_chain(&p);
            assert!(c.holds(), "{c:?}");
            assert!(linf_l2_estimate(&p).holds());
        }
    }

    #[test]
    fn fourbox_on_random_data() {
        let p = parts(1, 6, 2, 8);
        assert!(bks_fourbox(&p, 3, 4).is_err());
        for k in 1..6 {
            for s in 1..=6 - k {
                let (recon, mean) = fourbox_defects(&p, k, s).unwrap();
                assert!(recon < 1e-12 && mean < 1e-12, "{k} {s}: {recon} {mean}");
            }
        }
    }

    #[test]
    fn weighted_sums() {
        let p = parts(1, 6, 2, 2);
        let rep = weighted_offdiag(&p, &[1.0], &[0.5, 0.25, 0.125, 0.0625, 0.03125]).unwrap();
        assert!(rep.holds(), "{rep:?}");
        let zero = weighted_offdiag(&p, &[], &[]).unwrap();
        assert_eq!(zero.g_norm_sq, 0.0);
        assert!(weighted_offdiag(&p, &[-1.0], &[]).is_err());
    }

    #[test]
    fn constant_value() {
        assert!((linf_l2_constant(1) - 11.656854249492381).abs() < 1e-12);
    }
}
