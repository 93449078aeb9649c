//! Cuculescu's construction over the dyadic filtration, and the dilated
//! projections built from it.
//!
//! For `f ≥ 0` with `‖E_0 f‖_∞ ≤ λ` the projections are
//! `q_0 = 1`, `ξ_Q = χ_{[0,λ]}(ξ_{Q̂} f_Q ξ_{Q̂})` restricted to `range ξ_{Q̂}`,
//! and `q_k = Σ_{Q ∈ Q_k} ξ_Q 1_Q`.

use crate::dyadic::{cube_means, dilation_cells, expand_level, DyadicCube, TorusGrid};
use crate::error::{CzError, Result};
use crate::linalg::{self, frobenius, op_norm, range_projection, real};
use crate::matfun::{lp_norm, proj_leq, spectral_proj_leq, trace_phi, GridFunction, ProjectionField, SpectralMode};
use crate::Mat;

/// Tolerance for the commutation and level properties.
pub const PROPERTY_TOL: f64 = 1e-9;

/// The projections `q_k`, `ξ_Q`, `p_k` attached to `(f, λ)`.
#[derive(Clone, Debug)]
pub struct CuculescuData {
    lambda: f64,
    mode: SpectralMode,
    f: GridFunction,
    means: Vec<Vec<Mat>>,
    xi: Vec<Vec<Mat>>,
    q: Vec<ProjectionField>,
    p: Vec<ProjectionField>,
}

impl CuculescuData {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mode(&self) -> SpectralMode {
        self.mode
    }

    pub fn grid(&self) -> &TorusGrid {
        self.f.grid()
    }

    pub fn m(&self) -> usize {
        self.f.m()
    }

    /// The function the data was built from.
    pub fn source(&self) -> &GridFunction {
        &self.f
    }

    /// Cube averages of the source, `[k][cube]`.
    pub fn source_means(&self) -> &[Vec<Mat>] {
        &self.means
    }

    pub fn depth(&self) -> u32 {
        self.grid().depth()
    }

    /// `q_k`, `0 ≤ k ≤ K`.
    pub fn q(&self, k: u32) -> &ProjectionField {
        &self.q[k as usize]
    }

    pub fn qs(&self) -> &[ProjectionField] {
        &self.q
    }

    /// `p_k = q_{k−1} − q_k` with `q_{−1} = 1`.
    pub fn p(&self, k: u32) -> &ProjectionField {
        &self.p[k as usize]
    }

    pub fn ps(&self) -> &[ProjectionField] {
        &self.p
    }

    /// `q_K`, the meet of the decreasing family.
    pub fn terminal(&self) -> &ProjectionField {
        &self.q[self.q.len() - 1]
    }

    /// `ξ_Q`.
    pub fn xi(&self, cube: &DyadicCube) -> &Mat {
        &self.xi[cube.generation() as usize][cube.linear()]
    }

    /// `π_Q = ξ_{Q̂} − ξ_Q` for cubes of generation at least one.
    pub fn pi(&self, cube: &DyadicCube) -> Mat {
        match cube.father() {
            Some(father) => self.xi(&father) - self.xi(cube),
            None => Mat::zeros(self.m(), self.m()),
        }
    }

    /// Per-cube values of generation `k`.
    pub fn xi_level(&self, k: u32) -> &[Mat] {
        &self.xi[k as usize]
    }

    /// Checks the defining properties and reports the measured defects.
    pub fn check(&self) -> CuculescuReport {
        let grid = *self.grid();
        let id = linalg::identity(self.m());
        let mut rep = CuculescuReport { decreasing: true, ..Default::default() };
        for k in 1..=grid.depth() {
            for cube in grid.cubes(k) {
                let father = cube.father().expect("generation at least one");
                let (qp, qk) = (self.xi(&father), self.xi(&cube));
                let fk = &self.means[k as usize][cube.linear()];
                if !proj_leq(qk, qp) {
                    rep.decreasing = false;
                }
                let a = qp * fk * qp;
                rep.max_commutator = rep.max_commutator.max(op_norm(&(qk * &a - &a * qk)));
                let level = qk * fk * qk - qk * real(self.lambda);
                let top = linalg::herm_eigenvalues(&level).last().copied().unwrap_or(0.0);
                rep.max_level_excess = rep.max_level_excess.max(top);
                let pk = qp - qk;
                rep.max_doubling = rep.max_doubling.max(op_norm(&(&pk * fk * &pk)));
            }
        }
        let tq = self.terminal().function();
        rep.mass_defect = trace_phi(&tq.map(|v| &id - v));
        rep.l1_over_lambda = lp_norm(&self.f, 1.0).unwrap_or(f64::NAN) / self.lambda;
        rep
    }
}

/// Measured Cuculescu properties.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct CuculescuReport {
    pub decreasing: bool,
    pub max_commutator: f64,
    /// Largest eigenvalue of `q_k f_k q_k − λ q_k`.
    pub max_level_excess: f64,
    /// `max_k ‖p_k f_k p_k‖_∞`.
    pub max_doubling: f64,
    /// `φ(1 − q_K)`.
    pub mass_defect: f64,
    /// `‖f‖₁ / λ`.
    pub l1_over_lambda: f64,
}

impl CuculescuReport {
    /// All properties within tolerance for dimension `n`.
    pub fn holds(&self, n: usize, lambda: f64) -> bool {
        self.decreasing
            && self.max_commutator <= PROPERTY_TOL
            && self.max_level_excess <= PROPERTY_TOL
            && self.mass_defect <= self.l1_over_lambda * (1.0 + 1e-12) + 1e-12
            && self.max_doubling <= (1u32 << n) as f64 * lambda + PROPERTY_TOL
    }
}

fn ensure_psd(f: &GridFunction) -> Result<GridFunction> {
    if f.is_psd() {
        Ok(f.clone())
    } else {
        f.clone().with_psd()
    }
}

/// Cuculescu projections with kernel directions retained.
pub fn cuculescu(f: &GridFunction, lambda: f64) -> Result<CuculescuData> {
    cuculescu_with_mode(f, lambda, SpectralMode::Inclusive)
}

/// Cuculescu projections with an explicit zero-eigenvalue convention.
pub fn cuculescu_with_mode(f: &GridFunction, lambda: f64, mode: SpectralMode) -> Result<CuculescuData> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CzError::Range(format!("threshold λ = {lambda} must be positive and finite")));
    }
    let f = ensure_psd(f)?;
    let grid = *f.grid();
    let m = f.m();
    let means = cube_means(&grid, f.values());
    let root = op_norm(&means[0][0]);
    if root > lambda + 1e-10 * root.max(1.0) {
        return Err(CzError::Precondition(format!("root average has norm ‖E_0 f‖_∞ = {root:.6e} > λ = {lambda:.6e}")));
    }
    let mut xi: Vec<Vec<Mat>> = vec![vec![linalg::identity(m)]];
    for k in 1..=grid.depth() {
        let level: Result<Vec<Mat>> = grid
            .cubes(k)
            .map(|cube| {
                let father = cube.father().expect("generation at least one");
                let within = &xi[k as usize - 1][father.linear()];
                cuculescu_step(&means[k as usize][cube.linear()], within, lambda, mode)
            })
            .collect();
        xi.push(level?);
    }
    let q: Vec<ProjectionField> = (0..=grid.depth())
        .map(|k| {
            let vals = expand_level(&grid, &xi[k as usize], k);
            ProjectionField::new_unchecked(GridFunction::from_values_unchecked(grid, m, vals), k)
        })
        .collect();
    let id = linalg::identity(m);
    let p = (0..=grid.depth())
        .map(|k| {
            let vals = if k == 0 {
                q[0].function().values().iter().map(|v| &id - v).collect()
            } else {
                let (prev, cur) = (q[k as usize - 1].function().values(), q[k as usize].function().values());
                prev.iter().zip(cur).map(|(a, b)| a - b).collect()
            };
            ProjectionField::new_unchecked(GridFunction::from_values_unchecked(grid, m, vals), k)
        })
        .collect();
    Ok(CuculescuData { lambda, mode, f, means, xi, q, p })
}

/// One recursion step: the `≤ λ` spectral projection of `ξ a ξ` inside `ξ`.
pub fn cuculescu_step(avg: &Mat, within: &Mat, lambda: f64, mode: SpectralMode) -> Result<Mat> {
    let a = within * avg * within;
    let a = (&a + a.adjoint()) * real(0.5);
    spectral_proj_leq(&a, lambda, within, mode)
}

/// Cuculescu recursion over an arbitrary chain of averaged values
/// `a_1, …, a_N` starting from `q_0`; returns `q_0, …, q_N`.
pub fn cuculescu_chain(averages: &[Mat], q0: &Mat, lambda: f64, mode: SpectralMode) -> Result<Vec<Mat>> {
    let mut out = vec![q0.clone()];
    for a in averages {
        let next = cuculescu_step(a, out.last().expect("nonempty"), lambda, mode)?;
        out.push(next);
    }
    Ok(out)
}

/// Finite-filtration maximal inequality report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DoobReport {
    pub lambda: f64,
    /// `sup_k ‖q f_k q‖_∞`.
    pub sup_norm: f64,
    /// `φ(1 − q)`.
    pub mass: f64,
    pub l1_norm: f64,
    pub sup_ok: bool,
    pub mass_ok: bool,
}

/// Checks `sup_k ‖q f_k q‖_∞ ≤ λ` and `φ(1−q) ≤ ‖f‖₁/λ`. Hermitian input
/// is split into positive and negative parts and `q` is the meet of both
/// terminal projections.
pub fn doob_weak_check(f: &GridFunction, lambda: f64) -> Result<DoobReport> {
    let f = if f.is_hermitian() { f.clone() } else { f.clone().with_hermitian()? };
    let grid = *f.grid();
    let m = f.m();
    let (plus, minus) = positive_negative_parts(&f);
    let q: Vec<Mat> = if plus.max_norm_frobenius() > 0.0 && minus.max_norm_frobenius() > 0.0 {
        let qp = cuculescu(&plus, lambda)?;
        let qm = cuculescu(&minus, lambda)?;
        (0..grid.cell_count()).map(|c| linalg::proj_meet(qp.terminal().value(c), qm.terminal().value(c))).collect()
    } else {
        let part = if minus.max_norm_frobenius() > 0.0 { &minus } else { &plus };
        cuculescu(part, lambda)?.terminal().function().values().to_vec()
    };
    let qf = GridFunction::new(grid, m, q)?;
    let means = cube_means(&grid, f.values());
    let mut sup_norm = 0.0f64;
    for k in 0..=grid.depth() {
        for c in 0..grid.cell_count() {
            let fk = &means[k as usize][grid.cube_index_of(c, k)];
            let qc = qf.value(c);
            sup_norm = sup_norm.max(op_norm(&(qc * fk * qc)));
        }
    }
    let id = linalg::identity(m);
    let mass = trace_phi(&qf.map(|v| &id - v));
    let l1_norm = lp_norm(&f, 1.0)?;
    Ok(DoobReport {
        lambda,
        sup_norm,
        mass,
        l1_norm,
        sup_ok: sup_norm <= lambda + PROPERTY_TOL,
        mass_ok: mass <= l1_norm / lambda + 1e-12,
    })
}

/// Spectral positive and negative parts, cell by cell.
pub fn positive_negative_parts(f: &GridFunction) -> (GridFunction, GridFunction) {
    let split = |sign: f64| {
        f.map(|v| {
            let (vals, vecs) = linalg::herm_eigen(v);
            let mut d = Mat::zeros(vals.len(), vals.len());
            for (i, x) in vals.iter().enumerate() {
                d[(i, i)] = real((sign * x).max(0.0));
            }
            let out = &vecs * d * vecs.adjoint();
            (&out + out.adjoint()) * real(0.5)
        })
        .with_hermitian()
        .expect("symmetrized")
    };
    (split(1.0), split(-1.0))
}

/// Threshold for range projections of the accumulated dilated families.
pub const RANGE_THRESHOLD: f64 = 1e-10;

fn dilated_complement(grid: &TorusGrid, m: usize, psi: Vec<Mat>) -> ProjectionField {
    let id = linalg::identity(m);
    let vals = psi.iter().map(|s| &id - range_projection(s, RANGE_THRESHOLD)).collect();
    ProjectionField::new_unchecked(GridFunction::from_values_unchecked(*grid, m, vals), grid.depth())
}

/// `ζ(x) = 1 − range(Σ_{k ≥ 1} Σ_{Q ∈ Q_k, x ∈ 9Q} π_Q)`.
pub fn zeta(c: &CuculescuData) -> ProjectionField {
    let grid = *c.grid();
    let m = c.m();
    let mut psi = vec![Mat::zeros(m, m); grid.cell_count()];
    for k in 1..=grid.depth() {
        for cube in grid.cubes(k) {
            let pi = c.pi(&cube);
            if frobenius(&pi) < 1e-12 {
                continue;
            }
            for cell in dilation_cells(&grid, &cube, 9.0) {
                psi[cell] += &pi;
            }
        }
    }
    dilated_complement(&grid, m, psi)
}

/// `ζ_{f,s}(x) = 1 − range(Σ_{k ≤ K−s} Σ_{Q ∈ Q_k, x ∈ 9Q} (1 − ξ_Q))`,
/// where `qseq[k]` is constant on generation-`k` cubes.
pub fn zeta_fs(qseq: &[ProjectionField], s: u32) -> Result<ProjectionField> {
    let first = qseq.first().ok_or_else(|| CzError::Precondition("empty projection sequence".into()))?;
    let grid = *first.grid();
    let m = first.m();
    if s == 0 {
        return Err(CzError::Range("shift s must be positive".into()));
    }
    let id = linalg::identity(m);
    let mut psi = vec![Mat::zeros(m, m); grid.cell_count()];
    for (k, qk) in qseq.iter().enumerate() {
        let k = k as u32;
        if qk.generation() != k || qk.grid() != &grid {
            return Err(CzError::Contract(format!("sequence entry {k} is not declared on generation {k}")));
        }
        if k + s > grid.depth() {
            continue;
        }
        for cube in grid.cubes(k) {
            let cells = grid.cube_cells(&cube);
            let comp = &id - qk.value(cells[0]);
            if frobenius(&comp) < 1e-12 {
                continue;
            }
            for cell in dilation_cells(&grid, &cube, 9.0) {
                psi[cell] += &comp;
            }
        }
    }
    Ok(dilated_complement(&grid, m, psi))
}

/// True iff `‖q_k Δ_{k+s}h q_k‖_∞ ≤ 1e-9·max(1, ‖h‖_∞)` for every `k` with
/// `k + s ≤ K`.
pub fn shift_check(h: &GridFunction, qseq: &[ProjectionField], s: u32) -> Result<bool> {
    Ok(shift_defect(h, qseq, s)? <= PROPERTY_TOL * lp_norm(h, f64::INFINITY)?.max(1.0))
}

/// Largest `‖q_k Δ_{k+s}h q_k‖_∞` over admissible `k`.
pub fn shift_defect(h: &GridFunction, qseq: &[ProjectionField], s: u32) -> Result<f64> {
    let grid = *h.grid();
    if s == 0 {
        return Err(CzError::Range("shift s must be positive".into()));
    }
    let means = cube_means(&grid, h.values());
    let mut worst = 0.0f64;
    for (k, qk) in qseq.iter().enumerate() {
        let j = k as u32 + s;
        if j > grid.depth() {
            continue;
        }
        if qk.m() != h.m() || qk.grid() != &grid {
            return Err(CzError::Shape("projection sequence does not match the function".into()));
        }
        for c in 0..grid.cell_count() {
            let d = &means[j as usize][grid.cube_index_of(c, j)] - &means[j as usize - 1][grid.cube_index_of(c, j - 1)];
            let q = qk.value(c);
            worst = worst.max(op_norm(&(q * d * q)));
        }
    }
    Ok(worst)
}

/// Outcome of the localization checks for `ζ`.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct KeylemReport {
    /// `λ φ(1 − ζ)`.
    pub weighted_mass: f64,
    /// `9^n ‖f‖₁`.
    pub mass_bound: f64,
    pub pairs_checked: usize,
    /// Pairs `(Q₀, x ∈ 9Q₀)` where `ζ(x) ≤ 1 − ξ_{Q̂₀} + ξ_{Q₀}` fails.
    pub failures_father: usize,
    /// Pairs where `ζ(x) ≤ ξ_{Q₀}` fails.
    pub failures_cube: usize,
    /// Largest `‖ζ(x) π_Q‖` over `Q` and `x ∈ 9Q`.
    pub max_pi_overlap: f64,
}

impl KeylemReport {
    pub fn holds(&self) -> bool {
        self.weighted_mass <= self.mass_bound * (1.0 + 1e-12) + 1e-12
            && self.failures_father == 0
            && self.failures_cube == 0
            && self.max_pi_overlap <= PROPERTY_TOL
    }
}

/// Checks the mass bound and the localization of `ζ` against every cube of
/// generation at least one and every cell of its 9-fold dilation.
pub fn check_keylem(c: &CuculescuData, z: &ProjectionField) -> KeylemReport {
    let grid = *c.grid();
    let id = linalg::identity(c.m());
    let mass = trace_phi(&z.complement().function().clone());
    let mut rep = KeylemReport {
        weighted_mass: c.lambda() * mass,
        mass_bound: 9f64.powi(grid.n() as i32) * lp_norm(c.source(), 1.0).unwrap_or(f64::NAN),
        ..Default::default()
    };
    for k in 1..=grid.depth() {
        for cube in grid.cubes(k) {
            let xq = c.xi(&cube);
            let xf = c.xi(&cube.father().expect("generation at least one"));
            let upper = &id - xf + xq;
            let pi = xf - xq;
            for cell in dilation_cells(&grid, &cube, 9.0) {
                let zx = z.value(cell);
                rep.pairs_checked += 1;
                if !proj_leq(zx, &upper) {
                    rep.failures_father += 1;
                }
                if !proj_leq(zx, xq) {
                    rep.failures_cube += 1;
                }
                rep.max_pi_overlap = rep.max_pi_overlap.max(op_norm(&(zx * &pi)));
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::dyadic_maximal;
    use crate::fixtures;

    #[test]
    fn bounded_function_keeps_identity() {
        let g = TorusGrid::new(1, 4).unwrap();
        let f = fixtures::random_psd(&g, 2, 3).unwrap();
        let lam = lp_norm(&f, f64::INFINITY).unwrap() * 1.01;
        let c = cuculescu(&f, lam).unwrap();
        for k in 0..=4 {
            assert!(c.q(k).function().max_diff(&GridFunction::identity(&g, 2)) < 1e-12);
            assert!(c.p(k).function().max_norm_frobenius() < 1e-12);
        }
    }

    #[test]
    fn precondition_names_root_average() {
        let g = TorusGrid::new(1, 3).unwrap();
        let f = GridFunction::identity(&g, 2).scale(2.0);
        match cuculescu(&f, 1.0) {
            Err(CzError::Precondition(msg)) => assert!(msg.contains("root average")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_psd() {
        let g = TorusGrid::new(1, 2).unwrap();
        let f = GridFunction::from_real_scalars(g, &[1.0, -0.5, 0.2, 0.1]).unwrap();
        assert!(matches!(cuculescu(&f, 10.0), Err(CzError::Contract(_))));
    }

    #[test]
    fn scalar_case_matches_maximal_cubes() {
        let g = TorusGrid::new(1, 6).unwrap();
        let f = fixtures::random_psd(&g, 1, 11).unwrap();
        let lam = 1.5;
        let c = cuculescu(&f, lam).unwrap();
        let md = dyadic_maximal(&f).unwrap();
        for k in 1..=6u32 {
            let mut expect = crate::dyadic::CellMask::empty(&g);
            for q in md.maximal_cubes(lam).into_iter().filter(|q| q.generation() == k) {
                expect.union_with(&crate::dyadic::CellMask::from_cube(&g, &q));
            }
            for cell in 0..g.cell_count() {
                let pk = c.p(k).value(cell)[(0, 0)].re;
                assert!((pk - if expect.contains(cell) { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn properties_on_random_matrix_data() {
        let g = TorusGrid::new(1, 6).unwrap();
        for seed in 0..5 {
            let f = fixtures::random_psd(&g, 3, seed).unwrap();
            let lam = 1.25 * fixtures::root_norm(&f);
            let c = cuculescu(&f, lam).unwrap();
            let rep = c.check();
            assert!(rep.holds(1, lam), "{rep:?}");
            let z = zeta(&c);
            assert!(check_keylem(&c, &z).holds());
        }
    }

    #[test]
    fn zeta_of_trivial_data_is_identity() {
        let g = TorusGrid::new(2, 3).unwrap();
        let f = GridFunction::identity(&g, 2).scale(0.5);
        let c = cuculescu(&f, 1.0).unwrap();
        assert!(zeta(&c).function().max_diff(&GridFunction::identity(&g, 2)) < 1e-14);
        let zf = zeta_fs(c.qs(), 1).unwrap();
        assert!(zf.function().max_diff(&GridFunction::identity(&g, 2)) < 1e-14);
    }

    #[test]
    fn single_cube_complement_is_nine_fold() {
        let g = TorusGrid::new(1, 6).unwrap();
        let mut qs: Vec<ProjectionField> =
            (0..=6).map(|k| ProjectionField::new_unchecked(GridFunction::identity(&g, 1), k)).collect();
        let cube = DyadicCube::new(&g, 5, &[7]).unwrap();
        let vals: Vec<Mat> =
            g.cubes(5).map(|q| Mat::from_element(1, 1, real(if q == cube { 0.0 } else { 1.0 }))).collect();
        qs[5] = ProjectionField::from_cube_values(&g, 5, 1, &vals).unwrap();
        let z = zeta_fs(&qs, 1).unwrap();
        let nine = cube.nine_fold(&g);
        for cell in 0..g.cell_count() {
            let v = z.value(cell)[(0, 0)].re;
            assert_eq!(v < 0.5, nine.contains(cell));
        }
    }

    #[test]
    fn shift_check_trivial_cases() {
        let g = TorusGrid::new(1, 4).unwrap();
        let ids: Vec<ProjectionField> =
            (0..=4).map(|k| ProjectionField::new_unchecked(GridFunction::identity(&g, 1), k)).collect();
        let flat = GridFunction::identity(&g, 1);
        assert!(shift_check(&flat, &ids, 1).unwrap());
        let bumpy = GridFunction::from_real_scalars(g, &(0..16).map(|i| (i % 2) as f64).collect::<Vec<_>>()).unwrap();
        assert!(!shift_check(&bumpy, &ids, 1).unwrap());
    }

    #[test]
    fn doob_check_for_hermitian_input() {
        let g = TorusGrid::new(1, 5).unwrap();
        let a = fixtures::random_psd(&g, 2, 1).unwrap();
        let b = fixtures::random_psd(&g, 2, 2).unwrap();
        let f = &a - &b;
        for lam in [0.8, 1.5, 4.0] {
            let rep = doob_weak_check(&f, lam).unwrap();
            assert!(rep.sup_ok && rep.mass_ok, "{rep:?}");
        }
    }
}
