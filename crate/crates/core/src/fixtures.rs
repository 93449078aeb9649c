//! Deterministic test functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dyadic::{DyadicCube, TorusGrid};
use crate::error::{CzError, Result};
use crate::linalg::{op_norm, real};
use crate::matfun::{trace_phi, GridFunction};
use crate::{Mat, C64};

/// Seeded generator used by every fixture.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian (`E|z|² = 1`).
pub fn complex_gaussian(r: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix(r: &mut ChaCha8Rng, m: usize) -> Mat {
    Mat::from_fn(m, m, |_, _| complex_gaussian(r))
}

fn normalize_l1(f: GridFunction) -> Result<GridFunction> {
    let t = trace_phi(&f);
    if t <= 0.0 {
        return Err(CzError::Precondition("fixture has zero trace".into()));
    }
    f.scale(1.0 / t).with_psd()
}

/// `A*A` per cell with independent complex Gaussian `A`, normalized to
/// `‖f‖₁ = 1`.
pub fn random_psd(grid: &TorusGrid, m: usize, seed: u64) -> Result<GridFunction> {
    let mut r = rng(seed);
    let vals = (0..grid.cell_count())
        .map(|_| {
            let a = gaussian_matrix(&mut r, m);
            let p = a.adjoint() * a;
            (&p + p.adjoint()) * real(0.5)
        })
        .collect();
    normalize_l1(GridFunction::new(*grid, m, vals)?)
}

/// A small constant background plus `count` rank-one spikes at random cells,
/// normalized to `‖f‖₁ = 1`.
pub fn psd_spikes(grid: &TorusGrid, m: usize, count: usize, seed: u64) -> Result<GridFunction> {
    let mut r = rng(seed);
    let n = grid.cell_count();
    let mut vals = vec![Mat::identity(m, m) * real(0.05 / m as f64); n];
    for _ in 0..count {
        let cell = rand::Rng::random_range(&mut r, 0..n);
        let v = Mat::from_fn(m, 1, |_, _| complex_gaussian(&mut r));
        let v = &v * real(1.0 / v.norm());
        vals[cell] += &v * v.adjoint() * real(n as f64 / count as f64);
    }
    for v in vals.iter_mut() {
        *v = (&*v + v.adjoint()) * real(0.5);
    }
    normalize_l1(GridFunction::new(*grid, m, vals)?)
}

/// `‖E_0 f‖_∞`.
pub fn root_norm(f: &GridFunction) -> f64 {
    let mut acc = Mat::zeros(f.m(), f.m());
    let vals: Vec<Mat> = f.values().to_vec();
    let means = crate::dyadic::cube_means(f.grid(), &vals);
    acc += &means[0][0];
    op_norm(&acc)
}

/// Scalar spike of unit mass on one cell.
pub fn scalar_spike(grid: &TorusGrid, cell: usize) -> Result<GridFunction> {
    if cell >= grid.cell_count() {
        return Err(CzError::Range(format!("cell {cell} outside the grid")));
    }
    let mut v = vec![0.0; grid.cell_count()];
    v[cell] = grid.cell_count() as f64;
    GridFunction::from_real_scalars(*grid, &v)?.with_psd()
}

/// Haar function of `cube`: `+1` on the lower half along the first axis and
/// `−1` on the upper half. Satisfies `E_j f = 0` for `j = generation(cube)`.
pub fn haar_atom(grid: &TorusGrid, cube: &DyadicCube) -> Result<GridFunction> {
    if cube.generation() >= grid.depth() {
        return Err(CzError::Range("a Haar atom needs a cube above the finest generation".into()));
    }
    let g = cube.generation();
    let v: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            if grid.cube_of(c, g) != *cube {
                0.0
            } else if grid.cell_coords(c)[0] >> (grid.depth() - g - 1) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    GridFunction::from_real_scalars(*grid, &v)
}

/// Real trigonometric polynomial in each entry with frequencies `|ν|_∞ ≤
/// max_freq`, symmetrized to Hermitian values.
pub fn band_limited(grid: &TorusGrid, m: usize, max_freq: usize, seed: u64) -> Result<GridFunction> {
    if 2 * max_freq >= grid.side() {
        return Err(CzError::Range(format!("max frequency {max_freq} not below Nyquist")));
    }
    let mut r = rng(seed);
    let nf = 2 * max_freq as i64 + 1;
    let modes: Vec<([i64; 2], Mat)> = (0..nf.pow(grid.n() as u32))
        .map(|i| {
            let nu = if grid.n() == 1 {
                [i - max_freq as i64, 0]
            } else {
                [i / nf - max_freq as i64, i % nf - max_freq as i64]
            };
            (nu, gaussian_matrix(&mut r, m))
        })
        .collect();
    let vals = (0..grid.cell_count())
        .map(|c| {
            let x = grid.cell_center(c);
            let mut acc = Mat::zeros(m, m);
            for (nu, coef) in &modes {
                let phase = 2.0 * std::f64::consts::PI * (nu[0] as f64 * x[0] + nu[1] as f64 * x[1]);
                acc += coef * C64::new(phase.cos(), phase.sin());
            }
            (&acc + acc.adjoint()) * real(0.5)
        })
        .collect();
    GridFunction::new(*grid, m, vals)?.with_hermitian()
}

/// Constant function; the PSD flag is set when the value allows it.
pub fn constant(grid: &TorusGrid, value: &Mat) -> Result<GridFunction> {
    GridFunction::constant(grid, value).with_psd()
}
