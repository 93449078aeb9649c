use anyhow::{Context, Result};
use rayon::prelude::*;

use czlab_core::counterex::{appendix_b, lp_blowup, mart_transform_example};
use czlab_core::cuculescu::{check_keylem, cuculescu, zeta};
use czlab_core::czdecomp::{
    decompose, diagonal_estimates, gks_orthogonality, identities, l2_chain, linf_l2_constant, linf_l2_estimate,
};
use czlab_core::dyadic::{DyadicCube, TorusGrid};
use czlab_core::fixtures::{haar_atom, psd_spikes, random_psd, root_norm, scalar_spike};
use czlab_core::io::{read_grid_function, read_kernel, write_cz_parts};
use czlab_core::matfun::{lp_norm, GridFunction};
use czlab_core::pseudoloc::{
    corollary_decay, l1_atomic_residual, l2_residual, log_grid, nc_pseudoloc_check, op_norm, phi_s, psi_s,
    schur_diagnostics, weak11_profile, DecaySeries,
};
use czlab_core::singint::KernelOperator;
use czlab_core::CzError;

use crate::config::{ConfigError, Experiment, ExperimentConfig, KernelChoice};
use crate::report::{CounterRow, Outcome, Row, Table};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::DecomposeAudit => decompose_audit(cfg),
        Experiment::CuculescuAudit => cuculescu_audit(cfg),
        Experiment::ZetaAudit => zeta_audit(cfg),
        Experiment::PseudolocL2 => pseudoloc(cfg, false),
        Experiment::PseudolocL1 => pseudoloc(cfg, true),
        Experiment::CorollaryDecay => corollary(cfg),
        Experiment::ShiftedT1 => shifted_t1(cfg),
        Experiment::Schur => schur(cfg),
        Experiment::NcPseudoloc => nc_pseudoloc(cfg),
        Experiment::Weak11 => weak11(cfg),
        Experiment::AppB => appb(cfg),
        Experiment::LpBlowup => lpblowup(cfg),
        Experiment::MartTransform => marttransform(cfg),
    }
}

fn grid(cfg: &ExperimentConfig) -> Result<TorusGrid> {
    Ok(TorusGrid::new(cfg.n, cfg.depth)?)
}

fn kernel(cfg: &ExperimentConfig, grid: &TorusGrid) -> Result<KernelOperator> {
    Ok(match &cfg.kernel {
        KernelChoice::Hilbert => KernelOperator::hilbert(grid)?,
        KernelChoice::Cotangent => KernelOperator::cotangent(grid, cfg.epsilon)?,
        KernelChoice::File(path) => {
            let op = read_kernel(path).with_context(|| format!("reading kernel {}", path.display()))?;
            if op.grid() != grid {
                return Err(ConfigError(format!("kernel file {} lives on a different grid", path.display())).into());
            }
            op
        }
    })
}

/// The input function: the `--input` file, or the experiment's default
/// fixture built from the seed.
fn input(cfg: &ExperimentConfig, default: impl FnOnce() -> Result<GridFunction>) -> Result<GridFunction> {
    match &cfg.input {
        Some(path) => Ok(read_grid_function(path)?),
        None => default(),
    }
}

fn matrix_input(cfg: &ExperimentConfig, grid: &TorusGrid) -> Result<GridFunction> {
    input(cfg, || Ok(random_psd(grid, cfg.m, cfg.seed)?))
}

/// Haar atom at generation `K − 3` in a seed-chosen position.
fn default_atom(cfg: &ExperimentConfig, grid: &TorusGrid) -> Result<(GridFunction, u32)> {
    let j = cfg.depth.saturating_sub(3).max(1).min(cfg.depth - 1);
    let count = 1usize << j;
    let index: Vec<usize> = (0..cfg.n).map(|i| (cfg.seed as usize).wrapping_add(37 * i) % count).collect();
    Ok((haar_atom(grid, &DyadicCube::new(grid, j, &index)?)?, j))
}

fn thresholds(cfg: &ExperimentConfig, f: &GridFunction, defaults: &[f64]) -> Result<Vec<f64>> {
    let root = root_norm(f);
    let lams: Vec<f64> =
        if cfg.lambda.is_empty() { defaults.iter().map(|c| c * root).collect() } else { cfg.lambda.clone() };
    if let Some(&bad) = lams.iter().find(|&&l| l < root * (1.0 - 1e-12)) {
        return Err(ConfigError(format!("lambda = {bad} is below the root average norm {root:.6e}")).into());
    }
    Ok(lams)
}

fn row(cfg: &ExperimentConfig, m: usize, x: f64, measurement: f64, envelope: f64, slope: Option<f64>) -> Row {
    Row {
        experiment: cfg.experiment.name().to_string(),
        n: cfg.n,
        depth: cfg.depth,
        m,
        gamma: cfg.gamma,
        s_or_xi_or_lambda: x,
        measurement,
        envelope,
        fitted_slope: slope,
        seed: cfg.seed,
    }
}

fn series_rows(cfg: &ExperimentConfig, m: usize, d: &DecaySeries) -> Vec<Row> {
    (0..d.values.len()).map(|i| row(cfg, m, d.params[i], d.values[i], d.envelope[i], d.slope)).collect()
}

fn slope_check(out: &mut Outcome, name: &str, d: &DecaySeries, target: f64) {
    match d.slope {
        Some(s) => out.check(name, s <= target + 0.15, format!("fitted slope {s:.4}, required ≤ {:.4}", target + 0.15)),
        None => out.check(name, false, format!("fewer than three nonzero points ({} nonzero)", d.nonzero_points())),
    }
}

fn pow2(x: f64) -> f64 {
    x.exp2()
}

fn decompose_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let f = matrix_input(cfg, &grid)?;
    let lam = thresholds(cfg, &f, &[1.25])?[0];
    let parts = decompose(&f, lam)?;
    let ids = identities(&parts);
    let diag = diagonal_estimates(&parts);
    let orth = gks_orthogonality(&parts);
    let chain = l2_chain(&parts);
    let linf = linf_l2_estimate(&parts);
    let rows = cfg
        .s
        .iter()
        .map(|&s| {
            let v = linf.per_s.iter().find(|p| p.0 == s).map_or(0.0, |p| p.1);
            row(cfg, f.m(), s as f64, v, linf.bound, None)
        })
        .collect();
    let mut out = Outcome::new(Table::Measurements(rows));
    out.check(
        "reconstruction",
        ids.holds(),
        format!(
            "‖f − g − b‖₂ = {:.3e}, g_off identity {:.3e}, b_off identity {:.3e}",
            ids.reconstruction, ids.g_off_identity, ids.b_off_identity
        ),
    );
    out.check(
        "diagonal_estimates",
        diag.holds(),
        format!(
            "φ(g_d) = {:.12}, ‖f‖₁ = {:.12}, ‖g_d‖_∞ = {:.6} ≤ {:.6}",
            diag.trace_g_d, diag.l1_f, diag.g_d_sup, diag.g_d_bound
        ),
    );
    out.check("g_orthogonality", orth.holds(), format!("max cross term {:.3e}", orth.max_cross));
    out.check("l2_chain", chain.holds(), format!("{} terms", chain.terms));
    out.check("linf_l2_estimate", linf.holds(), format!("sup {:.6e} ≤ {:.6e}", linf.sup, linf.bound));
    out.constant("lambda", lam);
    out.constant("reconstruction_error", ids.reconstruction);
    out.constant("f_l2", ids.f_l2);
    out.constant("g_d_sup", diag.g_d_sup);
    out.constant("sum_b_d_l1", diag.sum_b_d_l1);
    out.constant("linf_l2_sup", linf.sup);
    out.constant("linf_l2_constant", linf_l2_constant(cfg.n));
    out.constant("g_pieces", parts.gks().len() as f64);
    out.constant("b_pieces", parts.bks().len() as f64);
    write_cz_parts(&cfg.out.join(cfg.experiment.file_stem()), &parts)?;
    Ok(out)
}

fn cuculescu_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let f = matrix_input(cfg, &grid)?;
    let lams = thresholds(cfg, &f, &[1.25, 1.5, 2.0, 3.0, 4.0])?;
    let reports: Vec<_> =
        lams.par_iter().map(|&l| cuculescu(&f, l).map(|c| c.check())).collect::<std::result::Result<_, _>>()?;
    let rows =
        lams.iter().zip(&reports).map(|(&l, r)| row(cfg, f.m(), l, r.mass_defect, r.l1_over_lambda, None)).collect();
    let mut out = Outcome::new(Table::Measurements(rows));
    for (&l, r) in lams.iter().zip(&reports) {
        out.check(
            &format!("cuculescu_properties(lambda={l})"),
            r.holds(cfg.n, l),
            format!(
                "decreasing {}, commutator {:.2e}, level excess {:.2e}, doubling {:.4} ≤ {:.4}, φ(1−q) {:.4} ≤ {:.4}",
                r.decreasing,
                r.max_commutator,
                r.max_level_excess,
                r.max_doubling,
                (1u32 << cfg.n) as f64 * l,
                r.mass_defect,
                r.l1_over_lambda
            ),
        );
    }
    out.series.insert("lambda".into(), lams);
    out.series.insert("max_doubling".into(), reports.iter().map(|r| r.max_doubling).collect());
    Ok(out)
}

fn zeta_audit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let f = matrix_input(cfg, &grid)?;
    let lams = thresholds(cfg, &f, &[1.25, 2.0, 4.0])?;
    let reports: Vec<_> = lams
        .par_iter()
        .map(|&l| cuculescu(&f, l).map(|c| check_keylem(&c, &zeta(&c))))
        .collect::<std::result::Result<_, _>>()?;
    let rows =
        lams.iter().zip(&reports).map(|(&l, r)| row(cfg, f.m(), l, r.weighted_mass, r.mass_bound, None)).collect();
    let mut out = Outcome::new(Table::Measurements(rows));
    for (&l, r) in lams.iter().zip(&reports) {
        out.check(
            &format!("zeta_localization(lambda={l})"),
            r.holds(),
            format!(
                "λφ(1−ζ) {:.4} ≤ {:.4}; {} pairs, {} father failures, {} cube failures, overlap {:.2e}",
                r.weighted_mass, r.mass_bound, r.pairs_checked, r.failures_father, r.failures_cube, r.max_pi_overlap
            ),
        );
    }
    Ok(out)
}

fn s_axis(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.s.iter().map(|&s| s as f64).collect()
}

fn pseudoloc(cfg: &ExperimentConfig, l1: bool) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let (f, j) = match &cfg.input {
        Some(path) => {
            let f = read_grid_function(path)?;
            let j = (0..cfg.depth).rev().find(|&j| {
                czlab_core::dyadic::cond_expectation(&f, j).is_ok_and(|e| lp_norm(&e, 2.0).is_ok_and(|v| v <= 1e-12))
            });
            (f, j)
        }
        None => default_atom(cfg, &grid).map(|(f, j)| (f, Some(j)))?,
    };
    let values: Vec<f64> = cfg
        .s
        .par_iter()
        .map(|&s| if l1 { l1_atomic_residual(&t, &f, j, s) } else { l2_residual(&t, &f, s) })
        .collect::<std::result::Result<_, _>>()?;
    let rate = if l1 { cfg.gamma } else { cfg.gamma / 4.0 };
    let env = cfg.s.iter().map(|&s| pow2(-rate * s as f64)).collect();
    let d = DecaySeries::new(s_axis(cfg), s_axis(cfg), values, env);
    let mut out = Outcome::new(Table::Measurements(series_rows(cfg, 1, &d)));
    slope_check(&mut out, if l1 { "l1_residual_decay" } else { "l2_residual_decay" }, &d, -rate);
    out.constant("fitted_constant", d.fitted_constant);
    if let Some(s) = d.slope {
        out.constant("fitted_slope", s);
    }
    if let Some(j) = j {
        out.constant("atom_generation", j as f64);
    }
    Ok(out)
}

fn corollary(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let f = input(cfg, || Ok(default_atom(cfg, &grid)?.0))?;
    let (d, skipped) = corollary_decay(&t, &f, &cfg.xi, cfg.gamma)?;
    let mut out = Outcome::new(Table::Measurements(series_rows(cfg, 1, &d)));
    let monotone = d.values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    out.check(
        "residual_nonincreasing_in_xi",
        monotone,
        format!("{} dilation factors, {} skipped (ξ ≤ 4)", d.values.len(), skipped.len()),
    );
    out.check("enough_dilations", !d.values.is_empty(), "at least one ξ > 4");
    out.constant("fitted_constant", d.fitted_constant);
    if let Some(s) = d.slope {
        out.constant("fitted_slope", s);
    }
    out.series.insert("skipped_xi".into(), skipped);
    Ok(out)
}

fn shifted_t1(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let norms: Vec<_> = cfg
        .s
        .par_iter()
        .map(|&s| -> std::result::Result<_, CzError> { Ok((op_norm(&phi_s(&t, s)), op_norm(&psi_s(&t, s)?))) })
        .collect::<std::result::Result<_, _>>()?;
    let g = cfg.gamma;
    let phi = DecaySeries::over_s(
        &cfg.s,
        norms.iter().map(|r| r.0.value).collect(),
        cfg.s.iter().map(|&s| s as f64 * pow2(-g * s as f64 / 4.0)).collect(),
    );
    let psi = DecaySeries::over_s(
        &cfg.s,
        norms.iter().map(|r| r.1.value).collect(),
        cfg.s.iter().map(|&s| pow2(-g * s as f64 / 2.0)).collect(),
    );
    let mut out = Outcome::new(Table::Measurements(series_rows(cfg, cfg.m, &phi)));
    let converged = norms.iter().all(|r| r.0.converged && r.1.converged);
    let iterations = norms.iter().map(|r| r.0.iterations.max(r.1.iterations)).max().unwrap_or(0);
    out.check("operator_norms_converged", converged, format!("largest application count {iterations}"));
    slope_check(&mut out, "phi_decay", &phi, -g / 4.0);
    slope_check(&mut out, "psi_decay", &psi, -g / 2.0);
    if let Some(s) = phi.slope {
        out.constant("phi_slope", s);
    }
    if let Some(s) = psi.slope {
        out.constant("psi_slope", s);
    }
    out.constant("phi_fitted_constant", phi.fitted_constant);
    out.constant("psi_fitted_constant", psi.fitted_constant);
    out.series.insert("phi".into(), phi.values);
    out.series.insert("psi".into(), psi.values.clone());
    out.series.insert("psi_envelope".into(), psi.envelope);
    Ok(out)
}

fn schur(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let depth = cfg.depth;
    let per_s: Vec<Vec<(f64, f64)>> = cfg
        .s
        .par_iter()
        .map(|&s| (3..=(depth - 2).min(depth - s)).map(|k| schur_diagnostics(&t, s, k)).collect())
        .collect::<std::result::Result<_, _>>()?;
    let s1: Vec<f64> = per_s.iter().map(|v| v.iter().map(|x| x.0).fold(0.0, f64::max)).collect();
    let s2: Vec<f64> = per_s.iter().map(|v| v.iter().map(|x| x.1).fold(0.0, f64::max)).collect();
    let growth = per_s.iter().map(|v| v.iter().map(|x| x.1).fold(0.0, f64::max) / v[0].1).fold(0.0, f64::max);
    let g = cfg.gamma;
    let d = DecaySeries::over_s(&cfg.s, s1, cfg.s.iter().map(|&s| s as f64 * pow2(-g * s as f64)).collect());
    let mut out = Outcome::new(Table::Measurements(series_rows(cfg, cfg.m, &d)));
    out.check(
        "column_sums_flat_in_k",
        growth <= 1.2,
        format!("largest S² growth across k {growth:.4}, required ≤ 1.2"),
    );
    match d.slope {
        Some(sl) => {
            out.check("row_sums_decay", sl <= -g + 0.2, format!("fitted slope {sl:.4}, required ≤ {:.4}", -g + 0.2))
        }
        None => out.check("row_sums_decay", false, "fewer than three nonzero points"),
    }
    out.constant("s2_growth", growth);
    out.constant("s2_over_s", s2.iter().zip(&cfg.s).map(|(v, &s)| v / s as f64).fold(0.0, f64::max));
    if let Some(s) = d.slope {
        out.constant("s1_slope", s);
    }
    out.series.insert("s2".into(), s2);
    Ok(out)
}

fn nc_pseudoloc(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let f = input(cfg, || {
        Ok((&random_psd(&grid, cfg.m, cfg.seed)? + &psd_spikes(&grid, cfg.m, 3, cfg.seed + 100)?).with_psd()?)
    })?;
    let lam = thresholds(cfg, &f, &[4.0])?[0];
    let mut out;
    match nc_pseudoloc_check(&f, lam, &t, &cfg.s) {
        Ok(r) => {
            let g = cfg.gamma;
            let env = cfg.s.iter().map(|&s| s as f64 * pow2(-g * s as f64 / 4.0)).collect();
            let d = DecaySeries::over_s(&cfg.s, r.series.values, env);
            out = Outcome::new(Table::Measurements(series_rows(cfg, f.m(), &d)));
            out.check("shift_condition", r.shift_ok.iter().all(|&b| b), format!("{} shifts", r.shift_ok.len()));
            let nonzero = d.values.iter().filter(|&&v| v > 0.0).count();
            out.check("nonvacuous", nonzero > 0, format!("{nonzero} nonzero ratios"));
            out.constant("fitted_constant", d.fitted_constant);
            out.constant("lambda", lam);
            out.series.insert("g_norms".into(), r.g_norms);
        }
        Err(CzError::Contract(msg)) => {
            out = Outcome::new(Table::Measurements(Vec::new()));
            out.check("shift_condition", false, msg);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn weak11(cfg: &ExperimentConfig) -> Result<Outcome> {
    let grid = grid(cfg)?;
    let t = kernel(cfg, &grid)?;
    let f = input(cfg, || Ok(scalar_spike(&grid, cfg.seed as usize % grid.cell_count())?))?;
    let l1 = lp_norm(&f, 1.0)?;
    let lams = if cfg.lambda.is_empty() { log_grid(0.25 * l1, 64.0 * l1, 25) } else { cfg.lambda.clone() };
    let p = weak11_profile(&t, &f, &lams)?;
    let rows = lams.iter().zip(&p.values).map(|(&l, &v)| row(cfg, 1, l, v, 1.0, None)).collect();
    let mut out = Outcome::new(Table::Measurements(rows));
    out.check(
        "weak_type_profile_bounded",
        p.max <= 1.0 && p.max.is_finite(),
        format!("max λφ(|Tf| > λ)/‖f‖₁ = {:.4}, required ≤ 1", p.max),
    );
    out.constant("weak_constant", p.max);
    Ok(out)
}

fn appb(cfg: &ExperimentConfig) -> Result<Outcome> {
    let m = cfg.m;
    let r = appendix_b(m)?;
    let (l1_expected, l2sq_expected) = (2.0 * m as f64, 2.0 * (m * (m + 1)) as f64);
    let err = (r.l1 - l1_expected).abs().max((r.l2sq - l2sq_expected).abs());
    let rows = vec![CounterRow {
        construction: "appendix-b".into(),
        m,
        p: None,
        lhs: r.l2sq,
        rhs: r.l1,
        ratio: r.ratio(),
        expected: (m + 1) as f64,
        abs_error: err,
    }];
    let mut out = Outcome::new(Table::Counterexamples(rows));
    out.check("l1_norm", (r.l1 - l1_expected).abs() <= 1e-9, format!("‖f‖₁ = {} against {l1_expected}", r.l1));
    out.check(
        "l2_norm_squared",
        (r.l2sq - l2sq_expected).abs() <= 1e-9,
        format!("‖Σ f_k p_k‖₂² = {} against {l2sq_expected}", r.l2sq),
    );
    out.check(
        "projections_exact",
        r.projection_defect <= 1e-12,
        format!("largest deviation {:.2e}", r.projection_defect),
    );
    out.constant("l1", r.l1);
    out.constant("l2sq", r.l2sq);
    out.constant("l2sq_closed_form", r.l2sq_closed);
    out.constant("ratio", r.ratio());
    out.constant("projection_defect", r.projection_defect);
    Ok(out)
}

fn lpblowup(cfg: &ExperimentConfig) -> Result<Outcome> {
    let results: Vec<_> =
        cfg.p.par_iter().map(|&p| lp_blowup(cfg.m, p, cfg.depth)).collect::<std::result::Result<_, _>>()?;
    let rows = results
        .iter()
        .map(|r| CounterRow {
            construction: "lp-blowup".into(),
            m: r.m,
            p: Some(r.p),
            lhs: r.t1_ratio,
            rhs: r.t2_ratio,
            ratio: r.t1_ratio,
            expected: r.t1_expected,
            abs_error: r.abs_error(),
        })
        .collect();
    let mut out = Outcome::new(Table::Counterexamples(rows));
    for r in &results {
        out.check(
            &format!("band_ratio(p={})", r.p),
            r.abs_error() <= 1e-8,
            format!(
                "T₁ ratio {:.10} against {:.10}, T₂ ratio {:.10} against {:.10}",
                r.t1_ratio, r.t1_expected, r.t2_ratio, r.t2_expected
            ),
        );
        out.constant(&format!("t1_ratio(p={})", r.p), r.t1_ratio);
    }
    Ok(out)
}

fn marttransform(cfg: &ExperimentConfig) -> Result<Outcome> {
    let results: Vec<_> =
        cfg.p.par_iter().map(|&p| mart_transform_example(cfg.m, p)).collect::<std::result::Result<_, _>>()?;
    let rows = results
        .iter()
        .map(|r| CounterRow {
            construction: "martingale-transform".into(),
            m: r.m,
            p: Some(r.p),
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.lhs / r.rhs,
            expected: r.expected.0 / r.expected.1,
            abs_error: r.abs_error(),
        })
        .collect();
    let mut out = Outcome::new(Table::Counterexamples(rows));
    for r in &results {
        out.check(
            &format!("schatten_norms(p={})", r.p),
            r.abs_error() <= 1e-10,
            format!("({:.10}, {:.10}) against ({:.10}, {:.10})", r.lhs, r.rhs, r.expected.0, r.expected.1),
        );
    }
    Ok(out)
}
