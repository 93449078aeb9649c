use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};

use czlab_core::dyadic::{cond_expectation, DyadicCube, TorusGrid};
use czlab_core::fixtures::{band_limited, constant, haar_atom, random_psd, scalar_spike};
use czlab_core::io::{write_grid_function, Encoding};
use czlab_core::linalg::{identity, real};
use czlab_core::matfun::{lp_norm, GridFunction};

use crate::config::{config_err, ConfigError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureKind {
    RandomPsd,
    ScalarSpike,
    HaarAtom,
    BandLimited,
    Constant,
}

#[derive(Args, Clone, Debug)]
pub struct FixtureArgs {
    #[arg(long, value_enum)]
    pub kind: FixtureKind,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long = "K", default_value_t = 6)]
    pub depth: u32,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cell of the spike.
    #[arg(long)]
    pub cell: Option<usize>,
    /// Generation of the Haar atom's cube.
    #[arg(long)]
    pub generation: Option<u32>,
    /// Cube index of the Haar atom, one entry per axis (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub index: Option<Vec<usize>>,
    /// Largest frequency of the band-limited fixture.
    #[arg(long, default_value_t = 2)]
    pub max_freq: usize,
    /// Multiple of the identity used by the constant fixture.
    #[arg(long, default_value_t = 1.0)]
    pub value: f64,
    /// Output file; `.json` selects the JSON layout, anything else binary.
    #[arg(long)]
    pub out: PathBuf,
}

fn cfg(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(e.to_string())
}

/// Builds the fixture. All parameters are checked before any data is drawn.
pub fn build(a: &FixtureArgs) -> Result<GridFunction> {
    let grid = TorusGrid::new(a.n, a.depth).map_err(cfg)?;
    if a.m == 0 || a.m > 64 {
        return Err(ConfigError(format!("m = {} outside 1..=64", a.m)).into());
    }
    let scalar = matches!(a.kind, FixtureKind::ScalarSpike | FixtureKind::HaarAtom);
    if scalar && a.m != 1 {
        return Err(ConfigError(format!("{:?} fixtures are scalar; got m = {}", a.kind, a.m)).into());
    }
    Ok(match a.kind {
        FixtureKind::RandomPsd => random_psd(&grid, a.m, a.seed)?,
        FixtureKind::ScalarSpike => {
            let cell = a.cell.unwrap_or(a.seed as usize % grid.cell_count());
            if cell >= grid.cell_count() {
                return config_err(format!("cell {cell} outside the grid")).map_err(Into::into);
            }
            scalar_spike(&grid, cell)?
        }
        FixtureKind::HaarAtom => {
            let g = a.generation.unwrap_or(a.depth.saturating_sub(3));
            if g >= a.depth {
                return config_err(format!("generation {g} must be below K = {}", a.depth)).map_err(Into::into);
            }
            let count = 1usize << g;
            let index = a.index.clone().unwrap_or_else(|| vec![a.seed as usize % count; a.n]);
            let cube = DyadicCube::new(&grid, g, &index).map_err(cfg)?;
            let f = haar_atom(&grid, &cube)?;
            let e = cond_expectation(&f, g)?;
            anyhow::ensure!(lp_norm(&e, 2.0)? <= 1e-12, "Haar atom has nonzero expectation at generation {g}");
            f
        }
        FixtureKind::BandLimited => band_limited(&grid, a.m, a.max_freq, a.seed).map_err(cfg)?,
        FixtureKind::Constant => {
            if !(a.value >= 0.0 && a.value.is_finite()) {
                return config_err(format!("constant value {} must be nonnegative and finite", a.value))
                    .map_err(Into::into);
            }
            constant(&grid, &(identity(a.m) * real(a.value)))?
        }
    })
}

pub fn gen_fixture(a: &FixtureArgs) -> Result<()> {
    let f = build(a)?;
    write_grid_function(&a.out, &f, Encoding::from_path(&a.out))?;
    Ok(())
}
