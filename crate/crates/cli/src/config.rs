use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

/// Error in the configuration, reported before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    DecomposeAudit,
    CuculescuAudit,
    ZetaAudit,
    PseudolocL2,
    PseudolocL1,
    CorollaryDecay,
    ShiftedT1,
    Schur,
    NcPseudoloc,
    Weak11,
    AppB,
    LpBlowup,
    MartTransform,
}

impl Experiment {
    pub const ALL: [Experiment; 13] = [
        Experiment::DecomposeAudit,
        Experiment::CuculescuAudit,
        Experiment::ZetaAudit,
        Experiment::PseudolocL2,
        Experiment::PseudolocL1,
        Experiment::CorollaryDecay,
        Experiment::ShiftedT1,
        Experiment::Schur,
        Experiment::NcPseudoloc,
        Experiment::Weak11,
        Experiment::AppB,
        Experiment::LpBlowup,
        Experiment::MartTransform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DecomposeAudit => "decompose-audit",
            Experiment::CuculescuAudit => "cuculescu-audit",
            Experiment::ZetaAudit => "zeta-audit",
            Experiment::PseudolocL2 => "pseudoloc-l2",
            Experiment::PseudolocL1 => "pseudoloc-l1",
            Experiment::CorollaryDecay => "corollary-decay",
            Experiment::ShiftedT1 => "shifted-t1",
            Experiment::Schur => "schur",
            Experiment::NcPseudoloc => "nc-pseudoloc",
            Experiment::Weak11 => "weak11",
            Experiment::AppB => "counterexample:appb",
            Experiment::LpBlowup => "counterexample:lpblowup",
            Experiment::MartTransform => "counterexample:marttransform",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            ConfigError(format!("unknown experiment `{s}`; expected one of {}", names.join(", ")))
        })
    }

    /// File stem for the outputs: the name with `:` replaced.
    pub fn file_stem(self) -> String {
        self.name().replace(':', "-")
    }

    fn default_depth(self) -> u32 {
        match self {
            Experiment::PseudolocL2 | Experiment::PseudolocL1 | Experiment::ShiftedT1 | Experiment::Schur => 10,
            _ => 8,
        }
    }

    fn default_kernel(self) -> KernelChoice {
        match self {
            Experiment::Schur => KernelChoice::Cotangent,
            _ => KernelChoice::Hilbert,
        }
    }

    /// Experiments whose input is a scalar function.
    pub fn is_scalar(self) -> bool {
        matches!(
            self,
            Experiment::PseudolocL2 | Experiment::PseudolocL1 | Experiment::CorollaryDecay | Experiment::Weak11
        )
    }

    fn uses_kernel(self) -> bool {
        matches!(
            self,
            Experiment::PseudolocL2
                | Experiment::PseudolocL1
                | Experiment::CorollaryDecay
                | Experiment::ShiftedT1
                | Experiment::Schur
                | Experiment::NcPseudoloc
                | Experiment::Weak11
        )
    }
}

impl Serialize for Experiment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Inclusive range of shifts written `a..b`, or a single value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ShiftRange {
    pub lo: u32,
    pub hi: u32,
}

impl ShiftRange {
    pub fn values(self) -> Vec<u32> {
        (self.lo..=self.hi).collect()
    }
}

impl std::str::FromStr for ShiftRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad shift `{t}`: {e}"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("empty shift range `{s}`"));
        }
        Ok(Self { lo, hi })
    }
}

impl TryFrom<String> for ShiftRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ShiftRange> for String {
    fn from(r: ShiftRange) -> String {
        format!("{}..{}", r.lo, r.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Hilbert,
    Cotangent,
    File(PathBuf),
}

/// Flags of `czlab run`. Every field may also come from a JSON file given by
/// `--config`; flags on the command line take precedence.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// Spatial dimension (1 or 2).
    #[arg(long)]
    pub n: Option<usize>,
    /// Depth of the dyadic grid.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub depth: Option<u32>,
    /// Matrix size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Threshold, or a comma-separated list of thresholds.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Shift range, e.g. `1..8` (inclusive).
    #[arg(long)]
    pub s: Option<ShiftRange>,
    /// Smoothness exponent used for the envelopes.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Kernel: `hilbert`, `cotangent` or `file`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Kernel table written by the library (used with `--kernel file`).
    #[arg(long)]
    pub kernel_path: Option<PathBuf>,
    /// Truncation radius for the cotangent kernel.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Dilation factors for `corollary-decay` (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<f64>>,
    /// Exponents for the counterexamples (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Input grid function file replacing the default fixture.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Fields set here win over those of `base`.
    pub fn over(self, base: RunArgs) -> RunArgs {
        RunArgs {
            n: self.n.or(base.n),
            depth: self.depth.or(base.depth),
            m: self.m.or(base.m),
            lambda: self.lambda.or(base.lambda),
            s: self.s.or(base.s),
            gamma: self.gamma.or(base.gamma),
            kernel: self.kernel.or(base.kernel),
            kernel_path: self.kernel_path.or(base.kernel_path),
            epsilon: self.epsilon.or(base.epsilon),
            xi: self.xi.or(base.xi),
            p: self.p.or(base.p),
            input: self.input.or(base.input),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
        }
    }

    pub fn from_file(path: &Path) -> Result<RunArgs, ConfigError> {
        let bytes = std::fs::read(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| ConfigError(format!("bad config {}: {e}", path.display())))
    }
}

/// Validated configuration.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    #[serde(rename = "K")]
    pub depth: u32,
    pub m: usize,
    /// Thresholds as given; empty means the experiment default.
    pub lambda: Vec<f64>,
    pub s: Vec<u32>,
    pub gamma: f64,
    pub kernel: KernelChoice,
    pub epsilon: f64,
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

fn finite_positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} = {v} must be positive and finite"))
    }
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, args: RunArgs) -> Result<Self, ConfigError> {
        let (mut n, mut depth, mut m) = (args.n, args.depth, args.m);
        if let Some(path) = &args.input {
            let f = czlab_core::io::read_grid_function(path)
                .map_err(|e| ConfigError(format!("cannot read input {}: {e}", path.display())))?;
            let (fn_, fk, fm) = (f.grid().n(), f.grid().depth(), f.m());
            for (name, given, actual) in [("n", n, fn_), ("K", depth.map(|d| d as usize), fk as usize), ("m", m, fm)] {
                if given.is_some_and(|g| g != actual) {
                    return config_err(format!("--{name} conflicts with the input file ({actual})"));
                }
            }
            (n, depth, m) = (Some(fn_), Some(fk), Some(fm));
        }
        let n = n.unwrap_or(1);
        if n != 1 && n != 2 {
            return config_err(format!("n = {n}; only 1 and 2 are supported"));
        }
        let depth = depth.unwrap_or(experiment.default_depth());
        let max_depth = if experiment == Experiment::Schur { 14 / n as u32 } else { 24 / n as u32 };
        if depth < 2 || depth > max_depth {
            return config_err(format!("K = {depth} outside 2..={max_depth} for {}", experiment.name()));
        }
        let m = m.unwrap_or(match experiment {
            Experiment::AppB | Experiment::MartTransform => 4,
            Experiment::LpBlowup => 16,
            Experiment::ShiftedT1 | Experiment::Schur => 1,
            e if e.is_scalar() => 1,
            _ => 2,
        });
        if m == 0 || m > 64 {
            return config_err(format!("m = {m} outside 1..=64"));
        }
        if experiment == Experiment::MartTransform && m < 2 {
            return config_err("the martingale transform needs m ≥ 2");
        }
        let lambda = args.lambda.unwrap_or_default();
        for &l in &lambda {
            finite_positive("lambda", l)?;
        }
        if lambda.len() > 1 && matches!(experiment, Experiment::DecomposeAudit | Experiment::NcPseudoloc) {
            return config_err(format!("{} takes a single lambda", experiment.name()));
        }
        let s_default = match experiment {
            Experiment::Schur => ShiftRange { lo: 1, hi: depth.saturating_sub(3).max(1) },
            Experiment::NcPseudoloc => ShiftRange { lo: 1, hi: depth.saturating_sub(2).max(1) },
            Experiment::PseudolocL2 | Experiment::PseudolocL1 => {
                ShiftRange { lo: 1, hi: depth.saturating_sub(3).max(1) }
            }
            _ => ShiftRange { lo: 1, hi: depth - 1 },
        };
        let s = args.s.unwrap_or(s_default);
        if s.lo < 1 || s.hi >= depth {
            return config_err(format!("shift range {}..{} outside 1..{}", s.lo, s.hi, depth - 1));
        }
        if experiment == Experiment::Schur && depth - s.hi < 3 {
            return config_err(format!("schur needs K − s ≥ 3; largest shift allowed is {}", depth - 3));
        }
        let gamma = args.gamma.unwrap_or(1.0);
        if !(gamma > 0.0 && gamma <= 1.0) {
            return config_err(format!("gamma = {gamma} outside (0, 1]"));
        }
        let kernel = match args.kernel.as_deref() {
            None => experiment.default_kernel(),
            Some("hilbert") => KernelChoice::Hilbert,
            Some("cotangent") => KernelChoice::Cotangent,
            Some("file") => match &args.kernel_path {
                Some(p) if p.exists() => KernelChoice::File(p.clone()),
                Some(p) => return config_err(format!("kernel file {} does not exist", p.display())),
                None => return config_err("--kernel file needs --kernel-path"),
            },
            Some(other) => return config_err(format!("unknown kernel `{other}`; expected hilbert, cotangent or file")),
        };
        if experiment.uses_kernel() && n != 1 && !matches!(kernel, KernelChoice::File(_)) {
            return config_err("the hilbert and cotangent kernels are defined for n = 1 only");
        }
        let epsilon = args.epsilon.unwrap_or(0.0);
        if !(0.0..0.5).contains(&epsilon) {
            return config_err(format!("epsilon = {epsilon} outside [0, 0.5)"));
        }
        let xi = args.xi.unwrap_or_else(|| vec![5.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
        for &x in &xi {
            finite_positive("xi", x)?;
        }
        let p = args.p.unwrap_or_else(|| match experiment {
            Experiment::LpBlowup => vec![1.0, 2.0],
            _ => vec![1.0, 4.0 / 3.0, 4.0],
        });
        for &v in &p {
            if !(v >= 1.0 && v.is_finite()) {
                return config_err(format!("p = {v} must lie in [1, ∞)"));
            }
        }
        if experiment == Experiment::LpBlowup {
            if n != 1 {
                return config_err("the band construction lives on the circle (n = 1)");
            }
            let grid = czlab_core::dyadic::TorusGrid::new(1, depth).map_err(|e| ConfigError(e.to_string()))?;
            czlab_core::singint::BandLayout::auto(&grid, m).map_err(|e| ConfigError(e.to_string()))?;
        }
        if experiment.is_scalar() && m != 1 {
            return config_err(format!("{} acts on scalar functions; got m = {m}", experiment.name()));
        }
        Ok(Self {
            experiment,
            n,
            depth,
            m,
            lambda,
            s: s.values(),
            gamma,
            kernel,
            epsilon,
            xi,
            p,
            input: args.input,
            seed: args.seed.unwrap_or(0),
            out: args.out.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_ranges_parse() {
        assert_eq!("1..8".parse::<ShiftRange>().unwrap().values().len(), 8);
        assert_eq!("3".parse::<ShiftRange>().unwrap().values(), vec![3]);
        assert_eq!("2..=4".parse::<ShiftRange>().unwrap().values(), vec![2, 3, 4]);
        assert!("5..2".parse::<ShiftRange>().is_err());
        assert!("a..2".parse::<ShiftRange>().is_err());
    }

    #[test]
    fn experiments_round_trip_names() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()).unwrap(), e);
        }
        assert!(Experiment::parse("nope").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            RunArgs { n: Some(3), ..Default::default() },
            RunArgs { depth: Some(40), ..Default::default() },
            RunArgs { lambda: Some(vec![-1.0]), ..Default::default() },
            RunArgs { s: Some(ShiftRange { lo: 1, hi: 8 }), ..Default::default() },
            RunArgs { gamma: Some(2.0), ..Default::default() },
            RunArgs { kernel: Some("bogus".into()), ..Default::default() },
        ];
        for args in bad {
            assert!(ExperimentConfig::resolve(Experiment::DecomposeAudit, args).is_err());
        }
        let ok = ExperimentConfig::resolve(Experiment::ShiftedT1, RunArgs::default()).unwrap();
        assert_eq!(ok.depth, 10);
        assert_eq!(ok.s, (1..=9).collect::<Vec<_>>());
    }

    #[test]
    fn command_line_wins_over_file() {
        let file = RunArgs { m: Some(3), seed: Some(1), ..Default::default() };
        let cli = RunArgs { seed: Some(9), ..Default::default() };
        let merged = cli.over(file);
        assert_eq!((merged.m, merged.seed), (Some(3), Some(9)));
    }
}
