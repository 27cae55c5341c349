//! Command-line flags, the optional key=value config file, and the validated
//! experiment configuration built from both.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use monoid_moments::arith::{as_prime_power, checked_pow, max_exponent};
use monoid_moments::Family;
use serde::Serialize;

/// Bad flags or config values; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "monoid-moments", version, about = "Counts, Omega-moments and constants for h-free and h-full elements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Euler-product constants with tail estimates
    Constants,
    /// Sizes of the selected family
    Count,
    /// Count, first and second Omega-moment against the main-term predictions
    Moments,
    /// Exact identity checks; exits nonzero if any fails
    Verify {
        /// Corrupt the tally by one before comparing (harness self-test)
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Fraction of elements whose Omega strays from its normal order
    NormalOrder,
    /// `moments` over several h values and both families
    Sweep {
        /// h values to sweep
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 3])]
        h_values: Vec<u32>,
    },
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// integers, poly(q) or synthetic(path)
    #[arg(long, global = true)]
    pub monoid: Option<String>,
    /// Exponent threshold h >= 2 (default 2)
    #[arg(long, global = true)]
    pub h: Option<u32>,
    /// h-free or h-full
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Comma-separated x values; accepts 1e7 and 10^7
    #[arg(long, global = true, value_delimiter = ',')]
    pub x: Vec<String>,
    /// Comma-separated degrees n, meaning x = q^n (polynomial monoids)
    #[arg(long, global = true, value_delimiter = ',')]
    pub degrees: Vec<u32>,
    /// Truncation norm P for the constants
    #[arg(long, global = true)]
    pub prime_bound: Option<String>,
    /// Relative band for normal-order
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Report format (default csv)
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for the randomized verify checks
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Density kappa of a synthetic monoid
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Error exponent theta of a synthetic monoid
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Report runtime_ms as 0 so repeated runs are byte-identical
    #[arg(long, global = true)]
    pub no_timing: bool,
    /// Flat key=value file mirroring the long flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        <Self as ValueEnum>::from_str(s, true).map_err(|_| usage(format!("unknown output format {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MonoidChoice {
    Integers,
    Poly { q: u64 },
    Synthetic { path: PathBuf },
}

impl FromStr for MonoidChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<&str> {
            let rest = s.strip_prefix(prefix)?;
            rest.strip_prefix(':').or_else(|| rest.strip_prefix('(')?.strip_suffix(')')).map(str::trim)
        };
        if s.eq_ignore_ascii_case("integers") {
            Ok(MonoidChoice::Integers)
        } else if let Some(q) = arg("poly") {
            let q: u64 = q.parse().map_err(|_| usage(format!("poly needs an integer q, got {q:?}")))?;
            if as_prime_power(q).is_none() {
                return Err(usage(format!("q = {q} is not a prime power")));
            }
            Ok(MonoidChoice::Poly { q })
        } else if let Some(path) = arg("synthetic") {
            Ok(MonoidChoice::Synthetic { path: PathBuf::from(path) })
        } else {
            Err(usage(format!("unknown monoid {s:?}; expected integers, poly(q) or synthetic(path)")))
        }
    }
}

/// Parses `1000000`, `1_000_000`, `1e6` or `10^6`.
pub fn parse_count(s: &str) -> anyhow::Result<u64> {
    let t = s.trim().replace('_', "");
    let bad = || usage(format!("not a positive integer: {s:?}"));
    if let Some((base, exp)) = t.split_once('^') {
        let base: u64 = base.parse().map_err(|_| bad())?;
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        return checked_pow(base, exp).ok_or_else(|| usage(format!("{s} overflows u64")));
    }
    if let Some((mant, exp)) = t.split_once(['e', 'E']) {
        let mant: u64 = mant.parse().map_err(|_| bad())?;
        let exp: u32 = exp.parse().map_err(|_| bad())?;
        return checked_pow(10, exp)
            .and_then(|p| p.checked_mul(mant))
            .ok_or_else(|| usage(format!("{s} overflows u64")));
    }
    t.parse().map_err(|_| bad())
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: [&str; 13] = [
    "monoid",
    "h",
    "family",
    "x",
    "degrees",
    "prime-bound",
    "epsilon",
    "output",
    "out",
    "seed",
    "kappa",
    "theta",
    "no-timing",
];

impl Flags {
    /// Fills unset flags from the config file.
    pub fn merge_file(mut self, file: &BTreeMap<String, String>) -> anyhow::Result<Self> {
        if let Some(bad) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(usage(format!("unknown config key {bad:?}")));
        }
        let get = |k: &str| file.get(k).cloned();
        fn parsed<T: FromStr>(key: &str, v: Option<String>) -> anyhow::Result<Option<T>> {
            v.map(|s| s.parse().map_err(|_| usage(format!("bad value for {key}: {s:?}")))).transpose()
        }
        let list = |k: &str| -> Vec<String> {
            get(k).map(|v| v.split(',').map(|s| s.trim().to_string()).collect()).unwrap_or_default()
        };
        self.monoid = self.monoid.or(get("monoid"));
        self.h = self.h.or(parsed("h", get("h"))?);
        self.family = self.family.or(get("family"));
        if self.x.is_empty() {
            self.x = list("x");
        }
        if self.degrees.is_empty() {
            self.degrees = list("degrees")
                .iter()
                .map(|d| d.parse().map_err(|_| usage(format!("bad degree {d:?}"))))
                .collect::<anyhow::Result<_>>()?;
        }
        self.prime_bound = self.prime_bound.or(get("prime-bound"));
        self.epsilon = self.epsilon.or(parsed("epsilon", get("epsilon"))?);
        self.output = self.output.or(parsed("output", get("output"))?);
        self.out = self.out.or(get("out").map(PathBuf::from));
        self.seed = self.seed.or(parsed("seed", get("seed"))?);
        self.kappa = self.kappa.or(parsed("kappa", get("kappa"))?);
        self.theta = self.theta.or(parsed("theta", get("theta"))?);
        self.no_timing |= parsed::<bool>("no-timing", get("no-timing"))?.unwrap_or(false);
        Ok(self)
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub monoid: MonoidChoice,
    pub h: u32,
    pub family: Family,
    /// Ascending, without duplicates.
    pub x_list: Vec<u64>,
    pub prime_bound: Option<u64>,
    pub epsilon: Option<f64>,
    pub output: OutputFormat,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub kappa: Option<f64>,
    pub theta: Option<f64>,
    pub timing: bool,
}

pub const DEFAULT_SEED: u64 = 0x6d6f_6e6f;

impl ExperimentConfig {
    pub fn from_flags(flags: Flags) -> anyhow::Result<Self> {
        let flags = match &flags.config {
            Some(path) => flags.clone().merge_file(&read_config_file(path)?)?,
            None => flags,
        };
        let monoid: MonoidChoice = flags.monoid.as_deref().unwrap_or("integers").parse()?;
        let h = flags.h.unwrap_or(2);
        if h < 2 {
            return Err(usage(format!("h must be at least 2, got {h}")));
        }
        let family: Family = match &flags.family {
            Some(f) => f.parse().map_err(|e: monoid_moments::Error| usage(e.to_string()))?,
            None => Family::HFree,
        };
        let mut x_list: Vec<u64> = flags.x.iter().map(|s| parse_count(s)).collect::<anyhow::Result<_>>()?;
        if !flags.degrees.is_empty() {
            let MonoidChoice::Poly { q } = monoid else {
                return Err(usage("--degrees only applies to poly(q) monoids"));
            };
            for &n in &flags.degrees {
                x_list.push(checked_pow(q, n).ok_or_else(|| usage(format!("{q}^{n} overflows u64")))?);
            }
        }
        if x_list.contains(&0) {
            return Err(usage("x values must be positive"));
        }
        x_list.sort_unstable();
        x_list.dedup();
        let prime_bound = flags.prime_bound.as_deref().map(parse_count).transpose()?;
        if let Some(p) = prime_bound {
            if p < 2 {
                return Err(usage(format!("prime bound must be at least 2, got {p}")));
            }
        }
        if let Some(e) = flags.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(usage(format!("epsilon must be positive, got {e}")));
            }
        }
        if (flags.kappa.is_some() || flags.theta.is_some()) && !matches!(monoid, MonoidChoice::Synthetic { .. }) {
            return Err(usage("--kappa and --theta only apply to synthetic monoids"));
        }
        Ok(Self {
            monoid,
            h,
            family,
            x_list,
            prime_bound,
            epsilon: flags.epsilon,
            output: flags.output.unwrap_or_default(),
            out: flags.out,
            seed: flags.seed.unwrap_or(DEFAULT_SEED),
            kappa: flags.kappa,
            theta: flags.theta,
            timing: !flags.no_timing,
        })
    }

    /// The x list, which must be nonempty for this subcommand.
    pub fn require_x(&self) -> anyhow::Result<&[u64]> {
        if self.x_list.is_empty() {
            bail!(usage("this subcommand needs --x (or --degrees)"));
        }
        Ok(&self.x_list)
    }

    /// x values that are not powers of q, for polynomial monoids.
    pub fn off_grid_x(&self) -> Vec<u64> {
        match self.monoid {
            MonoidChoice::Poly { q } => self
                .x_list
                .iter()
                .copied()
                .filter(|&x| checked_pow(q, max_exponent(q, x)) != Some(x))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn epsilon(&self) -> anyhow::Result<f64> {
        self.epsilon.ok_or_else(|| anyhow!(usage("normal-order needs --epsilon")))
    }
}
