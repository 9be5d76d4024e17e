use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskdiff_core::ci::Method;
use riskdiff_core::Convention;

/// Exact and asymptotic inference on the difference of two binomial
/// proportions for noninferiority trials.
///
/// Differences are read and reported on the margin scale δ = P_C - P_T by
/// default (`--convention delta`); `--convention cap` switches to
/// Δ = P_T - P_C. Margins δ₀ are always positive and put the null boundary
/// at δ = δ₀ (Δ = -δ₀).
///
/// Exit codes: 0 success, 1 usage error, 2 domain or I/O error,
/// 3 degenerate EC calibration.
#[derive(Debug, Parser)]
#[command(name = "riskdiff", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scale for reported and supplied differences.
    #[arg(long, value_enum, default_value_t = ConventionArg::Delta, global = true)]
    pub convention: ConventionArg,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 picks the number of CPUs.
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
    /// Nuisance grid size of the exact test.
    #[arg(long, default_value_t = 1001, global = true)]
    pub grid_points: usize,
    /// Golden-section tolerance around nuisance grid maxima.
    #[arg(long, default_value_t = 1e-10, global = true)]
    pub refine_tol: f64,
    /// Scan grid size for asymptotic and EC interval inversion.
    #[arg(long, default_value_t = 4001, global = true)]
    pub scan_points: usize,
    /// Scan grid size for exact interval inversion.
    #[arg(long, default_value_t = 801, global = true)]
    pub exact_scan_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    Delta,
    Cap,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Delta => Convention::Delta,
            ConventionArg::Cap => Convention::Cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PvalueMethod {
    Chan,
    Mee,
    Mn,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiMethod {
    Wald,
    Mee,
    Mn,
    #[value(name = "cz_exact")]
    CzExact,
    Ec,
}

impl From<CiMethod> for Method {
    fn from(m: CiMethod) -> Self {
        match m {
            CiMethod::Wald => Method::Wald,
            CiMethod::Mee => Method::Mee,
            CiMethod::Mn => Method::Mn,
            CiMethod::CzExact => Method::CzExact,
            CiMethod::Ec => Method::Ec,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct DesignArgs {
    /// Treatment arm size.
    #[arg(long)]
    pub nt: u32,
    /// Control arm size.
    #[arg(long)]
    pub nc: u32,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Treatment successes.
    #[arg(long)]
    pub xt: u32,
    /// Control successes.
    #[arg(long)]
    pub xc: u32,
}

/// Design with an optional outcome; without one every outcome is scanned.
#[derive(Debug, Clone, Copy, Args)]
pub struct ScanTarget {
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, requires = "xc")]
    pub xt: Option<u32>,
    #[arg(long, requires = "xt")]
    pub xc: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-sided noninferiority p-value at the margin boundary.
    Pvalue {
        #[command(flatten)]
        counts: CountArgs,
        /// Noninferiority margin δ₀ in [0, 1).
        #[arg(long)]
        margin: f64,
        #[arg(long, value_enum, default_value_t = PvalueMethod::Chan)]
        method: PvalueMethod,
    },
    /// Test statistics at one hypothesized difference.
    Stat {
        #[command(flatten)]
        counts: CountArgs,
        /// Hypothesized difference on the chosen scale; defaults to the
        /// margin boundary.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<f64>,
        /// Margin δ₀; also enables the EC statistic.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Confidence set by test inversion.
    Ci {
        #[command(flatten)]
        counts: CountArgs,
        #[arg(long, value_enum, default_value_t = CiMethod::Mee)]
        method: CiMethod,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Margin δ₀; required for ec, adds a noninferiority decision.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Search for incoherent behaviour and emit certificates.
    Diagnose {
        #[command(subcommand)]
        scan: DiagnoseCommand,
    },
    /// Exact coverage and expected width over a probability grid.
    Coverage {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, value_enum, default_value_t = CiMethod::CzExact)]
        method: CiMethod,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        margin: Option<f64>,
        /// Spacing of the (p_T, p_C) grid.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Score the raw components instead of the gap-filled hull.
        #[arg(long)]
        components: bool,
    },
    /// All interval methods side by side.
    Compare {
        #[command(flatten)]
        counts: CountArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Margin δ₀ for the EC interval; EC is skipped without it.
        #[arg(long)]
        margin: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DiagnoseCommand {
    /// Interior extrema of the EC statistic over a grid of differences.
    Zec {
        #[command(flatten)]
        target: ScanTarget,
        #[arg(long)]
        margin: f64,
        /// Grid start on the chosen scale [default: -0.9999 (delta), 0.98 (cap)].
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        /// Grid end on the chosen scale [default: -0.98 (delta), 0.9999 (cap)].
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
    },
    /// Decreases of the exact p-value as the null boundary moves.
    Pexact {
        #[command(flatten)]
        target: ScanTarget,
        #[arg(long, default_value_t = -0.995, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 0.995, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
    },
    /// Rejection at a margin but not at a larger one.
    Margins {
        #[command(flatten)]
        target: ScanTarget,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        from: f64,
        #[arg(long, default_value_t = 0.3)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Differences inside a lower-confidence set but outside a higher one.
    Nesting {
        #[command(flatten)]
        target: ScanTarget,
        #[arg(long, value_enum, default_value_t = CiMethod::Ec)]
        method: CiMethod,
        #[arg(long)]
        margin: Option<f64>,
        /// Pairs `alpha_hi,alpha_lo` with alpha_hi > alpha_lo.
        #[arg(long = "alpha-pair", value_parser = parse_pair, default_value = "0.1,0.05")]
        alpha_pairs: Vec<(f64, f64)>,
    },
    /// Mee versus exact p-values for every outcome.
    Map {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        margin: f64,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `alpha_hi,alpha_lo`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}
