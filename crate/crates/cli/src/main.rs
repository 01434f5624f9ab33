mod commands;
mod examples;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Run;

#[derive(Parser)]
#[command(
    name = "sigchange",
    version,
    about = "Curves, GAP classification and pseudo-timelike loops on signature-changing metrics"
)]
struct Cli {
    /// Directory for output files and run_report.json.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

/// Where the metric (and optionally a curve) comes from.
#[derive(Args, Clone)]
pub struct Source {
    /// Manifold spec JSON file.
    #[arg(long, conflicts_with = "preset")]
    manifold: Option<PathBuf>,
    /// Built-in preset, optionally with a curve suffix such as `toy-gamma`.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Clone)]
pub struct CurveArgs {
    #[command(flatten)]
    source: Source,
    /// Curve spec JSON file; overrides a curve named by the preset.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Uniform samples for symbolic curves, before refinement toward the locus.
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Args, Clone)]
pub struct LoopArgs {
    #[command(flatten)]
    source: Source,
    /// Base point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    point: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    xi0: f64,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long, default_value_t = 0.9)]
    cone_fraction: f64,
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
    #[arg(long, default_value_t = 80)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Past,
    Future,
}

#[derive(Subcommand)]
enum Command {
    /// GAP classification of a curve.
    Classify {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
    /// Generalized affine parameter table of a curve.
    Gap {
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Parallel-transported frame along a curve.
    Transport {
        #[command(flatten)]
        curve: CurveArgs,
    },
    /// Null or timelike fan from a point down to the locus.
    Cones {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        directions: usize,
        #[arg(long, default_value_t = 1.0)]
        cone_fraction: f64,
        #[arg(long, value_enum, default_value_t = OrientationArg::Past)]
        orientation: OrientationArg,
    },
    /// Pseudo-timelike loop near a point of the locus.
    LoopLocal {
        #[command(flatten)]
        params: LoopArgs,
    },
    /// Pseudo-timelike loop through an arbitrary point.
    LoopGlobal {
        #[command(flatten)]
        params: LoopArgs,
        /// Assert that the Lorentzian region is globally hyperbolic with
        /// the t = const leaves as Cauchy surfaces.
        #[arg(long)]
        globally_hyperbolic: bool,
        /// Height of the layer S_ε.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Regenerate the worked-example golden files.
    Examples {
        /// One example; all when omitted.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(examples::NAMES))]
        name: Option<String>,
    },
    /// Run the seeded invariant suites.
    Check {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        /// Double G₀ before the cone containment suite.
        #[arg(long)]
        inject_bad_g0: bool,
    },
    /// Re-validate a loop certificate.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Gap { .. } => "gap",
            Command::Transport { .. } => "transport",
            Command::Cones { .. } => "cones",
            Command::LoopLocal { .. } => "loop-local",
            Command::LoopGlobal { .. } => "loop-global",
            Command::Examples { .. } => "examples",
            Command::Check { .. } => "check",
            Command::Validate { .. } => "validate",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut run = Run::new(&cli.out, std::env::args().collect(), cli.seed);
    let name = cli.command.name();
    let result = match cli.command {
        Command::Classify { curve, threshold } => commands::classify(&mut run, &curve, threshold),
        Command::Gap { curve } => commands::gap(&mut run, &curve),
        Command::Transport { curve } => commands::transport_frame(&mut run, &curve),
        Command::Cones { source, point, directions, cone_fraction, orientation } => {
            commands::cones(&mut run, &source, &point, directions, cone_fraction, orientation)
        }
        Command::LoopLocal { params } => commands::loop_local(&mut run, &params),
        Command::LoopGlobal { params, globally_hyperbolic, epsilon } => {
            commands::loop_global(&mut run, &params, globally_hyperbolic, epsilon)
        }
        Command::Examples { name } => commands::examples(&mut run, name.as_deref()),
        Command::Check { cases, inject_bad_g0 } => commands::check(&mut run, cli.seed, cases, inject_bad_g0),
        Command::Validate { source, certificate, threshold } => {
            commands::validate(&mut run, &source, &certificate, threshold)
        }
    };
    if let Err(f) = &result {
        eprintln!("error: {}", f.message);
    }
    let code = result.as_ref().map_or_else(|f| f.code, |()| 0);
    run.finish(name, &result);
    ExitCode::from(code)
}
