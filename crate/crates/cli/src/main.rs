use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compgrowth::harness::{
    replay, run_experiment, Conditioning, ExperimentKind, ExperimentSpec, SweepAxis, SweepSpec,
};
use compgrowth::passage::PassageLaw;
use compgrowth::Error;

#[derive(Parser)]
#[command(name = "compgrowth", version, about = "Two-species competing first-passage growth")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One competition run; writes the event trace.
    Simulate(Common),
    /// Escape and coexistence probabilities over a grid of laws.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "species1")]
        axis: Axis,
        /// Comma separated, each dominating the next, e.g. `exp:0.8,exp:0.9,exp:1`.
        #[arg(long, value_delimiter = ',')]
        laws: Vec<String>,
        /// Give each grid cell its own seeds.
        #[arg(long)]
        independent_seeds: bool,
        /// Repeat the sweep at these box radii, e.g. `100,200,400`.
        #[arg(long, value_delimiter = ',')]
        box_sizes: Vec<i32>,
    },
    /// Strong-species density in balls around the origin.
    Density(Common),
    /// Shade radius of the strong species.
    Shade(Common),
    /// Time constants and limit shapes of both laws.
    Shape(Common),
    /// Gap between the weak species' occupied set and the scaled limit shape.
    Fluct(Common),
    /// Check the standing assumptions on a pair of laws.
    Validate(Common),
    /// Re-run the experiment recorded in a manifest and compare hashes.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Species1,
    Species2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Condition {
    None,
    G1,
    Coex,
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Keep launching replicas until this many pass the conditioning.
    #[arg(long)]
    survivors: Option<usize>,
    #[arg(long = "box")]
    box_radius: Option<i32>,
    #[arg(long)]
    dim: Option<usize>,
    /// Law of the slow species, e.g. `exp:1`, `unif:0:1`, `det:1`.
    #[arg(long)]
    law1: Option<String>,
    #[arg(long)]
    law2: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    condition: Option<Condition>,
}

fn parse_law(s: &str) -> Result<PassageLaw, Error> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, Error> {
        parts
            .get(i)
            .and_then(|p| p.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("bad law {s:?}")))
    };
    let law = match parts[0] {
        "exp" | "exponential" => PassageLaw::Exponential { rate: num(1)? },
        "unif" | "uniform" => PassageLaw::Uniform { a: num(1)?, b: num(2)? },
        "det" | "deterministic" => PassageLaw::Deterministic { value: num(1)? },
        "shexp" | "shifted_exponential" => PassageLaw::ShiftedExponential {
            shift: num(1)?,
            rate: num(2)?,
        },
        "zie" | "zero_inflated_exponential" => PassageLaw::ZeroInflatedExponential {
            zero_mass: num(1)?,
            rate: num(2)?,
        },
        _ => return Err(Error::Config(format!("unknown law family in {s:?}"))),
    };
    law.validate()?;
    Ok(law)
}

fn build_spec(kind: ExperimentKind, c: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &c.config {
        Some(p) => {
            let mut s: ExperimentSpec = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            s.kind = kind;
            s
        }
        None => ExperimentSpec::desk_default(kind),
    };
    if let Some(v) = c.seed {
        spec.base_seed = v;
    }
    if let Some(v) = c.replicas {
        spec.replicas = v;
    }
    if let Some(v) = c.survivors {
        spec.target_survivors = Some(v);
    }
    if let Some(v) = c.box_radius {
        spec.box_radius = v;
    }
    if let Some(v) = c.dim {
        spec.dim = v;
        spec.s1 = None;
        spec.s2 = None;
    }
    if let Some(v) = &c.law1 {
        spec.law1 = parse_law(v)?;
    }
    if let Some(v) = &c.law2 {
        spec.law2 = parse_law(v)?;
    }
    if let Some(v) = c.condition {
        spec.conditioning = match v {
            Condition::None => Conditioning::None,
            Condition::G1 => Conditioning::G1,
            Condition::Coex => Conditioning::Coex,
        };
    }
    spec.workers = c.workers;
    Ok(spec)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InsufficientSurvivors { .. } => 3,
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::InvalidLaw(_)
        | Error::NotOrdered(_)
        | Error::Dimension { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let (spec, out) = match cli.cmd {
        Cmd::Replay { manifest, out, workers } => {
            let r = replay(&manifest, &out, workers)?;
            for l in &r.summary.lines {
                println!("{l}");
            }
            println!("replay {}", if r.identical { "identical" } else { "DIFFERS" });
            return Ok(if r.identical { 0 } else { 4 });
        }
        Cmd::Sweep {
            common,
            axis,
            laws,
            independent_seeds,
            box_sizes,
        } => {
            let mut spec = build_spec(ExperimentKind::CoexistenceSweep, &common)?;
            if !laws.is_empty() {
                spec.sweep = Some(SweepSpec {
                    axis: match axis {
                        Axis::Species1 => SweepAxis::Species1,
                        Axis::Species2 => SweepAxis::Species2,
                    },
                    laws: laws.iter().map(|s| parse_law(s)).collect::<Result<_, _>>()?,
                    common_seeds: !independent_seeds,
                    box_radii: Vec::new(),
                });
            }
            if let (Some(sw), false) = (spec.sweep.as_mut(), box_sizes.is_empty()) {
                sw.box_radii = box_sizes;
            }
            (spec, common.out)
        }
        Cmd::Simulate(c) => (build_spec(ExperimentKind::SingleRun, &c)?, c.out),
        Cmd::Density(c) => (build_spec(ExperimentKind::DensityStudy, &c)?, c.out),
        Cmd::Shade(c) => (build_spec(ExperimentKind::ShadeStudy, &c)?, c.out),
        Cmd::Shape(c) => (build_spec(ExperimentKind::ShapeStudy, &c)?, c.out),
        Cmd::Fluct(c) => (build_spec(ExperimentKind::FluctuationStudy, &c)?, c.out),
        Cmd::Validate(c) => (build_spec(ExperimentKind::Validate, &c)?, c.out),
    };
    let summary = run_experiment(&spec, &out)?;
    for l in &summary.lines {
        println!("{l}");
    }
    Ok(if summary.validation_failed { 2 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
