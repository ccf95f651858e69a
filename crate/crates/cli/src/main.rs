use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ringmatch::geometry::RigidTransform;
use ringmatch::graph::{build_squared_cycle, build_three_tree};
use ringmatch::harness::sequence::{run_sequence, synthetic_sequence};
use ringmatch::harness::{run_benchmark, summarize, write_csv, BenchmarkSpec};
use ringmatch::pointfile::{read_points, write_points};
use ringmatch::potentials::{DEFAULT_DYNAMIC_RANGE, DEFAULT_SIGMA_PIXELS, DEFAULT_SIGMA_SYNTHETIC};
use ringmatch::{
    generate_instance, run_match, Assignment, BpConfig, ClampMode, ConvergenceConfig, Engine, MatchConfig,
    MatchError, MatchResult, PointPattern, PotentialParams, Schedule, SCHEMA_VERSION,
};

/// Exit status when a run ended without converging; the result is still written.
const EXIT_NOT_CONVERGED: u8 = 2;

/// Landmarks per frame in the house sequence.
const LANDMARKS_PER_FRAME: usize = 30;

#[derive(Parser)]
#[command(name = "ringmatch", version, about = "Near-isometric point pattern matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match a template point file into a scene point file and print JSON.
    Match(MatchArgs),
    /// Run the synthetic accuracy/runtime grid and write one CSV row per trial.
    Benchmark(BenchmarkArgs),
    /// Match landmark frames separated by a fixed gap.
    Sequence(SequenceArgs),
    /// Write a seeded synthetic instance (template, scene, ground truth).
    Generate(GenerateArgs),
    /// Write a synthetic landmark sequence in pixel units.
    SynthSequence(SynthSequenceArgs),
    /// Print a matching graph as JSON.
    Graph(GraphArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Bp,
    Jt,
    Oracle,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Bp => Engine::Bp,
            EngineArg::Jt => Engine::Jt,
            EngineArg::Oracle => Engine::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gaussian,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClampArg {
    PerEdge,
    PerClique,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Synchronous,
    Sequential,
}

/// Engine and potential settings shared by `match` and `sequence`.
#[derive(Args)]
struct EngineOpts {
    #[arg(long, value_enum, default_value = "bp")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    mode: ModeArg,
    /// Gaussian width in the units of the point files.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DYNAMIC_RANGE)]
    dynamic_range: f64,
    #[arg(long, value_enum, default_value = "per-edge")]
    clamp: ClampArg,
    /// Belief MSE cutoff; defaults to 1e-8, or 1e-9 for scenes of 30 or more points.
    #[arg(long)]
    mse_cutoff: Option<f64>,
    #[arg(long, default_value_t = 5)]
    min_iters: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "synchronous")]
    schedule: ScheduleArg,
    /// Seed of the random 3-tree used by the junction-tree engine.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EngineOpts {
    fn config(&self, template: &PointPattern, m: usize, default_sigma: f64) -> MatchConfig {
        let potentials = match self.mode {
            ModeArg::Gaussian => PotentialParams::gaussian(self.sigma.unwrap_or(default_sigma)),
            ModeArg::Delta => PotentialParams::delta_for(template),
        }
        .with_dynamic_range(self.dynamic_range)
        .with_clamp_mode(match self.clamp {
            ClampArg::PerEdge => ClampMode::PerEdge,
            ClampArg::PerClique => ClampMode::PerClique,
        });
        let mut convergence = ConvergenceConfig::for_scene_size(m);
        if let Some(c) = self.mse_cutoff {
            convergence.mse_cutoff = c;
        }
        convergence.min_iterations = self.min_iters;
        convergence.max_iterations = self.max_iters;
        MatchConfig {
            engine: self.engine.into(),
            potentials,
            bp: BpConfig {
                convergence,
                schedule: match self.schedule {
                    ScheduleArg::Synchronous => Schedule::Synchronous,
                    ScheduleArg::Sequential => Schedule::Sequential,
                },
            },
            three_tree_seed: self.seed,
            ..MatchConfig::default()
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// Template points (CSV `x,y` per line, or JSON `{"points": [[x, y], ...]}`).
    template: PathBuf,
    /// Scene points, same formats.
    scene: PathBuf,
    #[command(flatten)]
    opts: EngineOpts,
    /// Write the JSON result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-iteration belief MSE as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON benchmark spec; flags given on the command line override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Scene sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Noise levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    engines: Option<Vec<EngineArg>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dynamic_range: Option<f64>,
    /// One MSE cutoff for every scene size.
    #[arg(long)]
    mse_cutoff: Option<f64>,
    #[arg(long)]
    min_iters: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write zero wall times so repeated runs give identical files.
    #[arg(long)]
    no_timing: bool,
    /// Per-trial CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-cell mean and standard error; defaults to `<out>.summary.csv`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl BenchmarkArgs {
    fn spec(&self) -> Result<BenchmarkSpec, MatchError> {
        let mut spec = match &self.spec {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => BenchmarkSpec::default(),
        };
        if let Some(n) = self.n {
            spec.n = n;
        }
        if let Some(m) = &self.m {
            spec.m_values = m.clone();
        }
        if let Some(eps) = &self.eps {
            spec.eps_values = eps.clone();
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(e) = &self.engines {
            spec.engines = e.iter().map(|&e| e.into()).collect();
        }
        if let Some(s) = self.sigma {
            spec.sigma = s;
        }
        if let Some(d) = self.dynamic_range {
            spec.dynamic_range_d = d;
        }
        if let Some(c) = self.mse_cutoff {
            spec.cutoffs = spec.m_values.iter().map(|&m| (m, c)).collect();
        }
        if let Some(k) = self.min_iters {
            spec.min_iterations = k;
        }
        if let Some(k) = self.max_iters {
            spec.max_iterations = k;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if self.no_timing {
            spec.timing = false;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SequenceArgs {
    /// Directory of per-frame landmark files; the frame number is the trailing
    /// number of each file name.
    dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    gap: u32,
    /// Template sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "15,20,25,30")]
    t_sizes: Vec<usize>,
    #[command(flatten)]
    opts: EngineOpts,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives template.csv, scene.csv and truth.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthSequenceArgs {
    #[arg(long, default_value_t = 5)]
    frames: usize,
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives frame_000.csv, frame_001.csv, ...
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    SquaredCycle,
    ThreeTree,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "squared-cycle")]
    kind: GraphKindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct MatchOutput<'a> {
    schema_version: u32,
    engine: Engine,
    requested_engine: Engine,
    fallback: Option<&'a str>,
    n: usize,
    m: usize,
    #[serde(flatten)]
    result: &'a MatchResult,
}

#[derive(Serialize)]
struct TruthOutput<'a> {
    schema_version: u32,
    truth: &'a Assignment,
    transform: RigidTransform,
    eps: f64,
    seed: u64,
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, MatchError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_match(args: &MatchArgs) -> Result<ExitCode, MatchError> {
    let template = read_points(&args.template)?;
    let scene = read_points(&args.scene)?;
    let cfg = args.opts.config(&template, scene.len(), DEFAULT_SIGMA_SYNTHETIC);

    let mut trace_rows: Vec<(usize, f64, f64)> = Vec::new();
    let outcome = {
        let mut record = |it: usize, mse: &[f64]| {
            let max = mse.iter().copied().fold(0.0, f64::max);
            let mean = mse.iter().sum::<f64>() / mse.len().max(1) as f64;
            trace_rows.push((it, max, mean));
        };
        let trace: Option<&mut dyn FnMut(usize, &[f64])> = match args.trace {
            Some(_) => Some(&mut record),
            None => None,
        };
        run_match(&template, &scene, &cfg, trace)?
    };

    if let Some(path) = &args.trace {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "iteration,max_mse,mean_mse")?;
        for (it, max, mean) in &trace_rows {
            writeln!(w, "{it},{max:e},{mean:e}")?;
        }
        w.flush()?;
    }

    let out = MatchOutput {
        schema_version: SCHEMA_VERSION,
        engine: outcome.engine,
        requested_engine: cfg.engine,
        fallback: outcome.fallback.as_deref(),
        n: template.len(),
        m: scene.len(),
        result: &outcome.result,
    };
    let mut w = writer(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;

    if outcome.result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        log::warn!("stopped after {} iterations without converging", outcome.result.iterations);
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<ExitCode, MatchError> {
    let spec = args.spec()?;
    let rows = run_benchmark(&spec)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} trial runs ended in an error; see the status column");
    }
    write_csv(&rows, BufWriter::new(File::create(&args.out)?))?;

    let summary = summarize(&rows);
    let summary_path = args.summary.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".summary.csv");
        PathBuf::from(p)
    });
    write_csv(&summary, BufWriter::new(File::create(&summary_path)?))?;

    println!("{:<7} {:>4} {:>8} {:>18} {:>10} {:>9}", "engine", "m", "eps", "accuracy", "iters", "time_s");
    for s in &summary {
        println!(
            "{:<7} {:>4} {:>8.5} {:>9.4} ± {:<6.4} {:>10.1} {:>9.2e}",
            s.engine.name(),
            s.m,
            s.eps,
            s.mean_accuracy,
            s.se_accuracy,
            s.mean_iterations,
            s.mean_wall_time_s
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sequence(args: &SequenceArgs) -> Result<ExitCode, MatchError> {
    if args.t_sizes.is_empty() {
        return Err(MatchError::InvalidParameters("at least one template size is needed".into()));
    }
    if matches!(args.opts.mode, ModeArg::Delta) {
        return Err(MatchError::InvalidParameters(
            "sequence matching uses Gaussian potentials; noisy landmarks never match exactly".into(),
        ));
    }
    // Gaussian potentials ignore the template; the cutoff rule assumes 30-landmark frames
    let probe = PointPattern::from_xy(&[(0.0, 0.0)])?;
    let cfg = args.opts.config(&probe, LANDMARKS_PER_FRAME, DEFAULT_SIGMA_PIXELS);
    let rows = run_sequence(&args.dir, args.gap, &args.t_sizes, &cfg)?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    let pairs: BTreeSet<u32> = rows.iter().map(|r| r.frame_a).collect();
    eprintln!("{} frame pairs, {ok} matched rows, {} other rows", pairs.len(), rows.len() - ok);
    write_csv(&rows, BufWriter::new(File::create(&args.out)?))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode, MatchError> {
    let inst = generate_instance(args.n, args.m, args.eps, args.seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_points(args.out_dir.join("template.csv"), &inst.template)?;
    write_points(args.out_dir.join("scene.csv"), &inst.scene)?;
    let truth = TruthOutput {
        schema_version: SCHEMA_VERSION,
        truth: &inst.truth,
        transform: inst.transform,
        eps: args.eps,
        seed: args.seed,
    };
    let mut w = BufWriter::new(File::create(args.out_dir.join("truth.json"))?);
    serde_json::to_writer_pretty(&mut w, &truth)?;
    writeln!(w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth_sequence(args: &SynthSequenceArgs) -> Result<ExitCode, MatchError> {
    std::fs::create_dir_all(&args.out_dir)?;
    for (k, frame) in synthetic_sequence(args.frames, args.points, args.seed)?.iter().enumerate() {
        write_points(args.out_dir.join(format!("frame_{k:03}.csv")), frame)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_graph(args: &GraphArgs) -> Result<ExitCode, MatchError> {
    let g = match args.kind {
        GraphKindArg::SquaredCycle => build_squared_cycle(args.n)?,
        GraphKindArg::ThreeTree => build_three_tree(args.n, args.seed)?,
    };
    println!("{}", serde_json::to_string_pretty(&g.to_json())?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Sequence(a) => cmd_sequence(a),
        Command::Generate(a) => cmd_generate(a),
        Command::SynthSequence(a) => cmd_synth_sequence(a),
        Command::Graph(a) => cmd_graph(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
