//! `crosscut` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 solve failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crosscut::constraints::Tolerance;
use crosscut::dynamics::{TraceRecord, Tracer};
use crosscut::eval::{evaluate, EvalReport, MatingWeight};
use crosscut::io::svg::{render_puzzle, render_solution, SvgOptions, View};
use crosscut::io::{
    read_puzzle, read_solution, to_json, write_puzzle, write_solution, write_text, SolveMode, FORMAT_VERSION,
    PUZZLE_EXT, SOLUTION_EXT,
};
use crosscut::puzzlegen::{derive_seed, generate, rng_from_seed, ShapeFamily};
use crosscut::solver::{solve_clean, solve_known, solve_noisy, SolveOutput, SolverConfig};
use crosscut::stats::{run_stats_suite, to_csv};
use crosscut::{PuzzleBundle, SolutionBundle};

#[derive(Parser, Debug)]
#[command(
    name = "crosscut",
    version,
    about = "Crossing cuts puzzle generator, solver and evaluator"
)]
struct Cli {
    /// Worker threads for batch work (defaults to all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate puzzle bundles
    Generate(GenerateArgs),
    /// Solve a bundle, or every bundle in a directory
    Solve(SolveArgs),
    /// Score solutions against ground truth
    Evaluate(EvaluateArgs),
    /// Empirical statistics against closed-form expectations, as CSV
    Stats(StatsArgs),
    /// Draw a puzzle or a solution as SVG
    Render(RenderArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Shape {
    Circle,
    Polygon,
}

impl From<Shape> for ShapeFamily {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Circle => ShapeFamily::Circle,
            Shape::Polygon => ShapeFamily::Polygon,
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Shape::Circle)]
    shape: Shape,
    /// Number of straight cuts
    #[arg(long)]
    cuts: usize,
    /// Noise bound relative to the shape diameter
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    #[arg(long, env = "CROSSCUT_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of bundles; above 1 the output is a directory
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Omit cuts and ground truth from the written files
    #[arg(long)]
    strip_truth: bool,
    /// Output file, or directory in batch mode
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Clean,
    Noisy,
    KnownMatings,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Bundle file or directory of bundles
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Noisy)]
    mode: Mode,
    /// Solution file, or directory when the input is a directory
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, env = "CROSSCUT_SEED", default_value_t = 0)]
    seed: u64,
    /// Write relaxation samples as JSON lines (single input only)
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Steps between trace samples
    #[arg(long, default_value_t = 100)]
    trace_every: usize,
    /// Embed an evaluation against the bundle's ground truth
    #[arg(long)]
    eval: bool,
    #[command(flatten)]
    physics: PhysicsArgs,
}

#[derive(Args, Debug)]
struct PhysicsArgs {
    /// Integration time step
    #[arg(long)]
    dt: Option<f64>,
    /// Velocity damping per step
    #[arg(long)]
    damping: Option<f64>,
    /// Spring stiffness
    #[arg(long)]
    stiffness: Option<f64>,
    /// Step cap per relaxation phase
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Weighting {
    MeanArea,
    Uniform,
}

impl From<Weighting> for MatingWeight {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::MeanArea => MatingWeight::MeanArea,
            Weighting::Uniform => MatingWeight::Uniform,
        }
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Solution file
    #[arg(long, short, required_unless_present = "dir", requires = "puzzle")]
    solution: Option<PathBuf>,
    /// Bundle with ground truth
    #[arg(long, short)]
    puzzle: Option<PathBuf>,
    /// Directory holding `name.ccpuzzle` and `name.ccsol` pairs
    #[arg(long, conflicts_with_all = ["solution", "puzzle"])]
    dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Weighting::MeanArea)]
    weighting: Weighting,
    /// Also write the report(s) as JSON
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, value_enum, default_value_t = Shape::Circle)]
    shape: Shape,
    /// Cut counts, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    cuts: Vec<usize>,
    /// Puzzles per configuration
    #[arg(long, default_value_t = 30)]
    count: usize,
    /// Noise levels, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0")]
    xi: Vec<f64>,
    #[arg(long, env = "CROSSCUT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ViewArg {
    Bag,
    Solved,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Draw this solution instead of the bundle
    #[arg(long, short)]
    solution: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ViewArg::Solved)]
    view: ViewArg,
    /// Ground-truth outlines beneath a solution
    #[arg(long)]
    overlay_truth: bool,
    #[arg(long)]
    no_ids: bool,
    #[arg(long, default_value_t = 800.0)]
    width: f64,
    #[arg(long, short)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn config(err: anyhow::Error) -> Failure {
    Failure { code: 2, err }
}

fn data(err: anyhow::Error) -> Failure {
    Failure { code: 3, err }
}

fn unsolved(err: anyhow::Error) -> Failure {
    Failure { code: 4, err }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Render(a) => cmd_render(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.err));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain joined by ": ", skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn check_xi(xi: f64) -> Outcome {
    if !(0.0..1.0).contains(&xi) {
        return Err(config(anyhow!("--xi must satisfy 0 <= xi < 1, got {xi}")));
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Outcome {
    check_xi(a.xi)?;
    if a.count == 0 {
        return Err(config(anyhow!("--count must be at least 1")));
    }
    let family = ShapeFamily::from(a.shape);
    let make = |seed: u64| -> Result<PuzzleBundle, Failure> {
        let g = generate(family, a.cuts, a.xi, seed).map_err(|e| data(anyhow!(e).context(format!("seed {seed}"))))?;
        Ok(if a.strip_truth {
            g.bundle.without_ground_truth()
        } else {
            g.bundle
        })
    };
    if a.count == 1 {
        let b = make(a.seed)?;
        return write_puzzle(&a.out, &b).map_err(|e| data(e.into()));
    }
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(data)?;
    (0..a.count).into_par_iter().try_for_each(|i| {
        let b = make(derive_seed(a.seed, i as u64))?;
        let path = a.out.join(format!("puzzle_{i:04}.{PUZZLE_EXT}"));
        write_puzzle(&path, &b).map_err(|e| data(e.into()))
    })?;
    println!("wrote {} bundles to {}", a.count, a.out.display());
    Ok(())
}

fn solver_config(b: &PuzzleBundle, seed: u64, p: &PhysicsArgs) -> Result<SolverConfig, Failure> {
    let mut cfg = SolverConfig::for_diameter(b.diameter(), seed);
    if let Some(v) = p.dt {
        cfg.relax.dt = v;
    }
    if let Some(v) = p.damping {
        cfg.relax.damping = v;
    }
    if let Some(v) = p.stiffness {
        if !(v > 0.0 && v.is_finite()) {
            return Err(config(anyhow!("--stiffness must be positive")));
        }
        cfg.relax.energy_tol *= v / cfg.relax.k;
        cfg.relax.k = v;
    }
    if let Some(v) = p.max_steps {
        cfg.relax.max_steps = v;
    }
    cfg.relax.validate().map_err(|e| config(e.into()))?;
    Ok(cfg)
}

fn solve_one(b: &PuzzleBundle, a: &SolveArgs, trace: Option<&Path>) -> Result<SolutionBundle, Failure> {
    let cfg = solver_config(b, a.seed, &a.physics)?;
    let pieces = b.polygons();
    let mut sink_err: Option<std::io::Error> = None;
    let mut writer = match trace {
        Some(p) => Some(BufWriter::new(
            File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(data)?,
        )),
        None => None,
    };
    let out: SolveOutput = {
        let mut sink = |r: &TraceRecord<'_>| {
            if let (Some(w), None) = (writer.as_mut(), sink_err.as_ref()) {
                let line = serde_json::to_string(r).expect("trace records serialize");
                if let Err(e) = writeln!(w, "{line}") {
                    sink_err = Some(e);
                }
            }
        };
        let mut tracer = Tracer {
            every: a.trace_every.max(1),
            sink: &mut sink,
        };
        let tr = trace.map(|_| &mut tracer);
        let r = match a.mode {
            Mode::Clean => solve_clean(
                &pieces,
                &Tolerance::for_diameter(b.diameter()),
                &mut rng_from_seed(a.seed),
            ),
            Mode::Noisy => solve_noisy(&pieces, b.noise.epsilon, b.diameter(), &cfg, tr),
            Mode::KnownMatings => {
                let gt = b
                    .ground_truth
                    .as_ref()
                    .ok_or_else(|| data(anyhow!("known-matings mode needs ground-truth matings in the bundle")))?;
                solve_known(&pieces, &gt.matings, &cfg, tr)
            }
        };
        r.map_err(|e| unsolved(e.into()))?
    };
    if let Some(mut w) = writer {
        if let Some(e) = sink_err {
            return Err(data(anyhow!(e).context("writing trace")));
        }
        w.flush().context("writing trace").map_err(data)?;
    }
    let mode = match a.mode {
        Mode::Clean => SolveMode::Clean,
        Mode::Noisy => SolveMode::Noisy,
        Mode::KnownMatings => SolveMode::KnownMatings,
    };
    let mut sol = SolutionBundle {
        format_version: FORMAT_VERSION.to_string(),
        mode,
        seed: b.seed,
        matings: out.matings,
        poses: out.poses,
        report: out.report,
        eval: None,
    };
    if a.eval {
        sol.eval = Some(evaluate(b, &sol, MatingWeight::MeanArea).map_err(|e| data(e.into()))?);
    }
    Ok(sol)
}

fn bundles_in(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, Failure> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(data)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    Ok(v)
}

fn cmd_solve(a: SolveArgs) -> Outcome {
    if a.input.is_dir() {
        if a.trace.is_some() {
            return Err(config(anyhow!("--trace needs a single input bundle")));
        }
        let inputs = bundles_in(&a.input, PUZZLE_EXT)?;
        fs::create_dir_all(&a.out)
            .with_context(|| format!("creating {}", a.out.display()))
            .map_err(data)?;
        let failed: Vec<String> = inputs
            .par_iter()
            .map(|p| -> Result<Option<String>, Failure> {
                let b = read_puzzle(p).map_err(|e| data(anyhow!(e).context(p.display().to_string())))?;
                let dest = a.out.join(
                    p.with_extension(SOLUTION_EXT)
                        .file_name()
                        .expect("listed files have names"),
                );
                match solve_one(&b, &a, None) {
                    Ok(sol) => {
                        write_solution(&dest, &sol).map_err(|e| data(e.into()))?;
                        Ok(sol.poses.is_empty().then(|| format!("{}: nothing placed", p.display())))
                    }
                    Err(f) if f.code == 4 => Ok(Some(format!("{}: {}", p.display(), describe(&f.err)))),
                    Err(f) => Err(f),
                }
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        println!("solved {} of {} bundles", inputs.len() - failed.len(), inputs.len());
        if !failed.is_empty() {
            return Err(unsolved(anyhow!("{}", failed.join("\n"))));
        }
        return Ok(());
    }
    let b = read_puzzle(&a.input).map_err(|e| data(e.into()))?;
    let sol = solve_one(&b, &a, a.trace.as_deref())?;
    write_solution(&a.out, &sol).map_err(|e| data(e.into()))?;
    let r = &sol.report;
    println!(
        "{} matings, {} placed, {} unplaced, levels {:?}",
        sol.matings.len(),
        sol.poses.len(),
        r.unplaced.len(),
        r.loops_per_level
    );
    if let Some(e) = &sol.eval {
        print_eval_header();
        print_eval_row(&a.input.display().to_string(), e);
    }
    if sol.poses.is_empty() {
        let why = r.diagnostic.clone().unwrap_or_else(|| "no piece placed".into());
        return Err(unsolved(anyhow!(why)));
    }
    Ok(())
}

fn print_eval_header() {
    println!(
        "{:<32} {:>11} {:>10} {:>8} {:>7}",
        "puzzle", "q_positions", "precision", "recall", "placed"
    );
}

fn print_eval_row(name: &str, e: &EvalReport) {
    let recall = e.recall.map_or("-".to_string(), |r| format!("{r:.4}"));
    println!(
        "{:<32} {:>11.4} {:>10.4} {:>8} {:>3}/{:<3}",
        name, e.q_positions, e.precision, recall, e.n_placed, e.n_pieces
    );
}

fn eval_pair(sol: &Path, puzzle: &Path, w: MatingWeight) -> Result<EvalReport, Failure> {
    let b = read_puzzle(puzzle).map_err(|e| data(anyhow!(e).context(puzzle.display().to_string())))?;
    let s = read_solution(sol).map_err(|e| data(anyhow!(e).context(sol.display().to_string())))?;
    s.validate_against(&b).map_err(|e| data(e.into()))?;
    evaluate(&b, &s, w).map_err(|e| data(e.into()))
}

fn cmd_evaluate(a: EvaluateArgs) -> Outcome {
    let w = MatingWeight::from(a.weighting);
    if let Some(dir) = &a.dir {
        let mut rows = Vec::new();
        for p in bundles_in(dir, PUZZLE_EXT)? {
            let s = p.with_extension(SOLUTION_EXT);
            if !s.exists() {
                return Err(data(anyhow!("no solution {} for {}", s.display(), p.display())));
            }
            let name = p
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_default();
            rows.push((name, eval_pair(&s, &p, w)?));
        }
        if rows.is_empty() {
            return Err(data(anyhow!("no .{PUZZLE_EXT} files in {}", dir.display())));
        }
        print_eval_header();
        for (name, e) in &rows {
            print_eval_row(name, e);
        }
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&EvalReport) -> f64| rows.iter().map(|(_, e)| f(e)).sum::<f64>() / n;
        println!(
            "{:<32} {:>11.4} {:>10.4} {:>8.4}",
            "mean",
            mean(&|e| e.q_positions),
            mean(&|e| e.precision),
            mean(&|e| e.recall.unwrap_or(1.0))
        );
        if let Some(out) = &a.out {
            let map: std::collections::BTreeMap<&str, &EvalReport> =
                rows.iter().map(|(k, v)| (k.as_str(), v)).collect();
            write_text(out, &to_json(&map)).map_err(|e| data(e.into()))?;
        }
        return Ok(());
    }
    let (Some(sol), Some(puzzle)) = (&a.solution, &a.puzzle) else {
        return Err(config(anyhow!("give --solution and --puzzle, or --dir")));
    };
    let e = eval_pair(sol, puzzle, w)?;
    print_eval_header();
    print_eval_row(&puzzle.display().to_string(), &e);
    if let Some(out) = &a.out {
        write_text(out, &to_json(&e)).map_err(|e| data(e.into()))?;
    }
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Outcome {
    for &xi in &a.xi {
        check_xi(xi)?;
    }
    if a.count == 0 {
        return Err(config(anyhow!("--count must be at least 1")));
    }
    let reports = run_stats_suite(a.shape.into(), &a.cuts, a.count, &a.xi, a.seed).map_err(|e| data(e.into()))?;
    write_text(&a.out, &to_csv(&reports)).map_err(|e| data(e.into()))?;
    for r in &reports {
        println!(
            "a={:<4} xi={:<8} pieces {:.2}±{:.2} (expected {:.2})  avg edge {:.4} (expected {:.4})  mates/edge {:.2}",
            r.a,
            r.xi,
            r.n_pieces_mean,
            r.n_pieces_se,
            r.n_pieces_expected,
            r.avg_edge_length_mean,
            r.avg_edge_length_expected,
            r.mates_per_edge_mean
        );
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Outcome {
    if !(a.width > 0.0 && a.width.is_finite()) {
        return Err(config(anyhow!("--width must be positive")));
    }
    let b = read_puzzle(&a.input).map_err(|e| data(e.into()))?;
    let opts = SvgOptions {
        view: match a.view {
            ViewArg::Bag => View::Bag,
            ViewArg::Solved => View::Solved,
        },
        width: a.width,
        show_ids: !a.no_ids,
        overlay_truth: a.overlay_truth,
    };
    let svg = match &a.solution {
        Some(p) => {
            let s = read_solution(p).map_err(|e| data(e.into()))?;
            s.validate_against(&b).map_err(|e| data(e.into()))?;
            render_solution(&b, &s, &opts)
        }
        None => render_puzzle(&b, &opts),
    };
    write_text(&a.out, &svg).map_err(|e| data(e.into()))
}
