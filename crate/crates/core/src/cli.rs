//! The `mghc` command line: argument parsing, subcommands and exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::config::{BuildError, ConfigError, Experiment, ExperimentConfig, SurfaceSpec};
use crate::fuchsian::{Word, LETTER_NAMES};
use crate::lamination::LaminationError;
use crate::metric::converge::Status;
use crate::metric::{converge, ConvergeSetup, ConvergenceReport, MetricError};
use crate::mink::{HPoint, Mat3, MinkVec};
use crate::report::{convergence_rows, convergence_summary, write_csv, write_json, ConvergenceSummary};
use crate::singularity::Piece;
use crate::tree::search_words;
use crate::validate::{build_checks, validate, Check, ValidationReport};

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mghc", version, about = "Flat (2+1) spacetimes from weighted multicurves and the collapse of their time levels onto the dual tree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel parts.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the spacetime and record holonomy, Σ statistics and basic checks.
    Build,
    /// Cosmological time, retraction and direction of spacetime points.
    Tau {
        /// Point `t,x,y`; repeatable.
        #[arg(long = "point", value_parser = parse_point, required = true)]
        points: Vec<[f64; 3]>,
    },
    /// Tree distances of point pairs and translation lengths of words.
    Tree {
        /// Pair `r1,θ1,r2,θ2` in polar coordinates; the configured pairs when absent.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<[f64; 4]>,
        /// Word; the configured words when absent.
        #[arg(long = "gamma")]
        gammas: Vec<Word>,
    },
    /// Level distances of the configured pairs over the a-grid.
    Dist,
    /// Translation-length spectra of the configured words over the grid.
    Spectrum,
    /// Full a → 0 experiment: distances, spectra and proof-path chains.
    Converge,
    /// Run the invariant suite.
    Validate,
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_pair(s: &str) -> Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

/// Error with its exit code and a module-qualified label.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub module: &'static str,
    pub kind: &'static str,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}::{}]: {}", self.module, self.kind, self.message)
    }
}

fn err(code: u8, module: &'static str, kind: &'static str, message: impl ToString) -> CliError {
    CliError {
        code,
        module,
        kind,
        message: message.to_string(),
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let kind = match e {
            ConfigError::Io { .. } => "io",
            ConfigError::Parse { .. } => "parse",
            ConfigError::Invalid { .. } => "invalid",
        };
        err(EXIT_USAGE, "config", kind, e)
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match &e {
            BuildError::Group(_) => err(EXIT_VALIDATION, "fuchsian", "group", e),
            BuildError::Lamination(l) => {
                let kind = match l {
                    LaminationError::Crossing { .. } => "crossing",
                    LaminationError::SharedAxis(..) => "shared_axis",
                    LaminationError::BadWeight { .. } => "weight",
                    LaminationError::Group(_) => "group",
                };
                err(EXIT_VALIDATION, "lamination", kind, e)
            }
            BuildError::Singularity(_) => err(EXIT_INCONCLUSIVE, "singularity", "build", e),
            BuildError::Time(_) => err(EXIT_USAGE, "times", "build", e),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let kind = match e {
            MetricError::Singularity(_) => "singularity",
            MetricError::Time(_) => "time",
            MetricError::Optimizer(_) => "optimizer",
            MetricError::Chart(_) => "chart",
            MetricError::Combinatorics(_) => "combinatorics",
        };
        err(EXIT_INCONCLUSIVE, "metric", kind, e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    err(EXIT_USAGE, "report", "io", format!("{}: {e}", path.display()))
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Pass => EXIT_SUCCESS,
        Status::Fail => EXIT_VALIDATION,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Configuration echoed into summaries; the output directory is left out so
/// that runs differing only in `--out` produce identical files.
fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Some(map) = v.as_object_mut() {
        map.remove("out");
    }
    v
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    seed: u64,
    config: serde_json::Value,
    #[serde(flatten)]
    body: T,
}

struct Run {
    config: ExperimentConfig,
    out: PathBuf,
}

impl Run {
    fn write<T: Serialize>(&self, command: &str, body: T) -> Result<PathBuf, CliError> {
        let path = self.out.join(format!("{command}.json"));
        let env = Envelope {
            command,
            seed: self.config.seed,
            config: config_echo(&self.config),
            body,
        };
        write_json(&path, &env).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    fn write_rows(&self, command: &str, rows: &[crate::report::Row]) -> Result<PathBuf, CliError> {
        let path = self.out.join(format!("{command}.csv"));
        write_csv(&path, rows).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    fn build(&self) -> Result<Experiment, CliError> {
        let t = Instant::now();
        let exp = self.config.build()?;
        info!("built spacetime with {} leaves in {:.2?}", exp.st.leaves().len(), t.elapsed());
        Ok(exp)
    }
}

#[derive(Serialize)]
struct HolonomyRow {
    word: String,
    linear: Mat3,
    translation: MinkVec,
}

#[derive(Serialize)]
struct ComponentRow {
    word: Word,
    weight: f64,
    translation_length: f64,
}

#[derive(Serialize)]
struct SigmaStats {
    /// Lifted leaves, one per edge of Σ.
    edges: usize,
    covered_radius: f64,
    /// Distinct vertices `x(γR₀)` over the covered elements of the ball.
    vertices_in_ball: usize,
    ball_radius: usize,
    components: Vec<ComponentRow>,
}

#[derive(Serialize)]
struct BuildBody {
    surface: String,
    relator: Word,
    holonomy: Vec<HolonomyRow>,
    sigma: SigmaStats,
    checks: Vec<Check>,
    passed: bool,
}

fn distinct_vertices(exp: &Experiment) -> usize {
    let st = &exp.st;
    let base = st.base();
    let mut seen: Vec<MinkVec> = Vec::new();
    for e in &exp.ball.elements {
        let p = base.transform(&e.matrix);
        if crate::mink::h2_dist(&exp.group.basepoint, &p) > st.leaves().covered_radius {
            continue;
        }
        let x = st.vertex_at(&p);
        if !seen.iter().any(|y| y.dist_inf(&x) <= 1e-9 * x.max_abs().max(1.0)) {
            seen.push(x);
        }
    }
    seen.len()
}

fn cmd_build(run: &Run) -> Result<u8, CliError> {
    let exp = run.build()?;
    let checks = build_checks(&exp);
    let passed = checks.iter().all(|c| c.passed);
    let holonomy = (0..8u8)
        .map(|l| {
            let w = Word::letter(l);
            let h = exp.st.holonomy(&w);
            HolonomyRow {
                word: LETTER_NAMES[l as usize].into(),
                linear: h.linear,
                translation: h.translation,
            }
        })
        .collect();
    let components = exp
        .st
        .lamination
        .components
        .iter()
        .map(|c| ComponentRow {
            word: c.word.clone(),
            weight: c.weight,
            translation_length: c.axis.translation_length,
        })
        .collect();
    let body = BuildBody {
        surface: match &run.config.surface {
            SurfaceSpec::Builtin(name) => name.clone(),
            SurfaceSpec::Custom { .. } => "custom".into(),
        },
        relator: exp.group.relator.clone(),
        holonomy,
        sigma: SigmaStats {
            edges: exp.st.leaves().len(),
            covered_radius: exp.st.leaves().covered_radius,
            vertices_in_ball: distinct_vertices(&exp),
            ball_radius: exp.ball.radius,
            components,
        },
        passed,
        checks,
    };
    print_checks(&body.checks);
    let path = run.write("build", &body)?;
    println!("build: {} -> {}", if passed { "PASS" } else { "FAIL" }, path.display());
    Ok(if passed { EXIT_SUCCESS } else { EXIT_VALIDATION })
}

#[derive(Serialize)]
struct TauRow {
    point: MinkVec,
    tau: f64,
    r: MinkVec,
    u: MinkVec,
    piece: &'static str,
}

fn cmd_tau(run: &Run, points: &[[f64; 3]]) -> Result<u8, CliError> {
    let exp = run.build()?;
    let mut rows = Vec::new();
    for p in points {
        let p = MinkVec(*p);
        let c = exp.st.cosmo_time(&p).map_err(MetricError::from)?;
        let piece = match c.piece {
            Piece::Vertex { .. } => "vertex",
            Piece::Band { .. } => "band",
        };
        println!("tau {p} = {} r = {} ({piece})", c.tau, c.r);
        rows.push(TauRow {
            point: p,
            tau: c.tau,
            r: c.r,
            u: c.u.vec(),
            piece,
        });
    }
    #[derive(Serialize)]
    struct Body {
        points: Vec<TauRow>,
    }
    run.write("tau", Body { points: rows })?;
    Ok(EXIT_SUCCESS)
}

#[derive(Serialize)]
struct TreePairRow {
    x: (f64, f64),
    y: (f64, f64),
    distance: f64,
    leaves: usize,
    complete: bool,
}

#[derive(Serialize)]
struct TranslationRow {
    gamma: Word,
    length: f64,
    leaves: usize,
    complete: bool,
}

fn cmd_tree(run: &Run, pairs: &[[f64; 4]], gammas: &[Word]) -> Result<u8, CliError> {
    let exp = run.build()?;
    let tree = &exp.st.tree;
    let pairs: Vec<(HPoint, HPoint)> = if pairs.is_empty() {
        run.config.sample_pairs()
    } else {
        pairs
            .iter()
            .map(|p| (HPoint::from_polar(p[0], p[1]), HPoint::from_polar(p[2], p[3])))
            .collect()
    };
    let gammas = if gammas.is_empty() { &run.config.gammas[..] } else { gammas };
    let pair_rows: Vec<TreePairRow> = pairs
        .iter()
        .map(|(x, y)| {
            let d = tree.tree_distance(x, y);
            TreePairRow {
                x: x.to_disk(),
                y: y.to_disk(),
                distance: d.weight,
                leaves: d.leaves,
                complete: d.is_complete(),
            }
        })
        .collect();
    let mut translations = Vec::new();
    for g in gammas {
        let t = tree.translation_length(g).map_err(|e| err(EXIT_USAGE, "fuchsian", "axis", e))?;
        println!("l({g}) = {}", t.weight);
        translations.push(TranslationRow {
            gamma: g.clone(),
            length: t.weight,
            leaves: t.leaves,
            complete: t.is_complete(),
        });
    }
    let incomplete = pair_rows.iter().any(|r| !r.complete) || translations.iter().any(|r| !r.complete);
    #[derive(Serialize)]
    struct Body {
        pairs: Vec<TreePairRow>,
        translations: Vec<TranslationRow>,
        complete: bool,
    }
    let path = run.write(
        "tree",
        Body {
            pairs: pair_rows,
            translations,
            complete: !incomplete,
        },
    )?;
    println!("tree: {} pairs -> {}", pairs.len(), path.display());
    Ok(if incomplete { EXIT_INCONCLUSIVE } else { EXIT_SUCCESS })
}

fn experiment(run: &Run, exp: &Experiment, pairs: bool, gammas: bool, chains: bool) -> Result<ConvergenceReport, CliError> {
    let config = &run.config;
    let setup = ConvergeSetup {
        st: &exp.st,
        tau: exp.tau.clone(),
        times: exp.times.clone(),
        pairs: if pairs { config.sample_pairs() } else { Vec::new() },
        gammas: if gammas { config.gammas.clone() } else { Vec::new() },
        grid: config.grid(),
        spectrum_grid: config.spectrum_grid(),
        search: if chains {
            search_words(&exp.group, config.radii.search, config.radii.search_power)
                .map_err(|e| err(EXIT_INCONCLUSIVE, "fuchsian", "ball", e))?
        } else {
            Vec::new()
        },
        chains,
        opts: config.metric.clone(),
        tol: config.tolerances.clone(),
    };
    let t = Instant::now();
    let report = converge(&setup)?;
    info!("experiment finished in {:.2?}", t.elapsed());
    Ok(report)
}

fn finish(run: &Run, command: &str, exp: &Experiment, report: &ConvergenceReport) -> Result<u8, CliError> {
    let rows = convergence_rows(report, exp.st.leaves().covered_radius);
    let csv = run.write_rows(command, &rows)?;
    let summary: ConvergenceSummary = convergence_summary(report);
    for i in &summary.items {
        println!(
            "{} {} {} [{}|{}] limit {:.6} target {:.6} ({})",
            i.status, i.kind, i.label, i.level_time, i.line_time, i.limit, i.target, i.method
        );
    }
    for c in &summary.chains {
        println!(
            "{} chain pair {} {} gamma {} chain {:?} tree {:.6}",
            c.status,
            c.pair,
            c.time,
            c.gamma.as_ref().map_or("none".into(), |g| g.to_string()),
            c.chain,
            c.tree_translation
        );
    }
    let json = run.write(command, &summary)?;
    println!(
        "{command}: {} ({} pass, {} fail, {} inconclusive) -> {}, {}",
        summary.status,
        summary.passed,
        summary.failed,
        summary.inconclusive,
        csv.display(),
        json.display()
    );
    Ok(status_code(summary.status))
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "{} {}: {:.3e} (tolerance {:.0e}, {} checked, {} skipped) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.checked,
            c.skipped,
            c.detail
        );
    }
}

fn cmd_validate(run: &Run) -> Result<u8, CliError> {
    let exp = run.build()?;
    let report: ValidationReport = validate(&exp, &run.config);
    print_checks(&report.checks);
    let path = run.write("validate", &report)?;
    println!("validate: {} -> {}", if report.passed { "PASS" } else { "FAIL" }, path.display());
    for c in report.failures() {
        eprintln!("error[validate::{}]: {}", c.name, c.detail);
    }
    Ok(if report.passed { EXIT_SUCCESS } else { EXIT_VALIDATION })
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(err(EXIT_USAGE, "cli", "threads", "--threads must be at least 1"));
        }
        // fails only when a pool already exists, e.g. on repeated in-process runs
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let run = Run {
        out: config.out.clone(),
        config,
    };
    match &cli.command {
        Command::Build => cmd_build(&run),
        Command::Tau { points } => cmd_tau(&run, points),
        Command::Tree { pairs, gammas } => cmd_tree(&run, pairs, gammas),
        Command::Dist => {
            let exp = run.build()?;
            let report = experiment(&run, &exp, true, false, false)?;
            finish(&run, "dist", &exp, &report)
        }
        Command::Spectrum => {
            let exp = run.build()?;
            let report = experiment(&run, &exp, false, true, false)?;
            finish(&run, "spectrum", &exp, &report)
        }
        Command::Converge => {
            let exp = run.build()?;
            let report = experiment(&run, &exp, true, true, run.config.chains)?;
            finish(&run, "converge", &exp, &report)
        }
        Command::Validate => cmd_validate(&run),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}
