//! Command-line front end.
//!
//! Exit status: 0 success, 2 usage or configuration error, 3 run suspended
//! (resume the journal to continue), 4 internal error.
//!
//! Hardware runs print one line per fabrication request,
//! `PENDING {"request_id":..,"stl_a":..,..}`, and read measurements from
//! stdin as `<request_id> <rpm>` lines, or `abort`. The same requests are
//! served over HTTP.

use std::ffi::OsString;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, mann_whitney, mean, sample_sd, write_csv};
use crate::coevolution::{Event, Mode, StrategyConfig};
use crate::fitness::{Hub, PendingRequest, Species, SyntheticLandscapeConfig};
use crate::genome::Genome;
use crate::mesh::{genome_to_stl, DEFAULT_SMOOTH_STEPS};
use crate::session::{self, journal, Backend, Outcome, RunConfig, Session, SessionError};
use crate::surrogate::{LinearTrainer, MlpConfig, ModelTrainer, Window};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SUSPENDED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Prefix of the machine-readable fabrication request line.
pub const PENDING_PREFIX: &str = "PENDING ";

#[derive(Debug, Parser)]
#[command(
    name = "vawt-mine",
    version,
    about = "Design mining for interacting VAWT pairs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a run from a config file and/or flags.
    Run(RunArgs),
    /// Replay a journal and continue the run.
    Resume(ResumeArgs),
    /// Write the printable STL for a genome.
    ExportStl(ExportArgs),
    /// Run an analysis study and write CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run config; flags override its values.
    pub config: Option<PathBuf>,
    /// cga, scga, scga-20t, scga-els, cga-2 or cga-cross.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total fabrications, initialisation included.
    #[arg(long)]
    pub budget: Option<usize>,
    /// synthetic or hardware.
    #[arg(long)]
    pub backend: Option<Backend>,
    /// Run directory name under the output directory.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Output directory; defaults to $VAWT_MINE_OUT, else ./runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// HTTP bind address for hardware runs.
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct ResumeArgs {
    pub journal: PathBuf,
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// 16 integers (profile, z-shifts, rotation), or `<journal>#<index>`
    /// with an optional `:A` or `:B` for a rig position.
    pub genome: String,
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SMOOTH_STEPS)]
    pub smooth_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Study {
    /// Recent-20 against all-records surrogate training on drifting data.
    Windowing,
    /// Final best-so-far per strategy on the synthetic landscape.
    Strategies,
    /// Repeated 10-fold cross-validation of the surrogate.
    Cv,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub study: Study,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Strategies to compare.
    #[arg(long, value_delimiter = ',', default_value = "cga,scga,scga-els")]
    pub modes: Vec<Mode>,
    /// Records for `cv`; defaults to a synthetic CGA run.
    #[arg(long)]
    pub journal: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Session(SessionError),
    Internal(String),
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        CliError::Session(e)
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Session(e) if e.is_suspension() => EXIT_SUSPENDED,
            CliError::Session(
                SessionError::Config(_)
                | SessionError::Missing(_)
                | SessionError::JournalExists(_)
                | SessionError::NoConfig(_)
                | SessionError::Corrupt { .. },
            ) => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::Session(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::ExportStl(a) => cmd_export(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = e.code();
            if code == EXIT_SUSPENDED {
                eprintln!("suspended: {e}");
            } else {
                eprintln!("error: {e}");
            }
            code
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = a.mode {
        cfg.strategy.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.strategy.seed = s;
    }
    if let Some(b) = a.budget {
        cfg.strategy.budget = b;
    }
    if let Some(b) = a.backend {
        cfg.backend = b;
    }
    if a.run_id.is_some() {
        cfg.run_id = a.run_id;
    }
    if a.out.is_some() {
        cfg.output_dir = a.out;
    }
    if let Some(b) = a.bind {
        cfg.service.bind = b;
    }
    let mut session = Session::create(&cfg)?;
    println!("journal: {}", session.journal_path().display());
    drive(&mut session, None)
}

fn cmd_resume(a: ResumeArgs) -> Result<(), CliError> {
    let mut session = Session::resume(&a.journal)?;
    drive(&mut session, a.bind)
}

fn drive(session: &mut Session, bind: Option<String>) -> Result<(), CliError> {
    let outcome = match session.config().backend {
        Backend::Synthetic => session.run_synthetic(),
        Backend::Hardware => {
            let bind = bind.unwrap_or_else(|| session.config().service.bind.clone());
            run_hardware(session, &bind)
        }
    };
    match outcome {
        Ok(o) => {
            print_outcome(&o);
            Ok(())
        }
        Err(e) => {
            if e.is_suspension() {
                eprintln!(
                    "resume with: vawt-mine resume {}",
                    session.journal_path().display()
                );
            }
            Err(e.into())
        }
    }
}

fn run_hardware(session: &mut Session, bind: &str) -> Result<Outcome, SessionError> {
    let service = session::serve(session.service_state(), bind).map_err(|e| SessionError::Io {
        path: PathBuf::from(bind),
        source: e,
    })?;
    println!("serving: http://{}", service.addr());
    let hub = session.hub();
    std::thread::spawn(move || read_measurements(std::io::stdin().lock(), &hub));
    let mut evaluator = session
        .hardware_evaluator()
        .on_publish(|p| println!("{}", pending_line(p)));
    let outcome = session.run_with(&mut evaluator);
    service.shutdown();
    outcome
}

/// The stdout line announcing a fabrication request.
pub fn pending_line(p: &PendingRequest) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        request_id: u64,
        run_id: &'a str,
        species: Species,
        position_a: String,
        position_b: String,
        stl_a: &'a Path,
        stl_b: &'a Path,
        instructions: &'a str,
    }
    let line = Line {
        request_id: p.request_id,
        run_id: &p.run_id,
        species: p.species,
        position_a: p.request.arrangement.position_a.to_string(),
        position_b: p.request.arrangement.position_b.to_string(),
        stl_a: &p.stl_a,
        stl_b: &p.stl_b,
        instructions: &p.instructions,
    };
    format!(
        "{PENDING_PREFIX}{}",
        serde_json::to_string(&line).expect("pending line serializes")
    )
}

/// Feeds `<request_id> <rpm>` lines to the hub until `abort` or EOF.
pub fn read_measurements(input: impl BufRead, hub: &Hub) {
    for line in input.lines() {
        let Ok(line) = line else { break };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.eq_ignore_ascii_case("abort") {
            hub.abort();
            break;
        }
        let mut parts = line.split_whitespace();
        let parsed = match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(rpm), None) => id.parse::<u64>().ok().zip(rpm.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((id, rpm)) => match hub.submit(id, rpm) {
                Ok(()) => println!("ACCEPTED {id} {rpm}"),
                Err(e) => eprintln!("REJECTED {line}: {e}"),
            },
            None => eprintln!("REJECTED {line}: expected `<request_id> <rpm>` or `abort`"),
        }
    }
}

fn print_outcome(o: &Outcome) {
    let f = &o.result.fittest;
    println!("evaluations: {}", o.result.fabrications.len());
    println!("appended events: {}", o.appended);
    println!(
        "fittest: {} rpm at fabrication {} (A {} / B {})",
        f.rpm, f.index, f.position_a, f.position_b
    );
    println!("journal: {}", o.journal.display());
    for name in [
        "best_so_far.csv",
        "evaluations_A.csv",
        "evaluations_B.csv",
        "summary.csv",
    ] {
        println!("report: {}", o.report_dir.join(name).display());
    }
}

fn genome_from_journal(path: &Path, reference: &str) -> Result<Genome, CliError> {
    let (index, position) = match reference.split_once(':') {
        Some((i, p)) => (i, Some(p.parse::<Species>().map_err(CliError::Usage)?)),
        None => (reference, None),
    };
    let index: u64 = index
        .parse()
        .map_err(|_| CliError::Usage(format!("bad fabrication index {index:?}")))?;
    let contents = journal::read_journal(path)?;
    contents
        .events
        .iter()
        .find_map(|e| match e {
            Event::EvaluationRequest { request, .. } if request.index == index => {
                Some(match position {
                    Some(p) => *request.arrangement.at(p),
                    None => request.genome,
                })
            }
            _ => None,
        })
        .ok_or_else(|| CliError::Usage(format!("{} has no fabrication {index}", path.display())))
}

fn cmd_export(a: ExportArgs) -> Result<(), CliError> {
    let genome = match a.genome.split_once('#') {
        Some((path, reference)) => genome_from_journal(Path::new(path), reference)?,
        None => a
            .genome
            .parse::<Genome>()
            .map_err(|e| CliError::Usage(format!("genome {:?}: {e}", a.genome)))?,
    };
    let bytes =
        genome_to_stl(&genome, a.smooth_steps).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(&a.out, &bytes)
        .map_err(|e| CliError::Internal(format!("{}: {e}", a.out.display())))?;
    println!("genome: {genome}");
    println!("triangles: {}", (bytes.len() - 84) / 50);
    println!("stl: {} ({} bytes)", a.out.display(), bytes.len());
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    a: String,
    b: String,
    n_a: usize,
    n_b: usize,
    mean_a: f64,
    mean_b: f64,
    sd_a: f64,
    sd_b: f64,
    u: f64,
    p: f64,
    method: analysis::Method,
}

fn compare(a: (&str, &[f64]), b: (&str, &[f64])) -> Result<Comparison, CliError> {
    let mw = mann_whitney(a.1, b.1).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Comparison {
        a: a.0.into(),
        b: b.0.into(),
        n_a: a.1.len(),
        n_b: b.1.len(),
        mean_a: mean(a.1),
        mean_b: mean(b.1),
        sd_a: sample_sd(a.1),
        sd_b: sample_sd(b.1),
        u: mw.u,
        p: mw.p,
        method: mw.method,
    })
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    write_csv(rows, file).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("csv: {}", path.display());
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| RunConfig::default().output_dir().join("bench"));
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Internal(format!("{}: {e}", out.display())))?;
    let internal = |e: &dyn std::fmt::Display| CliError::Internal(e.to_string());
    let comparisons = match a.study {
        Study::Windowing => bench_windowing(&a, &out, &internal)?,
        Study::Strategies => bench_strategies(&a, &out, &internal)?,
        Study::Cv => bench_cv(&a, &out, &internal)?,
    };
    for c in &comparisons {
        println!(
            "{} (mean {:.2}) vs {} (mean {:.2}): U = {}, p = {:.4} ({:?}, n = {}/{})",
            c.a, c.mean_a, c.b, c.mean_b, c.u, c.p, c.method, c.n_a, c.n_b
        );
    }
    let name = format!(
        "{}_summary.csv",
        a.study.to_possible_value().expect("not skipped").get_name()
    );
    write_rows(&out, &name, &comparisons)
}

type Internal<'a> = &'a dyn Fn(&dyn std::fmt::Display) -> CliError;

fn bench_windowing(
    a: &BenchArgs,
    out: &Path,
    internal: Internal,
) -> Result<Vec<Comparison>, CliError> {
    #[derive(Serialize)]
    struct Row {
        seed: u64,
        window: String,
        mae: f64,
    }
    let windows = [Window::Recent(20), Window::All];
    let trainer = MlpConfig::default();
    let mut rows = Vec::new();
    for seed in 0..a.seeds {
        let records = analysis::drifting_records(80, seed);
        for (w, mae) in analysis::windowing_study(&records, &windows, &trainer, seed)
            .map_err(|e| internal(&e))?
        {
            rows.push(Row {
                seed,
                window: w.to_string(),
                mae,
            });
        }
    }
    write_rows(out, "windowing.csv", &rows)?;
    let of = |w: Window| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.window == w.to_string())
            .map(|r| r.mae)
            .collect()
    };
    Ok(vec![compare(
        ("window-20", &of(Window::Recent(20))),
        ("window-all", &of(Window::All)),
    )?])
}

fn bench_strategies(
    a: &BenchArgs,
    out: &Path,
    internal: Internal,
) -> Result<Vec<Comparison>, CliError> {
    if a.modes.is_empty() {
        return Err(CliError::Usage("--modes is empty".into()));
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let runs = analysis::strategy_study(
        &a.modes,
        &seeds,
        &StrategyConfig::default(),
        &SyntheticLandscapeConfig::default(),
    )
    .map_err(|e| internal(&e))?;
    write_rows(out, "strategies.csv", &runs)?;
    let of = |m: Mode| -> Vec<f64> {
        runs.iter()
            .filter(|r| r.mode == m)
            .map(|r| r.best_rpm)
            .collect()
    };
    let mut out = Vec::new();
    for (i, &x) in a.modes.iter().enumerate() {
        for &y in &a.modes[i + 1..] {
            out.push(compare((x.name(), &of(x)), (y.name(), &of(y)))?);
        }
    }
    Ok(out)
}

fn bench_cv(a: &BenchArgs, out: &Path, internal: Internal) -> Result<Vec<Comparison>, CliError> {
    #[derive(Serialize)]
    struct Row {
        species: Species,
        trainer: &'static str,
        run: usize,
        mae: f64,
    }
    let events = match &a.journal {
        Some(p) => journal::read_journal(p)?.events,
        None => {
            let mut engine = crate::coevolution::Engine::new(StrategyConfig::default(), "cv")
                .map_err(|e| internal(&e))?;
            let mut sink = crate::coevolution::MemorySink::default();
            let mut eval =
                crate::fitness::SyntheticEvaluator::new(SyntheticLandscapeConfig::default());
            engine
                .run(&Default::default(), &mut eval, &mut sink)
                .map_err(|e| internal(&e))?;
            sink.events
        }
    };
    let records = analysis::records_from_events(&events);
    let trainers: [(&'static str, &dyn ModelTrainer); 2] = [
        ("mlp", &MlpConfig::default()),
        ("linear", &LinearTrainer::default()),
    ];
    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    for s in Species::BOTH {
        let own: Vec<_> = records.iter().filter(|r| r.species == s).cloned().collect();
        let mut per_trainer = Vec::new();
        for (name, trainer) in trainers {
            let cv = analysis::kfold_cv(&own, 10, a.seeds as usize, trainer, 0)
                .map_err(|e| internal(&e))?;
            for (run, &mae) in cv.runs.iter().enumerate() {
                rows.push(Row {
                    species: s,
                    trainer: name,
                    run,
                    mae,
                });
            }
            per_trainer.push((format!("{name}-{s}"), cv.runs));
        }
        comparisons.push(compare(
            (&per_trainer[0].0, &per_trainer[0].1),
            (&per_trainer[1].0, &per_trainer[1].1),
        )?);
    }
    write_rows(out, "cv.csv", &rows)?;
    Ok(comparisons)
}
