use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use alp_core::candidates::{generate_pool, GenerationError};
use alp_core::kb::{write_facts, KbError, KnowledgeBase};
use alp_core::logic::Alp;
use alp_core::model::ModelError;
use alp_core::pipeline::{self, LearnConfig, PipelineError};
use alp_core::pruning::{prune, PruneOptions};
use alp_core::solver::{SearchConfig, SolveError, TraceEntry};
use alp_core::GenerationConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alp", version, about = "Learn auto-encoding logic programs from relational facts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn an encoder/decoder pair from a fact file.
    Learn(LearnArgs),
    /// Apply a model's encoder to a fact file.
    Encode(ApplyArgs),
    /// Apply a model's decoder to a latent fact file.
    Decode(ApplyArgs),
    /// Reconstruction loss of a model on a fact file.
    Eval(EvalArgs),
    /// Dump the candidate pool.
    Enumerate(EnumerateArgs),
}

#[derive(Args, Clone)]
struct GenArgs {
    /// Maximum encoder body length.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=4))]
    max_enc_len: u8,
    /// Maximum decoder body length.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=4))]
    max_dec_len: u8,
    /// Maximum latent predicate arity [default: largest arity in the KB].
    #[arg(long)]
    max_head_vars: Option<usize>,
    /// Do not generate disjunctive encoder bodies.
    #[arg(long)]
    no_disjunction: bool,
    /// Allow one negated literal per encoder body.
    #[arg(long)]
    negation: bool,
    /// Candidate ceiling per clause kind.
    #[arg(long, default_value_t = 200_000)]
    max_candidates: usize,
    /// Skip all pruning passes.
    #[arg(long)]
    no_prune: bool,
}

impl GenArgs {
    fn config(&self, kb: &KnowledgeBase) -> GenerationConfig {
        let max_arity = kb.predicates().map(|p| p.arity).max().unwrap_or(1).max(1);
        GenerationConfig {
            max_encoder_body_len: self.max_enc_len as usize,
            max_decoder_body_len: self.max_dec_len as usize,
            max_head_vars: self.max_head_vars.unwrap_or(max_arity),
            allow_disjunction: !self.no_disjunction,
            allow_negation: self.negation,
            max_candidates: self.max_candidates,
        }
    }

    fn pruning(&self) -> PruneOptions {
        if self.no_prune {
            PruneOptions::none()
        } else {
            PruneOptions::default()
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    /// Fact file.
    kb: PathBuf,
    #[command(flatten)]
    generation: GenArgs,
    /// Compression level (decimal or fraction).
    #[arg(long, default_value = "0.5")]
    gamma: String,
    /// Percentage of active decoders kept per LNS iteration.
    #[arg(long, default_value_t = 70, value_parser = clap::value_parser!(u32).range(0..=100))]
    alpha: u32,
    /// Percentage of inactive encoders kept per LNS iteration.
    #[arg(long, default_value_t = 90, value_parser = clap::value_parser!(u32).range(0..=100))]
    beta: u32,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    iterations: u32,
    /// Failures allowed per LNS iteration.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    fail_limit: u64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent parallel searches.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Where to write the learned program [default: stdout].
    #[arg(long)]
    out_model: Option<PathBuf>,
    /// Where to write the latent facts.
    #[arg(long)]
    out_latent: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the constraint model in text form.
    #[arg(long)]
    dump_model: Option<PathBuf>,
    /// Progress TSV destination, `-` for stderr.
    #[arg(long)]
    progress: Option<PathBuf>,
    /// Sweep lengths {2,3} x gamma {0.3,0.5,0.7}, writing one set of files per cell into DIR.
    #[arg(long, value_name = "DIR")]
    grid: Option<PathBuf>,
    /// Print the run report as JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ApplyArgs {
    /// Model file written by `alp learn`.
    #[arg(long)]
    model: PathBuf,
    /// Input fact file.
    facts: PathBuf,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    kb: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EnumerateArgs {
    kb: PathBuf,
    #[command(flatten)]
    generation: GenArgs,
    /// Apply pruning before dumping.
    #[arg(long)]
    pruned: bool,
    /// Program text output [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// TSV sidecar with id, kind, weight and consequence count.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Io(PathBuf, std::io::Error),
    Unreadable(PathBuf, std::io::Error),
    Usage(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<KbError> for Failure {
    fn from(e: KbError) -> Self {
        Failure::Pipeline(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(..) => 1,
            Failure::Usage(_) => 2,
            Failure::Unreadable(..) => 3,
            Failure::Pipeline(e) => match e {
                PipelineError::Kb(KbError::Capacity { .. }) => 5,
                PipelineError::Kb(KbError::EmptyVocabulary) => 2,
                PipelineError::Kb(_) | PipelineError::Logic(_) => 3,
                PipelineError::Generation(GenerationError::Capacity { .. }) => 5,
                PipelineError::Generation(GenerationError::InvalidConfig(_)) => 2,
                PipelineError::Model(ModelError::InvalidGamma(_)) | PipelineError::Gamma(_) => 2,
                PipelineError::Model(ModelError::Kb(KbError::EmptyVocabulary)) => 2,
                PipelineError::Model(_) => 1,
                PipelineError::Solve(SolveError::Infeasible | SolveError::NoSeed(_)) => 4,
                PipelineError::Solve(SolveError::InvalidConfig(_)) => 2,
                PipelineError::Vocabulary { .. } => 6,
                PipelineError::Audit { .. } => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            Failure::Unreadable(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            Failure::Usage(m) => f.write_str(m),
            Failure::Pipeline(e) => write!(f, "{e}"),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Unreadable(path.to_path_buf(), e))
}

fn read_kb(path: &Path) -> Result<KnowledgeBase, Failure> {
    let text = read(path)?;
    KnowledgeBase::parse(&text).map_err(|e| {
        log::debug!("while parsing {}", path.display());
        e.into()
    })
}

fn read_model(path: &Path) -> Result<Alp, Failure> {
    let text = read(path)?;
    Alp::parse(&text).map_err(|e| Failure::Pipeline(e.into()))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e))
        }
    }
}

fn learn_config(args: &LearnArgs, kb: &KnowledgeBase) -> Result<LearnConfig, Failure> {
    if !(args.time_limit.is_finite() && args.time_limit > 0.0) {
        return Err(Failure::Usage(format!("--time-limit must be positive, got {}", args.time_limit)));
    }
    if args.workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    Ok(LearnConfig {
        generation: args.generation.config(kb),
        pruning: args.generation.pruning(),
        gamma: pipeline::parse_gamma(&args.gamma)?,
        search: SearchConfig {
            alpha: args.alpha,
            beta: args.beta,
            iterations: args.iterations,
            fail_limit: args.fail_limit,
            time_limit: Duration::from_secs_f64(args.time_limit),
            seed: args.seed,
        },
        workers: args.workers,
    })
}

fn progress_sink(path: Option<&Path>) -> Result<Option<Box<dyn Write>>, Failure> {
    match path {
        None => Ok(None),
        Some(p) if p == Path::new("-") => Ok(Some(Box::new(std::io::stderr()))),
        Some(p) => fs::File::create(p)
            .map(|f| Some(Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>))
            .map_err(|e| Failure::Io(p.to_path_buf(), e)),
    }
}

fn cmd_learn(args: &LearnArgs) -> Result<(), Failure> {
    let kb = read_kb(&args.kb)?;
    let config = learn_config(args, &kb)?;
    if let Some(dir) = &args.grid {
        return cmd_grid(&kb, &config, dir, args.json);
    }
    let mut sink = progress_sink(args.progress.as_deref())?;
    if let Some(s) = sink.as_mut() {
        let _ = writeln!(s, "iteration\tobjective\telapsed_ms\tselected_ec\tselected_dc");
    }
    let mut on_progress = |e: &TraceEntry| {
        log::info!("iteration {} objective {}", e.iteration, e.objective);
        if let Some(s) = sink.as_mut() {
            let _ = writeln!(s, "{}", e.tsv());
        }
    };
    let out = pipeline::learn(&kb, &config, &mut on_progress)?;
    if let Some(s) = sink.as_mut() {
        let _ = s.flush();
    }
    if let Some(p) = &args.dump_model {
        write(p, &out.model.to_text())?;
    }
    if let Some(p) = &args.out_latent {
        write(p, &out.latent_text())?;
    }
    if let Some(p) = &args.report {
        write(p, &out.report.to_json())?;
    }
    match (&args.out_model, args.json) {
        (Some(p), json) => {
            write(p, &out.model_text())?;
            if json {
                emit(None, &out.report.to_json())?;
            }
        }
        (None, true) => emit(None, &out.report.to_json())?,
        (None, false) => emit(None, &out.model_text())?,
    }
    eprintln!(
        "loss {} ({} missing, {} false), {} latent predicates, {} latent facts",
        out.report.reconstruction_loss,
        out.report.missing,
        out.report.false_positive,
        out.report.latent_predicates,
        out.report.latent_facts
    );
    Ok(())
}

fn cmd_grid(kb: &KnowledgeBase, base: &LearnConfig, dir: &Path, json: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
    let mut summary = Vec::new();
    let mut first_failure: Option<Failure> = None;
    for (cell, result) in pipeline::grid(kb, base) {
        let label = cell.label();
        match result {
            Ok(out) => {
                write(&dir.join(format!("{label}.alp")), &out.model_text())?;
                write(&dir.join(format!("{label}.latent")), &out.latent_text())?;
                write(&dir.join(format!("{label}.report.json")), &out.report.to_json())?;
                summary.push(serde_json::json!({
                    "cell": cell,
                    "loss": out.report.reconstruction_loss,
                    "latent_predicates": out.report.latent_predicates,
                }));
                eprintln!("{label}\tloss {}", out.report.reconstruction_loss);
            }
            Err(e) => {
                eprintln!("{label}\terror: {e}");
                summary.push(serde_json::json!({ "cell": cell, "error": e.to_string() }));
                first_failure.get_or_insert(Failure::Pipeline(e));
            }
        }
    }
    if json {
        emit(None, &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    }
    // a cell failing (often infeasibility at low gamma) does not fail the sweep
    if let Some(f) = first_failure {
        log::warn!("some grid cells failed, first: {f}");
    }
    Ok(())
}

fn cmd_encode(args: &ApplyArgs) -> Result<(), Failure> {
    let alp = read_model(&args.model)?;
    let kb = read_kb(&args.facts)?;
    let latent = pipeline::encode(&alp, &kb)?;
    emit(args.out.as_deref(), &write_facts(&latent))
}

fn cmd_decode(args: &ApplyArgs) -> Result<(), Failure> {
    let alp = read_model(&args.model)?;
    let latent = read_kb(&args.facts)?;
    let facts = pipeline::decode(&alp, &latent)?;
    emit(args.out.as_deref(), &write_facts(&facts))
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let alp = read_model(&args.model)?;
    let kb = read_kb(&args.kb)?;
    let report = pipeline::eval(&alp, &kb)?;
    if args.json {
        emit(None, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))
    } else {
        emit(None, &report.to_text())
    }
}

fn cmd_enumerate(args: &EnumerateArgs) -> Result<(), Failure> {
    let kb = read_kb(&args.kb)?;
    let config = args.generation.config(&kb);
    let pool = generate_pool(&kb, &config).map_err(PipelineError::from)?;
    let pool = if args.pruned {
        let (pool, report) = prune(&pool, &kb, args.generation.pruning());
        eprintln!(
            "pruned {} of {} candidates ({} naming, {} signature, {} corruption)",
            report.removed(),
            report.input_count,
            report.removed_naming,
            report.removed_signature,
            report.removed_corruption
        );
        pool
    } else {
        pool
    };
    if let Some(p) = &args.tsv {
        write(p, &pool.to_tsv())?;
    }
    emit(args.out.as_deref(), &pool.to_program_text())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ALP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Learn(a) => cmd_learn(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Enumerate(a) => cmd_enumerate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
