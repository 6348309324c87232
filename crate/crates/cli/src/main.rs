mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use geosynth::catalog::{bundled, load_catalogs, Catalog};
use geosynth::dataset::{
    augment_corpus, catalog_hash, compute_stats, read_corpus, read_manifest, read_sources, run_generation, sha256_hex,
    to_jsonl, validate_corpus, write_corpus, RunOptions, TrigramEmbedder, IMAGE_DIR, MANIFEST_FILE,
};
use geosynth::engine::{distribution_preset, render_svg};
use geosynth::reasoner::{CompletionClient, HttpClient, MockClient, PromptTemplatePool, Reasoner, RequestLog};
use serde_json::json;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "geosynth", version, about = "Theorem-grounded synthetic geometry figures and Q&A")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate figures, reason over them, filter and write a corpus.
    Generate(GenerateArgs),
    /// Re-run the deterministic checks over a corpus.
    Validate(ValidateArgs),
    /// Corpus statistics as JSON.
    Stats(StatsArgs),
    /// Step-wise augmentation of an external Q&A file.
    Augment(AugmentArgs),
    /// Re-render the SVG images of a corpus.
    Render(RenderArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog file instead of the bundled one.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct ClientArgs {
    /// Offline client: fixtures, then the rule-based responder.
    #[arg(long)]
    mock_client: bool,
    /// JSON object mapping prompt hashes to responses.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Prompt asset directory instead of the bundled pool.
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// Where to write the request log (JSONL).
    #[arg(long)]
    request_log: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    client: ClientArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    figures: Option<u64>,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Figures and ledgers only; no client calls.
    #[arg(long)]
    dry_run: bool,
    /// Polygon mix preset: group1, group2 or group3.
    #[arg(long)]
    distribution: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus directory or JSONL file.
    corpus: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StatsArgs {
    corpus: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AugmentArgs {
    /// JSONL of {id, question, cot_answer, image?}.
    source: PathBuf,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    client: ClientArgs,
    /// Output JSONL file.
    #[arg(long)]
    out: PathBuf,
    /// Send new pairs through the answerability judge.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct RenderArgs {
    corpus: PathBuf,
    /// Target directory; defaults to the corpus directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn event(value: serde_json::Value) {
    eprintln!("{value}");
}

fn report(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(common.config.as_deref()).map_err(Failure)?;
    if let Some(c) = &common.catalog {
        cfg.catalog = Some(c.clone());
    }
    Ok(cfg)
}

fn apply_client_flags(cfg: &mut RunConfig, c: &ClientArgs) {
    cfg.mock_client |= c.mock_client;
    if let Some(f) = &c.fixtures {
        cfg.fixtures = Some(f.clone());
    }
    if let Some(p) = &c.prompts {
        cfg.prompts = Some(p.clone());
    }
}

fn load_catalog(cfg: &RunConfig) -> Result<Catalog, Failure> {
    Ok(match &cfg.catalog {
        Some(p) => load_catalogs(p)?,
        None => bundled(),
    })
}

fn load_pool(cfg: &RunConfig, catalog: &Catalog) -> Result<PromptTemplatePool, Failure> {
    let pool = match &cfg.prompts {
        Some(dir) => PromptTemplatePool::load(dir)?,
        None => PromptTemplatePool::bundled(),
    };
    let families: BTreeSet<&str> = catalog.theorems.iter().map(|t| t.family.as_str()).collect();
    pool.check_tags(&families)?;
    Ok(pool)
}

fn make_client(cfg: &RunConfig, offline: bool) -> Result<Box<dyn CompletionClient>, Failure> {
    if offline {
        return Ok(Box::new(MockClient::strict(Default::default())));
    }
    if cfg.mock_client {
        let fixtures = match &cfg.fixtures {
            Some(p) => MockClient::load_fixtures(p).map_err(Failure)?,
            None => Default::default(),
        };
        return Ok(Box::new(MockClient::with_fixtures(fixtures)));
    }
    Ok(Box::new(HttpClient::from_env(cfg.client.clone())?))
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?)
}

fn write_log(path: &Path, log: &RequestLog) -> Result<(), Failure> {
    fs::write(path, log.to_jsonl()).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Outcome {
    let mut cfg = load_config(&a.common)?;
    apply_client_flags(&mut cfg, &a.client);
    if let Some(s) = a.seed {
        cfg.generation.seed = s;
    }
    if let Some(n) = a.figures {
        cfg.figures = n;
    }
    cfg.dry_run |= a.dry_run;
    if let Some(name) = &a.distribution {
        cfg.generation.substrate_distribution =
            distribution_preset(name).ok_or_else(|| Failure(format!("unknown distribution preset {name:?}")))?;
    }
    let catalog = load_catalog(&cfg)?;
    let pool = load_pool(&cfg, &catalog)?;
    cfg.generation.validate(&catalog).map_err(|e| Failure(format!("invalid generation config: {e}")))?;
    let client = make_client(&cfg, cfg.dry_run)?;
    let effective = cfg.effective();
    event(json!({"event": "config", "effective": effective, "client": client.identity()}));
    event(json!({"event": "start", "figures": cfg.figures}));
    let log = RequestLog::new();
    let opts = RunOptions { figures: cfg.figures, jobs: a.client.jobs.unwrap_or(0), dry_run: cfg.dry_run };
    let out = run_generation(&cfg.generation, &catalog, &pool, client.as_ref(), &log, &opts);
    for e in &out.errors {
        event(json!({"event": "error", "message": e}));
    }
    event(json!({"event": "generated", "records": out.records.len(), "requests": log.len()}));
    let manifest = write_corpus(&a.out, &out.records, effective, &catalog, out.counts.clone(), out.complete)?;
    let log_path = a.client.request_log.clone().unwrap_or_else(|| a.out.join("requests.jsonl"));
    write_log(&log_path, &log)?;
    event(json!({"event": "written", "out": a.out.display().to_string()}));
    report(&json!({
        "out": a.out.display().to_string(),
        "complete": manifest.complete,
        "records_hash": manifest.records_hash,
        "counts": manifest.counts,
        "errors": out.errors,
    }));
    Ok(out.errors.is_empty() && out.complete)
}

fn validate(a: ValidateArgs) -> Outcome {
    let cfg = load_config(&a.common)?;
    let catalog = load_catalog(&cfg)?;
    let records = read_corpus(&a.corpus)?;
    let violations = validate_corpus(&records, &catalog);
    for v in &violations {
        event(json!({"event": "violation", "line": v.line, "figure_id": v.figure_id, "detail": v.detail}));
    }
    let mut ok = violations.is_empty();
    let manifest = if a.corpus.is_dir() && a.corpus.join(MANIFEST_FILE).exists() {
        let m = read_manifest(&a.corpus)?;
        let records_ok = m.records_hash == sha256_hex(to_jsonl(&records).as_bytes());
        let catalog_ok = m.catalog_hash == catalog_hash(&catalog);
        ok &= records_ok && catalog_ok;
        json!({"records_hash_ok": records_ok, "catalog_hash_ok": catalog_ok, "complete": m.complete})
    } else {
        serde_json::Value::Null
    };
    report(&json!({
        "records": records.len(),
        "qa_pairs": records.iter().map(|r| r.qa.len()).sum::<usize>(),
        "violations": violations,
        "manifest": manifest,
    }));
    Ok(ok)
}

fn stats(a: StatsArgs) -> Outcome {
    let mut cfg = load_config(&a.common)?;
    if let Some(n) = a.sample_size {
        cfg.stats.sample_size = n;
    }
    if let Some(s) = a.seed {
        cfg.stats.seed = s;
    }
    let records = read_corpus(&a.corpus)?;
    let s = compute_stats(&records, &TrigramEmbedder::default(), cfg.stats.sample_size, cfg.stats.seed)
        .map_err(Failure)?;
    report(&serde_json::to_value(&s)?);
    Ok(true)
}

fn augment(a: AugmentArgs) -> Outcome {
    let mut cfg = load_config(&a.common)?;
    apply_client_flags(&mut cfg, &a.client);
    let catalog = load_catalog(&cfg)?;
    let pool = load_pool(&cfg, &catalog)?;
    let client = make_client(&cfg, false)?;
    let (items, warnings) = read_sources(&a.source)?;
    for w in &warnings {
        event(json!({"event": "warning", "message": w}));
    }
    event(json!({"event": "start", "items": items.len(), "strict": a.strict, "client": client.identity()}));
    let log = RequestLog::new();
    let r = Reasoner { client: client.as_ref(), log: &log, pool: &pool, catalog: &catalog };
    let out = thread_pool(a.client.jobs)?.install(|| augment_corpus(&r, &items, a.strict));
    for e in &out.errors {
        event(json!({"event": "error", "message": e}));
    }
    let body: String =
        out.records.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect();
    fs::write(&a.out, body).map_err(|e| Failure(format!("{}: {e}", a.out.display())))?;
    if let Some(p) = &a.client.request_log {
        write_log(p, &log)?;
    }
    report(&json!({
        "items": items.len(),
        "skipped_rows": warnings.len(),
        "records": out.records.len(),
        "qa_pairs": out.records.iter().map(|r| r.qa.len()).sum::<usize>(),
        "malformed": out.malformed,
        "duplicates": out.duplicates,
        "rejected": out.rejected,
        "errors": out.errors,
    }));
    Ok(out.errors.is_empty())
}

fn render(a: RenderArgs) -> Outcome {
    let records = read_corpus(&a.corpus)?;
    let base = a.out.clone().unwrap_or_else(|| {
        if a.corpus.is_dir() {
            a.corpus.clone()
        } else {
            a.corpus.parent().map(Path::to_path_buf).unwrap_or_default()
        }
    });
    let dir = base.join(IMAGE_DIR);
    fs::create_dir_all(&dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
    for r in &records {
        let p = base.join(&r.image);
        fs::write(&p, render_svg(&r.scene)).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
    }
    report(&json!({"rendered": records.len(), "out": dir.display().to_string()}));
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Validate(a) => validate(a),
        Command::Stats(a) => stats(a),
        Command::Augment(a) => augment(a),
        Command::Render(a) => render(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            event(json!({"event": "error", "message": msg}));
            ExitCode::from(2)
        }
    }
}
