//! The `predex` command: score, explain, report, serve and synth.
//!
//! Exit status is 0 on success, 1 on a usage error (bad flags, bad
//! configuration) and 2 on a data error (unreadable or invalid input).

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use predex::scoring::{import_scores_from_column, write_scores};
use predex::{
    fit_gaussian, import_scores, load_csv, score_points, BinningSpec, Bookmark, Dataset, ExplainOutput, Explanation,
    Report, SchemaHints, ScoreVector, SearchConfig, Strategy, Strictness,
};
use serde_json::json;

pub use config::FileConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "predex",
    version,
    about = "Explain anomalies in tabular data with predicates"
)]
struct Cli {
    /// Print diagnostics as JSON lines.
    #[arg(long, global = true)]
    json: bool,
    /// A predex.toml file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model on the target columns and write one score per row.
    Score(ScoreArgs),
    /// Search for predicates that explain the high scores.
    Explain(ExplainArgs),
    /// Render report.md and report.json from an explanation file.
    Report(ReportArgs),
    /// Run the JSON HTTP service.
    Serve(ServeArgs),
    /// Write a seeded synthetic dataset with planted anomalies.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Gaussian,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// JSON schema hints: {"feature": {"kind": ..., "role": ...}}.
    #[arg(long, value_name = "FILE")]
    hints: Option<PathBuf>,
    /// Target columns, comma separated; all other columns are context.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Score file to write (`row_id,score`).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Score side file: one score per line, or `row_id,score` CSV.
    #[arg(long, value_name = "FILE", conflicts_with = "score_column")]
    scores: Option<PathBuf>,
    /// Use this numeric column of the input as the scores.
    #[arg(long, value_name = "COLUMN")]
    score_column: Option<String>,
    /// Scores are oriented so that low means anomalous.
    #[arg(long)]
    lower_is_anomalous: bool,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Exponent c in (0, 1] of the influence denominator.
    #[arg(long)]
    strictness: Option<f64>,
    /// Equal-width bins per ordered feature.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    max_explanations: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// File of row ids the analyst marked as anomalous.
    #[arg(long, value_name = "FILE")]
    user_points: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Explanation JSON to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Markdown summary; defaults to the output path with an .md extension.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Output of `explain`, or a JSON list of explanations.
    #[arg(long, value_name = "FILE")]
    explanations: PathBuf,
    /// JSON list of bookmarks: {title, sentence, chart?}.
    #[arg(long, value_name = "FILE")]
    bookmarks: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Session snapshots live here; omit to keep sessions in memory.
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Planting {
    /// One conjunction of a categorical level and a numeric range.
    Conjunction,
    /// Two disjoint conjunctions.
    Disjoint,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, value_enum, default_value_t = Planting::Conjunction)]
    planting: Planting,
    /// Dataset CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Score file to write.
    #[arg(long, value_name = "FILE")]
    scores_out: PathBuf,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: predex::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }
}

impl From<predex::Error> for Failure {
    fn from(e: predex::Error) -> Failure {
        match e {
            predex::Error::Config(_) | predex::Error::Usage(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn data_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Data(format!("{}: {e}", path.display()))
}

struct Diagnostics<'a> {
    json: bool,
    err: &'a mut dyn Write,
}

impl Diagnostics<'_> {
    fn info(&mut self, message: &str) {
        let _ = if self.json {
            writeln!(self.err, "{}", json!({ "level": "info", "message": message }))
        } else {
            writeln!(self.err, "{message}")
        };
    }

    fn fail(&mut self, f: &Failure) -> i32 {
        let (kind, message) = match f {
            Failure::Usage(m) => ("usage", m),
            Failure::Data(m) => ("data", m),
        };
        let code = f.exit_code();
        let _ = if self.json {
            writeln!(
                self.err,
                "{}",
                json!({ "level": "error", "kind": kind, "message": message, "exit_code": code })
            )
        } else {
            writeln!(self.err, "predex: {kind} error: {message}")
        };
        code
    }
}

/// Run the command line `args` (program name first) and return the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let mut d = Diagnostics { json, err };
            if json {
                let first = e.to_string().lines().next().unwrap_or_default().to_string();
                return d.fail(&Failure::Usage(first.trim_start_matches("error: ").to_string()));
            }
            let _ = write!(d.err, "{e}");
            return EXIT_USAGE;
        }
    };
    let mut d = Diagnostics { json: cli.json, err };
    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(c) => c,
            Err(m) => return d.fail(&Failure::Usage(m)),
        },
        None => FileConfig::default(),
    };
    let result = match cli.command {
        Command::Score(a) => score(a, &file, &mut d),
        Command::Explain(a) => explain(a, &file, &mut d),
        Command::Report(a) => report(a, &mut d),
        Command::Serve(a) => serve(a, &file, &mut d),
        Command::Synth(a) => synth(a, &mut d),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => d.fail(&f),
    }
}

fn load(data: &DataArgs, targets: Option<&Vec<String>>) -> Result<Dataset, Failure> {
    if !data.input.exists() {
        return Err(Failure::Data(format!("{}: no such file", data.input.display())));
    }
    let hints = data.hints.as_ref().map(SchemaHints::from_path).transpose()?;
    let ds = load_csv(&data.input, hints.as_ref())?;
    Ok(match targets {
        Some(t) => ds.set_roles(t)?,
        None => ds,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(data_err(dir))?;
    }
    std::fs::write(path, contents).map_err(data_err(path))
}

fn score(a: ScoreArgs, file: &FileConfig, d: &mut Diagnostics) -> Result<(), Failure> {
    match (a.model, file.score.model.as_deref()) {
        (Some(Model::Gaussian), _) | (None, None | Some("gaussian")) => {}
        (None, Some(other)) => return Err(Failure::Usage(format!("unknown model `{other}`, expected `gaussian`"))),
    }
    let targets = a
        .data
        .targets
        .clone()
        .or_else(|| file.score.targets.clone())
        .ok_or_else(|| Failure::Usage("--targets is required to fit a model".into()))?;
    let ds = load(&a.data, Some(&targets))?;
    let sv = score_points(&fit_gaussian(&ds)?, &ds)?;
    write_file(&a.out, &write_scores(&sv))?;
    d.info(&format!("wrote {} scores to {}", sv.len(), a.out.display()));
    if !sv.flagged.is_empty() {
        d.info(&format!(
            "{} rows had missing target values and were imputed",
            sv.flagged.len()
        ));
    }
    Ok(())
}

fn read_user_points(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = std::fs::read_to_string(path).map_err(data_err(path))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Failure::Data(format!("{}: `{t}` is not a row id", path.display())))
        })
        .collect()
}

fn explain_config(a: &ExplainArgs, file: &FileConfig) -> Result<SearchConfig, Failure> {
    let f = &file.explain;
    let mut cfg = SearchConfig::default();
    if let Some(s) = a.strategy.or(f.strategy) {
        cfg.strategy = s;
    }
    if let Some(c) = a.strictness.or(f.strictness) {
        cfg.strictness = Strictness::new(c)?;
    }
    if let Some(b) = a.bins.or(f.bins) {
        cfg.binning = BinningSpec::with_bins(b);
    }
    if let Some(k) = a.max_explanations.or(f.max_explanations) {
        cfg.max_explanations = k;
    }
    if let Some(k) = a.max_iterations.or(f.max_iterations) {
        cfg.max_iterations = k;
    }
    cfg.workers = a.workers.or(f.workers);
    Ok(cfg)
}

/// The explanations of an output, with the combined one last.
fn all_explanations(out: &ExplainOutput) -> Vec<Explanation> {
    out.explanations.iter().chain(&out.combined).cloned().collect()
}

fn explain(a: ExplainArgs, file: &FileConfig, d: &mut Diagnostics) -> Result<(), Failure> {
    let mut cfg = explain_config(&a, file)?;
    let targets = a.data.targets.clone().or_else(|| file.explain.targets.clone());
    if a.scores.is_none() && a.score_column.is_none() && targets.is_none() {
        return Err(Failure::Usage(
            "give --scores, --score-column, or --targets to fit a Gaussian model".into(),
        ));
    }
    if let Some(p) = &a.user_points {
        cfg.user_points = Some(read_user_points(p)?);
    }
    let higher = !a.lower_is_anomalous && file.explain.higher_is_anomalous.unwrap_or(true);

    let ds = load(&a.data, targets.as_ref())?;
    let (ds, sv): (Dataset, ScoreVector) = if let Some(path) = &a.scores {
        if !path.exists() {
            return Err(Failure::Data(format!("{}: no such file", path.display())));
        }
        let sv = import_scores(path, &ds, higher)?;
        (ds, sv)
    } else if let Some(col) = &a.score_column {
        let (ds, sv) = import_scores_from_column(ds, col)?;
        (ds, if higher { sv } else { sv.negated() })
    } else {
        let sv = score_points(&fit_gaussian(&ds)?, &ds)?;
        (ds, sv)
    };
    cfg.validate(ds.n_rows())?;

    let output = predex::explain(&ds, &sv, &cfg)?;
    write_file(&a.out, &output.to_json()?)?;
    let summary = a.summary.clone().unwrap_or_else(|| a.out.with_extension("md"));
    write_file(
        &summary,
        &Report::new(all_explanations(&output), Vec::new())?.to_markdown(),
    )?;
    d.info(&format!(
        "wrote {} explanations to {} and a summary to {}",
        output.explanations.len(),
        a.out.display(),
        summary.display()
    ));
    Ok(())
}

fn report(a: ReportArgs, d: &mut Diagnostics) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.explanations).map_err(data_err(&a.explanations))?;
    let explanations = match serde_json::from_str::<ExplainOutput>(&text) {
        Ok(out) => all_explanations(&out),
        Err(_) => serde_json::from_str::<Vec<Explanation>>(&text)
            .map_err(|e| Failure::Data(format!("{}: not an explanation file: {e}", a.explanations.display())))?,
    };
    let bookmarks: Vec<Bookmark> = match &a.bookmarks {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(data_err(p))?;
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    Report::new(explanations, bookmarks)?.write_to(&a.out_dir)?;
    d.info(&format!("wrote report.md and report.json to {}", a.out_dir.display()));
    Ok(())
}

fn serve(a: ServeArgs, file: &FileConfig, d: &mut Diagnostics) -> Result<(), Failure> {
    let defaults = predex_service::ServeConfig::default();
    let cfg = predex_service::ServeConfig {
        host: a.host.or_else(|| file.serve.host.clone()).unwrap_or(defaults.host),
        port: a.port.or(file.serve.port).unwrap_or(defaults.port),
        data_dir: a.data_dir.or_else(|| file.serve.data_dir.clone()),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Data(e.to_string()))?;
    rt.block_on(async {
        let server = predex_service::Server::bind(&cfg)
            .await
            .map_err(|e| Failure::Usage(e.to_string()))?;
        if let Ok(addr) = server.local_addr() {
            d.info(&format!("serving on http://{addr}"));
        }
        server.run().await.map_err(|e| Failure::Data(e.to_string()))
    })
}

fn synth(a: SynthArgs, d: &mut Diagnostics) -> Result<(), Failure> {
    if a.rows < 4 {
        return Err(Failure::Usage("--rows must be at least 4".into()));
    }
    let planted = match a.planting {
        Planting::Conjunction => predex::synth::planted_conjunction(a.seed, a.rows),
        Planting::Disjoint => predex::synth::planted_disjoint_causes(a.seed, a.rows),
    };
    let mut csv = Vec::new();
    predex::write_csv(&planted.dataset, &mut csv)?;
    write_file(&a.out, &String::from_utf8(csv).expect("csv output is UTF-8"))?;
    write_file(&a.scores_out, &write_scores(&planted.scores))?;
    for cause in &planted.causes {
        d.info(&format!("planted: {cause}"));
    }
    Ok(())
}
