use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wstc_core::corpus::{load_corpus, load_gold, write_corpus_jsonl, CorpusFormat, PreprocessOptions};
use wstc_core::embeddings::{load_embeddings, EmbeddingTable};
use wstc_core::engines::EngineKind;
use wstc_core::eval::{
    agreement_report, majority_gold, per_theme_metrics, render_side_by_side, summarize, AnnotationSet, LabelMap,
    MetricsReport, TieRule,
};
use wstc_core::pipeline::DEFAULT_MIN_DF;
use wstc_core::run::{label, parse_overrides, LabelRequest, ModelFile, DEFAULT_RNG_SEED};
use wstc_core::synth::{generate_corpus, synth_embeddings, SynthConfig};
use wstc_core::themes::ThemeConfig;
use wstc_core::{Error, PredictionSet, PreparedCorpus};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ENGINE: u8 = 3;

#[derive(Parser)]
#[command(name = "wstc", version, about = "Seed-guided theme labelling of short free-text comments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an engine on a corpus and label every comment.
    Label(LabelArgs),
    /// Compare prediction files against gold labels.
    Evaluate(EvaluateArgs),
    /// Inter-annotator agreement and majority-vote prevalence.
    Agree(AgreeArgs),
    /// Keyword tables from saved models.
    Explain(ExplainArgs),
    /// Generate a planted-theme synthetic corpus.
    Synth(SynthArgs),
    /// Validate a WSTCEMB1 embedding file.
    Embcheck(EmbcheckArgs),
}

#[derive(clap::Args)]
struct LabelArgs {
    #[arg(long)]
    engine: String,
    #[arg(long)]
    corpus: PathBuf,
    /// Theme config (TSV or JSON); defaults to the shipped six themes.
    #[arg(long)]
    themes: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RNG_SEED)]
    rng_seed: u64,
    #[arg(long)]
    threshold: Option<f64>,
    /// Engine hyperparameters as K=V; nested fields use dotted keys.
    #[arg(long, num_args = 1..)]
    params: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_DF)]
    min_df: usize,
    #[arg(long)]
    out: PathBuf,
    /// Where to save the fitted model for `explain`.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Reject,
    Absent,
    Present,
}

impl From<TieArg> for TieRule {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::Reject => TieRule::Reject,
            TieArg::Absent => TieRule::Absent,
            TieArg::Present => TieRule::Present,
        }
    }
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long, num_args = 1.., required = true)]
    preds: Vec<PathBuf>,
    /// Corpus file with gold labels, or an annotation CSV (majority vote).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum, default_value = "reject")]
    tie_rule: TieArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AgreeArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_enum, default_value = "reject")]
    tie_rule: TieArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExplainArgs {
    #[arg(long, num_args = 1.., required = true)]
    model: Vec<PathBuf>,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    themes: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    n_docs: usize,
    #[arg(long, default_value_t = 0.1)]
    overlap_noise: f64,
    #[arg(long, default_value_t = 43.0)]
    length_mean: f64,
    #[arg(long)]
    no_theme_prob: Option<f64>,
    #[arg(long)]
    single_theme: bool,
    #[arg(long, default_value_t = DEFAULT_RNG_SEED)]
    rng_seed: u64,
    /// Also write the planted word-to-theme map as JSON.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Also write a bag-of-vectors WSTCEMB1 file for the corpus.
    #[arg(long)]
    embeddings_out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    embedding_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    word_noise: f64,
}

#[derive(clap::Args)]
struct EmbcheckArgs {
    #[arg(long)]
    file: PathBuf,
    /// Require a document vector for every comment of this corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParam(_)) => EXIT_USAGE,
        Some(e) if e.is_engine_failure() => EXIT_ENGINE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Label(a) => cmd_label(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Agree(a) => cmd_agree(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Embcheck(a) => cmd_embcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_themes(path: Option<&Path>) -> Result<ThemeConfig> {
    Ok(match path {
        Some(p) => ThemeConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ThemeConfig::default_config(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_label(a: LabelArgs) -> Result<()> {
    let engine: EngineKind = a.engine.parse().map_err(|e: Error| usage(e.to_string()))?;
    if engine.needs_embeddings() && a.embeddings.is_none() {
        return Err(usage(format!("engine {engine} requires --embeddings")));
    }
    let overrides = parse_overrides(&a.params)?;
    let themes = load_themes(a.themes.as_deref())?;
    let raws = load_corpus(&a.corpus, CorpusFormat::from_path(&a.corpus))
        .with_context(|| format!("reading {}", a.corpus.display()))?;
    let corpus = PreparedCorpus::prepare(&raws, &themes, PreprocessOptions::default(), a.min_df)?;
    let table: Option<EmbeddingTable<f64>> = match &a.embeddings {
        Some(p) => Some(load_embeddings(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let request = LabelRequest {
        engine,
        rng_seed: a.rng_seed,
        threshold: a.threshold,
        overrides,
    };
    let run = label(&corpus, table.as_ref(), &request)?;
    for w in &run.predictions.metadata.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = create(&a.out)?;
    run.predictions.write_jsonl(&mut out)?;
    out.flush()?;
    if let Some(p) = &a.model_out {
        run.model.save(p).with_context(|| format!("writing {}", p.display()))?;
    }
    let labelled = run.predictions.docs.iter().filter(|d| !d.labels.is_empty()).count();
    eprintln!(
        "{engine}: {} comments, {labelled} with at least one theme, policy {}",
        run.predictions.docs.len(),
        run.predictions.policy.describe()
    );
    Ok(())
}

fn is_annotation_csv(path: &Path) -> bool {
    CorpusFormat::from_path(path) == CorpusFormat::Csv
        && fs::read_to_string(path)
            .ok()
            .and_then(|s| s.lines().next().map(|h| h.contains("annotator_id")))
            .unwrap_or(false)
}

fn load_gold_labels(path: &Path, rule: TieRule) -> Result<LabelMap> {
    if is_annotation_csv(path) {
        let set = AnnotationSet::load(path)?;
        let (gold, ties) = majority_gold(&set, rule)?;
        if ties > 0 {
            eprintln!("warning: {ties} majority-vote ties resolved by the tie rule");
        }
        return Ok(gold);
    }
    load_gold(path).with_context(|| format!("reading {}", path.display()))
}

fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    PredictionSet::read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let gold = load_gold_labels(&a.gold, a.tie_rule.into())?;
    let mut reports: Vec<MetricsReport> = Vec::new();
    let mut metas = Vec::new();
    let mut themes: Option<Vec<String>> = None;
    for p in &a.preds {
        let preds = read_predictions(p)?;
        match &themes {
            None => themes = Some(preds.themes.clone()),
            Some(t) if *t != preds.themes => bail!(Error::IdMismatch(format!(
                "{} uses a different theme list",
                p.display()
            ))),
            _ => {}
        }
        let r = per_theme_metrics(&preds.engine, &preds.label_names(), &gold, &preds.themes)?;
        metas.push(format!(
            "- `{}`: engine {}, policy {}, rng_seed {}, config {}",
            p.display(),
            preds.engine,
            preds.policy.describe(),
            preds.metadata.rng_seed,
            preds.metadata.config_sha256
        ));
        reports.push(r);
    }
    let themes = themes.unwrap_or_default();
    let methods: Vec<String> = reports.iter().map(|r| r.engine.clone()).collect();
    let acc: Vec<Vec<f64>> = (0..themes.len())
        .map(|t| reports.iter().map(|r| 100.0 * r.themes[t].accuracy).collect())
        .collect();
    let summary = summarize(&themes, &methods, &acc)?;

    let mut md = String::from("# Evaluation\n\n");
    md.push_str(&format!("Gold: `{}` ({} comments)\n\n", a.gold.display(), gold.len()));
    md.push_str(&metas.join("\n"));
    md.push_str("\n\n## Accuracy (%)\n\n");
    md.push_str(&summary.to_markdown());
    md.push_str("\n## Per-theme metrics\n\n");
    for r in &reports {
        md.push_str(&r.to_markdown());
        md.push('\n');
    }
    fs::write(&a.out, md).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.csv {
        let mut csv = String::new();
        for (i, r) in reports.iter().enumerate() {
            let body = r.to_csv()?;
            let skip = if i == 0 { 0 } else { body.find('\n').map_or(0, |n| n + 1) };
            csv.push_str(&body[skip..]);
        }
        fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    for r in &reports {
        eprintln!("{}: macro-F1 {:.3}, mean accuracy {:.3}", r.engine, r.macro_f1(), r.mean_accuracy());
    }
    Ok(())
}

fn cmd_agree(a: AgreeArgs) -> Result<()> {
    let set = AnnotationSet::load(&a.annotations).with_context(|| format!("reading {}", a.annotations.display()))?;
    let report = agreement_report(&set, a.tie_rule.into())?;
    let mut md = format!(
        "# Agreement\n\n{} comments, {} annotators, {} themes\n\n",
        set.docs.len(),
        set.annotators.len(),
        set.themes.len()
    );
    md.push_str(&report.to_markdown());
    if report.prevalence.is_none() {
        md.push_str("\nPrevalence omitted: an even number of annotators needs --tie-rule.\n");
    }
    fs::write(&a.out, md).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.csv {
        fs::write(p, report.to_csv()?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let mut tables = Vec::new();
    for p in &a.model {
        let m: ModelFile<f64> = ModelFile::load(p).with_context(|| format!("reading {}", p.display()))?;
        tables.push(m.keywords(a.n));
    }
    let mut md = format!("# Keywords (n={})\n\nSeed terms in bold.\n\n", a.n);
    md.push_str(&render_side_by_side(&tables));
    fs::write(&a.out, md).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.csv {
        let mut csv = String::new();
        for (i, t) in tables.iter().enumerate() {
            let body = t.to_csv()?;
            let skip = if i == 0 { 0 } else { body.find('\n').map_or(0, |n| n + 1) };
            csv.push_str(&body[skip..]);
        }
        fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let themes = load_themes(a.themes.as_deref())?;
    let mut cfg = SynthConfig {
        themes: themes.clone(),
        n_docs: a.n_docs,
        overlap_noise: a.overlap_noise,
        length_mean: a.length_mean,
        single_theme: a.single_theme,
        rng_seed: a.rng_seed,
        ..Default::default()
    };
    if let Some(p) = a.no_theme_prob {
        cfg.no_theme_prob = p;
    }
    if cfg.theme_marginals.len() != themes.len() {
        cfg.theme_marginals = vec![0.2; themes.len()];
    }
    let corpus = generate_corpus(&cfg)?;
    let mut out = create(&a.out)?;
    write_corpus_jsonl(&mut out, &corpus.comments)?;
    out.flush()?;
    if let Some(p) = &a.truth_out {
        let json = serde_json::to_string_pretty(&corpus.truth)?;
        fs::write(p, json).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.embeddings_out {
        let table: EmbeddingTable<f64> = synth_embeddings(&corpus, &themes, a.embedding_dim, a.word_noise, a.rng_seed)?;
        fs::write(p, table.to_bytes()?).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!("wrote {} comments to {}", corpus.comments.len(), a.out.display());
    Ok(())
}

fn cmd_embcheck(a: EmbcheckArgs) -> Result<()> {
    let table: EmbeddingTable<f64> =
        load_embeddings(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    if let Some(c) = &a.corpus {
        let raws = load_corpus(c, CorpusFormat::from_path(c)).with_context(|| format!("reading {}", c.display()))?;
        let ids: Vec<String> = raws.into_iter().map(|r| r.id).collect();
        table.require_docs(&ids)?;
    }
    println!(
        "ok: dim {}, {} document vectors, {} seed-term vectors",
        table.dim,
        table.docs.len(),
        table.seeds.len()
    );
    Ok(())
}
