//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;

use toxens_core::corpus::{self, Corpus, CorpusError, FoldAssignment, LabelSchema, Partition, SchemaKind};
use toxens_core::embeddings::{train_skipgram, EmbeddingError};
use toxens_core::ensemble::{self, EnsembleError, StackedFeatures};
use toxens_core::features::{SwearLexicon, Tokenizer};
use toxens_core::metrics::{self, Decision, MetricsError, ThresholdVector};
use toxens_core::models::{self, ClassifierSpec, EmbeddingSource, ModelError, TrainedModel};
use toxens_core::predictions::{Head, PredictionError, PredictionMatrix};
use toxens_core::rng;
use toxens_core::triage::{self, ErrorKind, TriageError, TriageSession};

use crate::config::{Config, DatasetFormat, DecisionRule};
use crate::layout::{Layout, DEFAULT_SUBWORD};
use crate::manifest::{self, RunManifest};
use crate::{serve, Cli, CliError, Command, TriageCommand};

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => runtime(e.to_string()),
            _ => invalid(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => invalid(e.to_string()),
            _ => runtime(e.to_string()),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match &e {
            EnsembleError::Config(_)
            | EnsembleError::Fit {
                source: ModelError::Config(_),
                ..
            }
            | EnsembleError::Load {
                source: ModelError::Config(_),
                ..
            } => invalid(e.to_string()),
            _ => runtime(e.to_string()),
        }
    }
}

impl From<TriageError> for CliError {
    fn from(e: TriageError) -> Self {
        match e {
            TriageError::Validation(_) | TriageError::Report(_) | TriageError::Format { .. } => invalid(e.to_string()),
            TriageError::Io { .. } => runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        invalid(e.to_string())
    }
}

impl From<PredictionError> for CliError {
    fn from(e: PredictionError) -> Self {
        invalid(e.to_string())
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::Config(_) | EmbeddingError::Parse { .. } => invalid(e.to_string()),
            _ => runtime(e.to_string()),
        }
    }
}

/// State shared by one command invocation.
pub struct Ctx {
    pub cfg: Option<Config>,
    pub layout: Layout,
    pub deterministic: bool,
    pub jobs: usize,
    artifacts: Vec<PathBuf>,
}

impl Ctx {
    fn cfg(&self) -> Result<&Config, CliError> {
        self.cfg.as_ref().ok_or_else(|| invalid("--config is required for this command"))
    }

    fn record(&mut self, p: PathBuf) {
        if !self.artifacts.contains(&p) {
            self.artifacts.push(p);
        }
    }

    /// Creates the parent directory of an output path.
    fn prepare(&self, p: &Path) -> Result<(), CliError> {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        }
        Ok(())
    }

    fn write_text(&mut self, p: PathBuf, text: &str) -> Result<(), CliError> {
        self.prepare(&p)?;
        std::fs::write(&p, text).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
        self.record(p);
        Ok(())
    }

    fn write_predictions(&mut self, pm: &PredictionMatrix, p: PathBuf) -> Result<(), CliError> {
        self.prepare(&p)?;
        pm.write_csv(&p).map_err(|e| runtime(e.to_string()))?;
        self.record(p);
        Ok(())
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest => "ingest",
        Command::EmbedTrain => "embed-train",
        Command::Fit { .. } => "fit",
        Command::Predict { .. } => "predict",
        Command::Oof => "oof",
        Command::Stack { .. } => "stack",
        Command::Evaluate { .. } => "evaluate",
        Command::Thresholds => "thresholds",
        Command::Correlate { .. } => "correlate",
        Command::Triage { action } => match action {
            TriageCommand::Sample { .. } => "triage sample",
            TriageCommand::Serve { .. } => "triage serve",
            TriageCommand::Report { .. } => "triage report",
        },
    }
}

pub fn execute(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    let started = Instant::now();
    let started_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut cfg = cli.config.as_deref().map(Config::load).transpose()?;
    if let Some(seed) = cli.seed {
        if let Some(c) = cfg.as_mut() {
            c.override_seed(seed);
        }
    }
    if cli.jobs == Some(0) {
        return Err(invalid("--jobs must be positive"));
    }
    let jobs = if cli.deterministic {
        1
    } else {
        cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if let Some(c) = cfg.as_mut() {
        if cli.deterministic {
            c.embeddings.skipgram.threads = 1;
        }
    }
    let layout = Layout::new(cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("toxens-out")));
    let name = command_name(&cli.command);
    let mut ctx = Ctx {
        cfg,
        layout,
        deterministic: cli.deterministic,
        jobs,
        artifacts: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| runtime(e.to_string()))?;
    pool.install(|| dispatch(&mut ctx, cli.command))?;

    let m = RunManifest {
        command: name.to_string(),
        argv,
        config: ctx.cfg.as_ref().map(|c| c.path.display().to_string()),
        config_hash: ctx.cfg.as_ref().map(|c| c.hash.clone()),
        seeds: ctx.cfg.as_ref().map(Config::seeds).unwrap_or_default(),
        artifacts: ctx.artifacts.iter().map(|p| ctx.layout.relative(p)).collect(),
        started_unix,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        deterministic: ctx.deterministic,
        jobs: ctx.jobs,
        versions: manifest::versions(),
        settings: settings(ctx.cfg.as_ref()),
    };
    let path = manifest::write(&ctx.layout, &m)?;
    eprintln!("manifest: {}", path.display());
    Ok(())
}

fn settings(cfg: Option<&Config>) -> serde_json::Value {
    serde_json::json!({
        "lr_features": "tfidf",
        "stacker_inputs": "raw_probabilities",
        "config": cfg,
    })
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest => ingest(ctx),
        Command::EmbedTrain => embed_train(ctx),
        Command::Fit { models } => fit(ctx, &models),
        Command::Predict { models } => predict(ctx, &models),
        Command::Oof => oof(ctx),
        Command::Stack { ablate_meta } => stack(ctx, ablate_meta),
        Command::Evaluate { predictions, thresholds } => evaluate(ctx, &predictions, thresholds.as_deref()),
        Command::Thresholds => thresholds(ctx),
        Command::Correlate { pairs } => correlate(ctx, &pairs),
        Command::Triage { action } => match action {
            TriageCommand::Sample {
                class,
                kind,
                n,
                predictions,
                force,
            } => triage_sample(ctx, class, kind, n, predictions, force),
            TriageCommand::Serve { session, port } => triage_serve(ctx, session, port),
            TriageCommand::Report { session } => triage_report(ctx, session),
        },
    }
}

fn require_file(p: &Path, what: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(invalid(format!("{what} {} not found", p.display())))
    }
}

fn load_from_config(cfg: &Config) -> Result<Corpus, CliError> {
    let d = &cfg.dataset;
    require_file(&d.train, "dataset file")?;
    for p in [&d.test, &d.test_labels].into_iter().flatten() {
        require_file(p, "dataset file")?;
    }
    let all_train = |c: Corpus| {
        let n = c.len();
        c.with_split(vec![Partition::Train; n])
    };
    let all_test = |c: Corpus| {
        let n = c.len();
        c.with_split(vec![Partition::Test; n])
    };
    let csv = |schema: LabelSchema, format: corpus::DatasetFormat| -> Result<Corpus, CorpusError> {
        let train = corpus::load_dataset(&d.train, &schema, format)?;
        match &d.test {
            Some(t) => all_train(train)?.concat(all_test(corpus::load_dataset(t, &schema, format)?)?),
            None => Ok(train),
        }
    };
    let c = match d.format {
        DatasetFormat::JigsawCsv => csv(LabelSchema::jigsaw(), corpus::DatasetFormat::JigsawCsv)?,
        DatasetFormat::DavidsonCsv => csv(LabelSchema::davidson(), corpus::DatasetFormat::DavidsonCsv)?,
        DatasetFormat::JigsawRelease => corpus::load_jigsaw_release(
            &d.train,
            d.test.as_deref().expect("validated"),
            d.test_labels.as_deref().expect("validated"),
        )?,
        DatasetFormat::Ndjson => {
            let train = corpus::read_ndjson(&d.train)?;
            match &d.test {
                Some(t) => all_train(train)?.concat(all_test(corpus::read_ndjson(t)?)?)?,
                None => train,
            }
        }
    };
    if c.split().is_none() && d.holdout > 0.0 {
        return Ok(corpus::stratified_holdout(c, d.holdout, d.seed)?);
    }
    Ok(c)
}

/// The ingested corpus when present, else the dataset named in the config.
fn load_corpus(ctx: &Ctx) -> Result<Corpus, CliError> {
    let p = ctx.layout.corpus();
    if p.exists() {
        Ok(corpus::read_ndjson(&p)?)
    } else {
        load_from_config(ctx.cfg()?)
    }
}

fn ingest(ctx: &mut Ctx) -> Result<(), CliError> {
    let c = load_from_config(ctx.cfg()?)?;
    let p = ctx.layout.corpus();
    ctx.prepare(&p)?;
    corpus::write_ndjson(&c, &p)?;
    ctx.record(corpus::schema_sidecar(&p));
    ctx.record(p);
    let dist = serde_json::json!({
        "train": corpus::distribution_of(&c.train_view()),
        "test": corpus::distribution_of(&c.test_view()),
    });
    ctx.write_text(ctx.layout.distribution(), &serde_json::to_string_pretty(&dist).expect("json"))?;
    println!(
        "{} samples ({} train, {} test), schema {}",
        c.len(),
        c.train_view().len(),
        c.test_view().len(),
        c.schema().name
    );
    Ok(())
}

fn embed_train(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg()?.clone();
    let tok = Tokenizer::default();
    let sentences: Vec<Vec<String>> = match &cfg.embeddings.corpus {
        Some(p) => {
            require_file(p, "embedding corpus")?;
            std::fs::read_to_string(p)
                .map_err(|e| runtime(format!("{}: {e}", p.display())))?
                .lines()
                .map(|l| tok.tokenize(l))
                .filter(|s| !s.is_empty())
                .collect()
        }
        None => load_corpus(ctx)?.train_view().texts().iter().map(|t| tok.tokenize(t)).collect(),
    };
    let table = train_skipgram(&sentences, &cfg.embeddings.skipgram)?;
    let out = cfg.embeddings.output.clone().unwrap_or_else(|| ctx.layout.subword());
    ctx.prepare(&out)?;
    table.save(&out)?;
    ctx.record(out.clone());
    println!("{} words, dim {} -> {}", table.len(), table.dim(), out.display());
    Ok(())
}

/// Specs with the head fixed by the schema and default embedding paths
/// anchored at the artifact root.
fn resolved_specs(ctx: &Ctx, kind: SchemaKind, only: &[String]) -> Result<Vec<ClassifierSpec>, CliError> {
    let cfg = ctx.cfg()?;
    for m in only {
        cfg.model(m)?;
    }
    if cfg.models.is_empty() {
        return Err(invalid("no [model.NAME] sections in the config"));
    }
    Ok(cfg
        .models
        .iter()
        .filter(|m| only.is_empty() || only.contains(&m.name))
        .map(|m| {
            let mut s = m.clone();
            s.head = Head::for_kind(kind);
            if let EmbeddingSource::TrainedSubword { path } = &s.embedding {
                if path == Path::new(DEFAULT_SUBWORD) {
                    s.embedding = EmbeddingSource::TrainedSubword {
                        path: ctx.layout.subword(),
                    };
                }
            }
            s
        })
        .collect())
}

fn fit(ctx: &mut Ctx, only: &[String]) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let train = c.train_view();
    for spec in resolved_specs(ctx, c.schema().kind, only)? {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        let valid: Vec<usize> = if spec.family.is_linear() {
            Vec::new()
        } else {
            idx.shuffle(&mut rng::derive(spec.seed, "valid", &[]));
            let n_valid = (train.len() as f64 * 0.1).ceil() as usize;
            let v = idx.drain(..n_valid.min(idx.len().saturating_sub(1))).collect::<Vec<_>>();
            idx.sort_unstable();
            v
        };
        let model = models::fit(&spec, &train.subset(&idx), &train.subset(&valid))?;
        let p = ctx.layout.model(&spec.name);
        ctx.prepare(&p)?;
        model.save(&p)?;
        ctx.record(p);
        match (&model.log.val_auc, model.log.best_epoch) {
            (Some(auc), _) => println!("{}: validation macro AUC {auc:.4}", spec.name),
            (None, Some(e)) => println!("{}: best epoch {e}", spec.name),
            _ => println!("{}: trained", spec.name),
        }
    }
    Ok(())
}

fn predict(ctx: &mut Ctx, only: &[String]) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    for spec in resolved_specs(ctx, c.schema().kind, only)? {
        let p = ctx.layout.model(&spec.name);
        require_file(&p, "trained model")?;
        let model = TrainedModel::load(&p, Some(&spec))?;
        for (split, view) in [("train", c.train_view()), ("test", c.test_view())] {
            let pm = models::predict(&model, &view);
            ctx.write_predictions(&pm, ctx.layout.predictions(&spec.name, split))?;
        }
        println!("{}: predictions written", spec.name);
    }
    Ok(())
}

fn load_lexicon(p: Option<&Path>) -> Result<Option<SwearLexicon>, CliError> {
    p.map(|p| {
        require_file(p, "lexicon")?;
        SwearLexicon::load(p).map_err(|e| runtime(format!("{}: {e}", p.display())))
    })
    .transpose()
}

fn oof(ctx: &mut Ctx) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let cfg = ctx.cfg()?.clone();
    let specs = resolved_specs(ctx, c.schema().kind, &cfg.ensemble.models)?;
    let folds = corpus::split_folds(&c, cfg.ensemble.folds, cfg.ensemble.seed)?;
    let lexicon = load_lexicon(cfg.ensemble.lexicon.as_deref())?;
    let out = ensemble::oof_predictions(&specs, &c, &folds, &cfg.ensemble.oof, lexicon.as_ref())?;
    let fp = ctx.layout.folds();
    ctx.write_text(fp, &serde_json::to_string_pretty(&folds).expect("json"))?;
    let tp = ctx.layout.oof_train();
    ctx.prepare(&tp)?;
    out.train.write_csv(&tp)?;
    ctx.record(StackedFeatures::sidecar_path(&tp));
    ctx.record(tp);
    for (f, t) in out.test.iter().enumerate() {
        let p = ctx.layout.oof_test(f);
        t.write_csv(&p)?;
        ctx.record(StackedFeatures::sidecar_path(&p));
        ctx.record(p);
    }
    for (s, spec) in specs.iter().enumerate() {
        let set = format!("{}.oof", spec.name);
        ctx.write_predictions(&out.oof_base[s].clone().with_producer(&set), ctx.layout.predictions(&set, "train"))?;
        ctx.write_predictions(&out.base_test_mean(s).with_producer(&set), ctx.layout.predictions(&set, "test"))?;
    }
    println!(
        "{} train rows x {} columns, {} folds, provenance audit passed",
        out.train.rows(),
        out.train.width(),
        folds.k
    );
    Ok(())
}

fn read_folds(layout: &Layout) -> Result<FoldAssignment, CliError> {
    let p = layout.folds();
    require_file(&p, "fold assignment (run `oof` first)")?;
    let text = std::fs::read_to_string(&p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))
}

fn gold_for(view: &corpus::View<'_>) -> Vec<Vec<bool>> {
    ensemble::gold_rows(view)
}

fn stack(ctx: &mut Ctx, ablate_meta: bool) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let cfg = ctx.cfg()?.clone();
    let folds = read_folds(&ctx.layout)?;
    require_file(&ctx.layout.oof_train(), "stacking features (run `oof` first)")?;
    let train = StackedFeatures::read_csv(&ctx.layout.oof_train())?;
    train.audit(&folds)?;
    let test: Vec<StackedFeatures> = (0..folds.k)
        .map(|f| StackedFeatures::read_csv(&ctx.layout.oof_test(f)))
        .collect::<Result<_, _>>()?;
    let train_view = c.train_view();
    if train.ids != train_view.ids() {
        return Err(invalid("stacking features do not match the corpus train split; rerun `oof`"));
    }
    let gold = gold_for(&train_view);
    let classes = c.schema().classes.clone();
    let mut variants = vec![("ensemble", train.clone(), test.clone())];
    if ablate_meta {
        variants.push((
            "ensemble_nometa",
            train.without_meta(),
            test.iter().map(StackedFeatures::without_meta).collect(),
        ));
    }
    for (set, tr, te) in variants {
        let stackers = ensemble::fit_stackers(&tr, &gold, &classes, &folds, &cfg.ensemble.gbdt)?;
        for (f, s) in stackers.iter().enumerate() {
            let p = ctx.layout.stacker(set, f);
            ctx.prepare(&p)?;
            s.save(&p)?;
            ctx.record(p);
            ctx.write_text(ctx.layout.stacker_dump(set, f), &s.dump())?;
        }
        let oof_scores = ensemble::stacker_oof(&stackers, &tr, &folds, set)?;
        ctx.write_predictions(&oof_scores, ctx.layout.predictions(set, "train"))?;
        let scores = ensemble::ensemble_predict(&stackers, &te, set)?;
        ctx.write_predictions(&scores, ctx.layout.predictions(set, "test"))?;
        println!("{set}: {} stackers over {} columns", stackers.len(), tr.width());
    }
    Ok(())
}

/// Reads a stored prediction CSV; per-class validation only, since stacked
/// multi-class scores are not renormalized.
fn read_scores(p: &Path, producer: &str) -> Result<PredictionMatrix, CliError> {
    require_file(p, "predictions")?;
    Ok(PredictionMatrix::read_csv(p, Head::SigmoidPerClass, producer)?)
}

fn aligned(pm: &PredictionMatrix, view: &corpus::View<'_>, what: &str) -> Result<PredictionMatrix, CliError> {
    if pm.classes() != view.schema.classes.as_slice() {
        return Err(invalid(format!("{what}: class columns differ from the schema")));
    }
    pm.align_to(&view.ids()).map_err(|e| invalid(format!("{what}: {e}")))
}

fn default_rule(cfg: Option<&Config>, kind: SchemaKind) -> DecisionRule {
    cfg.and_then(|c| c.metrics.decision).unwrap_or(match kind {
        SchemaKind::MultiLabel => DecisionRule::Tuned,
        SchemaKind::MultiClass => DecisionRule::Argmax,
    })
}

/// Decision rule for one prediction set; tuned thresholds come from an
/// explicit file, a stored thresholds file, or the set's train scores.
fn decision_for(
    ctx: &Ctx,
    c: &Corpus,
    set: &str,
    train_scores: Option<&Path>,
    explicit: Option<&Path>,
) -> Result<Decision, CliError> {
    match default_rule(ctx.cfg.as_ref(), c.schema().kind) {
        DecisionRule::Argmax => Ok(Decision::Argmax),
        DecisionRule::Fixed => Ok(Decision::Thresholds(ThresholdVector::uniform(
            &c.schema().classes,
            ctx.cfg.as_ref().map_or(0.5, |c| c.metrics.threshold),
        ))),
        DecisionRule::Tuned => {
            let stored = ctx.layout.thresholds(set);
            if let Some(p) = explicit.map(Path::to_path_buf).or_else(|| stored.exists().then_some(stored)) {
                let text = std::fs::read_to_string(&p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
                let t: ThresholdVector =
                    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", p.display())))?;
                return Ok(Decision::Thresholds(ThresholdVector::new(t.classes, t.values)?));
            }
            match train_scores.filter(|p| p.exists()) {
                Some(p) => {
                    let train = c.train_view();
                    let pm = aligned(&read_scores(p, set)?, &train, set)?;
                    Ok(Decision::Thresholds(metrics::search_thresholds(&pm, &gold_for(&train))?))
                }
                None => Err(invalid(format!(
                    "no train scores to tune thresholds for `{set}`; pass --thresholds or set [metrics] decision = fixed"
                ))),
            }
        }
    }
}

fn thresholds(ctx: &mut Ctx) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let train = c.train_view();
    let gold = gold_for(&train);
    let mut n = 0;
    for set in ctx.layout.prediction_sets() {
        let p = ctx.layout.predictions(&set, "train");
        if !p.exists() {
            continue;
        }
        let pm = aligned(&read_scores(&p, &set)?, &train, &set)?;
        let t = metrics::search_thresholds(&pm, &gold)?;
        ctx.write_text(ctx.layout.thresholds(&set), &serde_json::to_string_pretty(&t).expect("json"))?;
        println!("{set}: {:?}", t.values);
        n += 1;
    }
    if n == 0 {
        return Err(invalid("no train predictions found; run `predict`, `oof` or `stack` first"));
    }
    Ok(())
}

/// `(set name, test scores path, train scores path)`.
fn evaluation_sets(ctx: &Ctx, files: &[PathBuf]) -> Vec<(String, PathBuf, Option<PathBuf>)> {
    if files.is_empty() {
        return ctx
            .layout
            .prediction_sets()
            .into_iter()
            .map(|s| {
                let train = ctx.layout.predictions(&s, "train");
                let test = ctx.layout.predictions(&s, "test");
                (s, test, Some(train))
            })
            .collect();
    }
    files
        .iter()
        .map(|f| {
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let (set, train) = match name.strip_suffix(".test.csv") {
                Some(s) => (s.to_string(), Some(f.with_file_name(format!("{s}.train.csv")))),
                None => (name.strip_suffix(".csv").unwrap_or(&name).to_string(), None),
            };
            (set, f.clone(), train)
        })
        .collect()
}

fn evaluate(ctx: &mut Ctx, files: &[PathBuf], explicit: Option<&Path>) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let test = c.test_view();
    if test.is_empty() {
        return Err(invalid("the corpus has no test split to evaluate on"));
    }
    let gold = gold_for(&test);
    let sets = evaluation_sets(ctx, files);
    if sets.is_empty() {
        return Err(invalid("no prediction sets found; run `predict`, `oof` or `stack` first"));
    }
    let mut reports = Vec::new();
    for (set, test_path, train_path) in sets {
        let decision = decision_for(ctx, &c, &set, train_path.as_deref(), explicit)?;
        let pm = aligned(&read_scores(&test_path, &set)?, &test, &set)?;
        let r = metrics::evaluate(&pm, &gold, &decision)?;
        ctx.write_text(ctx.layout.metrics(&set, "csv"), &r.to_csv())?;
        ctx.write_text(ctx.layout.metrics(&set, "json"), &r.to_json())?;
        reports.push(r);
    }
    let table = metrics::table3(&reports);
    ctx.write_text(ctx.layout.table3(), &table)?;
    print!("{table}");
    Ok(())
}

fn correlate(ctx: &mut Ctx, pairs: &[String]) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let test = c.test_view();
    if test.is_empty() {
        return Err(invalid("the corpus has no test split"));
    }
    let gold = gold_for(&test);
    let pairs: Vec<(String, String)> = if pairs.is_empty() {
        ctx.cfg.as_ref().map(|c| c.metrics.pairs.clone()).unwrap_or_default()
    } else {
        pairs
            .iter()
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .ok_or_else(|| invalid(format!("pair `{p}` is not of the form a:b")))
            })
            .collect::<Result<_, _>>()?
    };
    if pairs.is_empty() {
        return Err(invalid("no pairs given; pass --pair a:b or set [metrics] pairs"));
    }
    let mut reports = Vec::new();
    for (a, b) in pairs {
        let load = |set: &str| -> Result<(PredictionMatrix, Decision), CliError> {
            let pm = aligned(&read_scores(&ctx.layout.predictions(set, "test"), set)?, &test, set)?;
            let d = decision_for(ctx, &c, set, Some(&ctx.layout.predictions(set, "train")), None)?;
            Ok((pm, d))
        };
        let (pa, da) = load(&a)?;
        let (pb, db) = load(&b)?;
        let r = metrics::correlation_report(&pa, &pb, &gold, &da, &db)?;
        ctx.write_text(ctx.layout.correlation(&a, &b, "csv"), &r.to_csv())?;
        ctx.write_text(ctx.layout.correlation(&a, &b, "json"), &r.to_json())?;
        reports.push(r);
    }
    let classes = c.schema().classes.clone();
    let table = metrics::table4(&reports, Some(&classes));
    ctx.write_text(ctx.layout.table4(), &table)?;
    print!("{table}");
    Ok(())
}

fn session_path(ctx: &Ctx, explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| ctx.cfg.as_ref().and_then(|c| c.triage.session.clone()))
        .unwrap_or_else(|| ctx.layout.session())
}

fn triage_sample(
    ctx: &mut Ctx,
    class: Option<String>,
    kind: Option<String>,
    n: Option<usize>,
    predictions: Option<String>,
    force: bool,
) -> Result<(), CliError> {
    let c = load_corpus(ctx)?;
    let t = ctx.cfg()?.triage.clone();
    let class = class.or(t.class).unwrap_or_else(|| c.schema().classes[0].clone());
    let kind: ErrorKind = match kind {
        Some(k) => k.parse()?,
        None => t.kind,
    };
    let set = predictions.unwrap_or(t.predictions);
    let test = c.test_view();
    let pm = aligned(&read_scores(&ctx.layout.predictions(&set, "test"), &set)?, &test, &set)?;
    let decision = decision_for(ctx, &c, &set, Some(&ctx.layout.predictions(&set, "train")), None)?;
    let pred = metrics::binarize(&pm, &decision)?;
    let session = triage::sample_errors(&test, &pm, &pred, &class, kind, n.unwrap_or(t.n), t.seed)?;
    let p = session_path(ctx, None);
    if p.exists() && !force {
        return Err(invalid(format!(
            "session file {} exists; pass --force to replace it and its annotations",
            p.display()
        )));
    }
    ctx.prepare(&p)?;
    session.save(&p)?;
    ctx.record(p.clone());
    println!(
        "{}: {} of {} {} errors for `{class}` -> {}",
        session.session_id,
        session.items.len(),
        session.population,
        kind,
        p.display()
    );
    Ok(())
}

fn triage_serve(ctx: &mut Ctx, session: Option<PathBuf>, port: Option<u16>) -> Result<(), CliError> {
    let p = session_path(ctx, session);
    require_file(&p, "session file")?;
    let s = TriageSession::load(&p)?;
    let lexicon = load_lexicon(ctx.cfg.as_ref().and_then(|c| c.triage.lexicon.as_deref()))?;
    let port = port.or(ctx.cfg.as_ref().map(|c| c.triage.port)).unwrap_or(8080);
    ctx.record(p.clone());
    serve::serve_blocking(serve::AppState::new(s, Some(p), lexicon), port)
}

fn triage_report(ctx: &mut Ctx, session: Option<PathBuf>) -> Result<(), CliError> {
    let p = session_path(ctx, session);
    require_file(&p, "session file")?;
    let s = TriageSession::load(&p)?;
    let r = triage::frequency_report(&s)?;
    let text = r.to_text();
    let base = p.with_extension("");
    let stem = base.display();
    ctx.write_text(PathBuf::from(format!("{stem}.report.txt")), &text)?;
    ctx.write_text(PathBuf::from(format!("{stem}.report.json")), &r.to_json())?;
    print!("{text}");
    Ok(())
}
