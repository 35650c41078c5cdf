use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mixkit::bench::{self, BenchConfig, InstanceKind};
use mixkit::datagen::{self, wav, Dataset, DatasetManifest};
use mixkit::metrics::{self, EvalExample, ExampleMetrics, MetricsReport};
use mixkit::mixit::{MixitSearch, DEFAULT_EXHAUSTIVE_CAP};
use mixkit::optimizer::{self, AdamConfig, LossConfig, SemanticInput, SweepPoint, SweepRow};
use mixkit::report::{write_atomic, Cell, KeyValues, ReportFormat, Table};
use mixkit::semantic::Aggregator;
use mixkit::{MixkitError, MixtureBatch, Result, SourceSet};

pub const THREADS_ENV: &str = "MIXKIT_THREADS";
const RESOLVED_CONFIG: &str = "resolved-config.txt";

#[derive(Debug, Parser)]
#[command(name = "mixkit", version, about = "MixIT losses, over-separation regularizers and separation metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus described by a manifest.
    GenData(GenDataArgs),
    /// Time exhaustive against least-squares assignment search.
    BenchMixit(BenchArgs),
    /// Score estimates on a generated corpus.
    Eval(EvalArgs),
    /// Optimize the estimates of one example and write its loss trace.
    Optimize(OptimizeArgs),
    /// Sweep a loss weight over a grid and flag the best configuration.
    Sweep(SweepArgs),
    /// Re-run a command from its resolved-config file.
    Rerun {
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    Auto,
    Exhaustive,
    Efficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregatorArg {
    Or,
    Xor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InstanceArg {
    Separable,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    L1,
    L1l2,
    Cov,
    Ce,
    Cos,
}

impl FamilyArg {
    fn name(self) -> &'static str {
        match self {
            Self::L1 => "l1",
            Self::L1l2 => "l1l2",
            Self::Cov => "cov",
            Self::Ce => "ce",
            Self::Cos => "cos",
        }
    }
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

impl OutputArgs {
    fn record(&self, kv: &mut KeyValues) {
        kv.set("out", self.out.display()).set("format", value_name(&self.format));
    }

    fn write_table(&self, stem: &str, table: &Table) -> Result<PathBuf> {
        let format: ReportFormat = self.format.into();
        let path = self.out.join(format!("{stem}.{}", format.extension()));
        write_atomic(&path, &table.render(format)?)?;
        Ok(path)
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, default_value_t = mixkit::DEFAULT_SNR_MAX_DB)]
    pub snr_max_db: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_l1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_l1l2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_cov: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_ce: f64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_cos: f64,
    #[arg(long, value_enum, default_value_t = AggregatorArg::Or)]
    pub aggregator: AggregatorArg,
    /// Assignment search used inside the loss.
    #[arg(long, value_enum, default_value_t = SearchArg::Auto)]
    pub search: SearchArg,
    /// Largest number of assignments exhaustive search may enumerate.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub cap: u64,
}

impl LossArgs {
    fn config(&self, m: usize) -> LossConfig {
        LossConfig {
            snr_max_db: self.snr_max_db,
            weight_l1: self.weight_l1,
            weight_l1l2: self.weight_l1l2,
            weight_cov: self.weight_cov,
            weight_ce: self.weight_ce,
            weight_cos: self.weight_cos,
            aggregator: match self.aggregator {
                AggregatorArg::Or => Aggregator::Or,
                AggregatorArg::Xor => Aggregator::Xor,
            },
            num_sources: m,
            search: match self.search {
                SearchArg::Auto => MixitSearch::Auto,
                SearchArg::Exhaustive => MixitSearch::Exhaustive,
                SearchArg::Efficient => MixitSearch::Efficient,
            },
            exhaustive_cap: self.cap,
        }
    }

    fn record(&self, kv: &mut KeyValues) {
        kv.set_real("snr-max-db", self.snr_max_db)
            .set_real("weight-l1", self.weight_l1)
            .set_real("weight-l1l2", self.weight_l1l2)
            .set_real("weight-cov", self.weight_cov)
            .set_real("weight-ce", self.weight_ce)
            .set_real("weight-cos", self.weight_cos)
            .set("aggregator", value_name(&self.aggregator))
            .set("search", value_name(&self.search))
            .set("cap", self.cap);
    }
}

#[derive(Debug, Args)]
pub struct AdamArgs {
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub step_size: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
}

impl AdamArgs {
    fn config(&self) -> AdamConfig {
        AdamConfig { step_size: self.step_size, beta1: self.beta1, beta2: self.beta2, steps: self.steps, ..Default::default() }
    }

    fn record(&self, kv: &mut KeyValues) {
        kv.set("steps", self.steps)
            .set_real("step-size", self.step_size)
            .set_real("beta1", self.beta1)
            .set_real("beta2", self.beta2);
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Corpus directory written by `gen-data`.
    #[arg(long)]
    pub data: PathBuf,
    /// Manifest the corpus must match; defaults to the one stored with it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let path = self.manifest.clone().unwrap_or_else(|| self.data.join("manifest.cfg"));
        let manifest = DatasetManifest::parse(&fs::read_to_string(&path)?)?;
        eprintln!("mixkit: reading corpus {} ({})", self.data.display(), manifest.hash());
        datagen::read_dataset(&self.data, &manifest)
    }

    fn record(&self, kv: &mut KeyValues) {
        kv.set("data", self.data.display());
        if let Some(m) = &self.manifest {
            kv.set("manifest", m.display());
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated source counts.
    #[arg(long = "m", value_delimiter = ',', default_values_t = vec![2usize, 4, 8, 12, 16])]
    pub m: Vec<usize>,
    #[arg(long = "n", default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Samples per instance.
    #[arg(long, default_value_t = 1000)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub cap: u64,
    #[arg(long, value_enum, default_value_t = InstanceArg::Separable)]
    pub instances: InstanceArg,
    #[arg(long, default_value_t = mixkit::DEFAULT_SNR_MAX_DB)]
    pub snr_max_db: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Where `eval` takes its estimates from.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimateSource {
    References,
    Mixture,
    Optimize,
    Directory(PathBuf),
}

impl std::str::FromStr for EstimateSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "references" => Self::References,
            "mixture" => Self::Mixture,
            "optimize" => Self::Optimize,
            dir => Self::Directory(PathBuf::from(dir)),
        })
    }
}

impl std::fmt::Display for EstimateSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::References => f.write_str("references"),
            Self::Mixture => f.write_str("mixture"),
            Self::Optimize => f.write_str("optimize"),
            Self::Directory(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// `references`, `mixture`, `optimize`, or a directory holding
    /// `<split>/<id>/estimate_<k>.wav`.
    #[arg(long, default_value = "references")]
    pub estimates: EstimateSource,
    /// Number of estimated sources (mixture copies or optimized outputs).
    #[arg(long = "m", default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub adam: AdamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Example to optimize, as `mom/<id>` or `eval/<id>`.
    #[arg(long, default_value = "mom/00000")]
    pub example: String,
    #[arg(long = "m", default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub adam: AdamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Loss weight being swept.
    #[arg(long, value_enum, default_value_t = FamilyArg::L1l2)]
    pub family: FamilyArg,
    /// Comma-separated weights for the swept family.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
    /// Comma-separated source counts.
    #[arg(long = "m", value_delimiter = ',', default_values_t = vec![8usize])]
    pub m: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub adam: AdamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Applies the thread-count override, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| MixkitError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| MixkitError::InvalidArgument(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::BenchMixit(a) => bench_mixit(&a),
        Command::Eval(a) => eval(&a),
        Command::Optimize(a) => optimize(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Rerun { config } => rerun(&config),
    }
}

fn write_resolved(dir: &Path, subcommand: &str, kv: &KeyValues) -> Result<()> {
    let mut full = KeyValues::new();
    full.set("subcommand", subcommand);
    for (k, v) in kv.entries() {
        full.set(k, v);
    }
    write_atomic(&dir.join(RESOLVED_CONFIG), full.render().as_bytes())
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)
        .map_err(|e| MixkitError::InvalidArgument(format!("cannot read manifest {}: {e}", a.manifest.display())))?;
    let mut manifest = DatasetManifest::parse(&text)?;
    if let Some(seed) = a.seed {
        manifest.seed = seed;
    }
    manifest.validate()?;
    eprintln!(
        "mixkit: generating {} eval and {} mom examples",
        manifest.eval_examples, manifest.mom_examples
    );
    let dataset = datagen::generate_dataset(&manifest)?;
    datagen::write_dataset(&a.out, &dataset)?;
    let mut kv = KeyValues::new();
    kv.set("manifest", a.manifest.display()).set("out", a.out.display()).set("seed", manifest.seed);
    write_resolved(&a.out, "gen-data", &kv)?;
    println!("{}", manifest.hash());
    Ok(())
}

fn bench_mixit(a: &BenchArgs) -> Result<()> {
    if a.trials == 0 {
        return Err(MixkitError::InvalidArgument("trials must be at least 1".into()));
    }
    let cfg = BenchConfig {
        sources: a.m.clone(),
        references: a.n,
        trials: a.trials,
        len: a.len,
        seed: a.seed,
        cap: a.cap,
        kind: match a.instances {
            InstanceArg::Separable => InstanceKind::Separable,
            InstanceArg::Random => InstanceKind::Random,
        },
        snr_max_db: a.snr_max_db,
    };
    let rows = bench::bench_mixit(&cfg)?;
    let path = a.output.write_table("bench", &bench::bench_table(&rows))?;
    let mut kv = KeyValues::new();
    kv.set("m", join(&a.m))
        .set("n", a.n)
        .set("trials", a.trials)
        .set("len", a.len)
        .set("seed", a.seed)
        .set("cap", a.cap)
        .set("instances", value_name(&a.instances))
        .set_real("snr-max-db", a.snr_max_db);
    a.output.record(&mut kv);
    write_resolved(&a.output.out, "bench-mixit", &kv)?;
    eprintln!("mixkit: wrote {}", path.display());
    Ok(())
}

fn example_table(rows: &[ExampleMetrics]) -> Table {
    let mut t = Table::new(&["id", "true_sources", "active_estimates", "msi_db", "one_s_db", "momi_db"]);
    for r in rows {
        t.push(vec![
            r.id.as_str().into(),
            r.true_sources.into(),
            r.active_estimates.into(),
            r.msi_db.into(),
            r.one_s_db.into(),
            r.momi_db.into(),
        ]);
    }
    t
}

fn summary_table(report: &MetricsReport, adam: Option<&AdamConfig>) -> Table {
    let mut header = vec![
        "msi_db",
        "one_s_db",
        "momi_db",
        "mean_active_estimates",
        "multi_source_examples",
        "single_source_examples",
        "mom_examples",
        "selection_score",
        "decimals",
    ];
    let mut row: Vec<Cell> = vec![
        report.msi_db.into(),
        report.one_s_db.into(),
        report.momi_db.into(),
        report.mean_active_estimates.into(),
        report.counts.multi_source.into(),
        report.counts.single_source.into(),
        report.counts.mom.into(),
        report.selection_score.into(),
        mixkit::report::DECIMALS.into(),
    ];
    if let Some(adam) = adam {
        header.extend(["steps", "step_size", "beta1", "beta2"]);
        row.extend([adam.steps.into(), adam.step_size.into(), adam.beta1.into(), adam.beta2.into()]);
    }
    let mut t = Table::new(&header);
    t.push(row);
    t
}

fn read_estimates(dir: &Path) -> Result<SourceSet> {
    let mut waves = Vec::new();
    loop {
        let p = dir.join(format!("estimate_{}.wav", waves.len()));
        if !p.exists() {
            break;
        }
        waves.push(wav::read_wav(&p)?);
    }
    if waves.is_empty() {
        return Err(MixkitError::InvalidArgument(format!("no estimate_0.wav in {}", dir.display())));
    }
    SourceSet::from_waveforms(waves)
}

fn copies(mix: &mixkit::Waveform, m: usize) -> Result<SourceSet> {
    SourceSet::new(vec![mix.samples().to_vec(); m], mix.sample_rate())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let dataset = a.data.load()?;
    let cfg = a.loss.config(a.m);
    let adam = a.adam.config();
    let (rows, report) = if a.estimates == EstimateSource::Optimize {
        let point = SweepPoint { family: "eval".into(), lambda: 0.0, config: cfg.clone() };
        let classifier = if cfg.uses_semantic() { Some(dataset.classifier()?) } else { None };
        optimizer::evaluate_config(&point, &dataset, classifier.as_ref(), &adam, a.seed)?
    } else {
        let pick = |split: &str, id: &str, sources: &[mixkit::Waveform], input: &mixkit::Waveform| -> Result<SourceSet> {
            match &a.estimates {
                EstimateSource::References => SourceSet::from_waveforms(sources.to_vec()),
                EstimateSource::Mixture => copies(input, a.m),
                EstimateSource::Directory(d) => read_estimates(&d.join(split).join(id)),
                EstimateSource::Optimize => unreachable!(),
            }
        };
        let mut rows = Vec::new();
        for ex in &dataset.eval {
            let est = pick(datagen::EVAL_SPLIT, &ex.id, &ex.sources, &ex.mixture)?;
            let e = ex.to_eval(est)?;
            rows.push(metrics::score_example(&format!("eval/{}", ex.id), &e, None, cfg.search, cfg.exhaustive_cap, cfg.snr_max_db)?);
        }
        for ex in &dataset.mom {
            let est = pick(datagen::MOM_SPLIT, &ex.id, &ex.sources(), ex.batch.mom())?;
            let e: EvalExample = ex.to_eval(est)?;
            rows.push(metrics::score_example(
                &format!("mom/{}", ex.id),
                &e,
                Some(&ex.batch),
                cfg.search,
                cfg.exhaustive_cap,
                cfg.snr_max_db,
            )?);
        }
        let report = MetricsReport::from_rows(&rows);
        (rows, report)
    };
    let uses_optimizer = a.estimates == EstimateSource::Optimize;
    a.output.write_table("eval_examples", &example_table(&rows))?;
    let path = a.output.write_table("eval_summary", &summary_table(&report, uses_optimizer.then_some(&adam)))?;
    let mut kv = KeyValues::new();
    a.data.record(&mut kv);
    kv.set("estimates", &a.estimates).set("m", a.m).set("seed", a.seed);
    a.loss.record(&mut kv);
    a.adam.record(&mut kv);
    a.output.record(&mut kv);
    write_resolved(&a.output.out, "eval", &kv)?;
    eprintln!("mixkit: wrote {}", path.display());
    Ok(())
}

fn optimize(a: &OptimizeArgs) -> Result<()> {
    let dataset = a.data.load()?;
    let cfg = a.loss.config(a.m);
    let adam = a.adam.config();
    let classifier = if cfg.uses_semantic() { Some(dataset.classifier()?) } else { None };
    let (split, id) = a
        .example
        .split_once('/')
        .ok_or_else(|| MixkitError::InvalidArgument(format!("example must be split/id, got {:?}", a.example)))?;
    let (batch, labels, kinds) = match split {
        datagen::MOM_SPLIT => {
            let ex = dataset.mom.iter().find(|e| e.id == id);
            let ex = ex.ok_or_else(|| MixkitError::InvalidArgument(format!("no example {}", a.example)))?;
            (ex.batch.clone(), ex.labels.clone(), ex.kinds())
        }
        datagen::EVAL_SPLIT => {
            let ex = dataset.eval.iter().find(|e| e.id == id);
            let ex = ex.ok_or_else(|| MixkitError::InvalidArgument(format!("no example {}", a.example)))?;
            (MixtureBatch::from_references(vec![ex.mixture.clone()])?, ex.labels.clone(), ex.kinds.clone())
        }
        other => return Err(MixkitError::InvalidArgument(format!("unknown split {other:?}"))),
    };
    optimizer::check_semantic_kinds(&cfg, &kinds)?;
    let sem = classifier.as_ref().map(|c| SemanticInput { classifier: c, labels: &labels });
    let out = optimizer::optimize_estimates(&batch, &cfg, &adam, a.seed, sem)?;

    let mut trace = Table::new(&["step", "loss"]);
    for (i, v) in out.trace.iter().enumerate() {
        trace.push(vec![i.into(), (*v).into()]);
    }
    a.output.write_table("trace", &trace)?;
    let f = &out.final_loss;
    let mut summary = Table::new(&[
        "example", "m", "total", "mixit", "l1", "l1l2", "cov", "ce", "cos", "active_estimates", "steps", "step_size",
        "beta1", "beta2",
    ]);
    summary.push(vec![
        a.example.as_str().into(),
        a.m.into(),
        f.total.into(),
        f.mixit.into(),
        f.l1.into(),
        f.l1l2.into(),
        f.cov.into(),
        f.ce.into(),
        f.cos.into(),
        metrics::active_source_count(&out.estimates, metrics::DEFAULT_ACTIVE_THRESHOLD_DB).into(),
        adam.steps.into(),
        adam.step_size.into(),
        adam.beta1.into(),
        adam.beta2.into(),
    ]);
    a.output.write_table("optimize_summary", &summary)?;
    for m in 0..out.estimates.num_sources() {
        let mut w = out.estimates.source(m).to_vec();
        wav::quantize(&mut w);
        let bytes = wav::encode_wav(&mixkit::Waveform::new(w, out.estimates.sample_rate())?);
        write_atomic(&a.output.out.join(format!("estimate_{m}.wav")), &bytes)?;
    }
    let mut kv = KeyValues::new();
    a.data.record(&mut kv);
    kv.set("example", &a.example).set("m", a.m).set("seed", a.seed);
    a.loss.record(&mut kv);
    a.adam.record(&mut kv);
    a.output.record(&mut kv);
    write_resolved(&a.output.out, "optimize", &kv)?;
    Ok(())
}

pub fn sweep_points(family: FamilyArg, lambdas: &[f64], ms: &[usize], base: &LossArgs) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &m in ms {
        for &lambda in lambdas {
            let mut config = base.config(m);
            match family {
                FamilyArg::L1 => config.weight_l1 = lambda,
                FamilyArg::L1l2 => config.weight_l1l2 = lambda,
                FamilyArg::Cov => config.weight_cov = lambda,
                FamilyArg::Ce => config.weight_ce = lambda,
                FamilyArg::Cos => config.weight_cos = lambda,
            }
            points.push(SweepPoint { family: family.name().into(), lambda, config });
        }
    }
    points
}

fn sweep_table(rows: &[SweepRow], adam: &AdamConfig) -> Table {
    let mut t = Table::new(&[
        "index",
        "family",
        "lambda",
        "m",
        "snr_max_db",
        "weight_l1",
        "weight_l1l2",
        "weight_cov",
        "weight_ce",
        "weight_cos",
        "aggregator",
        "steps",
        "step_size",
        "msi_db",
        "one_s_db",
        "momi_db",
        "mean_active_estimates",
        "selection_score",
        "best",
    ]);
    for r in rows {
        let c = &r.point.config;
        t.push(vec![
            r.index.into(),
            r.point.family.as_str().into(),
            r.point.lambda.into(),
            c.num_sources.into(),
            c.snr_max_db.into(),
            c.weight_l1.into(),
            c.weight_l1l2.into(),
            c.weight_cov.into(),
            c.weight_ce.into(),
            c.weight_cos.into(),
            c.aggregator.to_string().into(),
            adam.steps.into(),
            adam.step_size.into(),
            r.report.msi_db.into(),
            r.report.one_s_db.into(),
            r.report.momi_db.into(),
            r.report.mean_active_estimates.into(),
            r.report.selection_score.into(),
            r.best.into(),
        ]);
    }
    t
}

fn sweep(a: &SweepArgs) -> Result<()> {
    if a.lambdas.is_empty() || a.m.is_empty() {
        return Err(MixkitError::InvalidArgument("sweep grid is empty".into()));
    }
    let dataset = a.data.load()?;
    let adam = a.adam.config();
    let points = sweep_points(a.family, &a.lambdas, &a.m, &a.loss);
    eprintln!("mixkit: sweeping {} configurations", points.len());
    let rows = optimizer::sweep(&points, &dataset, &adam, a.seed)?;
    let path = a.output.write_table("sweep", &sweep_table(&rows, &adam))?;

    let mut kv = KeyValues::new();
    a.data.record(&mut kv);
    kv.set("family", value_name(&a.family))
        .set("lambdas", a.lambdas.iter().map(|l| format!("{l:?}")).collect::<Vec<_>>().join(","))
        .set("m", join(&a.m))
        .set("seed", a.seed);
    a.loss.record(&mut kv);
    a.adam.record(&mut kv);
    a.output.record(&mut kv);
    write_resolved(&a.output.out, "sweep", &kv)?;

    if let Some(best) = rows.iter().find(|r| r.best) {
        let c = &best.point.config;
        let mut b = KeyValues::new();
        b.set("index", best.index)
            .set("family", &best.point.family)
            .set_real("lambda", best.point.lambda)
            .set("m", c.num_sources)
            .set_real("snr-max-db", c.snr_max_db)
            .set_real("weight-l1", c.weight_l1)
            .set_real("weight-l1l2", c.weight_l1l2)
            .set_real("weight-cov", c.weight_cov)
            .set_real("weight-ce", c.weight_ce)
            .set_real("weight-cos", c.weight_cos)
            .set("aggregator", c.aggregator)
            .set_real("selection-score", best.report.selection_score);
        write_atomic(&a.output.out.join("best-config.txt"), b.render().as_bytes())?;
    }
    eprintln!("mixkit: wrote {}", path.display());
    Ok(())
}

/// Rebuilds the argument vector recorded in a resolved-config file.
pub fn rerun_args(text: &str) -> Result<Vec<String>> {
    let kv = KeyValues::parse(text)?;
    let sub = kv
        .get("subcommand")
        .ok_or_else(|| MixkitError::Format("resolved config has no subcommand".into()))?;
    let mut args = vec!["mixkit".to_string(), sub.to_string()];
    for (k, v) in kv.entries().iter().filter(|(k, _)| k != "subcommand") {
        args.push(format!("--{k}"));
        args.push(v.clone());
    }
    Ok(args)
}

fn rerun(path: &Path) -> Result<()> {
    let args = rerun_args(&fs::read_to_string(path)?)?;
    let cli = Cli::try_parse_from(&args).map_err(|e| MixkitError::Format(e.to_string()))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(MixkitError::Format("a resolved config cannot rerun another".into()));
    }
    run(cli)
}
