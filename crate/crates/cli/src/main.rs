use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use herdselect::binarize::TransferFunctionKind;
use herdselect::classifiers::{cross_validate, ClassifierSpec};
use herdselect::dataset::{
    discretize, load_csv, make_synthetic, save_csv, CsvOptions, Dataset, Discretization, LabelColumn,
    SyntheticSpec,
};
use herdselect::filters::mrmr_select;
use herdselect::select::{
    compare_transfer_functions, export_result, repeat_seed, run_selection_with_progress, summary_row,
    SelectionResult, SelectorConfig, SUMMARY_HEADER,
};
use herdselect::rng;

mod stats_input;

// Like println!, but a closed stdout (e.g. piping into `head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Gene selection with an MRMR prefilter and a binary horse herd optimizer.
#[derive(Parser, Debug)]
#[command(name = "herdselect", version, about)]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "HERDSELECT_THREADS", default_value_t = 0)]
    threads: usize,

    /// Output directory.
    #[arg(long, global = true, default_value = "herdselect-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank genes by MRMR and write the top m.
    Filter(FilterArgs),
    /// Cross-validate a classifier on all genes.
    Cv(CvArgs),
    /// Run the full MRMR + binary herd selection.
    Select(SelectArgs),
    /// Run selection once per transfer function and compare.
    TfBench(TfBenchArgs),
    /// Friedman test and pairwise post-hoc comparisons.
    Stats(StatsArgs),
    /// Write a synthetic dataset with planted informative genes.
    DemoData(DemoArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Input CSV: header of gene names, one row per sample.
    #[arg(long)]
    data: PathBuf,

    /// Label column: `last`, a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    label_col: String,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let label_column: LabelColumn = self.label_col.parse().expect("infallible");
        load_csv(&self.data, &CsvOptions { label_column })
            .with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiscretizerArg {
    MeanSigma,
    EqualWidth,
}

#[derive(Args, Debug)]
struct DiscretizeArgs {
    /// Discretizer used for mutual information.
    #[arg(long, value_enum, default_value = "mean-sigma")]
    discretize: DiscretizerArg,

    /// Width multiplier for mean-sigma.
    #[arg(long, default_value_t = 0.5)]
    sigma_t: f64,

    /// Bin count for equal-width.
    #[arg(long, default_value_t = 3)]
    bins: usize,
}

impl DiscretizeArgs {
    fn policy(&self) -> Discretization {
        match self.discretize {
            DiscretizerArg::MeanSigma => Discretization::MeanSigma { t: self.sigma_t },
            DiscretizerArg::EqualWidth => Discretization::EqualWidth { bins: self.bins },
        }
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_tf(s: &str) -> std::result::Result<TransferFunctionKind, String> {
    s.parse().map_err(|e: herdselect::Error| e.to_string())
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Number of genes to keep.
    #[arg(long, value_parser = positive, default_value = "50")]
    top_m: usize,

    #[command(flatten)]
    disc: DiscretizeArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassifierArg {
    Svm,
    Knn,
    Nb,
}

#[derive(Args, Debug, Default)]
struct ClassifierArgs {
    /// Classifier used inside the fitness.
    #[arg(long, value_enum)]
    classifier: Option<ClassifierArg>,

    /// Neighbours for knn.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,

    /// Regularization constant for svm.
    #[arg(long, default_value_t = 1.0)]
    svm_c: f64,

    /// Training epochs for svm.
    #[arg(long, default_value_t = 200)]
    svm_epochs: usize,
}

impl ClassifierArgs {
    fn spec(&self) -> Option<ClassifierSpec> {
        self.classifier.map(|c| match c {
            ClassifierArg::Svm => ClassifierSpec::linear_svm(self.svm_c, self.svm_epochs),
            ClassifierArg::Knn => ClassifierSpec::knn(self.neighbors),
            ClassifierArg::Nb => ClassifierSpec::gaussian_nb(),
        })
    }
}

#[derive(Args, Debug)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    classifier: ClassifierArgs,

    #[arg(long, value_parser = positive, default_value = "10")]
    folds: usize,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,

    /// JSON file with selector settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Transfer function: s1..s4, v1..v4 or x.
    #[arg(long, value_parser = parse_tf)]
    tf: Option<TransferFunctionKind>,

    #[arg(long, value_parser = positive)]
    top_m: Option<usize>,

    #[arg(long, value_parser = positive)]
    horses: Option<usize>,

    #[arg(long)]
    iters: Option<usize>,

    #[arg(long, value_parser = positive)]
    repeats: Option<usize>,

    #[arg(long, value_parser = positive)]
    folds: Option<usize>,

    /// Accuracy weight in the fitness; the gene-count weight is 1 - alpha.
    #[arg(long)]
    alpha: Option<f64>,

    #[command(flatten)]
    classifier: ClassifierArgs,

    /// Print one progress line per iteration to stderr.
    #[arg(long)]
    verbose: bool,
}

impl SelectArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<SelectorConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => SelectorConfig::default(),
        };
        if let Some(v) = self.tf {
            cfg.tf = v;
        }
        if let Some(v) = self.top_m {
            cfg.mrmr_top_m = v;
        }
        if let Some(v) = self.horses {
            cfg.n_horses = v;
        }
        if let Some(v) = self.iters {
            cfg.max_iter = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.folds {
            cfg.cv_folds = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha_w = v;
        }
        if let Some(spec) = self.classifier.spec() {
            cfg.classifier = spec;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct TfBenchArgs {
    #[command(flatten)]
    select: SelectArgs,

    /// Comma-separated transfer functions to compare.
    #[arg(long, value_delimiter = ',', value_parser = parse_tf, default_value = "s1,s2,s3,s4,v1,v2,v3,v4,x")]
    tfs: Vec<TransferFunctionKind>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Scores CSV: header of algorithm names, one row per dataset. An
    /// optional leading `dataset` column holds row names.
    #[arg(long)]
    input: PathBuf,

    /// The input is a single row of average ranks.
    #[arg(long, requires = "datasets")]
    pre_ranked: bool,

    /// Number of datasets behind pre-ranked averages.
    #[arg(long, value_parser = positive)]
    datasets: Option<usize>,

    /// Smaller scores are better (e.g. gene counts, error rates).
    #[arg(long)]
    lower_is_better: bool,

    /// Compare only this algorithm against the others.
    #[arg(long)]
    control: Option<String>,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(long, value_parser = positive, default_value = "100")]
    samples: usize,

    #[arg(long, value_parser = positive, default_value = "5")]
    informative: usize,

    #[arg(long, value_parser = positive, default_value = "45")]
    noise: usize,

    #[arg(long, default_value_t = 2)]
    classes: usize,

    /// Distance between adjacent class means, in noise standard deviations.
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config: C,
    derived_seeds: Vec<(String, u64)>,
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &str,
    seed: Option<u64>,
    config: C,
    derived_seeds: Vec<(String, u64)>,
) -> Result<()> {
    let m = Manifest {
        tool: "herdselect",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
        derived_seeds,
    };
    write_json(&out.join("run-manifest.json"), &m)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("building worker pool")?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Filter(a) => cmd_filter(a, out),
        Command::Cv(a) => cmd_cv(a, cli.seed.unwrap_or(0), out),
        Command::Select(a) => cmd_select(a, cli.seed, out),
        Command::TfBench(a) => cmd_tf_bench(a, cli.seed, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::DemoData(a) => cmd_demo(a, cli.seed.unwrap_or(0), out),
    }
}

fn cmd_filter(a: &FilterArgs, out: &Path) -> Result<()> {
    let d = a.data.load()?;
    let policy = a.disc.policy();
    let disc = discretize(&d, policy)?;
    let ranking = mrmr_select(&disc, d.labels(), a.top_m)?;
    let path = out.join("ranking.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["rank", "gene_index", "gene_name", "score"])?;
    for (rank, (&g, &s)) in ranking.order.iter().zip(&ranking.scores).enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            g.to_string(),
            d.gene_names()[g].clone(),
            format!("{s:?}"),
        ])?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct FilterConfig<'a> {
        data: &'a Path,
        top_m: usize,
        discretization: Discretization,
    }
    let cfg = FilterConfig {
        data: &a.data.data,
        top_m: a.top_m,
        discretization: policy,
    };
    write_manifest(out, "filter", None, cfg, vec![])?;
    say!("wrote {}", path.display());
    Ok(())
}

fn cmd_cv(a: &CvArgs, seed: u64, out: &Path) -> Result<()> {
    let d = a.data.load()?;
    let spec = a.classifier.spec().unwrap_or_default();
    let report = cross_validate(&d, &spec, a.folds, seed)?;
    write_json(&out.join("cv.json"), &report)?;
    #[derive(Serialize)]
    struct CvConfig<'a> {
        data: &'a Path,
        classifier: ClassifierSpec,
        folds: usize,
    }
    let cfg = CvConfig {
        data: &a.data.data,
        classifier: spec,
        folds: a.folds,
    };
    write_manifest(out, "cv", Some(seed), cfg, vec![("folds".into(), seed)])?;
    let m = &report.mean;
    say!(
        "accuracy {:.4}  f-measure {:.4}  mcc {:.4}  auc {:.4}",
        m.accuracy, m.f_measure, m.mcc, m.auc
    );
    Ok(())
}

fn repeat_seeds(cfg: &SelectorConfig) -> Vec<(String, u64)> {
    (0..cfg.repeats)
        .flat_map(|r| {
            let s = repeat_seed(cfg.seed, r);
            [
                (format!("repeat/{r}"), s),
                (format!("repeat/{r}/folds"), rng::named(s, "folds")),
            ]
        })
        .collect()
}

fn progress_line(tf: TransferFunctionKind) -> impl Fn(usize, usize, f64) + Sync {
    move |repeat, iter, best| eprintln!("{tf} repeat {repeat} iter {iter} best {best:.6}")
}

fn cmd_select(a: &SelectArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let d = a.data.load()?;
    let cfg = a.resolve(seed)?;
    let log = progress_line(cfg.tf);
    let res = run_selection_with_progress(&d, &cfg, a.verbose.then_some(&log as _))?;
    export_result(&res, out)?;
    write_traces(&out.join("traces.csv"), std::slice::from_ref(&res))?;
    write_manifest(out, "select", Some(cfg.seed), &cfg, repeat_seeds(&cfg))?;
    say!(
        "best accuracy {:.4} with {} genes: {}",
        res.best_accuracy,
        res.best_gene_indices.len(),
        res.best_gene_names.join(",")
    );
    Ok(())
}

/// One column per run: best fitness per iteration, averaged over repeats.
fn write_traces(path: &Path, results: &[SelectionResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(results.iter().map(|r| r.config.tf.to_string()));
    w.write_record(&header)?;
    let len = results
        .iter()
        .map(|r| r.per_repeat[0].trace.len())
        .max()
        .unwrap_or(0);
    for i in 0..len {
        let mut row = vec![i.to_string()];
        for r in results {
            let vals: Vec<f64> = r.per_repeat.iter().filter_map(|p| p.trace.get(i).copied()).collect();
            row.push(format!("{:?}", vals.iter().sum::<f64>() / vals.len() as f64));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_tf_bench(a: &TfBenchArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    if a.tfs.is_empty() {
        bail!("no transfer functions given");
    }
    let d = a.select.data.load()?;
    let cfg = a.select.resolve(seed)?;
    let results = if a.select.verbose {
        a.tfs
            .iter()
            .map(|&tf| {
                let cfg = SelectorConfig { tf, ..cfg.clone() };
                let log = progress_line(tf);
                run_selection_with_progress(&d, &cfg, Some(&log))
            })
            .collect::<herdselect::Result<Vec<_>>>()?
    } else {
        compare_transfer_functions(&d, &cfg, &a.tfs)?
    };
    let mut w = csv::Writer::from_path(out.join("tf_comparison.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for res in &results {
        w.write_record(summary_row(res))?;
        export_result(res, out.join(res.config.tf.tag()))?;
    }
    w.flush()?;
    write_traces(&out.join("traces.csv"), &results)?;
    #[derive(Serialize)]
    struct BenchConfig<'a> {
        tfs: Vec<&'static str>,
        selector: &'a SelectorConfig,
    }
    let bench = BenchConfig {
        tfs: a.tfs.iter().map(|t| t.tag()).collect(),
        selector: &cfg,
    };
    write_manifest(out, "tf-bench", Some(cfg.seed), bench, repeat_seeds(&cfg))?;
    for res in &results {
        let s = &res.summary;
        say!(
            "{:>2}  mean acc {:.4}  mean genes {:.2}",
            res.config.tf, s.mean_accuracy, s.mean_genes
        );
    }
    Ok(())
}

fn cmd_stats(a: &StatsArgs, out: &Path) -> Result<()> {
    let report = stats_input::run(a)?;
    write_json(&out.join("stats.json"), &report)?;
    #[derive(Serialize)]
    struct StatsConfig<'a> {
        input: &'a Path,
        pre_ranked: bool,
        datasets: Option<usize>,
        higher_is_better: bool,
        control: &'a Option<String>,
    }
    let cfg = StatsConfig {
        input: &a.input,
        pre_ranked: a.pre_ranked,
        datasets: a.datasets,
        higher_is_better: !a.lower_is_better,
        control: &a.control,
    };
    write_manifest(out, "stats", None, cfg, vec![])?;
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_demo(a: &DemoArgs, seed: u64, out: &Path) -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: a.samples,
        n_informative: a.informative,
        n_noise: a.noise,
        n_classes: a.classes,
        separation: a.separation,
        seed,
    };
    let (d, truth) = make_synthetic(&spec)?;
    let csv_path = out.join("synthetic.csv");
    save_csv(&d, &csv_path)?;
    #[derive(Serialize)]
    struct GroundTruth<'a> {
        informative: Vec<usize>,
        mask: &'a herdselect::dataset::GeneMask,
    }
    write_json(
        &out.join("ground_truth.json"),
        &GroundTruth {
            informative: truth.indices(),
            mask: &truth,
        },
    )?;
    let derived = vec![(
        "make_synthetic".into(),
        rng::derive(seed, &[rng::label_of("make_synthetic")]),
    )];
    write_manifest(out, "demo-data", Some(seed), &spec, derived)?;
    say!("wrote {}", csv_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
