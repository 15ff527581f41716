//! `specrobust` command-line driver.
//!
//! Every command prints (or writes to `--out`) a JSON report of the form
//! `{toolkit, version, config, result}`. CSV payloads start with `#` lines
//! carrying the same provenance.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use specrobust::attack::{attack_dataset_feature, attack_pointwise_feature, AttackBudget};
use specrobust::bench::{correlation_experiment, eval_pipeline, PipelineConfig};
use specrobust::certify::{auto_threshold, certify_lower_bound, certify_multi, certify_pointwise};
use specrobust::dataio::{
    gen_two_clusters, gen_two_gaussians, load_csv, load_idx_pair, write_json, write_matrix_csv,
};
use specrobust::features::{robust_features_k, FeatureExtender};
use specrobust::metricgraph::pairwise_distances;
use specrobust::spheres::{
    feature_rows, run_spheres, sample_spheres, sample_spheres_test, SpheresConfig,
};
use specrobust::{Dataset, Error, GraphSpec, LaplacianVariant, Matrix, MetricKind, VERSION};

const TOOLKIT: &str = "specrobust";

#[derive(Parser)]
#[command(
    name = "specrobust",
    version,
    about = "Adversarially robust spectral features and certificates"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores); results do not depend on it
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral feature matrix v2..v(k+1) of a dataset
    Features(FeaturesArgs),
    /// Dataset-level certificate (k = 1: pair, k > 1: k-feature map)
    Certify(CertifyArgs),
    /// Converse bound on the spectral feature from an assumed robust feature
    LowerBound(LowerBoundArgs),
    /// Out-of-sample feature and pointwise certificate at one point
    Pointwise(PointwiseArgs),
    /// Perturbation search against the dataset or out-of-sample feature
    Attack(AttackArgs),
    /// Concentric-spheres structure and feature-collapse report
    Spheres(SpheresArgs),
    /// Accuracy-under-attack curve or bound/error correlation study
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file of points, or an IDX images file when --labels is given
    #[arg(long)]
    input: PathBuf,
    /// IDX labels file
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Keep only the first N points
    #[arg(long)]
    limit: Option<usize>,
    /// 0-based CSV column holding integer labels
    #[arg(long)]
    label_column: Option<usize>,
    /// The CSV has a header row
    #[arg(long)]
    header: bool,
    /// l2, l1 or linf
    #[arg(long, default_value = "l2")]
    metric: MetricKind,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge iff distance <= T
    #[arg(long, conflicts_with_all = ["weighted", "auto_threshold"])]
    threshold: Option<f64>,
    /// Gaussian weights exp(-gamma d^2)
    #[arg(long, value_name = "GAMMA", conflicts_with = "auto_threshold")]
    weighted: Option<f64>,
    /// T = max_i min_j d(i, j)
    #[arg(long)]
    auto_threshold: bool,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    refinement_steps: usize,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// unnormalized or scaled
    #[arg(long, default_value = "unnormalized")]
    laplacian: LaplacianVariant,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "unnormalized")]
    laplacian: LaplacianVariant,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    eps: f64,
    /// Robustness of the assumed feature
    #[arg(long)]
    delta: f64,
}

#[derive(Args)]
struct PointwiseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Comma-separated coordinates
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    point: Vec<f64>,
    #[arg(long)]
    eps: f64,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    graph: GraphArgs,
    /// Attack the out-of-sample feature at this point instead of the dataset
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct SpheresArgs {
    #[arg(long, default_value_t = 500)]
    d: usize,
    /// Training points per sphere
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 1.3)]
    r: f64,
    /// Defaults to (r - 1)/8
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 100)]
    test_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attack trials per test point (0 skips the attack)
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 2)]
    refinement_steps: usize,
    /// Also write one feature row per test point here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ExperimentKind {
    Pipeline,
    Correlation,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    kind: ExperimentKind,
    /// Labelled training CSV (pipeline; synthetic two-Gaussian data otherwise)
    #[arg(long, requires = "test_input")]
    train_input: Option<PathBuf>,
    #[arg(long, requires = "train_input")]
    test_input: Option<PathBuf>,
    /// 0-based label column of the CSV inputs
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    #[arg(long)]
    header: bool,
    /// Points per class of synthetic data
    #[arg(long, default_value_t = 20)]
    n_per: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Cluster separations of the correlation family
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12,14,16,18,20")]
    separations: Vec<f64>,
    /// Ascending attack radii (pipeline); the first is used for correlation
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    eps_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value = "scaled")]
    laplacian: LaplacianVariant,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value = "l2")]
    metric: MetricKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 10)]
    refinement_steps: usize,
    /// Also write the curve or scatter rows as CSV here
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    toolkit: &'static str,
    version: &'static str,
    config: &'a Value,
    result: R,
}

fn load(data: &DataArgs) -> Outcome<Dataset> {
    let ds = match &data.labels {
        Some(labels) => load_idx_pair(&data.input, labels, data.limit)?,
        None => {
            let ds = load_csv(&data.input, data.label_column, data.header)?;
            match data.limit {
                Some(l) if l < ds.len() => ds.select(&(0..l).collect::<Vec<_>>())?,
                _ => ds,
            }
        }
    };
    Ok(ds)
}

fn data_config(data: &DataArgs) -> Value {
    json!({
        "input": data.input.display().to_string(),
        "labels": data.labels.as_ref().map(|p| p.display().to_string()),
        "limit": data.limit,
        "label_column": data.label_column,
        "header": data.header,
        "metric": data.metric,
    })
}

/// Resolved graph family; the auto threshold is computed from the data.
fn resolve_graph(graph: &GraphArgs, ds: &Dataset, metric: MetricKind) -> Outcome<GraphSpec> {
    match (graph.threshold, graph.weighted, graph.auto_threshold) {
        (Some(t), None, false) => Ok(GraphSpec::Threshold(t)),
        (None, Some(g), false) => Ok(GraphSpec::Gaussian(g)),
        (None, None, true) => Ok(GraphSpec::Threshold(auto_threshold(&pairwise_distances(
            ds, metric,
        )))),
        _ => Err(Failure::Usage(
            "exactly one of --threshold, --weighted or --auto-threshold is required".into(),
        )),
    }
}

fn threshold_only(spec: GraphSpec, command: &str) -> Outcome<f64> {
    match spec {
        GraphSpec::Threshold(t) => Ok(t),
        GraphSpec::Gaussian(_) => Err(Failure::Usage(format!(
            "{command} works on threshold graphs; use --threshold or --auto-threshold"
        ))),
    }
}

fn graph_config(graph: &GraphArgs, spec: GraphSpec) -> Value {
    json!({ "auto_threshold": graph.auto_threshold, "graph": spec })
}

fn budget(b: &BudgetArgs) -> Outcome<AttackBudget> {
    AttackBudget::new(b.trials, b.refinement_steps, b.seed)
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn emit<R: Serialize>(out: Option<&Path>, config: &Value, result: R) -> Outcome<()> {
    let report = Report {
        toolkit: TOOLKIT,
        version: VERSION,
        config,
        result,
    };
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            write_json(&report, &mut w)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_json(&report, &mut lock)?;
            lock.write_all(b"\n")
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

/// CSV with `#` provenance lines ahead of the rows.
fn write_csv_with_provenance(
    path: &Path,
    config: &Value,
    body: impl FnOnce(&mut dyn Write) -> Outcome<()>,
) -> Outcome<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let cfg = serde_json::to_string(config).map_err(Error::from)?;
    writeln!(w, "# {TOOLKIT} {VERSION}").map_err(|e| Error::io(path, e))?;
    writeln!(w, "# config: {cfg}").map_err(|e| Error::io(path, e))?;
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn cmd_features(a: &FeaturesArgs, out: Option<&Path>) -> Outcome<()> {
    let ds = load(&a.data)?;
    let spec = resolve_graph(&a.graph, &ds, a.data.metric)?;
    let config = merge(
        merge(json!({"subcommand": "features"}), data_config(&a.data)),
        merge(
            graph_config(&a.graph, spec),
            json!({"k": a.k, "laplacian": a.laplacian}),
        ),
    );
    let f = robust_features_k(&ds, spec, a.k, a.data.metric, a.laplacian)?;
    match out {
        Some(path) if is_csv(path) => {
            write_csv_with_provenance(path, &config, |w| Ok(write_matrix_csv(f.values(), w)?))?;
            emit(
                None,
                &config,
                json!({"n": ds.len(), "k": f.k(), "source": f.source(), "features_csv": path.display().to_string()}),
            )
        }
        _ => emit(out, &config, f.to_bundle(ds.labels())),
    }
}

fn cmd_certify(a: &CertifyArgs, out: Option<&Path>) -> Outcome<()> {
    let ds = load(&a.data)?;
    let spec = resolve_graph(&a.graph, &ds, a.data.metric)?;
    let t = threshold_only(spec, "certify")?;
    let config = merge(
        merge(json!({"subcommand": "certify"}), data_config(&a.data)),
        merge(
            graph_config(&a.graph, spec),
            json!({"eps": a.eps, "k": a.k, "laplacian": a.laplacian}),
        ),
    );
    let cert = certify_multi(&ds, t, a.eps, a.k, a.data.metric, a.laplacian)?;
    emit(out, &config, cert)
}

fn cmd_lower_bound(a: &LowerBoundArgs, out: Option<&Path>) -> Outcome<()> {
    let ds = load(&a.data)?;
    let config = merge(
        merge(json!({"subcommand": "lower-bound"}), data_config(&a.data)),
        json!({"eps": a.eps, "delta": a.delta}),
    );
    emit(
        out,
        &config,
        certify_lower_bound(&ds, a.eps, a.delta, a.data.metric)?,
    )
}

fn cmd_pointwise(a: &PointwiseArgs, out: Option<&Path>) -> Outcome<()> {
    let ds = load(&a.data)?;
    let spec = resolve_graph(&a.graph, &ds, a.data.metric)?;
    let t = threshold_only(spec, "pointwise")?;
    let config = merge(
        merge(json!({"subcommand": "pointwise"}), data_config(&a.data)),
        merge(
            graph_config(&a.graph, spec),
            json!({"point": a.point, "eps": a.eps}),
        ),
    );
    let ext = FeatureExtender::new(&ds, spec, a.data.metric, LaplacianVariant::Unnormalized, 1)?;
    let feature = ext.feature(&a.point)?;
    let cert = certify_pointwise(&ds, &a.point, t, a.eps, a.data.metric)?;
    emit(
        out,
        &config,
        json!({"feature": feature, "certificate": cert}),
    )
}

fn cmd_attack(a: &AttackArgs, out: Option<&Path>) -> Outcome<()> {
    let ds = load(&a.data)?;
    let spec = resolve_graph(&a.graph, &ds, a.data.metric)?;
    let t = threshold_only(spec, "attack")?;
    let b = budget(&a.budget)?;
    let config = merge(
        merge(json!({"subcommand": "attack"}), data_config(&a.data)),
        merge(
            graph_config(&a.graph, spec),
            json!({"point": a.point, "eps": a.eps, "budget": b}),
        ),
    );
    match &a.point {
        Some(p) => {
            let r = attack_pointwise_feature(&ds, p, t, a.eps, a.data.metric, &b)?;
            let cert = certify_pointwise(&ds, p, t, a.eps, a.data.metric)?;
            emit(out, &config, json!({"attack": r, "certificate": cert}))
        }
        None => {
            let r = attack_dataset_feature(&ds, t, a.eps, a.data.metric, &b)?;
            let cert = certify_multi(
                &ds,
                t,
                a.eps,
                1,
                a.data.metric,
                LaplacianVariant::Unnormalized,
            )?;
            let summary = json!({
                "displacement": r.displacement,
                "trials_used": r.trials_used,
                "within_ball": r.within_ball,
                "best_trial": r.best_trial,
                "best_perturbed": r.best_perturbed.points().to_rows(),
            });
            emit(
                out,
                &config,
                json!({"attack": summary, "certificate": cert}),
            )
        }
    }
}

fn cmd_spheres(a: &SpheresArgs, out: Option<&Path>) -> Outcome<()> {
    let mut cfg =
        SpheresConfig::new(a.n, a.d, a.r, a.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(eps) = a.eps {
        cfg = cfg
            .with_eps(eps)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let b = if a.trials == 0 {
        None
    } else {
        Some(
            AttackBudget::new(a.trials, a.refinement_steps, a.seed)
                .map_err(|e| Failure::Usage(e.to_string()))?,
        )
    };
    let config = json!({
        "subcommand": "spheres",
        "spheres": cfg,
        "test_points": a.test_points,
        "budget": b,
    });
    let run = run_spheres(&cfg, a.test_points, b.as_ref())?;
    if let Some(path) = &a.csv {
        let train = sample_spheres(&cfg)?;
        let test = sample_spheres_test(&cfg, a.test_points)?;
        let rows = feature_rows(&train, &test, &cfg)?;
        let labels = test.labels().unwrap_or(&[]).to_vec();
        let with_label = Matrix::from_fn(rows.rows(), rows.cols() + 1, |i, j| {
            if j == 0 {
                labels[i] as f64
            } else {
                rows[(i, j - 1)]
            }
        });
        write_csv_with_provenance(path, &config, |w| Ok(write_matrix_csv(&with_label, w)?))?;
    }
    emit(out, &config, run)
}

fn labelled_csv(path: &Path, label_column: usize, header: bool) -> Outcome<Dataset> {
    let ds = load_csv(path, Some(label_column), header)?;
    if ds.labels().is_none() {
        return Err(Failure::Usage(format!(
            "{} has no label column",
            path.display()
        )));
    }
    Ok(ds)
}

fn cmd_experiment(a: &ExperimentArgs, out: Option<&Path>) -> Outcome<()> {
    let b = AttackBudget::new(a.trials, a.refinement_steps, a.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let pipe = PipelineConfig {
        graph: GraphSpec::Gaussian(a.gamma),
        variant: a.laplacian,
        k: a.k,
        metric: a.metric,
        epochs: a.epochs,
        lr: a.lr,
    };
    if a.eps_grid.is_empty() {
        return Err(Failure::Usage("--eps-grid needs at least one value".into()));
    }
    match a.kind {
        ExperimentKind::Pipeline => {
            let (train, test, source) = match (&a.train_input, &a.test_input) {
                (Some(tr), Some(te)) => (
                    labelled_csv(tr, a.label_column, a.header)?,
                    labelled_csv(te, a.label_column, a.header)?,
                    json!({"train_input": tr.display().to_string(), "test_input": te.display().to_string(),
                           "label_column": a.label_column, "header": a.header}),
                ),
                _ => (
                    gen_two_gaussians(a.n_per, a.dim, a.separation, a.spread, a.seed)?,
                    gen_two_gaussians(
                        a.n_per,
                        a.dim,
                        a.separation,
                        a.spread,
                        a.seed.wrapping_add(1),
                    )?,
                    json!({"synthetic": "two-gaussians", "n_per": a.n_per, "dim": a.dim,
                           "separation": a.separation, "spread": a.spread}),
                ),
            };
            let config = merge(
                json!({"subcommand": "experiment", "kind": a.kind, "pipeline": pipe, "eps_grid": a.eps_grid, "budget": b}),
                source,
            );
            let curve =
                eval_pipeline(&train, &test, &pipe, &a.eps_grid, &b).map_err(|e| match e {
                    Error::InvalidArgument(m) => Failure::Usage(m),
                    other => Failure::Runtime(other),
                })?;
            if let Some(path) = &a.csv {
                write_csv_with_provenance(path, &config, |w| {
                    w.write_all(curve.to_csv().as_bytes())
                        .map_err(|e| Error::io(path, e))?;
                    Ok(())
                })?;
            }
            emit(out, &config, curve)
        }
        ExperimentKind::Correlation => {
            let eps = a.eps_grid[0];
            let family = a
                .separations
                .iter()
                .enumerate()
                .map(|(i, &sep)| {
                    let s = a.seed.wrapping_add(2 * i as u64);
                    Ok((
                        gen_two_clusters(a.n_per, a.dim, sep, a.spread, s)?,
                        gen_two_clusters(a.n_per, a.dim, sep, a.spread, s.wrapping_add(1))?,
                    ))
                })
                .collect::<specrobust::Result<Vec<_>>>()?;
            let config = json!({
                "subcommand": "experiment", "kind": a.kind, "pipeline": pipe, "eps": eps, "budget": b,
                "synthetic": "two-clusters", "separations": a.separations, "n_per": a.n_per,
                "dim": a.dim, "spread": a.spread,
            });
            let report = correlation_experiment(&family, eps, &pipe, &b)?;
            if let Some(path) = &a.csv {
                write_csv_with_provenance(path, &config, |w| {
                    w.write_all(report.to_csv().as_bytes())
                        .map_err(|e| Error::io(path, e))?;
                    Ok(())
                })?;
            }
            emit(out, &config, report)
        }
    }
}

fn run(cli: &Cli) -> Outcome<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Runtime(Error::InvalidArgument(e.to_string())))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Features(a) => cmd_features(a, out),
        Command::Certify(a) => cmd_certify(a, out),
        Command::LowerBound(a) => cmd_lower_bound(a, out),
        Command::Pointwise(a) => cmd_pointwise(a, out),
        Command::Attack(a) => cmd_attack(a, out),
        Command::Spheres(a) => cmd_spheres(a, out),
        Command::Experiment(a) => cmd_experiment(a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
