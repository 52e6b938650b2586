use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use qtomo::generative::{
    exact_distribution, train, Checkpoint, CheckpointProvenance, TrainingConfig,
};
use qtomo::harness::{
    parse_config, prepare, prepare_state, run_scaling, run_tomography, write_cells_csv,
    write_series_csv, Depolarizing, ExperimentSpec, StateKind,
};
use qtomo::metrics::{
    classical_fidelity, pairwise_correlations_from_distribution, quantum_fidelity,
};
use qtomo::mle::mle_project;
use qtomo::povm::{empirical_distribution, make_povm, CoarseGrain, OutcomeDataset, PovmKind};
use qtomo::sim::{Basis, DensityMatrix};
use qtomo::{DensityMatrix64, ProbDist64, StageContext};

#[derive(Parser)]
#[command(
    name = "qtomo",
    version,
    about = "Generative-model quantum state tomography"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a (noisy) target state and write its density matrix as JSON.
    Prepare(Opts),
    /// Simulate measurements and write a dataset file.
    Sample(Opts),
    /// Fit the recurrent model to a dataset and write a checkpoint.
    Train(Opts),
    /// Reconstruct a physical state from a model or a dataset.
    Reconstruct(Opts),
    /// Score a model against its data and, optionally, a target state.
    Metrics(Opts),
    /// Prepare, sample, train and score in one run.
    Tomography(Opts),
    /// Shot-scaling sweep with the empirical baseline; JSON report plus CSV tables.
    Scaling(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// key = value file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Qubit count, or a list/range such as 2..5 for scaling
    #[arg(long)]
    qubits: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(StateKind))]
    state: Option<StateKind>,
    #[arg(long, value_parser = clap::value_parser!(PovmKind))]
    povm: Option<PovmKind>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// off, reference, fidelity:<F> or a per-qubit probability
    #[arg(long, value_parser = clap::value_parser!(Depolarizing))]
    noise_depol: Option<Depolarizing>,
    /// none, reference or a file of "f_g f_e" rows
    #[arg(long)]
    readout_table: Option<String>,
    /// Bayes-correct readout errors before use
    #[arg(long)]
    bayes: bool,
    #[arg(long, value_delimiter = ',')]
    shot_grid: Option<Vec<usize>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Dataset file
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model checkpoint
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output path; JSON goes to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prefix for CSV tables written by `scaling`
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Wrong or inconsistent arguments: exit code 2.
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

/// Keys a config file may set besides the experiment keys.
const PATH_KEYS: [&str; 4] = ["data", "model", "out", "csv"];

struct Resolved {
    spec: ExperimentSpec,
    paths: BTreeMap<&'static str, PathBuf>,
}

impl Resolved {
    fn path(&self, key: &'static str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    fn need(&self, key: &'static str) -> anyhow::Result<&Path> {
        self.path(key)
            .ok_or_else(|| usage(format!("--{key} is required")))
    }

    fn single_qubit_count(&self) -> anyhow::Result<usize> {
        match self.spec.qubits[..] {
            [n] => Ok(n),
            _ => Err(usage("--qubits must be a single count for this command")),
        }
    }
}

fn resolve(opts: &Opts, sweep: bool) -> anyhow::Result<Resolved> {
    let mut spec = ExperimentSpec::default();
    let mut paths = BTreeMap::new();
    if let Some(cfg) = &opts.config {
        let text = fs::read_to_string(cfg)
            .map_err(|e| usage(format!("--config {}: {e}", cfg.display())))?;
        let base = cfg.parent();
        let entries =
            parse_config(&text).map_err(|e| usage(format!("--config {}: {e}", cfg.display())))?;
        for e in entries {
            if let Some(k) = PATH_KEYS.iter().find(|k| **k == e.key) {
                let p = PathBuf::from(&e.value);
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                };
                paths.insert(*k, p);
            } else {
                spec.set(&e.key, &e.value, base).map_err(|err| {
                    usage(format!("--config {} line {}: {err}", cfg.display(), e.line))
                })?;
            }
        }
    }

    let mut set = |key: &str, value: String| -> anyhow::Result<()> {
        spec.set(key, &value, None)
            .map_err(|e| usage(format!("--{}: {e}", key.replace('_', "-"))))
    };
    if let Some(v) = &opts.qubits {
        set("qubits", v.clone())?;
    }
    if let Some(v) = opts.state {
        set("state", v.to_string())?;
    }
    if let Some(v) = opts.povm {
        set("povm", v.to_string())?;
    }
    if let Some(v) = opts.shots {
        set("shots", v.to_string())?;
    }
    if let Some(v) = opts.seed {
        set("seed", v.to_string())?;
    }
    if let Some(v) = opts.noise_depol {
        set("noise_depol", v.to_string())?;
    }
    if let Some(v) = &opts.readout_table {
        set("readout_table", v.clone())?;
    }
    if opts.bayes {
        set("bayes", "true".into())?;
    }
    if let Some(v) = &opts.shot_grid {
        set(
            "shot_grid",
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )?;
    }
    for (key, v) in [
        ("repeats", opts.repeats.map(|x| x.to_string())),
        ("threshold", opts.threshold.map(|x| x.to_string())),
        ("learning_rate", opts.learning_rate.map(|x| x.to_string())),
        ("batch_size", opts.batch_size.map(|x| x.to_string())),
        ("max_epochs", opts.max_epochs.map(|x| x.to_string())),
        ("hidden_size", opts.hidden_size.map(|x| x.to_string())),
        (
            "validation_fraction",
            opts.validation_fraction.map(|x| x.to_string()),
        ),
        ("patience", opts.patience.map(|x| x.to_string())),
    ] {
        if let Some(v) = v {
            set(key, v)?;
        }
    }
    for (key, v) in [
        ("data", &opts.data),
        ("model", &opts.model),
        ("out", &opts.out),
        ("csv", &opts.csv),
    ] {
        if let Some(p) = v {
            paths.insert(key, p.clone());
        }
    }
    // single runs never visit the grid, so trim it to the dataset size
    if !sweep && spec.shot_grid.last().is_some_and(|&g| g > spec.shots) {
        spec.shot_grid.retain(|&g| g <= spec.shots);
        if spec.shot_grid.is_empty() {
            spec.shot_grid.push(spec.shots);
        }
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(Resolved { spec, paths })
}

fn emit(out: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("output: {}", p.display())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.context("stdout"),
        },
    }
}

fn matrix_json(rho: &DensityMatrix64) -> Value {
    let d = rho.dim();
    let m = rho.matrix();
    let mut re = Vec::with_capacity(d);
    let mut im = Vec::with_capacity(d);
    for i in 0..d {
        re.push((0..d).map(|j| m[(i, j)].re).collect::<Vec<_>>());
        im.push((0..d).map(|j| m[(i, j)].im).collect::<Vec<_>>());
    }
    json!({ "n_qubits": rho.n_qubits(), "real": re, "imag": im })
}

fn load_data(r: &Resolved) -> anyhow::Result<OutcomeDataset> {
    let p = r.need("data")?;
    OutcomeDataset::load(p)
        .stage("load")
        .with_context(|| format!("{}", p.display()))
}

fn load_model(r: &Resolved) -> anyhow::Result<Checkpoint<f64>> {
    let p = r.need("model")?;
    Checkpoint::<f64>::load(p)
        .stage("load")
        .with_context(|| format!("{}", p.display()))
}

fn correlations_json(p: &ProbDist64) -> anyhow::Result<Value> {
    let p4 = make_povm::<f64>(PovmKind::Pauli4);
    let view = if p.alphabet() == 6 {
        p.coarse_grain_p6_to_p4()?
    } else {
        p.clone()
    };
    let mut out = serde_json::Map::new();
    for (axis, name) in [(Basis::Z, "zz"), (Basis::X, "xx")] {
        let c = pairwise_correlations_from_distribution(&view, &p4, axis).stage("metrics")?;
        out.insert(
            name.into(),
            c.into_iter()
                .map(|((j, k), v)| json!({"j": j, "k": k, "value": v}))
                .collect(),
        );
    }
    Ok(Value::Object(out))
}

fn cmd_prepare(r: &Resolved) -> anyhow::Result<()> {
    let n = r.single_qubit_count()?;
    let (_, rho, p) = prepare_state(&r.spec, n)?;
    let mut v = matrix_json(&rho);
    v["state"] = json!(r.spec.state);
    v["depolarizing_p"] = json!(p);
    emit(r.path("out"), &v)
}

fn cmd_sample(r: &Resolved) -> anyhow::Result<()> {
    let n = r.single_qubit_count()?;
    let prepared = prepare(&r.spec, n)?;
    let out = r.need("out")?;
    prepared
        .data
        .save(out)
        .stage("output")
        .with_context(|| format!("{}", out.display()))?;
    eprintln!("wrote {} shots to {}", prepared.data.len(), out.display());
    Ok(())
}

fn cmd_train(r: &Resolved) -> anyhow::Result<()> {
    let data = load_data(r)?;
    let cfg = TrainingConfig {
        seed: r.spec.seed,
        ..r.spec.training.clone()
    };
    let model = train::<f64>(&data, &cfg).stage("train")?;
    let ck = Checkpoint {
        params: model.params,
        provenance: Some(CheckpointProvenance {
            dataset_sha256: data.content_hash(),
            n_qubits: data.n_qubits(),
            config: cfg,
        }),
    };
    let out = r.need("out")?;
    ck.save(out)
        .stage("output")
        .with_context(|| format!("{}", out.display()))?;
    let last = model.trace.epochs.last();
    eprintln!(
        "trained {} epochs ({:?}), best epoch {}, train loss {:.5}",
        model.trace.epochs.len(),
        model.trace.stop,
        model.trace.best_epoch,
        last.map_or(f64::NAN, |e| e.train_loss)
    );
    Ok(())
}

fn model_distribution(ck: &Checkpoint<f64>, n_hint: Option<usize>) -> anyhow::Result<ProbDist64> {
    let n = match (&ck.provenance, n_hint) {
        (Some(p), _) => p.n_qubits,
        (None, Some(n)) => n,
        (None, None) => return Err(usage("checkpoint has no provenance; pass --qubits")),
    };
    Ok(exact_distribution(&ck.params, n).stage("reconstruct")?)
}

fn cmd_reconstruct(r: &Resolved) -> anyhow::Result<()> {
    let (dist, source) = match (r.path("model"), r.path("data")) {
        (Some(_), _) => (
            model_distribution(&load_model(r)?, r.spec.qubits.first().copied())?,
            "model",
        ),
        (None, Some(_)) => (
            empirical_distribution(&load_data(r)?).stage("reconstruct")?,
            "data",
        ),
        (None, None) => return Err(usage("reconstruct needs --model or --data")),
    };
    let view = if dist.alphabet() == 6 {
        dist.coarse_grain_p6_to_p4()?
    } else {
        dist
    };
    let fit = mle_project(&view, &make_povm(PovmKind::Pauli4), &r.spec.mle).stage("reconstruct")?;
    let mut v = matrix_json(&fit.rho);
    v["source"] = json!(source);
    v["objective"] = json!(fit.objective);
    v["initial_objective"] = json!(fit.initial_objective);
    v["iterations"] = json!(fit.iterations);
    v["converged"] = json!(fit.converged);
    emit(r.path("out"), &v)
}

fn cmd_metrics(r: &Resolved, explicit_target: bool) -> anyhow::Result<()> {
    let ck = load_model(r)?;
    let data = load_data(r)?;
    let n = data.n_qubits();
    let model = model_distribution(&ck, Some(n))?;
    if model.n_qubits() != n || model.alphabet() != data.alphabet() {
        return Err(usage("model and data shapes differ"));
    }
    let empirical = empirical_distribution(&data).stage("metrics")?;
    let mut v = json!({
        "n_qubits": n,
        "f_c": classical_fidelity(&model, &empirical).stage("metrics")?,
        "correlations": correlations_json(&model)?,
    });
    if let Some(p) = &ck.provenance {
        v["dataset_matches_model"] = json!(p.dataset_sha256 == data.content_hash());
    }
    if explicit_target {
        let (ideal, rho, _) = prepare_state(&r.spec, n)?;
        let view = if model.alphabet() == 6 {
            model.coarse_grain_p6_to_p4()?
        } else {
            model
        };
        let fit =
            mle_project(&view, &make_povm(PovmKind::Pauli4), &r.spec.mle).stage("reconstruct")?;
        v["f_q"] = json!(quantum_fidelity(&fit.rho, &rho).stage("metrics")?);
        v["f_q_ideal"] =
            json!(quantum_fidelity(&fit.rho, &DensityMatrix::from_pure(&ideal)).stage("metrics")?);
    }
    emit(r.path("out"), &v)
}

fn cmd_tomography(r: &Resolved) -> anyhow::Result<()> {
    let n = r.single_qubit_count()?;
    let (record, _) = run_tomography(&r.spec, n)?;
    emit(r.path("out"), &serde_json::to_value(record)?)
}

fn cmd_scaling(r: &Resolved) -> anyhow::Result<()> {
    let report = run_scaling(&r.spec)?;
    let v = serde_json::to_value(&report)?;
    emit(r.path("out"), &v)?;
    let prefix = r
        .path("csv")
        .map(Path::to_path_buf)
        .or_else(|| r.path("out").map(|p| p.with_extension("")));
    if let Some(prefix) = prefix {
        let name = |suffix: &str| {
            let mut s = prefix.clone().into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        };
        write_cells_csv(
            &report,
            fs::File::create(name(".cells.csv")).context("output")?,
        )
        .stage("output")?;
        write_series_csv(
            &report,
            fs::File::create(name(".series.csv")).context("output")?,
        )
        .stage("output")?;
    }
    for s in &report.series {
        let show = |ns: &Option<qtomo::harness::NsStar>| match ns {
            Some(ns) if ns.censored => format!("> {}", ns.curve.last().map_or(0, |p| p.shots)),
            Some(ns) => format!("{}", ns.value.unwrap_or(0)),
            None => "-".into(),
        };
        eprintln!(
            "N={} model N_s*={} baseline N_s*={}",
            s.n_qubits,
            show(&s.rnn),
            show(&s.baseline)
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Prepare(o) => cmd_prepare(&resolve(&o, false)?),
        Command::Sample(o) => cmd_sample(&resolve(&o, false)?),
        Command::Train(o) => cmd_train(&resolve(&o, false)?),
        Command::Reconstruct(o) => cmd_reconstruct(&resolve(&o, false)?),
        Command::Metrics(o) => {
            let explicit = o.state.is_some() || o.noise_depol.is_some() || o.config.is_some();
            cmd_metrics(&resolve(&o, false)?, explicit)
        }
        Command::Tomography(o) => cmd_tomography(&resolve(&o, false)?),
        Command::Scaling(o) => cmd_scaling(&resolve(&o, true)?),
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<Usage>().is_some() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
