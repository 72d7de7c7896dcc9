//! `spikedrop` command-line driver: synthetic data, training, Monte-Carlo
//! dropout inference on either backend, single-run traces and KS reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spikedrop::convert::convert;
use spikedrop::data::{load_csv, save_csv, standardize, synth_combo, train_test_split, SynthConfig};
use spikedrop::mcinfer::{predictive_distributions, read_samples, write_samples, Backend};
use spikedrop::model::ModelFile;
use spikedrop::network::{sample_masks, spec_without_dropout, AnalogNetwork, DropMasks, NetworkSpec};
use spikedrop::neuron::NeuronParams;
use spikedrop::snn::{simulate, summarize_trace, write_trace, SimConfig};
use spikedrop::stats::compare_samples;
use spikedrop::training::{train, write_history, TrainConfig};
use spikedrop::{AnalogNetwork64, Dataset64, ModelFile64, SimConfig64};

#[derive(Parser)]
#[command(name = "spikedrop", version, about = "Monte-Carlo dropout on rate and spiking networks")]
struct Cli {
    /// Worker threads for sampling (default: all cores).
    #[arg(long, global = true, env = "SPIKEDROP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-drug regression dataset.
    GenData(GenDataArgs),
    /// Train a SoftLIF network and write a model file.
    Train(TrainArgs),
    /// Draw Monte-Carlo dropout predictions for every row of a dataset.
    Infer(InferArgs),
    /// Dump the output potential of one spiking simulation.
    Trace(TraceArgs),
    /// KS-compare two samples files observation by observation.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    cell_dim: usize,
    #[arg(long, default_value_t = 8)]
    drug_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data (CSV with header).
    #[arg(long)]
    data: PathBuf,
    /// Network layout as JSON; inferred from the column names when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Where to write the per-epoch loss history.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value = "growth")]
    target: String,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Keep probability of every hidden layer (ignored with --spec).
    #[arg(long, default_value_t = 0.8)]
    keep_prob: f64,
    #[arg(long, default_value_t = 16)]
    encoder_width: usize,
    #[arg(long, default_value_t = 32)]
    head_width: usize,
    /// Hidden widths for data without cell/drug_a/drug_b columns.
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.02)]
    gamma: f64,
    /// Output gain of every SoftLIF neuron.
    #[arg(long, default_value_t = 0.003)]
    amplitude: f64,
    /// Train on the raw features instead of standardising them.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct SimArgs {
    /// Seconds per simulation tick.
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    burnin: usize,
    /// Synaptic time constant in seconds.
    #[arg(long, default_value_t = 0.005)]
    tausyn: f64,
    /// Seed of the initial membrane voltages; 0 starts at rest.
    #[arg(long, default_value_t = 1)]
    init_seed: u64,
}

impl SimArgs {
    fn config(&self) -> SimConfig64 {
        SimConfig {
            dt: self.dt,
            n_steps: self.steps,
            burn_in_steps: self.burnin,
            tau_syn: self.tausyn,
            init_seed: self.init_seed,
        }
    }

    fn header(&self) -> Vec<(String, String)> {
        vec![
            kv("dt", self.dt),
            kv("steps", self.steps),
            kv("burnin", self.burnin),
            kv("tausyn", self.tausyn),
            kv("init_seed", self.init_seed),
        ]
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analog,
    Spiking,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Analog => Backend::Analog,
            BackendArg::Spiking => Backend::Spiking,
        }
    }
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "growth")]
    target: String,
    #[arg(long, value_enum, default_value = "analog")]
    backend: BackendArg,
    #[arg(long, default_value_t = 100)]
    draws: usize,
    /// Base mask seed; draw k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "samples.csv")]
    out: PathBuf,
    /// Only the first N observations.
    #[arg(long)]
    limit: Option<usize>,
    /// Evaluate with every keep probability set to one.
    #[arg(long)]
    no_dropout: bool,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "growth")]
    target: String,
    /// Zero-based observation index.
    #[arg(long, default_value_t = 0)]
    row: usize,
    /// Dropout mask seed; without it every neuron is active.
    #[arg(long)]
    mask_seed: Option<u64>,
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn gen_data(args: &GenDataArgs) -> Result<()> {
    let cfg = SynthConfig {
        n: args.n,
        cell_dim: args.cell_dim,
        drug_dim: args.drug_dim,
        noise_std: args.noise,
        seed: args.seed,
    };
    let data: Dataset64 = synth_combo(&cfg)?;
    save_csv(&data, &args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    eprintln!("wrote {} rows to {}", data.len(), args.out.display());
    Ok(())
}

fn default_spec(data: &Dataset64, args: &TrainArgs) -> NetworkSpec {
    let slice = |name: &str| data.slice_layout.iter().find(|s| s.name == name);
    match (slice("cell"), slice("drug_a"), slice("drug_b")) {
        (Some(c), Some(a), Some(b))
            if data.slice_layout.len() == 3 && c.offset == 0 && a.offset == c.len && b.offset == c.len + a.len && a.len == b.len =>
        {
            NetworkSpec::combo(c.len, a.len, args.encoder_width, args.head_width, args.keep_prob)
        }
        _ => NetworkSpec::mlp(data.n_features(), &args.hidden, 1, args.keep_prob),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data: Dataset64 = load_csv(&args.data, &args.target).with_context(|| format!("cannot load {}", args.data.display()))?;
    let spec = match &args.spec {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader(std::io::BufReader::new(file)).with_context(|| format!("bad spec {}", path.display()))?
        }
        None => default_spec(&data, args),
    };
    if spec.input_dim() != data.n_features() {
        bail!("spec expects {} inputs, data has {} features", spec.input_dim(), data.n_features());
    }
    if !(0.0..1.0).contains(&args.test_fraction) {
        bail!("--test-fraction must be in [0, 1)");
    }
    let (train_raw, test_raw) = train_test_split(&data, args.test_fraction, args.seed);
    let (train_set, test_set, scaler) = if args.no_standardize {
        (train_raw, test_raw, None)
    } else {
        let (tr, mut others, scaler) = standardize(&train_raw, &[&test_raw])?;
        (tr, others.remove(0), Some(scaler))
    };
    let params = NeuronParams::default().with_gamma(args.gamma).with_amplitude(args.amplitude);
    params.validate()?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let test = (!test_set.is_empty()).then_some(&test_set);
    let outcome = train(&spec, &train_set, test, &cfg, &params)?;

    let net = AnalogNetwork::new(spec, params, outcome.weights)?;
    let mut file = ModelFile::analog(&net);
    if let Some(s) = scaler {
        file = file.with_scaler(s);
    }
    file.save(&args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    if let Some(path) = &args.history {
        let mut out = create(path)?;
        write_history(&outcome.history, &mut out)?;
        out.flush()?;
    }
    let last = outcome.history.last().expect("history has the untrained epoch");
    match last.test_mse {
        Some(t) => eprintln!("epoch {}: train MSE {:.6}, test MSE {:.6}", last.epoch, last.train_mse, t),
        None => eprintln!("epoch {}: train MSE {:.6}", last.epoch, last.train_mse),
    }
    Ok(())
}

/// Loads a model and the rows of a dataset, standardised as at training time.
fn load_inputs(model: &Path, data: &Path, target: &str) -> Result<(AnalogNetwork64, Vec<Vec<f64>>)> {
    let file = ModelFile64::load(model).with_context(|| format!("cannot load model {}", model.display()))?;
    let scaler = file.input_scaler.clone();
    let net = file.into_analog()?;
    let data: Dataset64 = load_csv(data, target).with_context(|| format!("cannot load {}", data.display()))?;
    if data.n_features() != net.spec.input_dim() {
        bail!("model expects {} features, data has {}", net.spec.input_dim(), data.n_features());
    }
    let mut rows = data.features;
    if let Some(s) = scaler {
        rows.iter_mut().for_each(|r| s.apply(r));
    }
    Ok((net, rows))
}

fn cmd_infer(args: &InferArgs) -> Result<()> {
    let (mut net, mut rows) = load_inputs(&args.model, &args.data, &args.target)?;
    if let Some(n) = args.limit {
        rows.truncate(n);
    }
    if rows.is_empty() {
        bail!("no observations to evaluate");
    }
    if args.no_dropout {
        net = net.without_dropout();
    }
    let backend = Backend::from(args.backend);
    let sim = args.sim.config();
    let sets = predictive_distributions(&net, &rows, args.draws, args.seed, backend, Some(&sim))?;

    let mut header = vec![
        kv("backend", backend),
        kv("base_seed", args.seed),
        kv("draws", args.draws),
        kv("observations", rows.len()),
        kv("no_dropout", args.no_dropout),
    ];
    if backend == Backend::Spiking {
        header.extend(args.sim.header());
    }
    let mut out = create(&args.out)?;
    write_samples(&sets, &header, &mut out)?;
    out.flush()?;
    eprintln!("wrote {} predictions to {}", rows.len() * args.draws, args.out.display());
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let (net, rows) = load_inputs(&args.model, &args.data, &args.target)?;
    let Some(x) = rows.get(args.row) else {
        bail!("--row {} is out of range: the data has {} rows", args.row, rows.len());
    };
    let masks = match args.mask_seed {
        Some(seed) => sample_masks(&net.spec, seed),
        None => DropMasks::all_active(&spec_without_dropout(&net.spec)),
    };
    let dnn = net.forward(x, Some(&masks))?.output[0];
    let sim = args.sim.config();
    let trace = simulate(&convert(&net)?, x, &masks, &sim)?;
    let snn = summarize_trace(&trace, sim.burn_in_steps)?[0];

    let mut header = vec![
        kv("row", args.row),
        kv("mask_seed", args.mask_seed.map_or("none".to_string(), |s| s.to_string())),
        kv("dnn_output", dnn),
        kv("snn_mean", snn),
    ];
    header.extend(args.sim.header());
    let mut out = create(&args.out)?;
    write_trace(&trace, &header, &mut out)?;
    out.flush()?;
    eprintln!("dnn output {dnn:.6}, snn post-burn-in mean {snn:.6}");
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let read = |path: &Path| -> Result<_> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Ok(read_samples(std::io::BufReader::new(file), &path.display().to_string())?)
    };
    let (a, b) = (read(&args.a)?, read(&args.b)?);
    let ids = |sets: &[spikedrop::mcinfer::SampleSet]| sets.iter().map(|s| s.observation_id).collect::<Vec<_>>();
    if ids(&a) != ids(&b) {
        bail!("the two samples files cover different observation ids");
    }
    if a.is_empty() {
        bail!("samples files contain no observations");
    }
    let pairs: Vec<(usize, &[f64], &[f64])> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x.observation_id, x.draws.as_slice(), y.draws.as_slice()))
        .collect();
    let report = compare_samples(&pairs, args.bins)?;
    let mut out = create(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    let u = &report.uniformity;
    eprintln!(
        "{} observations: {:.1}% with p < 0.05, KS-vs-uniform p = {:.4}",
        report.observations.len(),
        100.0 * u.fraction_below_0_05,
        u.ks_vs_uniform_p
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
