//! `rssi-predict` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input or parameters, 2 I/O failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rssi_predict::atpc::{run_closed_loop, AtpcConfig, Policy};
use rssi_predict::config::KeyValueConfig;
use rssi_predict::error::{Error, Result};
use rssi_predict::eval::evaluate_methods;
use rssi_predict::linksim::{
    apply_loss, generate_trace, ChannelModel, LossKind, LossModel, RadioProfile,
};
use rssi_predict::predictor::{predict, Anchor, Method, PredictorModel, RefitConfig};
use rssi_predict::stats::{moment_set_at_lag, sample_acf, DEFAULT_MIN_PAIRS};
use rssi_predict::trace::{derivative_series, ingest_csv, Trace};

const DEFAULT_INTERVAL_S: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(
    name = "rssi-predict",
    version,
    about = "RSSI prediction and adaptive power control"
)]
struct Cli {
    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Autocovariance of a trace as CSV.
    Acf(AcfArgs),
    /// Synthetic trace from a channel preset.
    Simulate(SimulateArgs),
    /// Fit a predictor at one lag and dump it as JSON.
    Fit(FitArgs),
    /// Predict from a fitted model and an anchor.
    Predict(PredictArgs),
    /// Walk-forward RMSE per lag and method.
    Evaluate(EvaluateArgs),
    /// Closed-loop power control over a synthetic channel.
    Atpc(AtpcArgs),
}

#[derive(Args, Debug)]
struct AcfArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    max_lag: Option<usize>,
    /// Seconds per sequence step.
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    radio: Option<String>,
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `none`, `bernoulli:P` or `ge:P_GB,P_BG,LOSS_GOOD,LOSS_BAD`.
    #[arg(long)]
    loss: Option<String>,
    /// Transmit power, dBm. Defaults to the radio's maximum.
    #[arg(long)]
    tx: Option<f64>,
    #[arg(long)]
    path_loss: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    /// Lag in steps.
    #[arg(long)]
    lag: Option<u32>,
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    anchor_rssi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    anchor_slope: Option<f64>,
    #[arg(long)]
    steps: Option<u32>,
    /// Overrides the interval stored in the model file.
    #[arg(long)]
    interval: Option<f64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// One method or a comma-separated list.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lags: Option<String>,
    #[arg(long)]
    interval: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    refit_every: Option<usize>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.json`.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct AtpcArgs {
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    radio: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    packets: Option<usize>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    max_missed: Option<u32>,
    #[arg(long)]
    method: Option<String>,
    /// `adaptive` or `always_max`.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    path_loss: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag value if given, else the config file's, else the default.
struct Opts {
    file: KeyValueConfig,
}

impl Opts {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn need<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| Error::InvalidParameter(format!("missing --{key}")))
    }
}

/// Model dump plus the step length it was fitted with.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    nominal_interval_s: f64,
    lag_steps: u32,
    model: PredictorModel,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => KeyValueConfig::load(p)?,
        None => KeyValueConfig::default(),
    };
    let o = Opts { file };
    match cli.command {
        Command::Acf(a) => cmd_acf(&o, a),
        Command::Simulate(a) => cmd_simulate(&o, a),
        Command::Fit(a) => cmd_fit(&o, a),
        Command::Predict(a) => cmd_predict(&o, a),
        Command::Evaluate(a) => cmd_evaluate(&o, a),
        Command::Atpc(a) => cmd_atpc(&o, a),
    }
}

/// Runs `f` against `path`, or stdout when no path is given.
fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn load_trace(o: &Opts, input: Option<PathBuf>, interval: Option<f64>) -> Result<Trace> {
    let path: PathBuf = o.need(input, "in")?;
    let dt = o.or(interval, "interval", DEFAULT_INTERVAL_S)?;
    let ing = ingest_csv(&path, dt)?;
    if ing.rejected > 0 || ing.duplicates > 0 {
        eprintln!(
            "note: {} rows rejected, {} duplicate seq overwritten",
            ing.rejected, ing.duplicates
        );
    }
    Ok(ing.trace)
}

fn parse_method(s: &str) -> Result<Method> {
    s.trim().parse()
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad {what} `{p}`")))
        })
        .collect()
}

fn cmd_acf(o: &Opts, a: AcfArgs) -> Result<()> {
    let trace = load_trace(o, a.input, a.interval)?;
    let max_lag: usize = o.need(a.max_lag, "max-lag")?;
    let acf = sample_acf(&trace, max_lag)?;
    let out: Option<PathBuf> = o.get(a.out, "out")?;
    with_output(out.as_deref(), |w| acf.write_csv(w))
}

fn channel_for(
    o: &Opts,
    channel: Option<String>,
    seed: u64,
    path_loss: Option<f64>,
) -> Result<ChannelModel> {
    let name: String = o.or(channel, "channel", "swell".to_string())?;
    let mut ch = ChannelModel::preset(&name, seed)?;
    if let Some(pl) = o.get(path_loss, "path-loss")? {
        ch = ch.with_path_loss(pl);
    }
    Ok(ch)
}

fn loss_for(o: &Opts, loss: Option<String>, seed: u64) -> Result<LossModel> {
    let text: String = o.or(loss, "loss", "none".to_string())?;
    Ok(LossModel {
        kind: LossKind::from_str(&text)?,
        // Decorrelated from the channel stream.
        seed: seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    })
}

fn cmd_simulate(o: &Opts, a: SimulateArgs) -> Result<()> {
    let seed = o.or(a.seed, "seed", 0)?;
    let radio = RadioProfile::builtin(&o.or(a.radio, "radio", "cc2538".to_string())?)?;
    let packets = o.or(a.packets, "packets", 1000)?;
    let tx = o.or(a.tx, "tx", radio.max_tx_dbm)?;
    let channel = channel_for(o, a.channel, seed, a.path_loss)?;
    let loss = loss_for(o, a.loss, seed)?;
    let trace = generate_trace(&channel, &radio, tx, packets)?;
    let trace = apply_loss(&trace, &loss)?;
    let out: Option<PathBuf> = o.get(a.out, "out")?;
    with_output(out.as_deref(), |w| trace.write_csv(w))
}

fn cmd_fit(o: &Opts, a: FitArgs) -> Result<()> {
    let trace = load_trace(o, a.input, a.interval)?;
    let method = parse_method(&o.or(a.method, "method", "orthonormal".to_string())?)?;
    let lag: u32 = o.need(a.lag, "lag")?;
    if lag < 1 {
        return Err(Error::InvalidParameter("--lag must be at least 1".into()));
    }
    let deriv = derivative_series(&trace)?;
    let m = moment_set_at_lag(&trace, &deriv, lag as usize, DEFAULT_MIN_PAIRS)?;
    let model = method.fit(&m)?;
    let file = ModelFile {
        nominal_interval_s: trace.nominal_interval(),
        lag_steps: lag,
        model,
    };
    let text = serde_json::to_string_pretty(&file)?;
    let out: Option<PathBuf> = o.get(a.out, "out")?;
    with_output(out.as_deref(), |w| writeln!(w, "{text}"))
}

fn cmd_predict(o: &Opts, a: PredictArgs) -> Result<()> {
    let path: PathBuf = o.need(a.model, "model")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let rssi: f64 = o.need(a.anchor_rssi, "anchor-rssi")?;
    let slope: f64 = o.need(a.anchor_slope, "anchor-slope")?;
    let steps = o.or(a.steps, "steps", file.lag_steps)?;
    let dt = o.or(a.interval, "interval", file.nominal_interval_s)?;
    let anchor = Anchor {
        t: 0.0,
        rssi,
        slope,
    };
    let p = predict(&file.model, anchor, steps, dt)?;
    let mse = p.mse.map(|v| format!("{v:.6}")).unwrap_or_default();
    with_output(None, |w| {
        writeln!(w, "steps,t_target_s,predicted_dbm,analytic_mse_db2")?;
        writeln!(
            w,
            "{},{:.6},{:.6},{}",
            p.steps_ahead, p.t_target, p.value, mse
        )
    })
}

fn cmd_evaluate(o: &Opts, a: EvaluateArgs) -> Result<()> {
    let trace = load_trace(o, a.input, a.interval)?;
    let methods: Vec<Method> = o
        .or(a.method, "method", "orthonormal".to_string())?
        .split(',')
        .map(parse_method)
        .collect::<Result<_>>()?;
    let lags: Vec<u32> = parse_list(&o.or(a.lags, "lags", "1,2,3".to_string())?, "lag")?;
    let defaults = RefitConfig::default();
    let refit = RefitConfig {
        window: o.or(a.window, "window", defaults.window)?,
        refit_every: o.or(a.refit_every, "refit-every", defaults.refit_every)?,
        ..defaults
    };
    let report = evaluate_methods(&trace, &methods, &lags, refit)?;
    let prefix = o.or(a.out, "out", "evaluation".to_string())?;
    let csv_path = PathBuf::from(format!("{prefix}.csv"));
    let json_path = PathBuf::from(format!("{prefix}.json"));
    with_output(Some(&csv_path), |w| report.write_csv(w))?;
    let json = report.to_json()?;
    with_output(Some(&json_path), |w| writeln!(w, "{json}"))?;
    with_output(None, |w| report.write_csv(w))
}

fn cmd_atpc(o: &Opts, a: AtpcArgs) -> Result<()> {
    let seed = o.or(a.seed, "seed", 0)?;
    let radio = RadioProfile::builtin(&o.or(a.radio, "radio", "cc2538".to_string())?)?;
    let threshold: f64 = o.need(a.threshold, "threshold")?;
    let mut config = AtpcConfig::new(radio, threshold);
    config.margin_db = o.or(a.margin, "margin", config.margin_db)?;
    config.max_missed_acks = o.or(a.max_missed, "max-missed", config.max_missed_acks)?;
    if let Some(m) = o.get(a.method, "method")? {
        config.predictor_method = parse_method(&m)?;
    }
    let policy = match o.or(a.policy, "policy", "adaptive".to_string())?.as_str() {
        "adaptive" => Policy::Adaptive,
        "always_max" | "always-max" => Policy::AlwaysMax,
        other => return Err(Error::InvalidParameter(format!("unknown policy `{other}`"))),
    };
    let packets = o.or(a.packets, "packets", 2000)?;
    let channel = channel_for(o, a.channel, seed, a.path_loss)?;
    let loss = loss_for(o, a.loss, seed)?;
    let run = run_closed_loop(&config, &channel, &loss, packets, policy)?;
    let out: Option<PathBuf> = o.get(a.out, "out")?;
    with_output(out.as_deref(), |w| run.write_csv(w))?;
    let s = &run.summary;
    eprintln!(
        "packets {} delivered {} above_threshold {:.4} mean_tx_dbm {:.3} fallback {}",
        s.packets, s.delivered, s.above_threshold_frac, s.mean_tx_dbm, s.fallback_packets
    );
    Ok(())
}
