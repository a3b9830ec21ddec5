//! Command-line front end: load a model, run parameter or time sweeps of the
//! correlators, compare against the master-equation oracle, and emit CSV.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use qcorr_core::amplitude::DriveTone;
use qcorr_core::correlator;
use qcorr_core::engine::Engine;
use qcorr_core::error::{Error, Result};
use qcorr_core::lindblad::{FockCutoff, LindbladOracle, OperatorSpec, OracleDrive};
use qcorr_core::model::{ModelSpec, SystemModel};
use qcorr_core::models::builtin_model;
use qcorr_core::sweep::{self, apply_param, CsvRow, SweepSpec};
use qcorr_core::VERSION;

#[derive(Parser)]
#[command(
    name = "qcorr",
    version,
    about = "Photon correlation functions of weakly driven open quantum systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transmission and equal-time correlations g2..gn at the readout channel.
    Correlation(CorrelationArgs),
    /// Single-photon transmission at the readout channel.
    Transmission(TransmissionArgs),
    /// Time-resolved correlation under a multi-tone drive.
    Dynamical(DynamicalArgs),
    /// Cross-correlation across a list of readout channels.
    Cross(CrossArgs),
    /// Transmission and correlations of the driven channel itself.
    SameChannel(SameChannelArgs),
    /// Compare analytic correlators against the master-equation oracle.
    OracleCheck(OracleCheckArgs),
    /// Print a model (builtin or file) as normalized JSON.
    ExportModel(ExportArgs),
}

/// Where the model comes from and spec-level overrides applied before it is
/// validated and frozen.
#[derive(Args)]
struct ModelSource {
    /// Path to a model JSON file.
    #[arg(long, conflicts_with = "builtin")]
    model: Option<PathBuf>,
    /// Name of a built-in model (see `export-model --builtin` for the list).
    #[arg(long)]
    builtin: Option<String>,
    /// Override the resolvent regularization ε (absolute).
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ModelSource {
    fn load_spec(&self) -> Result<ModelSpec> {
        let mut spec = match (&self.model, &self.builtin) {
            (Some(path), None) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<ModelSpec>(&text)?
            }
            (None, Some(name)) => builtin_model(name)?.spec().clone(),
            _ => {
                return Err(Error::InvalidArgument(
                    "exactly one of --model and --builtin is required".into(),
                ))
            }
        };
        if let Some(eps) = self.epsilon {
            spec.options.epsilon = Some(eps);
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct CorrelationArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Highest correlation order n (columns g2..gn).
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Readout channel id.
    #[arg(long)]
    readout: String,
    /// Sweep `param:start:stop:count` over a model parameter.
    #[arg(long)]
    sweep: Option<String>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TransmissionArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    readout: String,
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DynamicalArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Correlation order n.
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long)]
    readout: String,
    /// Time grid `t:start:stop:count`.
    #[arg(long)]
    sweep: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrossArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Readout channel ids, one per detected photon (repeats allowed).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    outputs: Vec<String>,
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SameChannelArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Channel to drive and observe; defaults to the model's driven channel.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    source: ModelSource,
    /// Highest correlation order to validate.
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long)]
    readout: String,
    /// Comma-separated drive strengths Ω for the oracle runs.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1e-3")]
    drive_amp: Vec<f64>,
    /// Per-boson-site Fock cutoff for the oracle.
    #[arg(long, default_value_t = 6)]
    cutoff: usize,
    /// Optional cap on the total excitation number.
    #[arg(long)]
    total_cap: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Correlation(args) => cmd_correlation(args),
        Command::Transmission(args) => cmd_transmission(args),
        Command::Dynamical(args) => cmd_dynamical(args),
        Command::Cross(args) => cmd_cross(args),
        Command::SameChannel(args) => cmd_same_channel(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
        Command::ExportModel(args) => cmd_export_model(args),
    }
}

/// Drive tones declared in the model, resolved to channel indices.
fn drive_tones(model: &SystemModel) -> Result<Vec<DriveTone>> {
    let tones: Vec<DriveTone> = model
        .drives()
        .iter()
        .map(|d| DriveTone {
            channel: d.channel,
            amplitude: d.relative_amplitude,
            frequency: d.frequency,
        })
        .collect();
    if tones.is_empty() {
        return Err(Error::InvalidArgument(
            "the model declares no drives; add a `drives` entry".into(),
        ));
    }
    Ok(tones)
}

fn single_tone(model: &SystemModel) -> Result<DriveTone> {
    let tones = drive_tones(model)?;
    if tones.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "this command needs exactly one drive tone, the model declares {}",
            tones.len()
        )));
    }
    Ok(tones[0])
}

fn metadata(model: &SystemModel, command: &str, sweep: Option<&str>) -> Vec<(String, String)> {
    let mut meta = vec![
        ("qcorr-version".to_string(), VERSION.to_string()),
        ("model-sha256".to_string(), model.sha256_hex()),
        ("command".to_string(), command.to_string()),
    ];
    if let Some(s) = sweep {
        meta.push(("sweep".to_string(), s.to_string()));
    }
    meta
}

fn write_output(path: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Run `eval` at every sweep point (or once, for no sweep), preserving point
/// order. Drive-only sweeps reuse one engine and re-derive the tones per
/// point; anything else rebuilds the model.
fn sweep_rows<F>(base: &ModelSpec, sweep: &Option<String>, eval: F) -> Result<(String, Vec<CsvRow>)>
where
    F: Fn(&Engine, &[DriveTone], f64) -> Result<CsvRow> + Sync,
{
    let workers = sweep::workers_from_env();
    match sweep {
        None => {
            let engine = Engine::new(SystemModel::from_spec(base.clone())?);
            let tones = drive_tones(engine.model())?;
            let row = eval(&engine, &tones, 0.0)?;
            Ok(("point".to_string(), vec![row]))
        }
        Some(text) => {
            let spec = SweepSpec::parse(text)?;
            let points = spec.values();
            let rows = if spec.drive_only() {
                let engine = Engine::new(SystemModel::from_spec(base.clone())?);
                sweep::run_sweep(&points, workers, |v| {
                    let mutated = apply_param(base, &spec.param, v)?;
                    let model = engine.model();
                    let tones: Vec<DriveTone> = mutated
                        .drives
                        .iter()
                        .map(|d| {
                            Ok(DriveTone {
                                channel: model.channel_id_to_index(&d.channel)?,
                                amplitude: d.relative_amplitude,
                                frequency: d.frequency,
                            })
                        })
                        .collect::<Result<_>>()?;
                    eval(&engine, &tones, v)
                })?
            } else {
                sweep::run_sweep(&points, workers, |v| {
                    let mutated = apply_param(base, &spec.param, v)?;
                    let engine = Engine::new(SystemModel::from_spec(mutated)?);
                    let tones = drive_tones(engine.model())?;
                    eval(&engine, &tones, v)
                })?
            };
            Ok((spec.param.clone(), rows))
        }
    }
}

fn cmd_correlation(args: CorrelationArgs) -> Result<()> {
    if args.order < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {}",
            args.order
        )));
    }
    let base = args.source.load_spec()?;
    let probe = SystemModel::from_spec(base.clone())?;
    let readout = probe.channel_id_to_index(&args.readout)?;
    let order = args.order;
    let (param, rows) = sweep_rows(&base, &args.sweep, |engine, tones, v| {
        let mut results = vec![correlator::transmission_multi(engine, tones, readout)?];
        for k in 2..=order {
            results.push(correlator::etcf_multi(engine, k, tones, readout, 0.0)?);
        }
        Ok(CsvRow::from_results(v, &results))
    })?;
    let mut columns = vec![param, "T".to_string()];
    columns.extend((2..=order).map(|k| format!("g{k}")));
    let mut buf = Vec::new();
    sweep::write_csv(
        &mut buf,
        &metadata(&probe, "correlation", args.sweep.as_deref()),
        &columns,
        &rows,
    )?;
    write_output(&args.out, &buf)
}

fn cmd_transmission(args: TransmissionArgs) -> Result<()> {
    let base = args.source.load_spec()?;
    let probe = SystemModel::from_spec(base.clone())?;
    let readout = probe.channel_id_to_index(&args.readout)?;
    let (param, rows) = sweep_rows(&base, &args.sweep, |engine, tones, v| {
        let t = correlator::transmission_multi(engine, tones, readout)?;
        Ok(CsvRow::from_results(v, &[t]))
    })?;
    let columns = vec![param, "T".to_string()];
    let mut buf = Vec::new();
    sweep::write_csv(
        &mut buf,
        &metadata(&probe, "transmission", args.sweep.as_deref()),
        &columns,
        &rows,
    )?;
    write_output(&args.out, &buf)
}

fn cmd_dynamical(args: DynamicalArgs) -> Result<()> {
    if args.order < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {}",
            args.order
        )));
    }
    let grid = SweepSpec::parse(&args.sweep)?;
    if grid.param != "t" {
        return Err(Error::InvalidArgument(format!(
            "dynamical sweeps run over time; use `t:start:stop:count`, got parameter `{}`",
            grid.param
        )));
    }
    let base = args.source.load_spec()?;
    let engine = Engine::new(SystemModel::from_spec(base)?);
    let readout = engine.model().channel_id_to_index(&args.readout)?;
    let tones = drive_tones(engine.model())?;
    let order = args.order;
    let rows = sweep::run_sweep(&grid.values(), sweep::workers_from_env(), |t| {
        let g = correlator::etcf_multi(&engine, order, &tones, readout, t)?;
        Ok(CsvRow::from_results(t, &[g]))
    })?;
    let columns = vec!["t".to_string(), format!("g{order}")];
    let mut buf = Vec::new();
    sweep::write_csv(
        &mut buf,
        &metadata(engine.model(), "dynamical", Some(&args.sweep)),
        &columns,
        &rows,
    )?;
    write_output(&args.out, &buf)
}

fn cmd_cross(args: CrossArgs) -> Result<()> {
    let base = args.source.load_spec()?;
    let probe = SystemModel::from_spec(base.clone())?;
    let outputs: Vec<usize> = args
        .outputs
        .iter()
        .map(|id| probe.channel_id_to_index(id))
        .collect::<Result<_>>()?;
    let (param, rows) = sweep_rows(&base, &args.sweep, |engine, tones, v| {
        if tones.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "cross-correlation needs exactly one drive tone, the model declares {}",
                tones.len()
            )));
        }
        let g =
            correlator::cross_correlation(engine, &outputs, tones[0].frequency, tones[0].channel)?;
        Ok(CsvRow::from_results(v, &[g]))
    })?;
    let columns = vec![param, "g_cross".to_string()];
    let mut buf = Vec::new();
    sweep::write_csv(
        &mut buf,
        &metadata(&probe, "cross", args.sweep.as_deref()),
        &columns,
        &rows,
    )?;
    write_output(&args.out, &buf)
}

fn cmd_same_channel(args: SameChannelArgs) -> Result<()> {
    if args.order < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {}",
            args.order
        )));
    }
    let base = args.source.load_spec()?;
    let probe = SystemModel::from_spec(base.clone())?;
    let channel = match &args.channel {
        Some(id) => probe.channel_id_to_index(id)?,
        None => single_tone(&probe)?.channel,
    };
    let order = args.order;
    let (param, rows) = sweep_rows(&base, &args.sweep, |engine, tones, v| {
        if tones.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "same-channel correlation needs exactly one drive tone, the model declares {}",
                tones.len()
            )));
        }
        let omega_d = tones[0].frequency;
        let mut results = vec![correlator::transmission_same_channel(
            engine, omega_d, channel,
        )?];
        for k in 2..=order {
            results.push(correlator::etcf_same_channel(engine, k, omega_d, channel)?);
        }
        Ok(CsvRow::from_results(v, &results))
    })?;
    let mut columns = vec![param, "T".to_string()];
    columns.extend((2..=order).map(|k| format!("g{k}")));
    let mut buf = Vec::new();
    sweep::write_csv(
        &mut buf,
        &metadata(&probe, "same-channel", args.sweep.as_deref()),
        &columns,
        &rows,
    )?;
    write_output(&args.out, &buf)
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<()> {
    if args.order < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {}",
            args.order
        )));
    }
    if args.drive_amp.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument(
            "drive strengths must be positive".into(),
        ));
    }
    let base = args.source.load_spec()?;
    let model = SystemModel::from_spec(base)?;
    let readout = model.channel_id_to_index(&args.readout)?;
    let engine = Engine::new(Arc::clone(&model));
    let tones = drive_tones(&model)?;

    let mut report = String::new();
    for (key, value) in metadata(&model, "oracle-check", None) {
        report.push_str(&format!("# {key}: {value}\n"));
    }
    report.push_str(&format!(
        "# cutoff: per-boson {}, total {}\n",
        args.cutoff,
        args.total_cap
            .map_or("unbounded".to_string(), |t| t.to_string())
    ));

    let analytic: Vec<f64> = (2..=args.order)
        .map(|k| Ok(correlator::etcf_multi(&engine, k, &tones, readout, 0.0)?.value))
        .collect::<Result<_>>()?;
    for (k, value) in (2..=args.order).zip(&analytic) {
        report.push_str(&format!(
            "order={k} analytic={}\n",
            sweep::format_float(*value)
        ));
    }

    let cutoff = match args.total_cap {
        Some(total) => FockCutoff::total(args.cutoff, total),
        None => FockCutoff::per_site(args.cutoff),
    };
    let oracle = LindbladOracle::new(Arc::clone(&model), cutoff)?;
    for &amp in &args.drive_amp {
        let drives: Vec<OracleDrive> = tones
            .iter()
            .map(|tone| OracleDrive {
                channel: tone.channel,
                amplitude: tone.amplitude * C64::new(amp, 0.0),
                frequency: tone.frequency,
            })
            .collect();
        let state = oracle.steady_state(&drives)?;
        let mut max_rel = 0.0f64;
        for (k, reference) in (2..=args.order).zip(&analytic) {
            let got = oracle.correlator_g_n(&state, OperatorSpec::Channel(readout), k)?;
            let rel = (got - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
            max_rel = max_rel.max(rel);
            report.push_str(&format!(
                "drive-amp={} order={k} oracle={} rel-error={}\n",
                sweep::format_float(amp),
                sweep::format_float(got),
                sweep::format_float(rel)
            ));
        }
        report.push_str(&format!(
            "drive-amp={} max-rel-error={}\n",
            sweep::format_float(amp),
            sweep::format_float(max_rel)
        ));
    }
    write_output(&args.out, report.as_bytes())
}

fn cmd_export_model(args: ExportArgs) -> Result<()> {
    let spec = args.source.load_spec()?;
    let model = SystemModel::from_spec(spec)?;
    write_output(&args.out, model.to_json_pretty().as_bytes())
}
