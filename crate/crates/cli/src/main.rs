use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use omgrand_core::dacp::{AmplitudeGrid, DesignObjective};
use omgrand_core::framing::{db_to_ratio, es_n0_for, plan_with_ns, DEFAULT_A_GRID};
use omgrand_core::io::{
    format_constellation, format_dacp, read_constellation_path, read_dacp_path,
};
use omgrand_core::sim::{operating_link, plan_point, planning_rng, run_sweep, tune_a, FrameSizing};
use omgrand_core::{assign_gray, build_code, build_constellation, design_dacp_with, ChannelParams};
use omgrand_core::{Scheme, SnrAxis, StopRule, SweepConfig};

#[derive(Parser)]
#[command(
    name = "omgrand",
    version,
    about = "Non-uniform constellation design, shaping and link simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design an amplitude distribution by the cutting-plane method.
    Design(DesignArgs),
    /// Quantize an amplitude distribution into a K-point constellation.
    Quantize(QuantizeArgs),
    /// Attach Huffman codewords to a constellation.
    Codebook(CodebookArgs),
    /// Print frame plans (Eb/N0, N_b, N_s, rate) for a list of SNRs.
    Frame(FrameArgs),
    /// Monte Carlo BER/SER sweep, written as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo sweep of uncoded 128-QAM, written as CSV.
    Qam(QamArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    /// I(A;R) of the amplitude channel.
    Amplitude,
    /// I(X;Y) of the complex channel with uniform phase.
    Complex,
}

impl From<Objective> for DesignObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Amplitude => DesignObjective::Amplitude,
            Objective::Complex => DesignObjective::Complex,
        }
    }
}

#[derive(Args)]
struct DesignArgs {
    /// Spacing of the amplitude grid; the grid is {0, step, ..., (count-1)·step}.
    #[arg(long)]
    grid_step: f64,
    #[arg(long)]
    grid_count: usize,
    /// Total complex noise variance.
    #[arg(long)]
    n0: f64,
    #[arg(long)]
    avg_power: f64,
    /// Stop once UB − LB falls below this (nats).
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Objective::Amplitude)]
    objective: Objective,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    /// DACP file written by `design`.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 128)]
    k: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct CodebookArgs {
    /// Constellation file written by `quantize`.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct StopArgs {
    /// Stop a point after this many bit errors...
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    /// ...but not before this many bits.
    #[arg(long, default_value_t = 0)]
    min_bits: u64,
    /// Hard cap on bits per point.
    #[arg(long, default_value_t = 100_000_000)]
    max_bits: u64,
}

impl StopArgs {
    fn rule(&self) -> StopRule {
        StopRule {
            min_bit_errors: self.min_errors,
            min_bits: self.min_bits,
            max_bits: self.max_bits,
        }
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SnrArgs {
    /// Comma-separated Eb/N0 values in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    eb_n0: Option<Vec<f64>>,
    /// Comma-separated Es/N0 values in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    es_n0: Option<Vec<f64>>,
}

impl SnrArgs {
    fn axis(&self) -> (SnrAxis, Vec<f64>) {
        match (&self.eb_n0, &self.es_n0) {
            (Some(v), _) => (SnrAxis::EbN0, v.clone()),
            (None, Some(v)) => (SnrAxis::EsN0, v.clone()),
            (None, None) => unreachable!("clap enforces the group"),
        }
    }
}

#[derive(Args)]
#[group(multiple = false)]
struct SizingArgs {
    /// Indel-model parameter a.
    #[arg(long)]
    a: Option<f64>,
    /// Choose a per point from the default grid by simulation.
    #[arg(long)]
    tune: bool,
    /// Fixed number of symbols per frame.
    #[arg(long)]
    ns: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads [default: available cores].
    #[arg(long, env = "OMGRAND_WORKERS")]
    workers: Option<usize>,
    /// CSV output; metadata goes to <output>.meta.
    #[arg(short, long)]
    output: PathBuf,
}

impl RunArgs {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "om-grand", value_parser = ["om-grand", "om-nocorrect", "qam128"])]
    scheme: String,
    /// Constellation file (codewords optional).
    #[arg(long)]
    constellation: Option<PathBuf>,
    #[command(flatten)]
    snr: SnrArgs,
    #[command(flatten)]
    sizing: SizingArgs,
    /// One-shot transmissions for the indel probability estimate.
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct QamArgs {
    #[command(flatten)]
    snr: SnrArgs,
    #[command(flatten)]
    stop: StopArgs,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct FrameArgs {
    #[arg(long)]
    constellation: PathBuf,
    /// Comma-separated Eb/N0 values in dB.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "20,18.75,17.5,16.25"
    )]
    eb_n0: Vec<f64>,
    /// Indel-model parameter a (default 0.05).
    #[arg(long, conflicts_with_all = ["tune", "ns"])]
    a: Option<f64>,
    /// Choose a per point by simulation.
    #[arg(long, conflicts_with = "ns")]
    tune: bool,
    /// Comma-separated symbol counts, one per Eb/N0 value.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Bit errors per candidate when tuning.
    #[arg(long, default_value_t = 100)]
    min_errors: u64,
    /// Bit cap per candidate when tuning.
    #[arg(long, default_value_t = 20_000_000)]
    max_bits: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(a) => design(a),
        Command::Quantize(a) => quantize(a),
        Command::Codebook(a) => codebook(a),
        Command::Frame(a) => frame(a),
        Command::Simulate(a) => simulate(a),
        Command::Qam(a) => qam(a),
    }
}

/// Writes through a sibling temporary file so a failed run leaves nothing
/// at `path`.
fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let name = path
        .file_name()
        .context("output path has no file name")?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    let result = (|| -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
        write(&mut f)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn design(a: DesignArgs) -> Result<()> {
    if a.grid_count < 2 {
        bail!("the grid needs at least two amplitudes");
    }
    let grid = AmplitudeGrid::uniform(a.grid_step, a.grid_count)?;
    let params = ChannelParams::new(a.n0, grid.peak(), a.avg_power)?;
    let d = design_dacp_with(&grid, &params, a.tol, a.max_iter, a.objective.into())?;
    write_atomic(&a.output, |w| w.write_all(format_dacp(&d).as_bytes()))?;
    println!(
        "iterations={} converged={} lower_bound={:.6} upper_bound={:.6} power={:.6}",
        d.trace.entries.len(),
        d.converged,
        d.mutual_information,
        d.upper_bound,
        d.distribution.power()
    );
    if !d.converged {
        eprintln!("warning: not converged within {} iterations", a.max_iter);
    }
    Ok(())
}

fn quantize(a: QuantizeArgs) -> Result<()> {
    let file =
        read_dacp_path(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let mut cons = build_constellation(&file.distribution, a.k)?;
    cons.design_n0 = Some(file.n0);
    cons.design_avg_power = Some(file.avg_power);
    cons.design_converged = file.converged;
    if file.converged == Some(false) {
        eprintln!("warning: {} holds an unconverged design", a.input.display());
    }
    let text = format_constellation(&cons, None)?;
    write_atomic(&a.output, |w| w.write_all(text.as_bytes()))?;
    let counts: Vec<String> = cons.rings().iter().map(|r| r.count.to_string()).collect();
    println!(
        "points={} rings={} energy={:.6}",
        cons.len(),
        counts.join(","),
        cons.average_energy()
    );
    Ok(())
}

fn codebook(a: CodebookArgs) -> Result<()> {
    let (cons, _) = read_constellation_path(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let code = assign_gray(&build_code(&cons.probabilities())?, &cons)?;
    let text = format_constellation(&cons, Some(&code))?;
    write_atomic(&a.output, |w| w.write_all(text.as_bytes()))?;
    println!(
        "entropy={:.6} mean_length={:.6} expected_pad_bits={:.6}",
        cons.entropy_bits(),
        code.mean_length(),
        code.expected_pad_bits()
    );
    Ok(())
}

fn frame(a: FrameArgs) -> Result<()> {
    let (cons, code) = read_constellation_path(&a.constellation)
        .with_context(|| format!("reading {}", a.constellation.display()))?;
    let (ops, code) = operating_link(&cons, code)?;
    if let Some(ns) = &a.ns {
        if ns.len() != a.eb_n0.len() {
            bail!(
                "--ns needs one value per Eb/N0 value ({} given, {} expected)",
                ns.len(),
                a.eb_n0.len()
            );
        }
    }
    let stop = StopRule {
        min_bit_errors: a.min_errors,
        min_bits: 0,
        max_bits: a.max_bits,
    };
    println!(
        "{:>10} {:>10} {:>8} {:>7} {:>6} {:>10}",
        "Eb/N0(dB)", "N_b", "N_s", "rate", "a", "p_indel"
    );
    for (k, &db) in a.eb_n0.iter().enumerate() {
        let plan = if let Some(ns) = &a.ns {
            let es = es_n0_for(db_to_ratio(db), ns[k] as f64, &ops)?;
            plan_with_ns(&ops, &code, es, ns[k], f64::NAN, None)?
        } else if a.tune {
            let t = tune_a(
                &ops,
                &code,
                SnrAxis::EbN0,
                db,
                &DEFAULT_A_GRID,
                a.trials,
                &stop,
                a.seed,
                k as u64,
            )?;
            t.best_candidate().plan
        } else {
            let sizing = FrameSizing::Model {
                a: a.a.unwrap_or(0.05),
                trials: a.trials,
            };
            plan_point(
                &ops,
                &code,
                SnrAxis::EbN0,
                db,
                sizing,
                &mut planning_rng(a.seed, k as u64),
            )?
        };
        println!(
            "{:>10.2} {:>10} {:>8} {:>7.3} {:>6} {:>10.3e}",
            plan.eb_n0_db(),
            plan.n_bits,
            plan.n_symbols,
            plan.rate,
            if plan.a_param.is_nan() {
                "-".to_string()
            } else {
                plan.a_param.to_string()
            },
            plan.p_indel
        );
    }
    Ok(())
}

fn sweep(config: SweepConfig, output: &Path) -> Result<()> {
    let out = run_sweep(&config)?;
    let meta = {
        let mut name = output.as_os_str().to_owned();
        name.push(".meta");
        PathBuf::from(name)
    };
    write_atomic(output, |w| out.write_csv(w))?;
    write_atomic(&meta, |w| out.write_metadata(w))?;
    for r in &out.records {
        eprintln!(
            "Eb/N0 {:6.2} dB  Es/N0 {:6.2} dB  BER {:.3e}  SER {:.3e}  bits {}",
            r.eb_n0_db, r.es_n0_db, r.ber, r.ser, r.bits
        );
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scheme: Scheme = a.scheme.parse()?;
    if scheme != Scheme::Qam128 && a.constellation.is_none() {
        bail!("--constellation is required for {scheme}");
    }
    if let Some(path) = &a.constellation {
        // Fail before any simulation work when the input is unreadable.
        read_constellation_path(path).with_context(|| format!("reading {}", path.display()))?;
    }
    let (axis, snr_db) = a.snr.axis();
    let sizing = match (a.sizing.a, a.sizing.tune, a.sizing.ns) {
        (_, true, _) => FrameSizing::Tuned { trials: a.trials },
        (_, _, Some(n)) => FrameSizing::Fixed(n),
        (a_param, _, _) => FrameSizing::Model {
            a: a_param.unwrap_or(0.05),
            trials: a.trials,
        },
    };
    let config = SweepConfig {
        scheme,
        constellation: a.constellation,
        axis,
        snr_db,
        stop: a.stop.rule(),
        seed: a.run.seed,
        workers: a.run.workers(),
        sizing,
    };
    sweep(config, &a.run.output)
}

fn qam(a: QamArgs) -> Result<()> {
    let (axis, snr_db) = a.snr.axis();
    let config = SweepConfig {
        scheme: Scheme::Qam128,
        constellation: None,
        axis,
        snr_db,
        stop: a.stop.rule(),
        seed: a.run.seed,
        workers: a.run.workers(),
        sizing: FrameSizing::default(),
    };
    sweep(config, &a.run.output)
}
