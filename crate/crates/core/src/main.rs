//! `precode`: BER sweeps, single-point demos, hardware traces, and the
//! invariant selftest on the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 selftest failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use precode::fixedpoint::Algorithm;
use precode::harness::{
    self, parse_sweep_config, render_csv, run_sweep, ParamMode, PrecoderKind, SweepConfig,
};
use precode::hwsim::{run_precoder_hw, ArrayConfig};
use precode::signal::ConstellationKind;

#[derive(Parser)]
#[command(
    name = "precode",
    about = "1-bit massive MU-MIMO precoding: solvers, fixed-point datapaths, systolic-array simulation, Monte-Carlo BER",
    long_about = None,
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo BER sweep from a config file and emit CSV.
    Sweep(SweepArgs),
    /// Run a single BER point with default parameters and print the result.
    Demo(DemoArgs),
    /// Simulate the systolic array cycle by cycle and dump the register
    /// trace.
    Hwtrace(HwtraceArgs),
    /// Run the library invariant suites.
    Selftest,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration file (see README for the grammar).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the worker thread count from the config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct DemoArgs {
    /// Number of BS antennas.
    #[arg(long = "B")]
    antennas: usize,
    /// Number of single-antenna UEs.
    #[arg(long = "U")]
    users: usize,
    /// Modulation: bpsk, qpsk, or 16qam.
    #[arg(long = "mod", default_value = "bpsk")]
    modulation: String,
    /// Normalized transmit power rho = P/N0 in dB. The demo fixes P (2B when
    /// the precoder models hardware, 1 otherwise) and sets N0 = P/rho.
    #[arg(long)]
    rho: f64,
    /// Precoder: mrt, zf, mrt_q, zf_q, c1po, c2po, c1po_fixed, c2po_fixed,
    /// c1po_hw, c2po_hw.
    #[arg(long)]
    precoder: String,
    /// Monte-Carlo trials.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Solver iterations.
    #[arg(long = "t-max", default_value_t = 24)]
    t_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct HwtraceArgs {
    /// Number of BS antennas.
    #[arg(long = "B")]
    antennas: usize,
    /// Number of single-antenna UEs.
    #[arg(long = "U")]
    users: usize,
    /// Algorithm: c1po or c2po.
    #[arg(long)]
    alg: String,
    /// Where to write the per-cycle trace
    /// (`cycle,array,pe,phase,acc_raw_hex,b_reg_raw_hex`).
    #[arg(long = "cycles-out")]
    cycles_out: PathBuf,
    /// Iterations to simulate.
    #[arg(long = "t-max", default_value_t = 1)]
    t_max: usize,
    /// Seed for the random problem instance driving the trace.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Demo(args) => cmd_demo(args),
        Command::Hwtrace(args) => cmd_hwtrace(args),
        Command::Selftest => {
            if harness::selftest() {
                println!("selftest: all suites passed");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SELFTEST)
            }
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {}", args.config.display(), e);
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match parse_sweep_config(&text) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    let points = match run_sweep(&cfg) {
        Ok(points) => points,
        Err(precode::Error::InvalidParams(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let csv = render_csv(&points);
    match args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, csv) {
                eprintln!("error: cannot write {}: {}", path.display(), e);
                return ExitCode::from(EXIT_NUMERICAL);
            }
            eprintln!("wrote {} rows to {}", points.len(), path.display());
        }
        None => print!("{csv}"),
    }
    ExitCode::SUCCESS
}

fn cmd_demo(args: DemoArgs) -> ExitCode {
    let Some(constellation) = ConstellationKind::parse(&args.modulation) else {
        eprintln!("error: unknown modulation `{}`", args.modulation);
        return ExitCode::from(EXIT_CONFIG);
    };
    let Some(precoder) = PrecoderKind::parse(&args.precoder) else {
        eprintln!("error: unknown precoder `{}`", args.precoder);
        return ExitCode::from(EXIT_CONFIG);
    };
    let cfg = SweepConfig {
        antennas: args.antennas,
        users: args.users,
        constellation,
        precoders: vec![precoder],
        rho_db_grid: vec![args.rho],
        trials: args.trials,
        t_max: args.t_max,
        seed: args.seed,
        threads: args.threads,
        power: None,
        param_mode: ParamMode::Auto,
        overrides: Default::default(),
    };
    let points = match run_sweep(&cfg) {
        Ok(points) => points,
        Err(precode::Error::InvalidParams(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let p = &points[0];
    println!(
        "{}x{} {} | {} ({}) | rho {} dB | trials {} | bit errors {}/{} | BER {:.3e}",
        args.users,
        args.antennas,
        constellation.name(),
        precoder.name(),
        precoder.arith(),
        args.rho,
        p.trials,
        p.bit_errors,
        p.bits_total,
        p.ber()
    );
    ExitCode::SUCCESS
}

fn cmd_hwtrace(args: HwtraceArgs) -> ExitCode {
    let Some(algorithm) = Algorithm::parse(&args.alg) else {
        eprintln!("error: unknown algorithm `{}`", args.alg);
        return ExitCode::from(EXIT_CONFIG);
    };
    let array = match ArrayConfig::new(algorithm, args.antennas, args.users) {
        Ok(array) => array.with_dump(true),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    // a seeded random instance drives the datapath
    let mut rng = precode::signal::RngStream::new(args.seed);
    let h = precode::signal::gen_channel(args.users, args.antennas, &mut rng);
    let constellation = precode::signal::Constellation::new(ConstellationKind::Bpsk);
    let bits: Vec<u8> = (0..args.users).map(|_| rng.next_bit()).collect();
    let s = match precode::signal::map_bits(&bits, &constellation) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let power = 2.0 * args.antennas as f64;
    let problem = match precode::signal::PrecodeProblem::new(h, s, 0.1, power) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (result, trace) = match run_precoder_hw(&array, &problem, args.t_max) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let mut buf = Vec::new();
    if let Err(e) = trace.write_rows(&mut buf) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if let Err(e) = std::fs::write(&args.cycles_out, buf) {
        eprintln!("error: cannot write {}: {}", args.cycles_out.display(), e);
        return ExitCode::from(EXIT_NUMERICAL);
    }
    println!(
        "{} B={} U={}: {} iterations, {} cycles/iteration, {} total cycles, beta = {:.4}{:+.4}j",
        algorithm.name(),
        args.antennas,
        args.users,
        trace.iterations,
        trace.cycles_per_iteration,
        trace.total_cycles,
        result.beta.re,
        result.beta.im
    );
    for (phase, cycles) in &trace.phase_counts {
        println!("  {phase}: {cycles} cycles");
    }
    println!("trace written to {}", args.cycles_out.display());
    ExitCode::SUCCESS
}
