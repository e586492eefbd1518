//! Monte-Carlo BER evaluation engine.
//!
//! A sweep runs `trials` independent downlink transmissions per
//! `(precoder, rho)` grid cell, where `rho = P/N0` is the normalized transmit
//! power. Every trial draws its randomness from the counter-based substream
//! keyed by `(seed, trial index)`, so the same trial index sees the same
//! channel, payload bits, and noise shape for every precoder and every grid
//! point (paired comparisons), and the sweep result is byte-identical for
//! any worker-thread count.

pub mod config;
mod selftest;

pub use config::{parse_sweep_config, ConfigError};
pub use selftest::selftest;

use num_complex::Complex64;

use crate::fixedpoint::{
    c1po_fixed, c2po_fixed, hardware_inputs_with, Algorithm, HardwareInputs,
};
use crate::hwsim::{run_precoder_hw_with, ArrayConfig};
use crate::numerics::{matvec, norm2_sqr, CVec};
use crate::precoders::{
    build_setup, c1po_with, c2po_with, mrt, mrt_q, zf, zf_q, BcrParams, ProblemSetup, TraceMode,
    T_MAX_DEFAULT,
};
use crate::signal::{
    gen_channel, gen_noise, map_bits, mse_optimal_beta, mse_optimal_beta_from_hx,
    receive_and_detect, Constellation, ConstellationKind, PrecodeProblem, RngStream,
};
use crate::{Error, Result};

/// Every selectable precoder, including the fixed-point functional models
/// (`*_fixed`) and the cycle-accurate simulators (`*_hw`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PrecoderKind {
    Mrt,
    Zf,
    MrtQ,
    ZfQ,
    C1po,
    C2po,
    C1poFixed,
    C2poFixed,
    C1poHw,
    C2poHw,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 10] = [
        PrecoderKind::Mrt,
        PrecoderKind::Zf,
        PrecoderKind::MrtQ,
        PrecoderKind::ZfQ,
        PrecoderKind::C1po,
        PrecoderKind::C2po,
        PrecoderKind::C1poFixed,
        PrecoderKind::C2poFixed,
        PrecoderKind::C1poHw,
        PrecoderKind::C2poHw,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name.to_ascii_lowercase())
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::Mrt => "mrt",
            PrecoderKind::Zf => "zf",
            PrecoderKind::MrtQ => "mrt_q",
            PrecoderKind::ZfQ => "zf_q",
            PrecoderKind::C1po => "c1po",
            PrecoderKind::C2po => "c2po",
            PrecoderKind::C1poFixed => "c1po_fixed",
            PrecoderKind::C2poFixed => "c2po_fixed",
            PrecoderKind::C1poHw => "c1po_hw",
            PrecoderKind::C2poHw => "c2po_hw",
        }
    }

    /// Arithmetic column for the CSV output.
    pub fn arith(self) -> &'static str {
        match self {
            PrecoderKind::C1poFixed | PrecoderKind::C2poFixed => "fixed",
            PrecoderKind::C1poHw | PrecoderKind::C2poHw => "hw",
            _ => "float",
        }
    }

    /// True for the paths that model the datapath word lengths and therefore
    /// require the hardware power normalization `P = 2B`.
    pub fn needs_hardware_power(self) -> bool {
        matches!(
            self,
            PrecoderKind::C1poFixed
                | PrecoderKind::C2poFixed
                | PrecoderKind::C1poHw
                | PrecoderKind::C2poHw
        )
    }

    fn needs_c2po_geometry(self) -> bool {
        matches!(self, PrecoderKind::C2poFixed | PrecoderKind::C2poHw)
    }
}

/// How the per-instance solver parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamMode {
    /// Hardware-matched constants when any fixed/hw precoder is in the list
    /// (so float curves and fixed-point markers are comparable), the
    /// simulation-tuned values otherwise.
    #[default]
    Auto,
    /// `gamma = ||A^H A||`, `gamma/delta = 2`.
    Robust,
    /// The constants the datapaths implement: expansion factor 1.25 and a
    /// power-of-two step size.
    Hardware,
    /// Simulation-tuned per-instance values (see `BcrParams::tuned_*`).
    Tuned,
}

/// Optional explicit solver parameter overrides, applied on top of the
/// per-instance defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParamOverrides {
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
}

/// Full sweep description.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub antennas: usize,
    pub users: usize,
    pub constellation: ConstellationKind,
    pub precoders: Vec<PrecoderKind>,
    /// Normalized transmit power grid, in dB.
    pub rho_db_grid: Vec<f64>,
    pub trials: u64,
    pub t_max: usize,
    pub seed: u64,
    pub threads: usize,
    /// Transmit power; `None` selects `2B` when any fixed/hw precoder is
    /// present (so the quaternary amplitude is 1) and `1` otherwise.
    pub power: Option<f64>,
    pub param_mode: ParamMode,
    pub overrides: ParamOverrides,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            antennas: 0,
            users: 0,
            constellation: ConstellationKind::Bpsk,
            precoders: Vec::new(),
            rho_db_grid: Vec::new(),
            trials: 0,
            t_max: T_MAX_DEFAULT,
            seed: 0,
            threads: 1,
            power: None,
            param_mode: ParamMode::Auto,
            overrides: ParamOverrides::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.antennas == 0 || self.users == 0 || self.users > self.antennas {
            return Err(format!(
                "need 1 <= users <= antennas, got users={} antennas={}",
                self.users, self.antennas
            ));
        }
        if self.rho_db_grid.is_empty() {
            return Err("rho_db grid is empty".into());
        }
        if self.trials == 0 {
            return Err("need at least one trial".into());
        }
        if self.precoders.is_empty() {
            return Err("precoder list is empty".into());
        }
        if self.threads == 0 {
            return Err("need at least one worker thread".into());
        }
        let hw_power = 2.0 * self.antennas as f64;
        if self.precoders.iter().any(|p| p.needs_hardware_power()) {
            if let Some(power) = self.power {
                if ((power - hw_power) / hw_power).abs() > 1e-12 {
                    return Err(format!(
                        "fixed/hw precoders require power = 2B = {hw_power}, got {power}"
                    ));
                }
            }
        }
        if self.precoders.iter().any(|p| p.needs_c2po_geometry()) {
            let ratio_ok =
                self.antennas.is_multiple_of(self.users) && (self.antennas / self.users).is_power_of_two();
            if !ratio_ok {
                return Err(format!(
                    "c2po_fixed/c2po_hw need B divisible by U with B/U a power of two, got B={} U={}",
                    self.antennas, self.users
                ));
            }
        }
        Ok(())
    }

    /// Transmit power after resolving `auto`. The default is `P = 2B` (the
    /// hardware normalization, where the quaternary amplitude is 1): the
    /// solvers initialize at the unscaled MRT vector, so their behavior is
    /// not invariant to the clip level, and `P = 2B` is the regime the
    /// parameters are tuned for.
    pub fn resolved_power(&self) -> f64 {
        self.power.unwrap_or(2.0 * self.antennas as f64)
    }

    fn solver_params(&self, gram_norm: f64, algorithm: Algorithm) -> Result<BcrParams> {
        let mode = match self.param_mode {
            ParamMode::Auto => {
                if self.precoders.iter().any(|p| p.needs_hardware_power()) {
                    ParamMode::Hardware
                } else {
                    ParamMode::Tuned
                }
            }
            other => other,
        };
        let base = match (mode, algorithm) {
            (ParamMode::Robust, _) => BcrParams::robust(gram_norm, self.t_max),
            (ParamMode::Hardware, Algorithm::C1po) => {
                BcrParams::hardware_c1po(gram_norm, self.t_max)
            }
            (ParamMode::Hardware, Algorithm::C2po) => {
                BcrParams::hardware_c2po(gram_norm, self.t_max)
            }
            (_, Algorithm::C1po) => BcrParams::tuned_c1po(gram_norm, self.t_max),
            (_, Algorithm::C2po) => BcrParams::tuned_c2po(gram_norm, self.t_max),
        };
        let gamma = self.overrides.gamma.unwrap_or(base.gamma);
        let delta = self.overrides.delta.unwrap_or(base.delta);
        let tau = self.overrides.tau.unwrap_or(base.tau);
        BcrParams::new(gamma, delta, tau, self.t_max)
    }
}

/// One cell of the BER table.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub rho_db: f64,
    pub precoder: PrecoderKind,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits_total: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits_total as f64
    }
}

/// Runs one downlink transmission and counts bit errors: draw channel and
/// payload, precode, transmit through AWGN at `N0 = P/rho`, scale by the
/// precoding factor, detect.
pub fn run_trial(
    cfg: &SweepConfig,
    rho_db: f64,
    precoder: PrecoderKind,
    rng: &mut RngStream,
) -> Result<(u64, u64)> {
    let constellation = Constellation::new(cfg.constellation);
    let power = cfg.resolved_power();
    let rho = 10f64.powf(rho_db / 10.0);
    let n0 = power / rho;

    let h = gen_channel(cfg.users, cfg.antennas, rng);
    let bits: Vec<u8> = (0..cfg.users * constellation.bits_per_symbol())
        .map(|_| rng.next_bit())
        .collect();
    let s = map_bits(&bits, &constellation)?;
    let problem = PrecodeProblem::new(h, s, n0, power)?;

    let (x, beta) = precode_one(cfg, precoder, &problem)?;

    // power-constraint audit
    let got = norm2_sqr(&x);
    if ((got - power) / power).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "{}: transmit power {} deviates from budget {}",
            precoder.name(),
            got,
            power
        )));
    }

    let noise = gen_noise(cfg.users, n0, rng);
    let hx = matvec(&problem.h, &x)?;
    let y: CVec = hx.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let detected = receive_and_detect(&y, beta, &constellation);

    let errors = bits
        .iter()
        .zip(&detected)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok((errors, bits.len() as u64))
}

/// Runs one precoder on one problem instance outside a sweep: returns the
/// quaternary (or infinite-precision) transmit vector and the MSE-optimal
/// precoding factor for the problem's noise variance. Parameter selection
/// follows `cfg.param_mode` exactly as in a sweep.
pub fn precode_one(
    cfg: &SweepConfig,
    precoder: PrecoderKind,
    problem: &PrecodeProblem,
) -> Result<(CVec, Complex64)> {
    let setup = if matches!(
        precoder,
        PrecoderKind::Mrt | PrecoderKind::Zf | PrecoderKind::MrtQ | PrecoderKind::ZfQ
    ) {
        None
    } else {
        Some(build_setup(problem)?)
    };
    let hw = if precoder.needs_hardware_power() {
        Some(hardware_inputs_with(setup.as_ref().expect("setup built"))?)
    } else {
        None
    };
    let x = precode_x(cfg, precoder, problem, setup.as_ref(), hw.as_ref())?;
    let beta = mse_optimal_beta(&problem.h, &x, &problem.s, problem.n0)?;
    Ok((x, beta.value))
}

/// The transmit vector alone; the precoding factor is the receiver's
/// business and depends on the noise variance.
fn precode_x(
    cfg: &SweepConfig,
    precoder: PrecoderKind,
    problem: &PrecodeProblem,
    setup: Option<&ProblemSetup>,
    hw: Option<&HardwareInputs>,
) -> Result<CVec> {
    let setup_for = |kind: &str| {
        setup.ok_or_else(|| Error::InvalidParams(format!("{kind} needs the problem setup")))
    };
    let hw_for = |kind: &str| {
        hw.ok_or_else(|| Error::InvalidParams(format!("{kind} needs quantized hardware inputs")))
    };
    match precoder {
        PrecoderKind::Mrt => mrt(problem),
        PrecoderKind::Zf => zf(problem),
        PrecoderKind::MrtQ => Ok(mrt_q(problem)?.x),
        PrecoderKind::ZfQ => Ok(zf_q(problem)?.x),
        PrecoderKind::C1po => {
            let setup = setup_for("c1po")?;
            let params = cfg.solver_params(setup.gram_norm, Algorithm::C1po)?;
            Ok(c1po_with(setup, problem, &params, TraceMode::Off)?.x)
        }
        PrecoderKind::C2po => {
            let setup = setup_for("c2po")?;
            let params = cfg.solver_params(setup.gram_norm, Algorithm::C2po)?;
            Ok(c2po_with(setup, problem, &params, TraceMode::Off)?.x)
        }
        PrecoderKind::C1poFixed => {
            let hw = hw_for("c1po_fixed")?;
            Ok(c1po_fixed(problem, &hw.g_q, &hw.x_init, cfg.t_max)?.x)
        }
        PrecoderKind::C2poFixed => {
            let hw = hw_for("c2po_fixed")?;
            Ok(c2po_fixed(problem, &hw.hbar_q, &hw.x_init, hw.alpha, cfg.t_max)?.x)
        }
        PrecoderKind::C1poHw => {
            let hw = hw_for("c1po_hw")?;
            let array = ArrayConfig::new(Algorithm::C1po, cfg.antennas, cfg.users)?;
            Ok(run_precoder_hw_with(&array, problem, hw, cfg.t_max)?.0.x)
        }
        PrecoderKind::C2poHw => {
            let hw = hw_for("c2po_hw")?;
            let array = ArrayConfig::new(Algorithm::C2po, cfg.antennas, cfg.users)?;
            Ok(run_precoder_hw_with(&array, problem, hw, cfg.t_max)?.0.x)
        }
    }
}

/// One trial's work across the whole grid, factored so per-rho work is
/// minimal: the channel, payload, and every precoder's transmit vector are
/// rho-independent (the solvers never read the noise variance), so they are
/// computed once; each grid point only scales the noise, recomputes the
/// precoding factor, and detects. Bit-for-bit equivalent to calling
/// [`run_trial`] per `(rho, precoder)` with the same substream.
fn run_trial_over_grid(
    cfg: &SweepConfig,
    trial: u64,
    tally: &mut [(u64, u64)],
) -> Result<()> {
    let constellation = Constellation::new(cfg.constellation);
    let power = cfg.resolved_power();
    let n_rho = cfg.rho_db_grid.len();

    let mut rng = RngStream::substream(cfg.seed, trial);
    let h = gen_channel(cfg.users, cfg.antennas, &mut rng);
    let bits: Vec<u8> = (0..cfg.users * constellation.bits_per_symbol())
        .map(|_| rng.next_bit())
        .collect();
    let s = map_bits(&bits, &constellation)?;
    // noise is drawn after the payload in run_trial; snapshot the stream here
    let noise_rng = rng.clone();

    // the precoded vectors (noise variance set to zero: it only affects the
    // precoding factor, which is recomputed per grid point below)
    let problem = PrecodeProblem::new(h, s, 0.0, power)?;
    let setup = if cfg
        .precoders
        .iter()
        .any(|p| !matches!(p, PrecoderKind::Mrt | PrecoderKind::Zf | PrecoderKind::MrtQ | PrecoderKind::ZfQ))
    {
        Some(build_setup(&problem)?)
    } else {
        None
    };
    let hw_inputs = if cfg.precoders.iter().any(|p| p.needs_hardware_power()) {
        Some(hardware_inputs_with(setup.as_ref().expect("setup built"))?)
    } else {
        None
    };

    let mut hx_per_precoder = Vec::with_capacity(cfg.precoders.len());
    for precoder in &cfg.precoders {
        let x = precode_x(cfg, *precoder, &problem, setup.as_ref(), hw_inputs.as_ref())?;
        let got = norm2_sqr(&x);
        if ((got - power) / power).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "{}: transmit power {} deviates from budget {}",
                precoder.name(),
                got,
                power
            )));
        }
        hx_per_precoder.push(matvec(&problem.h, &x)?);
    }

    for (ri, rho_db) in cfg.rho_db_grid.iter().enumerate() {
        let rho = 10f64.powf(rho_db / 10.0);
        let n0 = power / rho;
        let mut nrng = noise_rng.clone();
        let noise = gen_noise(cfg.users, n0, &mut nrng);
        for (pi, hx) in hx_per_precoder.iter().enumerate() {
            let beta = mse_optimal_beta_from_hx(hx, &problem.s, n0)?;
            let y: CVec = hx.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let detected = receive_and_detect(&y, beta.value, &constellation);
            let errors = bits
                .iter()
                .zip(&detected)
                .filter(|(a, b)| a != b)
                .count() as u64;
            let cell = &mut tally[pi * n_rho + ri];
            cell.0 += errors;
            cell.1 += bits.len() as u64;
        }
    }
    Ok(())
}

/// Runs the full grid-times-precoder sweep, parallelized over trials with
/// disjoint RNG substreams. The output is independent of the worker count:
/// each trial's integer error count is a pure function of
/// `(seed, trial index)`, and integer sums commute.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BerPoint>> {
    cfg.validate().map_err(Error::InvalidParams)?;
    let n_prec = cfg.precoders.len();
    let n_rho = cfg.rho_db_grid.len();
    let workers = cfg.threads.min(cfg.trials as usize).max(1);

    let tallies: Vec<Result<Vec<(u64, u64)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let cfg = &*cfg;
                scope.spawn(move || -> Result<Vec<(u64, u64)>> {
                    let mut local = vec![(0u64, 0u64); n_prec * n_rho];
                    let mut trial = w as u64;
                    while trial < cfg.trials {
                        run_trial_over_grid(cfg, trial, &mut local)?;
                        trial += workers as u64;
                    }
                    Ok(local)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut total = vec![(0u64, 0u64); n_prec * n_rho];
    for worker in tallies {
        let local = worker?;
        for (acc, part) in total.iter_mut().zip(local) {
            acc.0 += part.0;
            acc.1 += part.1;
        }
    }

    let mut points = Vec::with_capacity(n_prec * n_rho);
    for (pi, precoder) in cfg.precoders.iter().enumerate() {
        for (ri, rho_db) in cfg.rho_db_grid.iter().enumerate() {
            let (bit_errors, bits_total) = total[pi * n_rho + ri];
            points.push(BerPoint {
                rho_db: *rho_db,
                precoder: *precoder,
                trials: cfg.trials,
                bit_errors,
                bits_total,
            });
        }
    }
    points.sort_by(|a, b| {
        (a.precoder.name(), a.rho_db)
            .partial_cmp(&(b.precoder.name(), b.rho_db))
            .expect("rho grid contains no NaN")
    });
    Ok(points)
}

/// Renders the BER table in its canonical CSV form (sorted rows, fixed
/// header, deterministic float formatting).
pub fn render_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("rho_db,precoder,arith,trials,bit_errors,bits_total,ber\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6e}\n",
            p.rho_db,
            p.precoder.name(),
            p.precoder.arith(),
            p.trials,
            p.bit_errors,
            p.bits_total,
            p.ber()
        ));
    }
    out
}

/// Writes the CSV table to a file.
pub fn emit_csv(points: &[BerPoint], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, render_csv(points))?;
    Ok(())
}

/// Parses a CSV table produced by [`render_csv`] back into points.
pub fn parse_csv(text: &str) -> Result<Vec<BerPoint>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "rho_db,precoder,arith,trials,bit_errors,bits_total,ber" {
        return Err(Error::InvalidParams(format!("unexpected header `{header}`")));
    }
    let mut points = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::InvalidParams(format!("malformed row `{line}`")));
        }
        let precoder = PrecoderKind::parse(fields[1])
            .ok_or_else(|| Error::InvalidParams(format!("unknown precoder `{}`", fields[1])))?;
        let parse_u64 = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidParams(format!("bad integer `{s}`")))
        };
        points.push(BerPoint {
            rho_db: fields[0]
                .parse()
                .map_err(|_| Error::InvalidParams(format!("bad rho `{}`", fields[0])))?,
            precoder,
            trials: parse_u64(fields[3])?,
            bit_errors: parse_u64(fields[4])?,
            bits_total: parse_u64(fields[5])?,
        });
    }
    Ok(points)
}
