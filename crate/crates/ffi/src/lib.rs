//! C ABI for the 1-bit precoding library.
//!
//! The surface is deliberately small: create an opaque problem handle from
//! raw channel/symbol buffers, run any of the precoders against it, query
//! per-iteration hardware latencies, free the handle. All functions return
//! status codes instead of panicking; pointers are only read/written inside
//! the documented lengths.
//!
//! Complex buffers are interleaved `re, im` pairs in row-major order, so a
//! `U x B` channel occupies `2*U*B` doubles. The generated header lives at
//! `include/precode.h`.

use std::ffi::c_char;

use num_complex::Complex64;

use precode::fixedpoint::Algorithm;
use precode::harness::{precode_one, ParamMode, PrecoderKind, SweepConfig};
use precode::hwsim::ArrayConfig;
use precode::numerics::CMat;
use precode::signal::PrecodeProblem;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecodeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalFailure = 4,
}

/// Selectable precoders, mirroring the library's set: linear baselines,
/// the two solvers in floating point, their bit-exact fixed-point models,
/// and the cycle-accurate array simulations.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecodeAlgorithm {
    Mrt = 0,
    Zf = 1,
    MrtQuantized = 2,
    ZfQuantized = 3,
    C1po = 4,
    C2po = 5,
    C1poFixed = 6,
    C2poFixed = 7,
    C1poHardwareSim = 8,
    C2poHardwareSim = 9,
}

impl PrecodeAlgorithm {
    fn kind(self) -> PrecoderKind {
        match self {
            PrecodeAlgorithm::Mrt => PrecoderKind::Mrt,
            PrecodeAlgorithm::Zf => PrecoderKind::Zf,
            PrecodeAlgorithm::MrtQuantized => PrecoderKind::MrtQ,
            PrecodeAlgorithm::ZfQuantized => PrecoderKind::ZfQ,
            PrecodeAlgorithm::C1po => PrecoderKind::C1po,
            PrecodeAlgorithm::C2po => PrecoderKind::C2po,
            PrecodeAlgorithm::C1poFixed => PrecoderKind::C1poFixed,
            PrecodeAlgorithm::C2poFixed => PrecoderKind::C2poFixed,
            PrecodeAlgorithm::C1poHardwareSim => PrecoderKind::C1poHw,
            PrecodeAlgorithm::C2poHardwareSim => PrecoderKind::C2poHw,
        }
    }
}

/// Opaque downlink problem instance: channel, symbol vector, noise variance,
/// transmit power.
pub struct PrecodeProblemHandle {
    problem: PrecodeProblem,
}

fn status_of(err: &precode::Error) -> PrecodeStatus {
    match err {
        precode::Error::DimensionMismatch(_) => PrecodeStatus::DimensionMismatch,
        precode::Error::InvalidParams(_) => PrecodeStatus::InvalidArgument,
        precode::Error::ZeroSymbolVector => PrecodeStatus::InvalidArgument,
        _ => PrecodeStatus::NumericalFailure,
    }
}

unsafe fn read_complex(buf: *const f64, count: usize) -> Vec<Complex64> {
    let raw = std::slice::from_raw_parts(buf, 2 * count);
    raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Creates a problem handle.
///
/// `h_re_im`: `2*users*antennas` doubles, the row-major `U x B` channel.
/// `s_re_im`: `2*users` doubles, the symbol vector.
/// `noise_variance`: per-complex-entry noise variance `N0 >= 0`.
/// `power`: instantaneous transmit power `P > 0`; the fixed-point and
/// hardware-simulation algorithms require `P = 2*antennas`.
///
/// Returns null on invalid input. Free with [`precode_problem_free`].
///
/// # Safety
/// `h_re_im` and `s_re_im` must point to readable buffers of the stated
/// lengths.
#[no_mangle]
pub unsafe extern "C" fn precode_problem_new(
    users: usize,
    antennas: usize,
    h_re_im: *const f64,
    s_re_im: *const f64,
    noise_variance: f64,
    power: f64,
) -> *mut PrecodeProblemHandle {
    if h_re_im.is_null() || s_re_im.is_null() || users == 0 || antennas == 0 {
        return std::ptr::null_mut();
    }
    let h_data = read_complex(h_re_im, users * antennas);
    let s = read_complex(s_re_im, users);
    let Ok(h) = CMat::new(users, antennas, h_data) else {
        return std::ptr::null_mut();
    };
    match PrecodeProblem::new(h, s, noise_variance, power) {
        Ok(problem) => Box::into_raw(Box::new(PrecodeProblemHandle { problem })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Frees a handle created by [`precode_problem_new`]. Null is a no-op.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by
/// [`precode_problem_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn precode_problem_free(handle: *mut PrecodeProblemHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Runs one precoder on the problem.
///
/// `t_max` is the iteration count for the iterative algorithms (ignored by
/// the linear ones). `x_re_im_out` receives `2*antennas` doubles (the
/// transmit vector); `beta_re_im_out`, when non-null, receives 2 doubles
/// (the MSE-optimal precoding factor).
///
/// Solver parameters are chosen per instance: hardware-matched constants for
/// the fixed-point/hardware paths, simulation-tuned values for the
/// floating-point solvers.
///
/// # Safety
/// `handle` must be a live handle from [`precode_problem_new`];
/// `x_re_im_out` must be writable for `2*antennas` doubles and
/// `beta_re_im_out`, if non-null, for 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn precode_run(
    handle: *const PrecodeProblemHandle,
    algorithm: PrecodeAlgorithm,
    t_max: u32,
    x_re_im_out: *mut f64,
    beta_re_im_out: *mut f64,
) -> PrecodeStatus {
    if handle.is_null() || x_re_im_out.is_null() {
        return PrecodeStatus::NullArgument;
    }
    let problem = &(*handle).problem;
    let kind = algorithm.kind();
    let cfg = SweepConfig {
        antennas: problem.antennas(),
        users: problem.users(),
        precoders: vec![kind],
        t_max: t_max as usize,
        trials: 1,
        rho_db_grid: vec![0.0],
        power: Some(problem.p),
        param_mode: ParamMode::Auto,
        ..SweepConfig::default()
    };
    match precode_one(&cfg, kind, problem) {
        Ok((x, beta)) => {
            let out = std::slice::from_raw_parts_mut(x_re_im_out, 2 * problem.antennas());
            for (slot, z) in out.chunks_exact_mut(2).zip(&x) {
                slot[0] = z.re;
                slot[1] = z.im;
            }
            if !beta_re_im_out.is_null() {
                let b = std::slice::from_raw_parts_mut(beta_re_im_out, 2);
                b[0] = beta.re;
                b[1] = beta.im;
            }
            PrecodeStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Per-iteration latency of the systolic arrays in clock cycles
/// (`B + 3` for C1PO, `2U + log2(B/U) + 6` for C2PO), or -1 when the
/// algorithm has no hardware architecture or the geometry is unsupported.
#[no_mangle]
pub extern "C" fn precode_iteration_latency(
    algorithm: PrecodeAlgorithm,
    antennas: usize,
    users: usize,
) -> i64 {
    let alg = match algorithm {
        PrecodeAlgorithm::C1po
        | PrecodeAlgorithm::C1poFixed
        | PrecodeAlgorithm::C1poHardwareSim => Algorithm::C1po,
        PrecodeAlgorithm::C2po
        | PrecodeAlgorithm::C2poFixed
        | PrecodeAlgorithm::C2poHardwareSim => Algorithm::C2po,
        _ => return -1,
    };
    match ArrayConfig::new(alg, antennas, users) {
        Ok(cfg) => cfg.iteration_latency() as i64,
        Err(_) => -1,
    }
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn precode_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
