//! Invariant suites behind `precode selftest`: a fast battery of the
//! library's structural guarantees, printing one line per check.

use crate::fixedpoint::{
    fx_add, fx_mul, hardware_inputs, Algorithm, C1poFixedState, C2poFixedState, FixedFormat,
    FixedWord,
};
use crate::hwsim::{ArrayConfig, C1poSim, C2poSim};
use crate::numerics::{hermitian_gram, matvec, norm2, CMat};
use crate::precoders::{build_setup, c1po, mrt_q, orthogonal_projector, BcrParams};
use crate::signal::{gen_channel, map_bits, Constellation, ConstellationKind, RngStream};

use super::{render_csv, run_sweep, PrecoderKind, SweepConfig};

struct Check {
    name: &'static str,
    run: fn() -> Result<(), String>,
}

/// Runs every invariant suite, printing `[PASS]`/`[FAIL]` per check.
/// Returns false when any check failed.
pub fn selftest() -> bool {
    let checks = [
        Check {
            name: "latency closed forms",
            run: check_latency,
        },
        Check {
            name: "projector and Gram factorization identities",
            run: check_algebra,
        },
        Check {
            name: "mrt_q equals c1po with t_max = 0",
            run: check_mrt_q_identity,
        },
        Check {
            name: "solver objective monotonicity",
            run: check_monotonicity,
        },
        Check {
            name: "fixed-point wrap/truncation semantics",
            run: check_fixed_semantics,
        },
        Check {
            name: "hardware simulator matches functional models",
            run: check_bit_exact,
        },
        Check {
            name: "sweep determinism across thread counts",
            run: check_determinism,
        },
    ];
    let mut ok = true;
    for check in checks {
        match (check.run)() {
            Ok(()) => println!("[PASS] {}", check.name),
            Err(msg) => {
                ok = false;
                println!("[FAIL] {}: {}", check.name, msg);
            }
        }
    }
    ok
}

fn bpsk_problem(users: usize, antennas: usize, seed: u64) -> crate::signal::PrecodeProblem {
    let mut rng = RngStream::new(seed);
    let h = gen_channel(users, antennas, &mut rng);
    let cst = Constellation::new(ConstellationKind::Bpsk);
    let bits: Vec<u8> = (0..users).map(|_| rng.next_bit()).collect();
    let s = map_bits(&bits, &cst).unwrap();
    crate::signal::PrecodeProblem::new(h, s, 0.1, 2.0 * antennas as f64).unwrap()
}

fn check_latency() -> Result<(), String> {
    for (b, want) in [(32usize, 35u64), (64, 67), (128, 131), (256, 259)] {
        let cfg = ArrayConfig::new(Algorithm::C1po, b, 16).map_err(|e| e.to_string())?;
        if cfg.iteration_latency() != want {
            return Err(format!("C1PO B={b}: {} != {want}", cfg.iteration_latency()));
        }
    }
    for (b, want) in [(32usize, 39u64), (64, 40), (128, 41), (256, 42)] {
        let cfg = ArrayConfig::new(Algorithm::C2po, b, 16).map_err(|e| e.to_string())?;
        if cfg.iteration_latency() != want {
            return Err(format!("C2PO B={b}: {} != {want}", cfg.iteration_latency()));
        }
    }
    Ok(())
}

fn check_algebra() -> Result<(), String> {
    for seed in 0..20 {
        let p = bpsk_problem(4, 8, seed);
        let setup = build_setup(&p).map_err(|e| e.to_string())?;
        let q = orthogonal_projector(&p.s).map_err(|e| e.to_string())?;
        let qq = q.matmul(&q).map_err(|e| e.to_string())?;
        if qq.max_abs_diff(&q) > 1e-12 {
            return Err(format!("seed {seed}: Q^2 != Q"));
        }
        let qs = matvec(&q, &p.s).map_err(|e| e.to_string())?;
        if norm2(&qs) > 1e-12 * norm2(&p.s) {
            return Err(format!("seed {seed}: Qs != 0"));
        }
        let hh = hermitian_gram(&p.h);
        let want = CMat::from_fn(8, 8, |i, j| hh[(i, j)] - setup.v[i] * setup.v[j].conj());
        if setup.gram.max_abs_diff(&want) > 1e-10 * hh.fro_norm() {
            return Err(format!("seed {seed}: Gram factorization identity failed"));
        }
    }
    Ok(())
}

fn check_mrt_q_identity() -> Result<(), String> {
    for seed in 0..20 {
        let p = bpsk_problem(4, 16, seed);
        let setup = build_setup(&p).map_err(|e| e.to_string())?;
        let params = BcrParams::robust(setup.gram_norm, 0);
        let a = c1po(&p, &params).map_err(|e| e.to_string())?;
        let b = mrt_q(&p).map_err(|e| e.to_string())?;
        if a.x != b.x {
            return Err(format!("seed {seed}: outputs differ"));
        }
    }
    Ok(())
}

fn check_monotonicity() -> Result<(), String> {
    use crate::precoders::{c1po_with, c2po_with, TraceMode};
    for seed in 0..100 {
        let p = bpsk_problem(4, 16, seed);
        let setup = build_setup(&p).map_err(|e| e.to_string())?;
        let params = BcrParams::robust(setup.gram_norm, 10);
        for (name, res) in [
            (
                "c1po",
                c1po_with(&setup, &p, &params, TraceMode::Objectives),
            ),
            (
                "c2po",
                c2po_with(&setup, &p, &params, TraceMode::Objectives),
            ),
        ] {
            let tr = res.map_err(|e| e.to_string())?.trace.unwrap();
            let start = if tr.init_feasible { 1 } else { 2 };
            for k in start..tr.objectives.len() {
                let slack = 1e-9 * tr.objectives[k - 1].abs().max(1.0);
                if tr.objectives[k] > tr.objectives[k - 1] + slack {
                    return Err(format!("seed {seed}: {name} objective rose at step {k}"));
                }
            }
        }
    }
    Ok(())
}

fn check_fixed_semantics() -> Result<(), String> {
    let q4 = FixedFormat::new(4, 0);
    let wrapped = fx_add(
        FixedWord::from_raw(7, q4),
        FixedWord::from_raw(1, q4),
        q4,
    );
    if wrapped.raw != -8 {
        return Err(format!("7 + 1 wrapped to {}, want -8", wrapped.raw));
    }
    let q12_5 = FixedFormat::new(12, 5);
    let half = FixedWord::quantize(0.5, q12_5);
    if fx_mul(half, half, q12_5).value() != 0.25 {
        return Err("0.5 * 0.5 != 0.25 in Q12.5".into());
    }
    let lsb = FixedWord::from_raw(1, q12_5);
    if fx_mul(lsb, lsb, q12_5).raw != 0 {
        return Err("sub-resolution product must truncate to zero".into());
    }
    Ok(())
}

fn check_bit_exact() -> Result<(), String> {
    for seed in 0..20 {
        let p = bpsk_problem(4, 16, 500 + seed);
        let inputs = hardware_inputs(&p).map_err(|e| e.to_string())?;

        let cfg = ArrayConfig::new(Algorithm::C1po, 16, 4).map_err(|e| e.to_string())?;
        let mut sim = C1poSim::new(cfg, &inputs.g_q, &inputs.x_init).map_err(|e| e.to_string())?;
        let mut model =
            C1poFixedState::new(inputs.g_q.clone(), &inputs.x_init).map_err(|e| e.to_string())?;
        for it in 0..4 {
            sim.iterate();
            model.step();
            if sim.signs() != model.signs() {
                return Err(format!("seed {seed}: C1PO signs diverged at iteration {it}"));
            }
        }

        let cfg = ArrayConfig::new(Algorithm::C2po, 16, 4).map_err(|e| e.to_string())?;
        let mut sim = C2poSim::new(cfg, &inputs.hbar_q, &inputs.x_init, inputs.alpha)
            .map_err(|e| e.to_string())?;
        let mut model = C2poFixedState::new(inputs.hbar_q.clone(), &inputs.x_init, inputs.alpha)
            .map_err(|e| e.to_string())?;
        for it in 0..4 {
            sim.iterate();
            model.step();
            if sim.signs() != model.signs() {
                return Err(format!("seed {seed}: C2PO signs diverged at iteration {it}"));
            }
        }
    }
    Ok(())
}

fn check_determinism() -> Result<(), String> {
    let base = SweepConfig {
        antennas: 8,
        users: 4,
        constellation: ConstellationKind::Bpsk,
        precoders: vec![PrecoderKind::MrtQ, PrecoderKind::C2po],
        rho_db_grid: vec![0.0, 6.0],
        trials: 40,
        t_max: 6,
        seed: 3,
        threads: 1,
        ..SweepConfig::default()
    };
    let csv_for = |threads: usize| -> Result<String, String> {
        let mut cfg = base.clone();
        cfg.threads = threads;
        Ok(render_csv(&run_sweep(&cfg).map_err(|e| e.to_string())?))
    };
    let one = csv_for(1)?;
    if one != csv_for(4)? || one != csv_for(16)? {
        return Err("CSV differs across thread counts".into());
    }
    Ok(())
}
