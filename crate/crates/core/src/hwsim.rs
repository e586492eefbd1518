//! Cycle-accurate simulation of the two systolic PE-array architectures.
//!
//! Both datapaths are fully static, so the simulator is phase-structured: a
//! cycle function per phase rather than an event queue. This keeps the cycle
//! accounting auditable against the closed forms
//!
//! - C1PO: `B + 3` cycles per iteration (B MAC/exchange cycles, 2 pipeline
//!   flushes, 1 projection),
//! - C2PO: `2U + log2(B/U) + 6` cycles per iteration (U+2 wide product,
//!   log2(B/U) adder tree, U+3 tall product, 1 projection).
//!
//! The three-stage MAC pipeline is modeled by the two explicit flush cycles
//! after each MAC phase; arithmetic itself is evaluated in the issue cycle,
//! which leaves every register value deterministic and lets the sign outputs
//! be compared bit-for-bit against the functional models in [`fixedpoint`].
//!
//! The per-cycle register dump (one line per cycle per PE) packs each complex
//! register as a single 64-bit hex word: the real raw in the upper 32 bits,
//! the imaginary raw in the lower 32, both two's complement.
//!
//! [`fixedpoint`]: crate::fixedpoint

use num_complex::Complex64;

use crate::fixedpoint::{
    fx_mul_pow2, fxc_add, fxc_mul, fxc_mul_conj, fxc_sub, hardware_inputs, hw_proj,
    mac_accumulator_fmt, Algorithm, DatapathConfig, FxComplex, FxMat,
};
use crate::precoders::PrecodeResult;
use crate::signal::{mse_optimal_beta, PrecodeProblem};
use crate::{Error, Result};

/// Array geometry plus the datapath word lengths.
#[derive(Debug, Clone)]
pub struct ArrayConfig {
    pub algorithm: Algorithm,
    pub antennas: usize,
    pub users: usize,
    pub datapath: DatapathConfig,
    /// Record a per-cycle register dump (large for big arrays).
    pub dump: bool,
}

impl ArrayConfig {
    pub fn new(algorithm: Algorithm, antennas: usize, users: usize) -> Result<Self> {
        if antennas == 0 || users == 0 || users > antennas {
            return Err(Error::InvalidParams(format!(
                "need 1 <= U <= B, got U={users} B={antennas}"
            )));
        }
        if algorithm == Algorithm::C2po
            && (!antennas.is_multiple_of(users) || !(antennas / users).is_power_of_two()) {
                return Err(Error::InvalidParams(format!(
                    "C2PO array needs B divisible by U with B/U a power of two, got B={antennas} U={users}"
                )));
            }
        Ok(Self {
            algorithm,
            antennas,
            users,
            datapath: DatapathConfig::for_algorithm(algorithm),
            dump: false,
        })
    }

    pub fn with_dump(mut self, dump: bool) -> Self {
        self.dump = dump;
        self
    }

    /// Closed-form per-iteration latency in clock cycles.
    pub fn iteration_latency(&self) -> u64 {
        match self.algorithm {
            Algorithm::C1po => self.antennas as u64 + 3,
            Algorithm::C2po => {
                let ratio = (self.antennas / self.users) as u64;
                2 * self.users as u64 + ratio.ilog2() as u64 + 6
            }
        }
    }
}

/// One dumped register snapshot.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub cycle: u64,
    pub array: u32,
    pub pe: u32,
    pub phase: &'static str,
    pub acc: FxComplex,
    pub b_reg: FxComplex,
}

impl TraceRow {
    /// `cycle,array,pe,phase,acc_raw_hex,b_reg_raw_hex` with complex raws
    /// packed re-high/im-low into one 64-bit word.
    pub fn render(&self) -> String {
        format!(
            "{},{},{},{},{:016x},{:016x}",
            self.cycle,
            self.array,
            self.pe,
            self.phase,
            pack_complex(self.acc),
            pack_complex(self.b_reg)
        )
    }
}

fn pack_complex(z: FxComplex) -> u64 {
    ((z.re.raw as i32 as u32 as u64) << 32) | (z.im.raw as i32 as u32 as u64)
}

/// Latency counters (and optionally the register dump) for one or more
/// simulated iterations.
#[derive(Debug, Clone)]
pub struct CycleTrace {
    pub iterations: u32,
    pub cycles_per_iteration: u64,
    pub total_cycles: u64,
    /// Per-iteration phase accounting, flush cycles included in their phase.
    pub phase_counts: Vec<(&'static str, u64)>,
    pub rows: Option<Vec<TraceRow>>,
}

impl CycleTrace {
    pub fn write_rows(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "cycle,array,pe,phase,acc_raw_hex,b_reg_raw_hex")?;
        if let Some(rows) = &self.rows {
            for row in rows {
                writeln!(out, "{}", row.render())?;
            }
        }
        Ok(())
    }
}

/// Cycle-accurate C1PO array: `B` PEs in a ring, each holding one rotated row
/// of `G`, one accumulator, and the circulating `x` operand register.
#[derive(Debug, Clone)]
pub struct C1poSim {
    cfg: ArrayConfig,
    /// `mem[pe][addr] = G[pe, (pe + addr) mod B]`; address 0 is the diagonal.
    mem: Vec<Vec<FxComplex>>,
    acc: Vec<FxComplex>,
    b_reg: Vec<FxComplex>,
    cycle: u64,
}

impl C1poSim {
    pub fn new(cfg: ArrayConfig, g_q: &FxMat, x_init: &[Complex64]) -> Result<Self> {
        if cfg.algorithm != Algorithm::C1po {
            return Err(Error::InvalidParams("config is not a C1PO array".into()));
        }
        let b = cfg.antennas;
        if g_q.rows() != b || g_q.cols() != b || x_init.len() != b {
            return Err(Error::DimensionMismatch(format!(
                "array of {} PEs with {}x{} G and length-{} x",
                b,
                g_q.rows(),
                g_q.cols(),
                x_init.len()
            )));
        }
        if g_q.fmt() != cfg.datapath.mat_fmt {
            return Err(Error::InvalidParams("G memory format mismatch".into()));
        }
        let mem = (0..b)
            .map(|pe| (0..b).map(|addr| g_q.at(pe, (pe + addr) % b)).collect())
            .collect();
        let b_reg: Vec<FxComplex> = x_init
            .iter()
            .map(|z| FxComplex::quantize(*z, cfg.datapath.x_fmt))
            .collect();
        let acc_fmt = mac_accumulator_fmt(cfg.datapath.mat_fmt, cfg.datapath.x_fmt);
        let acc = vec![FxComplex::zero(acc_fmt); b];
        Ok(Self {
            cfg,
            mem,
            acc,
            b_reg,
            cycle: 0,
        })
    }

    /// Advances exactly `B + 3` cycles and returns the per-iteration trace.
    pub fn iterate(&mut self) -> CycleTrace {
        let b = self.cfg.antennas;
        let acc_fmt = mac_accumulator_fmt(self.cfg.datapath.mat_fmt, self.cfg.datapath.x_fmt);
        let mut rows = if self.cfg.dump { Some(Vec::new()) } else { None };

        for z in self.acc.iter_mut() {
            *z = FxComplex::zero(acc_fmt);
        }
        // B MAC/exchange cycles: PE p multiplies its memory word by the
        // operand in its b register, then the operands rotate one step
        // (PE p receives from PE p+1, PE 0 feeds PE B-1).
        for addr in 0..b {
            self.cycle += 1;
            for pe in 0..b {
                let prod = fxc_mul(self.mem[pe][addr], self.b_reg[pe], acc_fmt);
                self.acc[pe] = fxc_add(self.acc[pe], prod, acc_fmt);
            }
            if let Some(rows) = rows.as_mut() {
                for pe in 0..b {
                    rows.push(TraceRow {
                        cycle: self.cycle,
                        array: 0,
                        pe: pe as u32,
                        phase: "mac",
                        acc: self.acc[pe],
                        b_reg: self.b_reg[pe],
                    });
                }
            }
            self.b_reg.rotate_left(1);
        }
        // two pipeline flush cycles
        for _ in 0..2 {
            self.cycle += 1;
            self.dump_all(&mut rows, "flush");
        }
        // projection cycle: the accumulated value leaves the MAC unit in its
        // declared format, enters the projection unit, expand/clip, write
        // back into the operand registers
        self.cycle += 1;
        for pe in 0..b {
            let z = self.acc[pe]
                .resize(self.cfg.datapath.mac_fmt)
                .resize(self.cfg.datapath.proj_fmt);
            let (re, im) = hw_proj(z.re, z.im, &self.cfg.datapath);
            self.b_reg[pe] = FxComplex { re, im }.resize(self.cfg.datapath.x_fmt);
        }
        self.dump_all(&mut rows, "proj");

        CycleTrace {
            iterations: 1,
            cycles_per_iteration: b as u64 + 3,
            total_cycles: b as u64 + 3,
            phase_counts: vec![("mac", b as u64 + 2), ("proj", 1)],
            rows,
        }
    }

    fn dump_all(&self, rows: &mut Option<Vec<TraceRow>>, phase: &'static str) {
        if let Some(rows) = rows.as_mut() {
            for pe in 0..self.cfg.antennas {
                rows.push(TraceRow {
                    cycle: self.cycle,
                    array: 0,
                    pe: pe as u32,
                    phase,
                    acc: self.acc[pe],
                    b_reg: self.b_reg[pe],
                });
            }
        }
    }

    /// Current iterate (the operand registers).
    pub fn x(&self) -> &[FxComplex] {
        &self.b_reg
    }

    pub fn signs(&self) -> Vec<(i8, i8)> {
        self.b_reg.iter().map(FxComplex::signs).collect()
    }
}

/// Cycle-accurate C2PO array: `B/U` linear arrays of `U + 1` PEs. Each PE
/// stores one rotated row of its sub-matrix, an `a` register with its `x`
/// entry, and a `b` register that carries the scaled operand during the wide
/// product and the latched `w` entry during the tall product.
#[derive(Debug, Clone)]
pub struct C2poSim {
    cfg: ArrayConfig,
    alpha: u32,
    /// `mem[array][pe][addr]`, diagonal-start rotation for PEs 0..U, natural
    /// order for PE U (the extra row).
    mem: Vec<Vec<Vec<FxComplex>>>,
    /// `x` entries, global indexing (array-major).
    a_reg: Vec<FxComplex>,
    /// Wide-product operands / latched `w`, per array and PE.
    b_reg: Vec<Vec<FxComplex>>,
    /// Wide-product accumulators per array and PE.
    acc: Vec<Vec<FxComplex>>,
    /// Tall-product accumulators, one per output entry (these circulate
    /// among the PEs of their array).
    z_acc: Vec<FxComplex>,
    cycle: u64,
}

impl C2poSim {
    pub fn new(cfg: ArrayConfig, hbar_q: &FxMat, x_init: &[Complex64], alpha: u32) -> Result<Self> {
        if cfg.algorithm != Algorithm::C2po {
            return Err(Error::InvalidParams("config is not a C2PO array".into()));
        }
        let (users, b) = (cfg.users, cfg.antennas);
        if hbar_q.rows() != users + 1 || hbar_q.cols() != b || x_init.len() != b {
            return Err(Error::DimensionMismatch(format!(
                "C2PO array {}x{} with {}x{} Hbar and length-{} x",
                users,
                b,
                hbar_q.rows(),
                hbar_q.cols(),
                x_init.len()
            )));
        }
        if hbar_q.fmt() != cfg.datapath.mat_fmt {
            return Err(Error::InvalidParams("Hbar memory format mismatch".into()));
        }
        if alpha == 0 {
            return Err(Error::InvalidParams(
                "step-size shift alpha must be at least 1".into(),
            ));
        }
        let arrays = b / users;
        let mem = (0..arrays)
            .map(|array| {
                (0..=users)
                    .map(|pe| {
                        (0..users)
                            .map(|addr| {
                                let col = if pe < users { (pe + addr) % users } else { addr };
                                hbar_q.at(pe, array * users + col)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let a_reg: Vec<FxComplex> = x_init
            .iter()
            .map(|z| FxComplex::quantize(*z, cfg.datapath.x_fmt))
            .collect();
        let tau_fmt = cfg.datapath.tau_x_fmt.unwrap();
        let scale = |w: FxComplex| FxComplex {
            re: fx_mul_pow2(w.re, -(alpha as i32), tau_fmt),
            im: fx_mul_pow2(w.im, -(alpha as i32), tau_fmt),
        };
        let b_reg = (0..arrays)
            .map(|array| {
                let mut regs: Vec<FxComplex> = (0..users)
                    .map(|pe| scale(a_reg[array * users + pe]))
                    .collect();
                // the extra PE mirrors PE 0's operand
                regs.push(regs[0]);
                regs
            })
            .collect();
        let wide_acc = mac_accumulator_fmt(cfg.datapath.mat_fmt, tau_fmt);
        let tall_acc =
            mac_accumulator_fmt(cfg.datapath.mat_fmt, cfg.datapath.mac_tall_fmt.unwrap());
        let acc = vec![vec![FxComplex::zero(wide_acc); users + 1]; arrays];
        let z_acc = vec![FxComplex::zero(tall_acc); b];
        Ok(Self {
            cfg,
            alpha,
            mem,
            a_reg,
            b_reg,
            acc,
            z_acc,
            cycle: 0,
        })
    }

    /// Advances exactly `2U + log2(B/U) + 6` cycles.
    pub fn iterate(&mut self) -> CycleTrace {
        let users = self.cfg.users;
        let arrays = self.cfg.antennas / users;
        let dp = self.cfg.datapath;
        let tall = dp.mac_tall_fmt.unwrap();
        let tree_fmt = dp.tree_fmt.unwrap();
        let tau_fmt = dp.tau_x_fmt.unwrap();
        let wide_acc = mac_accumulator_fmt(dp.mat_fmt, tau_fmt);
        let tall_acc = mac_accumulator_fmt(dp.mat_fmt, tall);
        let tree_depth = arrays.ilog2() as usize;
        let mut rows = if self.cfg.dump { Some(Vec::new()) } else { None };

        // --- wide product: U MAC/exchange cycles per array ---
        for array in 0..arrays {
            for z in self.acc[array].iter_mut() {
                *z = FxComplex::zero(wide_acc);
            }
        }
        for addr in 0..users {
            self.cycle += 1;
            for array in 0..arrays {
                for pe in 0..=users {
                    let prod =
                        fxc_mul(self.mem[array][pe][addr], self.b_reg[array][pe], wide_acc);
                    self.acc[array][pe] = fxc_add(self.acc[array][pe], prod, wide_acc);
                }
            }
            self.dump_wide(&mut rows, "wide");
            for array in 0..arrays {
                // PEs 0..U exchange cyclically; the extra PE shadows PE 0
                let ring = &mut self.b_reg[array];
                ring[..users].rotate_left(1);
                ring[users] = ring[0];
            }
        }
        for _ in 0..2 {
            self.cycle += 1;
            self.dump_wide(&mut rows, "flush");
        }

        // --- adder tree: log2(B/U) pipelined levels, element-wise over the
        // U+1 partial vectors; the array outputs leave the MAC units in the
        // declared wide format ---
        let mut level: Vec<Vec<FxComplex>> = (0..arrays)
            .map(|array| {
                (0..=users)
                    .map(|pe| self.acc[array][pe].resize(dp.mac_fmt).resize(tree_fmt))
                    .collect()
            })
            .collect();
        for _stage in 0..tree_depth {
            self.cycle += 1;
            level = level
                .chunks(2)
                .map(|pair| {
                    (0..=users)
                        .map(|pe| fxc_add(pair[0][pe], pair[1][pe], tree_fmt))
                        .collect()
                })
                .collect();
            self.dump_wide(&mut rows, "tree");
        }
        debug_assert_eq!(level.len(), 1);
        // w latches into every PE's b register, reformatted for the tall MAC
        for array in 0..arrays {
            for pe in 0..=users {
                self.b_reg[array][pe] = level[0][pe].resize(tall);
            }
        }

        // --- tall product: U+1 accumulate cycles; partial sums circulate
        // among PEs 0..U-1 while the extra PE's products ride the exchange
        // wires and arrive, one per entry, in cycle U+1 ---
        for k in 0..users {
            self.cycle += 1;
            for array in 0..arrays {
                for pe in 0..users {
                    // PE `pe` holds the accumulator of entry (pe + k) mod U
                    // this cycle and contributes its own column term
                    let entry = array * users + (pe + k) % users;
                    let prod =
                        fxc_mul_conj(self.b_reg[array][pe], self.mem[array][pe][k], tall_acc);
                    if k == 0 {
                        let init = self.a_reg[entry].resize(tall_acc);
                        self.z_acc[entry] = fxc_sub(init, prod, tall_acc);
                    } else {
                        self.z_acc[entry] = fxc_sub(self.z_acc[entry], prod, tall_acc);
                    }
                }
            }
            self.dump_tall(&mut rows, "tall", k);
        }
        // cycle U+1: the extra PE's product for entry u arrives at PE u and
        // is accumulated by addition (the sign flip of the last
        // Hbar^Upsilon column is folded into this add)
        self.cycle += 1;
        for array in 0..arrays {
            for pe in 0..users {
                let entry = array * users + pe;
                let prod = fxc_mul_conj(
                    self.b_reg[array][users],
                    self.mem[array][users][pe],
                    tall_acc,
                );
                self.z_acc[entry] = fxc_add(self.z_acc[entry], prod, tall_acc);
            }
        }
        self.dump_tall(&mut rows, "tall", users);
        for _ in 0..2 {
            self.cycle += 1;
            self.dump_tall(&mut rows, "flush", 0);
        }

        // --- projection cycle: write back x and tau*x ---
        self.cycle += 1;
        for array in 0..arrays {
            for pe in 0..users {
                let entry = array * users + pe;
                let z = self.z_acc[entry].resize(tall);
                let (re, im) = hw_proj(z.re, z.im, &dp);
                let x_new = FxComplex { re, im }.resize(dp.x_fmt);
                self.a_reg[entry] = x_new;
                self.b_reg[array][pe] = FxComplex {
                    re: fx_mul_pow2(x_new.re, -(self.alpha as i32), tau_fmt),
                    im: fx_mul_pow2(x_new.im, -(self.alpha as i32), tau_fmt),
                };
            }
            self.b_reg[array][users] = self.b_reg[array][0];
        }
        self.dump_tall(&mut rows, "proj", 0);

        let latency = self.cfg.iteration_latency();
        CycleTrace {
            iterations: 1,
            cycles_per_iteration: latency,
            total_cycles: latency,
            phase_counts: vec![
                ("wide", users as u64 + 2),
                ("tree", tree_depth as u64),
                ("tall", users as u64 + 3),
                ("proj", 1),
            ],
            rows,
        }
    }

    /// Dump with the wide-product accumulators visible (wide/flush/tree
    /// phases).
    fn dump_wide(&self, rows: &mut Option<Vec<TraceRow>>, phase: &'static str) {
        if let Some(rows) = rows.as_mut() {
            let users = self.cfg.users;
            for (array, regs) in self.b_reg.iter().enumerate() {
                for pe in 0..=users {
                    rows.push(TraceRow {
                        cycle: self.cycle,
                        array: array as u32,
                        pe: pe as u32,
                        phase,
                        acc: self.acc[array][pe],
                        b_reg: regs[pe],
                    });
                }
            }
        }
    }

    /// Dump with the circulating tall-product partials visible: at tall
    /// cycle `k`, PE `p` holds the accumulator of entry `(p + k) mod U`. The
    /// extra PE reports its wide accumulator (its product output path).
    fn dump_tall(&self, rows: &mut Option<Vec<TraceRow>>, phase: &'static str, k: usize) {
        if let Some(rows) = rows.as_mut() {
            let users = self.cfg.users;
            for array in 0..self.b_reg.len() {
                for pe in 0..=users {
                    let acc = if pe < users {
                        self.z_acc[array * users + (pe + k) % users]
                    } else {
                        self.acc[array][pe]
                    };
                    rows.push(TraceRow {
                        cycle: self.cycle,
                        array: array as u32,
                        pe: pe as u32,
                        phase,
                        acc,
                        b_reg: self.b_reg[array][pe],
                    });
                }
            }
        }
    }

    pub fn x(&self) -> &[FxComplex] {
        &self.a_reg
    }

    pub fn signs(&self) -> Vec<(i8, i8)> {
        self.a_reg.iter().map(FxComplex::signs).collect()
    }
}

/// One C1PO iteration on an existing array state; returns the new iterate's
/// signs via the state.
pub fn simulate_c1po_iteration(sim: &mut C1poSim) -> CycleTrace {
    sim.iterate()
}

/// One C2PO iteration on an existing array state.
pub fn simulate_c2po_iteration(sim: &mut C2poSim) -> CycleTrace {
    sim.iterate()
}

/// Runs the full precoder on the simulated hardware: quantizes the matrices
/// from the problem instance, iterates `t_max` times, and returns the
/// quaternary output with the matched precoding factor plus the aggregated
/// cycle counters.
pub fn run_precoder_hw(
    cfg: &ArrayConfig,
    p: &PrecodeProblem,
    t_max: usize,
) -> Result<(PrecodeResult, CycleTrace)> {
    let inputs = hardware_inputs(p)?;
    run_precoder_hw_with(cfg, p, &inputs, t_max)
}

/// Same as [`run_precoder_hw`] but reusing already-quantized inputs.
pub fn run_precoder_hw_with(
    cfg: &ArrayConfig,
    p: &PrecodeProblem,
    inputs: &crate::fixedpoint::HardwareInputs,
    t_max: usize,
) -> Result<(PrecodeResult, CycleTrace)> {
    if p.users() != cfg.users || p.antennas() != cfg.antennas {
        return Err(Error::DimensionMismatch(format!(
            "array is {}x{} but problem is {}x{}",
            cfg.users,
            cfg.antennas,
            p.users(),
            p.antennas()
        )));
    }
    let want_p = 2.0 * cfg.antennas as f64;
    if ((p.p - want_p) / want_p).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "hardware arrays assume P = 2B, got P = {}",
            p.p
        )));
    }
    let mut all_rows: Option<Vec<TraceRow>> = if cfg.dump { Some(Vec::new()) } else { None };
    let mut phase_counts = Vec::new();
    let mut total = 0u64;
    let signs = match cfg.algorithm {
        Algorithm::C1po => {
            let mut sim = C1poSim::new(cfg.clone(), &inputs.g_q, &inputs.x_init)?;
            for _ in 0..t_max {
                let tr = sim.iterate();
                total += tr.total_cycles;
                phase_counts = tr.phase_counts;
                if let (Some(all), Some(rows)) = (all_rows.as_mut(), tr.rows) {
                    all.extend(rows);
                }
            }
            sim.signs()
        }
        Algorithm::C2po => {
            let mut sim = C2poSim::new(cfg.clone(), &inputs.hbar_q, &inputs.x_init, inputs.alpha)?;
            for _ in 0..t_max {
                let tr = sim.iterate();
                total += tr.total_cycles;
                phase_counts = tr.phase_counts;
                if let (Some(all), Some(rows)) = (all_rows.as_mut(), tr.rows) {
                    all.extend(rows);
                }
            }
            sim.signs()
        }
    };
    let x = crate::fixedpoint::signs_to_output(&signs, p.p);
    let beta = mse_optimal_beta(&p.h, &x, &p.s, p.n0)?;
    let trace = CycleTrace {
        iterations: t_max as u32,
        cycles_per_iteration: cfg.iteration_latency(),
        total_cycles: total,
        phase_counts,
        rows: all_rows,
    };
    Ok((
        PrecodeResult {
            x,
            beta: beta.value,
            trace: None,
        },
        trace,
    ))
}
