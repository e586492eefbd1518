//! Bit-exact Q-format arithmetic and functional fixed-point models of the
//! C1PO/C2PO datapaths.
//!
//! The arithmetic follows the hardware conventions exactly: adders and
//! multipliers never saturate but wrap around in two's complement, and every
//! resize truncates (drops fraction LSBs, i.e. floors the raw integer).
//! Storage-side quantization of floating-point matrices into the small
//! memory formats rounds to nearest and clamps; the datapath itself only
//! wraps.
//!
//! Complex multipliers are four real multiplies and two adds in a fixed
//! order (`re*re - im*im`, `re*im + im*re`). Inside a MAC phase the DSP
//! slices keep full product precision in their 48-bit accumulators (see
//! [`mac_accumulator_fmt`]); the accumulated value is truncated into the
//! unit's declared word length exactly once, at the unit boundary. Wrap
//! points therefore sit at the unit outputs, matching where the designs
//! resize.

use num_complex::Complex64;

use crate::numerics::CMat;
use crate::precoders::hardware_alpha;
use crate::signal::{mse_optimal_beta, PrecodeProblem};
use crate::{Error, Result};

/// Q-format descriptor: `word_bits` total two's-complement bits, of which
/// `frac_bits` sit below the binary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedFormat {
    pub word_bits: u32,
    pub frac_bits: u32,
}

impl FixedFormat {
    pub const fn new(word_bits: u32, frac_bits: u32) -> Self {
        assert!(word_bits >= 1 && word_bits <= 62);
        assert!(frac_bits <= word_bits);
        Self {
            word_bits,
            frac_bits,
        }
    }

    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.word_bits - 1)) - 1
    }

    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.word_bits - 1))
    }

    /// Value of one LSB.
    pub fn resolution(&self) -> f64 {
        0.5f64.powi(self.frac_bits as i32)
    }
}

impl std::fmt::Display for FixedFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.word_bits, self.frac_bits)
    }
}

/// One fixed-point word: a raw two's-complement integer plus its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedWord {
    pub raw: i64,
    pub fmt: FixedFormat,
}

impl FixedWord {
    pub fn from_raw(raw: i64, fmt: FixedFormat) -> Self {
        debug_assert!(raw >= fmt.min_raw() && raw <= fmt.max_raw());
        Self { raw, fmt }
    }

    pub fn zero(fmt: FixedFormat) -> Self {
        Self { raw: 0, fmt }
    }

    /// Round-to-nearest storage quantization of a float, clamped to the
    /// representable range.
    pub fn quantize(x: f64, fmt: FixedFormat) -> Self {
        let scaled = (x * (1i64 << fmt.frac_bits) as f64).round();
        let raw = if scaled >= fmt.max_raw() as f64 {
            fmt.max_raw()
        } else if scaled <= fmt.min_raw() as f64 {
            fmt.min_raw()
        } else {
            scaled as i64
        };
        Self { raw, fmt }
    }

    pub fn value(&self) -> f64 {
        self.raw as f64 * self.fmt.resolution()
    }

    /// Sign per the hardware convention: +1 for raw >= 0, -1 otherwise.
    pub fn sign(&self) -> i8 {
        if self.raw >= 0 {
            1
        } else {
            -1
        }
    }
}

/// Wraps a raw integer into `word_bits` two's complement.
pub fn wrap_word(raw: i128, word_bits: u32) -> i64 {
    let m = 1i128 << word_bits;
    let r = raw.rem_euclid(m);
    (if r >= m / 2 { r - m } else { r }) as i64
}

/// Shifts `raw` so its fraction moves from `from_frac` to `to_frac` bits.
/// Right shifts floor (truncation toward minus infinity on the raw integer);
/// left shifts are exact.
pub fn truncate_to_frac(raw: i128, from_frac: u32, to_frac: u32) -> i128 {
    let shift = to_frac as i32 - from_frac as i32;
    if shift >= 0 {
        raw << shift
    } else {
        raw >> (-shift)
    }
}

fn retarget(raw: i128, from_frac: u32, out: FixedFormat) -> FixedWord {
    let t = truncate_to_frac(raw, from_frac, out.frac_bits);
    FixedWord {
        raw: wrap_word(t, out.word_bits),
        fmt: out,
    }
}

/// `a + b`, truncated and wrapped into `out`.
pub fn fx_add(a: FixedWord, b: FixedWord, out: FixedFormat) -> FixedWord {
    let f = a.fmt.frac_bits.max(b.fmt.frac_bits);
    let ar = (a.raw as i128) << (f - a.fmt.frac_bits);
    let br = (b.raw as i128) << (f - b.fmt.frac_bits);
    retarget(ar + br, f, out)
}

/// `a - b`, truncated and wrapped into `out`.
pub fn fx_sub(a: FixedWord, b: FixedWord, out: FixedFormat) -> FixedWord {
    let f = a.fmt.frac_bits.max(b.fmt.frac_bits);
    let ar = (a.raw as i128) << (f - a.fmt.frac_bits);
    let br = (b.raw as i128) << (f - b.fmt.frac_bits);
    retarget(ar - br, f, out)
}

/// `a * b`, truncated and wrapped into `out`.
pub fn fx_mul(a: FixedWord, b: FixedWord, out: FixedFormat) -> FixedWord {
    let prod = a.raw as i128 * b.raw as i128;
    retarget(prod, a.fmt.frac_bits + b.fmt.frac_bits, out)
}

/// Reformats a word (truncate fraction LSBs, wrap to the new width).
pub fn fx_resize(a: FixedWord, out: FixedFormat) -> FixedWord {
    retarget(a.raw as i128, a.fmt.frac_bits, out)
}

/// `a * 2^exp` reformatted into `out`; negative `exp` is the hardware's
/// arithmetic right shift.
pub fn fx_mul_pow2(a: FixedWord, exp: i32, out: FixedFormat) -> FixedWord {
    let eff = a.fmt.frac_bits as i32 - exp;
    debug_assert!(eff >= 0, "shift below zero fraction bits");
    retarget(a.raw as i128, eff as u32, out)
}

/// Complex fixed-point value; both parts share one format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxComplex {
    pub re: FixedWord,
    pub im: FixedWord,
}

impl FxComplex {
    pub fn zero(fmt: FixedFormat) -> Self {
        Self {
            re: FixedWord::zero(fmt),
            im: FixedWord::zero(fmt),
        }
    }

    pub fn quantize(z: Complex64, fmt: FixedFormat) -> Self {
        Self {
            re: FixedWord::quantize(z.re, fmt),
            im: FixedWord::quantize(z.im, fmt),
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn resize(&self, out: FixedFormat) -> Self {
        Self {
            re: fx_resize(self.re, out),
            im: fx_resize(self.im, out),
        }
    }

    pub fn signs(&self) -> (i8, i8) {
        (self.re.sign(), self.im.sign())
    }
}

/// Complex multiply `a * b`: the four real products are each resized into
/// `out` before the two combining adds.
pub fn fxc_mul(a: FxComplex, b: FxComplex, out: FixedFormat) -> FxComplex {
    let rr = fx_mul(a.re, b.re, out);
    let ii = fx_mul(a.im, b.im, out);
    let ri = fx_mul(a.re, b.im, out);
    let ir = fx_mul(a.im, b.re, out);
    FxComplex {
        re: fx_sub(rr, ii, out),
        im: fx_add(ri, ir, out),
    }
}

/// Complex multiply with conjugated second operand, `a * conj(b)`, as the
/// MAC unit computes it (same four products, different combine signs).
pub fn fxc_mul_conj(a: FxComplex, b: FxComplex, out: FixedFormat) -> FxComplex {
    let rr = fx_mul(a.re, b.re, out);
    let ii = fx_mul(a.im, b.im, out);
    let ri = fx_mul(a.re, b.im, out);
    let ir = fx_mul(a.im, b.re, out);
    FxComplex {
        re: fx_add(rr, ii, out),
        im: fx_sub(ir, ri, out),
    }
}

/// Internal format of a MAC accumulation over products of `a_fmt * b_fmt`
/// words: full product precision in the DSP slice's 48-bit accumulator.
/// Operands this narrow can never overflow 48 bits at the array sizes
/// supported, so accumulation is exact and the accumulated value is resized
/// to the unit's declared output format exactly once.
pub fn mac_accumulator_fmt(a_fmt: FixedFormat, b_fmt: FixedFormat) -> FixedFormat {
    FixedFormat::new(48, a_fmt.frac_bits + b_fmt.frac_bits)
}

pub fn fxc_add(a: FxComplex, b: FxComplex, out: FixedFormat) -> FxComplex {
    FxComplex {
        re: fx_add(a.re, b.re, out),
        im: fx_add(a.im, b.im, out),
    }
}

pub fn fxc_sub(a: FxComplex, b: FxComplex, out: FixedFormat) -> FxComplex {
    FxComplex {
        re: fx_sub(a.re, b.re, out),
        im: fx_sub(a.im, b.im, out),
    }
}

/// Matrix of quantized complex words (row-major), e.g. the stored `G` or
/// `Hbar`.
#[derive(Debug, Clone)]
pub struct FxMat {
    rows: usize,
    cols: usize,
    fmt: FixedFormat,
    data: Vec<FxComplex>,
}

impl FxMat {
    /// Quantizes a float matrix into `fmt` storage (round to nearest, clamp).
    pub fn quantize(m: &CMat, fmt: FixedFormat) -> Self {
        let data = m.data().iter().map(|z| FxComplex::quantize(*z, fmt)).collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            fmt,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fmt(&self) -> FixedFormat {
        self.fmt
    }

    pub fn at(&self, i: usize, j: usize) -> FxComplex {
        self.data[i * self.cols + j]
    }
}

/// Which datapath a config describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    C1po,
    C2po,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::C1po => "c1po",
            Algorithm::C2po => "c2po",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1po" => Some(Algorithm::C1po),
            "c2po" => Some(Algorithm::C2po),
            _ => None,
        }
    }
}

/// Per-signal word-length table for one datapath. The two shipped presets
/// carry the word lengths the datapaths are designed around; fields that
/// only exist in the C2PO pipeline are `None` for C1PO.
#[derive(Debug, Clone, Copy)]
pub struct DatapathConfig {
    pub algorithm: Algorithm,
    /// Iterate registers `x`.
    pub x_fmt: FixedFormat,
    /// Scaled `tau*x` registers (C2PO only).
    pub tau_x_fmt: Option<FixedFormat>,
    /// Matrix memory entries (`G` rows for C1PO, `Hbar` rows for C2PO).
    pub mat_fmt: FixedFormat,
    /// MAC accumulator (C1PO) / wide-product accumulator (C2PO).
    pub mac_fmt: FixedFormat,
    /// Tall-product accumulator (C2PO only).
    pub mac_tall_fmt: Option<FixedFormat>,
    /// Projection unit.
    pub proj_fmt: FixedFormat,
    /// Adder tree, applied at every tree level (C2PO only).
    pub tree_fmt: Option<FixedFormat>,
}

impl DatapathConfig {
    /// C1PO datapath: x 12/5, G 10/9, MAC 18/11, projection 15/8.
    pub fn c1po() -> Self {
        Self {
            algorithm: Algorithm::C1po,
            x_fmt: FixedFormat::new(12, 5),
            tau_x_fmt: None,
            mat_fmt: FixedFormat::new(10, 9),
            mac_fmt: FixedFormat::new(18, 11),
            mac_tall_fmt: None,
            proj_fmt: FixedFormat::new(15, 8),
            tree_fmt: None,
        }
    }

    /// C2PO datapath: x 12/5, tau*x 12/11, Hbar 10/8, MAC 18/15 wide and
    /// 18/11 tall, projection 18/11, adder tree 21/15.
    pub fn c2po() -> Self {
        Self {
            algorithm: Algorithm::C2po,
            x_fmt: FixedFormat::new(12, 5),
            tau_x_fmt: Some(FixedFormat::new(12, 11)),
            mat_fmt: FixedFormat::new(10, 8),
            mac_fmt: FixedFormat::new(18, 15),
            mac_tall_fmt: Some(FixedFormat::new(18, 11)),
            proj_fmt: FixedFormat::new(18, 11),
            tree_fmt: Some(FixedFormat::new(21, 15)),
        }
    }

    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::C1po => Self::c1po(),
            Algorithm::C2po => Self::c2po(),
        }
    }
}

/// Hardware expansion-reprojection on one complex value in the projection
/// unit's format: parts above +0.8 clip to +1, below -0.8 to -1, everything
/// else is multiplied by 1.25 through a shift-and-add
/// (`part + (part >> 2)`).
///
/// Valid for the hardware preset (expansion factor 1.25, clip at ±1, which
/// assumes `P = 2B` so the clip threshold is 1).
pub fn hw_proj(z_re: FixedWord, z_im: FixedWord, cfg: &DatapathConfig) -> (FixedWord, FixedWord) {
    debug_assert_eq!(z_re.fmt, cfg.proj_fmt);
    debug_assert_eq!(z_im.fmt, cfg.proj_fmt);
    (hw_proj_part(z_re), hw_proj_part(z_im))
}

fn hw_proj_part(z: FixedWord) -> FixedWord {
    let fmt = z.fmt;
    let one = 1i64 << fmt.frac_bits;
    // 0.8 is not representable; the comparison against the truncated
    // constant floor(0.8 * 2^frac) decides identically to a real-valued
    // comparison for every representable input.
    let thresh = (one * 4) / 5;
    let raw = if z.raw > thresh {
        one
    } else if z.raw < -thresh {
        -one
    } else {
        wrap_word(z.raw as i128 + (z.raw >> 2) as i128, fmt.word_bits)
    };
    FixedWord { raw, fmt }
}

fn require_hardware_power(p: &PrecodeProblem) -> Result<()> {
    let want = 2.0 * p.antennas() as f64;
    if ((p.p - want) / want).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "fixed-point datapaths assume P = 2B (clip threshold 1); got P = {} for B = {}",
            p.p,
            p.antennas()
        )));
    }
    Ok(())
}

/// Functional fixed-point C1PO state: quantized `G` rows plus the `x`
/// registers. One [`step`](Self::step) is one algorithm iteration.
#[derive(Debug, Clone)]
pub struct C1poFixedState {
    cfg: DatapathConfig,
    g: FxMat,
    x: Vec<FxComplex>,
}

impl C1poFixedState {
    pub fn new(g_q: FxMat, x_init: &[Complex64]) -> Result<Self> {
        let cfg = DatapathConfig::c1po();
        if g_q.rows() != g_q.cols() || g_q.rows() != x_init.len() {
            return Err(Error::DimensionMismatch(format!(
                "G is {}x{} but x has length {}",
                g_q.rows(),
                g_q.cols(),
                x_init.len()
            )));
        }
        if g_q.fmt() != cfg.mat_fmt {
            return Err(Error::InvalidParams(format!(
                "G must be stored as Q{}, got Q{}",
                cfg.mat_fmt,
                g_q.fmt()
            )));
        }
        let x = x_init
            .iter()
            .map(|z| FxComplex::quantize(*z, cfg.x_fmt))
            .collect();
        Ok(Self { cfg, g: g_q, x })
    }

    /// One iteration: MAC sweep `z = G x` (exact 48-bit accumulation,
    /// resized once to the MAC output format), projection, writeback.
    pub fn step(&mut self) {
        let b = self.x.len();
        let acc_fmt = mac_accumulator_fmt(self.cfg.mat_fmt, self.cfg.x_fmt);
        let mut next = Vec::with_capacity(b);
        for row in 0..b {
            let mut acc = FxComplex::zero(acc_fmt);
            for col in 0..b {
                let prod = fxc_mul(self.g.at(row, col), self.x[col], acc_fmt);
                acc = fxc_add(acc, prod, acc_fmt);
            }
            let z = acc.resize(self.cfg.mac_fmt).resize(self.cfg.proj_fmt);
            let (pr, pi) = hw_proj(z.re, z.im, &self.cfg);
            next.push(FxComplex { re: pr, im: pi }.resize(self.cfg.x_fmt));
        }
        self.x = next;
    }

    pub fn x(&self) -> &[FxComplex] {
        &self.x
    }

    /// Sign bits of the current iterate, the 1-bit precoder output.
    pub fn signs(&self) -> Vec<(i8, i8)> {
        self.x.iter().map(FxComplex::signs).collect()
    }
}

/// Functional fixed-point C2PO state: quantized `Hbar`, the `x` and `tau*x`
/// registers and the step-size shift.
#[derive(Debug, Clone)]
pub struct C2poFixedState {
    cfg: DatapathConfig,
    hbar: FxMat,
    users: usize,
    arrays: usize,
    alpha: u32,
    x: Vec<FxComplex>,
    tau_x: Vec<FxComplex>,
}

impl C2poFixedState {
    pub fn new(hbar_q: FxMat, x_init: &[Complex64], alpha: u32) -> Result<Self> {
        let cfg = DatapathConfig::c2po();
        let users = hbar_q.rows().saturating_sub(1);
        let b = hbar_q.cols();
        if users == 0 || b != x_init.len() {
            return Err(Error::DimensionMismatch(format!(
                "Hbar is {}x{} but x has length {}",
                hbar_q.rows(),
                hbar_q.cols(),
                x_init.len()
            )));
        }
        if !b.is_multiple_of(users) || !(b / users).is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "need B divisible by U with B/U a power of two, got B={b} U={users}"
            )));
        }
        if hbar_q.fmt() != cfg.mat_fmt {
            return Err(Error::InvalidParams(format!(
                "Hbar must be stored as Q{}, got Q{}",
                cfg.mat_fmt,
                hbar_q.fmt()
            )));
        }
        if alpha == 0 {
            return Err(Error::InvalidParams(
                "step-size shift alpha must be at least 1".into(),
            ));
        }
        let x: Vec<FxComplex> = x_init
            .iter()
            .map(|z| FxComplex::quantize(*z, cfg.x_fmt))
            .collect();
        let tau_fmt = cfg.tau_x_fmt.unwrap();
        let tau_x = x
            .iter()
            .map(|w| FxComplex {
                re: fx_mul_pow2(w.re, -(alpha as i32), tau_fmt),
                im: fx_mul_pow2(w.im, -(alpha as i32), tau_fmt),
            })
            .collect();
        Ok(Self {
            cfg,
            hbar: hbar_q,
            users,
            arrays: b / users,
            alpha,
            x,
            tau_x,
        })
    }

    /// One iteration: per-array wide products, adder tree, tall product with
    /// the sign-flipped last column, projection, writeback of both `x` and
    /// `tau*x`. Each MAC phase accumulates exactly and resizes once into its
    /// declared output format.
    pub fn step(&mut self) {
        let users = self.users;
        let rows = users + 1;
        let tree_fmt = self.cfg.tree_fmt.unwrap();
        let tall_fmt = self.cfg.mac_tall_fmt.unwrap();
        let tau_fmt = self.cfg.tau_x_fmt.unwrap();
        let wide_acc = mac_accumulator_fmt(self.cfg.mat_fmt, tau_fmt);
        let tall_acc = mac_accumulator_fmt(self.cfg.mat_fmt, tall_fmt);

        // wide product: each array accumulates its sub-matrix times the
        // scaled sub-vector; the adder tree then sums across arrays
        let mut w_latched = Vec::with_capacity(rows);
        for u in 0..rows {
            let mut tree = FxComplex::zero(tree_fmt);
            for array in 0..self.arrays {
                let mut acc = FxComplex::zero(wide_acc);
                for c in 0..users {
                    let col = array * users + c;
                    let prod = fxc_mul(self.hbar.at(u, col), self.tau_x[col], wide_acc);
                    acc = fxc_add(acc, prod, wide_acc);
                }
                let out = acc.resize(self.cfg.mac_fmt);
                tree = fxc_add(tree, out.resize(tree_fmt), tree_fmt);
            }
            // reformat into the MAC "b" register for the tall product
            w_latched.push(tree.resize(tall_fmt));
        }

        // tall product and projection
        let mut next_x = Vec::with_capacity(self.x.len());
        let mut next_tau = Vec::with_capacity(self.x.len());
        for bcol in 0..self.x.len() {
            let mut acc = self.x[bcol].resize(tall_acc);
            for c in 0..users {
                let prod = fxc_mul_conj(w_latched[c], self.hbar.at(c, bcol), tall_acc);
                acc = fxc_sub(acc, prod, tall_acc);
            }
            // the last row's contribution enters with a plus: the sign flip
            // of the last Hbar^Upsilon column is folded into the accumulate
            let prod = fxc_mul_conj(w_latched[users], self.hbar.at(users, bcol), tall_acc);
            acc = fxc_add(acc, prod, tall_acc);
            let acc = acc.resize(tall_fmt);

            let (pr, pi) = hw_proj(acc.re, acc.im, &self.cfg);
            let proj = FxComplex { re: pr, im: pi };
            let x_new = proj.resize(self.cfg.x_fmt);
            next_tau.push(FxComplex {
                re: fx_mul_pow2(x_new.re, -(self.alpha as i32), tau_fmt),
                im: fx_mul_pow2(x_new.im, -(self.alpha as i32), tau_fmt),
            });
            next_x.push(x_new);
        }
        self.x = next_x;
        self.tau_x = next_tau;
    }

    pub fn x(&self) -> &[FxComplex] {
        &self.x
    }

    pub fn tau_x(&self) -> &[FxComplex] {
        &self.tau_x
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn signs(&self) -> Vec<(i8, i8)> {
        self.x.iter().map(FxComplex::signs).collect()
    }
}

/// Turns sign bits into the quaternary transmit vector with
/// `l = sqrt(P/(2B))`.
pub fn signs_to_output(signs: &[(i8, i8)], p: f64) -> Vec<Complex64> {
    let ell = (p / (2.0 * signs.len() as f64)).sqrt();
    signs
        .iter()
        .map(|(sr, si)| Complex64::new(ell * *sr as f64, ell * *si as f64))
        .collect()
}

/// Fixed-point C1PO: runs the full iteration loop in the exact datapath
/// word lengths and emits the sign-quantized output. `g_q` must be stored in
/// the G memory format (Q10.9).
pub fn c1po_fixed(
    p: &PrecodeProblem,
    g_q: &FxMat,
    x_init: &[Complex64],
    t_max: usize,
) -> Result<crate::precoders::PrecodeResult> {
    require_hardware_power(p)?;
    let mut state = C1poFixedState::new(g_q.clone(), x_init)?;
    for _ in 0..t_max {
        state.step();
    }
    finish_fixed(p, &state.signs())
}

/// Fixed-point C2PO with `tau = 2^-alpha`. `hbar_q` must be stored in the
/// Hbar memory format (Q10.8).
pub fn c2po_fixed(
    p: &PrecodeProblem,
    hbar_q: &FxMat,
    x_init: &[Complex64],
    alpha: u32,
    t_max: usize,
) -> Result<crate::precoders::PrecodeResult> {
    require_hardware_power(p)?;
    let mut state = C2poFixedState::new(hbar_q.clone(), x_init, alpha)?;
    for _ in 0..t_max {
        state.step();
    }
    finish_fixed(p, &state.signs())
}

fn finish_fixed(p: &PrecodeProblem, signs: &[(i8, i8)]) -> Result<crate::precoders::PrecodeResult> {
    let x = signs_to_output(signs, p.p);
    let beta = mse_optimal_beta(&p.h, &x, &p.s, p.n0)?;
    Ok(crate::precoders::PrecodeResult {
        x,
        beta: beta.value,
        trace: None,
    })
}

/// Derives the quantized inputs for the fixed-point/hardware paths from a
/// problem instance: `G` in Q10.9 (C1PO) or `Hbar` in Q10.8 plus the step
/// shift (C2PO), and the shared float initializer.
pub fn hardware_inputs(p: &PrecodeProblem) -> Result<HardwareInputs> {
    let setup = crate::precoders::build_setup(p)?;
    hardware_inputs_with(&setup)
}

/// Same as [`hardware_inputs`] but reusing an existing setup.
pub fn hardware_inputs_with(setup: &crate::precoders::ProblemSetup) -> Result<HardwareInputs> {
    let params = crate::precoders::BcrParams::hardware_c1po(setup.gram_norm, 0);
    let g = crate::precoders::c1po_precompute(setup, &params)?;
    let c1 = DatapathConfig::c1po();
    let c2 = DatapathConfig::c2po();
    Ok(HardwareInputs {
        g_q: FxMat::quantize(&g, c1.mat_fmt),
        hbar_q: FxMat::quantize(&setup.hbar, c2.mat_fmt),
        alpha: hardware_alpha(setup.gram_norm),
        x_init: setup.x_init.clone(),
    })
}

/// Pre-quantized matrices and initializer shared by the functional models
/// and the cycle-accurate simulator.
#[derive(Debug, Clone)]
pub struct HardwareInputs {
    pub g_q: FxMat,
    pub hbar_q: FxMat,
    pub alpha: u32,
    pub x_init: crate::numerics::CVec,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CMat;
    use crate::signal::{gen_channel, map_bits, Constellation, ConstellationKind, RngStream};
    use proptest::prelude::*;

    const Q12_5: FixedFormat = FixedFormat::new(12, 5);
    const Q4_0: FixedFormat = FixedFormat::new(4, 0);

    fn w(raw: i64, fmt: FixedFormat) -> FixedWord {
        FixedWord::from_raw(raw, fmt)
    }

    #[test]
    fn add_cancels() {
        let one = FixedWord::quantize(1.0, Q12_5);
        let neg = FixedWord::quantize(-1.0, Q12_5);
        assert_eq!(fx_add(one, neg, Q12_5).raw, 0);
    }

    #[test]
    fn wraparound_add() {
        // Q4.0: 7 + 1 wraps to -8
        let a = w(7, Q4_0);
        let b = w(1, Q4_0);
        assert_eq!(fx_add(a, b, Q4_0).raw, -8);
    }

    #[test]
    fn mul_exact_and_underflow() {
        let half = FixedWord::quantize(0.5, Q12_5);
        let q = fx_mul(half, half, Q12_5);
        assert_eq!(q.value(), 0.25);
        // 2^-5 * 2^-5 = 2^-10 truncates to zero at 5 fraction bits
        let lsb = w(1, Q12_5);
        assert_eq!(fx_mul(lsb, lsb, Q12_5).raw, 0);
    }

    #[test]
    fn truncation_floors_negative_values() {
        // -3 LSBs at 5 frac resized to 3 frac: floor(-3/4) = -1
        let a = w(-3, Q12_5);
        let out = fx_resize(a, FixedFormat::new(12, 3));
        assert_eq!(out.raw, -1);
    }

    #[test]
    fn storage_quantize_rounds_and_clamps() {
        let fmt = FixedFormat::new(10, 9);
        assert_eq!(FixedWord::quantize(1.0, fmt).raw, fmt.max_raw()); // clamp
        assert_eq!(FixedWord::quantize(-1.0, fmt).raw, -512);
        assert_eq!(FixedWord::quantize(0.5, fmt).raw, 256);
        // round to nearest
        assert_eq!(FixedWord::quantize(0.5 + 0.6 / 512.0, fmt).raw, 257);
    }

    #[test]
    fn hw_proj_branches() {
        let cfg = DatapathConfig::c1po();
        let fmt = cfg.proj_fmt; // Q15.8
        let zero = FixedWord::zero(fmt);
        let (r, i) = hw_proj(zero, zero, &cfg);
        assert_eq!((r.raw, i.raw), (0, 0));

        // 0.9 > 0.8 clips to +1.0
        let z = FixedWord::quantize(0.9, fmt);
        assert_eq!(hw_proj(z, zero, &cfg).0.value(), 1.0);
        let zn = FixedWord::quantize(-0.9, fmt);
        assert_eq!(hw_proj(zn, zero, &cfg).0.value(), -1.0);

        // 0.5 -> 0.625 exactly in Q15.8
        let half = FixedWord::quantize(0.5, fmt);
        assert_eq!(hw_proj(half, zero, &cfg).0.value(), 0.625);
    }

    #[test]
    fn hw_proj_magnitude_never_exceeds_one() {
        for cfg in [DatapathConfig::c1po(), DatapathConfig::c2po()] {
            let fmt = cfg.proj_fmt;
            let one = 1i64 << fmt.frac_bits;
            for raw in fmt.min_raw()..=fmt.max_raw() {
                let out = hw_proj_part(w(raw, fmt));
                assert!(
                    out.raw.abs() <= one,
                    "fmt {} raw {} -> {}",
                    fmt,
                    raw,
                    out.raw
                );
            }
        }
    }

    #[test]
    fn presets_pin_datapath_word_lengths() {
        let c1 = DatapathConfig::c1po();
        assert_eq!((c1.x_fmt.word_bits, c1.x_fmt.frac_bits), (12, 5));
        assert_eq!((c1.mat_fmt.word_bits, c1.mat_fmt.frac_bits), (10, 9));
        assert_eq!((c1.mac_fmt.word_bits, c1.mac_fmt.frac_bits), (18, 11));
        assert_eq!((c1.proj_fmt.word_bits, c1.proj_fmt.frac_bits), (15, 8));
        assert!(c1.tau_x_fmt.is_none() && c1.tree_fmt.is_none());

        let c2 = DatapathConfig::c2po();
        assert_eq!((c2.x_fmt.word_bits, c2.x_fmt.frac_bits), (12, 5));
        let tau = c2.tau_x_fmt.unwrap();
        assert_eq!((tau.word_bits, tau.frac_bits), (12, 11));
        assert_eq!((c2.mat_fmt.word_bits, c2.mat_fmt.frac_bits), (10, 8));
        assert_eq!((c2.mac_fmt.word_bits, c2.mac_fmt.frac_bits), (18, 15));
        let tall = c2.mac_tall_fmt.unwrap();
        assert_eq!((tall.word_bits, tall.frac_bits), (18, 11));
        assert_eq!((c2.proj_fmt.word_bits, c2.proj_fmt.frac_bits), (18, 11));
        let tree = c2.tree_fmt.unwrap();
        assert_eq!((tree.word_bits, tree.frac_bits), (21, 15));
    }

    fn bpsk_problem(users: usize, antennas: usize, seed: u64) -> PrecodeProblem {
        let mut rng = RngStream::new(seed);
        let h = gen_channel(users, antennas, &mut rng);
        let cst = Constellation::new(ConstellationKind::Bpsk);
        let bits: Vec<u8> = (0..users).map(|_| rng.next_bit()).collect();
        let s = map_bits(&bits, &cst).unwrap();
        let p = 2.0 * antennas as f64;
        PrecodeProblem::new(h, s, 0.1, p).unwrap()
    }

    #[test]
    fn degenerate_single_user_matches_float_signs() {
        // U=1: A = 0, G = I; the fixed path just re-projects the quantized
        // MRT initializer, so its signs match the float quantizer
        let p = bpsk_problem(1, 4, 3);
        let hw = hardware_inputs(&p).unwrap();
        let res = c1po_fixed(&p, &hw.g_q, &hw.x_init, 4).unwrap();
        let float_q = crate::precoders::quantize_output(&hw.x_init, p.p);
        assert_eq!(res.x, float_q);
    }

    #[test]
    fn fixed_vs_float_sign_agreement_is_high() {
        // fidelity smoke: fixed and float C1PO disagree on few antennas
        let trials = 200;
        let mut diff = 0usize;
        let mut total = 0usize;
        for seed in 0..trials {
            let p = bpsk_problem(16, 32, 1000 + seed);
            let setup = crate::precoders::build_setup(&p).unwrap();
            let params = crate::precoders::BcrParams::hardware_c1po(setup.gram_norm, 8);
            let float_res =
                crate::precoders::c1po_with(&setup, &p, &params, crate::precoders::TraceMode::Off)
                    .unwrap();
            let hw = hardware_inputs(&p).unwrap();
            let fixed_res = c1po_fixed(&p, &hw.g_q, &hw.x_init, 8).unwrap();
            for (a, b) in float_res.x.iter().zip(&fixed_res.x) {
                if (a.re > 0.0) != (b.re > 0.0) {
                    diff += 1;
                }
                if (a.im > 0.0) != (b.im > 0.0) {
                    diff += 1;
                }
                total += 2;
            }
        }
        let rate = diff as f64 / total as f64;
        assert!(rate <= 0.05, "fixed/float sign mismatch rate {}", rate);
    }

    #[test]
    fn c2po_fixed_runs_and_is_deterministic() {
        let p = bpsk_problem(4, 16, 9);
        let hw = hardware_inputs(&p).unwrap();
        let a = c2po_fixed(&p, &hw.hbar_q, &hw.x_init, hw.alpha, 8).unwrap();
        let b = c2po_fixed(&p, &hw.hbar_q, &hw.x_init, hw.alpha, 8).unwrap();
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn fixed_models_reject_wrong_power() {
        let mut rng = RngStream::new(4);
        let h = gen_channel(2, 8, &mut rng);
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        let p = PrecodeProblem::new(h, s, 0.0, 1.0).unwrap(); // P != 2B
        let hw_in = {
            let p2 = PrecodeProblem::new(p.h.clone(), p.s.clone(), 0.0, 16.0).unwrap();
            hardware_inputs(&p2).unwrap()
        };
        assert!(c1po_fixed(&p, &hw_in.g_q, &hw_in.x_init, 1).is_err());
    }

    #[test]
    fn quantize_matrix_respects_format() {
        let m = CMat::from_fn(3, 3, |i, j| Complex64::new(i as f64, -(j as f64)));
        let q = FxMat::quantize(&m, FixedFormat::new(10, 8));
        assert_eq!(q.at(0, 0).re.raw, 0);
        assert_eq!(q.at(1, 0).re.raw, 256);
        // 2.0 clamps to the max representable (511/256)
        assert_eq!(q.at(2, 0).re.raw, 511);
    }

    proptest! {
        #[test]
        fn fx_ops_are_closed(a_raw in -2048i64..2048, b_raw in -2048i64..2048) {
            let a = w(a_raw, Q12_5);
            let b = w(b_raw, Q12_5);
            for out in [Q12_5, FixedFormat::new(18, 11), Q4_0] {
                for r in [fx_add(a, b, out), fx_sub(a, b, out), fx_mul(a, b, out)] {
                    prop_assert!(r.raw >= out.min_raw() && r.raw <= out.max_raw());
                }
            }
        }

        #[test]
        fn truncation_is_monotone(a in -100_000i64..100_000, b in -100_000i64..100_000, shift in 0u32..12) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let ta = truncate_to_frac(lo as i128, shift, 0);
            let tb = truncate_to_frac(hi as i128, shift, 0);
            prop_assert!(ta <= tb);
        }

        #[test]
        fn mul_matches_float_within_one_lsb(av in -30.0f64..30.0, bv in -0.9f64..0.9) {
            // away from wrap, fixed multiply equals the float product up to
            // one LSB of truncation
            let fmt_a = FixedFormat::new(12, 5);
            let fmt_b = FixedFormat::new(10, 9);
            let out = FixedFormat::new(18, 11);
            let a = FixedWord::quantize(av, fmt_a);
            let b = FixedWord::quantize(bv, fmt_b);
            let exact = a.value() * b.value();
            prop_assume!(exact.abs() < 30.0); // stay within Q18.11 range
            let got = fx_mul(a, b, out).value();
            prop_assert!((got - exact).abs() <= out.resolution());
        }
    }
}
