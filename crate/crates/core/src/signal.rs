//! Downlink system model: constellations with Gray mapping, i.i.d. Rayleigh
//! channel generation, AWGN, and receiver-side scaling and detection.
//!
//! All randomness flows through [`RngStream`], a counter-based generator, so
//! that parallel Monte-Carlo trials get independent and reproducible
//! substreams keyed by `(seed, trial index)`. There is no global RNG.

use num_complex::Complex64;

use crate::numerics::{matvec, norm2_sqr, CMat, CVec};
use crate::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based pseudo-random stream (splitmix64 over a keyed counter).
///
/// The n-th output is a pure function of `(key, n)`, so identical seeds give
/// identical sequences on every platform, and substreams derived from
/// `(seed, index)` pairs are statistically independent of each other.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ GOLDEN_GAMMA),
            counter: 0,
        }
    }

    /// Substream `index` of the stream family keyed by `seed`. Used to give
    /// every Monte-Carlo trial its own independent stream.
    pub fn substream(seed: u64, index: u64) -> Self {
        let base = mix64(seed ^ GOLDEN_GAMMA);
        Self {
            key: mix64(base ^ index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]` (never zero, safe under `ln`).
    fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Pair of independent standard normal samples (Box-Muller).
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// One sample of a circularly-symmetric complex Gaussian with the given
    /// variance per complex entry (real and imaginary parts each carry half).
    pub fn next_cn(&mut self, variance: f64) -> Complex64 {
        let (a, b) = self.next_gaussian_pair();
        let s = (variance * 0.5).sqrt();
        Complex64::new(a * s, b * s)
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        // modulo bias is irrelevant at the sizes used here (n <= 16)
        self.next_u64() % n
    }

    /// Random bit.
    pub fn next_bit(&mut self) -> u8 {
        (self.next_u64() >> 63) as u8
    }
}

/// Supported modulation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Bpsk,
    Qpsk,
    Qam16,
}

impl ConstellationKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "bpsk" => Some(Self::Bpsk),
            "qpsk" | "4qam" | "qam4" => Some(Self::Qpsk),
            "16qam" | "qam16" => Some(Self::Qam16),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Qpsk => "qpsk",
            Self::Qam16 => "16qam",
        }
    }
}

/// A unit-average-energy constellation with Gray-coded bit labels.
///
/// Points are stored indexed by their label value read MSB-first, so
/// `points[label]` is the symbol carrying that bit pattern and the label
/// lookup after detection is just the point index.
///
/// Labeling conventions (chosen here once so golden vectors stay stable):
/// - BPSK: bit 0 -> +1, bit 1 -> -1.
/// - QPSK: first bit selects the in-phase sign, second bit the quadrature
///   sign, 0 -> positive; amplitudes 1/sqrt(2).
/// - 16-QAM: bits `[i1 i0 q1 q0]`; each axis uses the 2-bit Gray map
///   `00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3` on the `{±1, ±3}` grid scaled
///   by 1/sqrt(10) (first bit = sign, second bit = inner/outer).
#[derive(Debug, Clone)]
pub struct Constellation {
    kind: ConstellationKind,
    bits_per_symbol: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        let (bits_per_symbol, points) = match kind {
            ConstellationKind::Bpsk => {
                (1, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)])
            }
            ConstellationKind::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                let mut pts = Vec::with_capacity(4);
                for label in 0..4usize {
                    let i = if label >> 1 == 0 { a } else { -a };
                    let q = if label & 1 == 0 { a } else { -a };
                    pts.push(Complex64::new(i, q));
                }
                (2, pts)
            }
            ConstellationKind::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let mut pts = Vec::with_capacity(16);
                for label in 0..16usize {
                    let i = Self::gray2_level((label >> 3) as u8, ((label >> 2) & 1) as u8);
                    let q = Self::gray2_level(((label >> 1) & 1) as u8, (label & 1) as u8);
                    pts.push(Complex64::new(i * scale, q * scale));
                }
                (4, pts)
            }
        };
        Self {
            kind,
            bits_per_symbol,
            points,
        }
    }

    /// 2-bit Gray label to amplitude level: 00 -> +3, 01 -> +1, 11 -> -1,
    /// 10 -> -3.
    fn gray2_level(sign_bit: u8, mag_bit: u8) -> f64 {
        let mag = if mag_bit == 1 { 1.0 } else { 3.0 };
        if sign_bit == 1 {
            -mag
        } else {
            mag
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Bit label of point `index`, MSB first.
    pub fn label_bits(&self, index: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .map(|k| ((index >> (self.bits_per_symbol - 1 - k)) & 1) as u8)
            .collect()
    }

    /// Average symbol energy (should be 1 up to rounding).
    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Index of the nearest point in Euclidean distance. Ties resolve to the
    /// lowest index, so the output is deterministic even for degenerate
    /// inputs like a zero estimate.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Everything a precoder needs: channel, symbols, noise variance, and the
/// instantaneous transmit power budget.
#[derive(Debug, Clone)]
pub struct PrecodeProblem {
    /// Downlink channel, `U x B`.
    pub h: CMat,
    /// Symbol vector, length `U`.
    pub s: CVec,
    /// Noise variance per complex entry.
    pub n0: f64,
    /// Instantaneous transmit power, `||x||^2 = p`.
    pub p: f64,
}

impl PrecodeProblem {
    pub fn new(h: CMat, s: CVec, n0: f64, p: f64) -> Result<Self> {
        if h.rows() != s.len() {
            return Err(Error::DimensionMismatch(format!(
                "channel has {} rows but symbol vector has length {}",
                h.rows(),
                s.len()
            )));
        }
        if h.rows() > h.cols() {
            return Err(Error::InvalidParams(format!(
                "need U <= B, got U={} B={}",
                h.rows(),
                h.cols()
            )));
        }
        if n0 < 0.0 || !n0.is_finite() {
            return Err(Error::InvalidParams("noise variance must be >= 0".into()));
        }
        if p <= 0.0 || !p.is_finite() {
            return Err(Error::InvalidParams("transmit power must be > 0".into()));
        }
        Ok(Self { h, s, n0, p })
    }

    pub fn users(&self) -> usize {
        self.h.rows()
    }

    pub fn antennas(&self) -> usize {
        self.h.cols()
    }

    /// Per-component amplitude of the quaternary alphabet,
    /// `l = sqrt(p / (2B))`.
    pub fn ell(&self) -> f64 {
        (self.p / (2.0 * self.antennas() as f64)).sqrt()
    }
}

/// i.i.d. Rayleigh channel: `U x B` with CN(0,1) entries, drawn row by row.
pub fn gen_channel(users: usize, antennas: usize, rng: &mut RngStream) -> CMat {
    CMat::from_fn(users, antennas, |_, _| rng.next_cn(1.0))
}

/// i.i.d. complex Gaussian noise with variance `n0` per complex entry.
pub fn gen_noise(users: usize, n0: f64, rng: &mut RngStream) -> CVec {
    if n0 == 0.0 {
        return vec![Complex64::ZERO; users];
    }
    (0..users).map(|_| rng.next_cn(n0)).collect()
}

/// Maps a bit sequence onto constellation symbols. The length must be a
/// multiple of the bits-per-symbol of `c`.
pub fn map_bits(bits: &[u8], c: &Constellation) -> Result<CVec> {
    let bps = c.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::DimensionMismatch(format!(
            "bit sequence length {} is not a multiple of {} bits/symbol",
            bits.len(),
            bps
        )));
    }
    Ok(bits
        .chunks(bps)
        .map(|chunk| {
            let mut label = 0usize;
            for &b in chunk {
                label = (label << 1) | (b as usize & 1);
            }
            c.points()[label]
        })
        .collect())
}

/// Receiver side: scales every `y_u` by the common precoding factor `beta`
/// and emits the bits of the nearest constellation point.
pub fn receive_and_detect(y: &[Complex64], beta: Complex64, c: &Constellation) -> Vec<u8> {
    let mut bits = Vec::with_capacity(y.len() * c.bits_per_symbol());
    for &yu in y {
        let est = beta * yu;
        bits.extend(c.label_bits(c.nearest(est)));
    }
    bits
}

/// Precoding factor estimate; `degenerate` marks the `Hx = 0, N0 = 0` corner
/// where the MSE is flat and the returned value is 0 by convention.
#[derive(Debug, Clone, Copy)]
pub struct BetaEstimate {
    pub value: Complex64,
    pub degenerate: bool,
}

/// The minimizer of `||s - beta*Hx||^2 + |beta|^2 * U * N0` over complex
/// `beta`, i.e. `(Hx)^H s / (||Hx||^2 + U*N0)`.
pub fn mse_optimal_beta(
    h: &CMat,
    x: &[Complex64],
    s: &[Complex64],
    n0: f64,
) -> Result<BetaEstimate> {
    let hx = matvec(h, x)?;
    mse_optimal_beta_from_hx(&hx, s, n0)
}

/// Same as [`mse_optimal_beta`] but taking the precomputed noiseless receive
/// vector `Hx`.
pub fn mse_optimal_beta_from_hx(
    hx: &[Complex64],
    s: &[Complex64],
    n0: f64,
) -> Result<BetaEstimate> {
    if hx.len() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "Hx has length {} but s has length {}",
            hx.len(),
            s.len()
        )));
    }
    let users = s.len() as f64;
    let denom = norm2_sqr(hx) + users * n0;
    if denom == 0.0 {
        return Ok(BetaEstimate {
            value: Complex64::ZERO,
            degenerate: true,
        });
    }
    let num: Complex64 = hx.iter().zip(s).map(|(a, b)| a.conj() * b).sum();
    Ok(BetaEstimate {
        value: num / denom,
        degenerate: false,
    })
}

/// The MSE objective that `mse_optimal_beta` minimizes; exposed for tests.
pub fn mse_objective(h: &CMat, x: &[Complex64], s: &[Complex64], n0: f64, beta: Complex64) -> f64 {
    let hx = matvec(h, x).expect("dimensions checked by caller");
    let err: f64 = s
        .iter()
        .zip(&hx)
        .map(|(su, yu)| (su - beta * yu).norm_sqr())
        .sum();
    err + beta.norm_sqr() * s.len() as f64 * n0
}
