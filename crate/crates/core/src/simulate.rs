//! Monte-Carlo ground truth for the certified bounds.
//!
//! Every replicate re-samples all biases and weights from its own ChaCha8
//! stream `(seed, replicate index)`, so a batch is bit-identical under any
//! number of worker threads.

use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmath::{normal_cdf, normal_pdf};
use crate::localize::Rect;
use crate::numeric::{pairwise_mean, pairwise_sum, CompensatedSum};
use crate::recursion::Network;

pub const DEFAULT_MAX_STORED: usize = 100_000_000;
pub const DEFAULT_MAX_WORK: f64 = 1e11;

const BINARY_MAGIC: &[u8; 4] = b"GNNS";
const BINARY_VERSION: u32 = 1;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;
/// Asymptotic 95% quantile of the Kolmogorov distribution.
const KS95: f64 = 1.36;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub seed: u64,
    pub samples: usize,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Budget on `m · Σ n_ℓ n_{ℓ−1}` multiply-adds.
    pub max_work: f64,
    /// Budget on stored scalars `m · n_out`.
    pub max_stored: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 10_000,
            workers: 0,
            max_work: DEFAULT_MAX_WORK,
            max_stored: DEFAULT_MAX_STORED,
        }
    }
}

impl SimulationSettings {
    pub fn new(seed: u64, samples: usize) -> Self {
        Self {
            seed,
            samples,
            ..Self::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be >= 1".into()));
        }
        Ok(())
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::ResourceGuard(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(job))
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Multiply-adds of one forward pass through layer `upto` (1-based; the
/// output layer is `L + 1`).
fn forward_work(net: &Network, upto: usize) -> f64 {
    let widths = net.arch.widths();
    widths.windows(2).take(upto).map(|w| (w[0] * w[1]) as f64).sum()
}

fn check_budget(net: &Network, upto: usize, settings: &SimulationSettings, stored: usize) -> Result<()> {
    settings.validate()?;
    let work = settings.samples as f64 * forward_work(net, upto);
    if work > settings.max_work {
        return Err(Error::ResourceGuard(format!(
            "{work:.3e} multiply-adds exceed the budget of {:.3e}",
            settings.max_work
        )));
    }
    let scalars = settings.samples.saturating_mul(stored);
    if scalars > settings.max_stored {
        return Err(Error::ResourceGuard(format!(
            "{scalars} stored values exceed the budget of {}",
            settings.max_stored
        )));
    }
    Ok(())
}

/// One layer: `z_j = b_j + √(C_W/n_in) Σ_i W_ji a_i` with standard normal
/// `W` and `b ~ N(0, C_b)`.
fn dense_layer(rng: &mut ChaCha8Rng, a: &[f64], out: &mut [f64], cb: f64, cw: f64) {
    let bias_sd = cb.sqrt();
    let weight_sd = (cw / a.len() as f64).sqrt();
    for z in out.iter_mut() {
        let b: f64 = rng.sample(StandardNormal);
        let mut acc = 0.0;
        for &ai in a {
            let w: f64 = rng.sample(StandardNormal);
            acc += w * ai;
        }
        *z = bias_sd * b + weight_sd * acc;
    }
}

struct Scratch {
    prev: Vec<f64>,
    cur: Vec<f64>,
}

impl Scratch {
    fn new() -> Self {
        Self {
            prev: Vec::new(),
            cur: Vec::new(),
        }
    }
}

/// Runs hidden layers `1..=upto` and leaves the post-activations of layer
/// `upto` in `scratch.prev`.
fn forward_hidden(net: &Network, rng: &mut ChaCha8Rng, upto: usize, scratch: &mut Scratch) {
    let arch = &net.arch;
    scratch.prev.clear();
    scratch.prev.extend_from_slice(&net.input);
    for &width in &arch.hidden[..upto] {
        scratch.cur.clear();
        scratch.cur.resize(width, 0.0);
        dense_layer(rng, &scratch.prev, &mut scratch.cur, arch.cb, arch.cw);
        for z in scratch.cur.iter_mut() {
            *z = net.activation.eval(*z);
        }
        std::mem::swap(&mut scratch.prev, &mut scratch.cur);
    }
}

/// FNV-1a over a canonical encoding of `(activation, architecture, input)`.
pub fn network_fingerprint(net: &Network) -> u64 {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(net.activation.name().as_bytes());
    for v in [net.activation.lip, net.activation.lip_sq] {
        bytes.extend_from_slice(&v.unwrap_or(f64::NAN).to_bits().to_le_bytes());
    }
    for w in net.arch.widths() {
        bytes.extend_from_slice(&(w as u64).to_le_bytes());
    }
    for v in [net.arch.cb, net.arch.cw].iter().chain(&net.input) {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// `m × n_out` matrix of output draws, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub m: usize,
    pub n_out: usize,
    pub values: Vec<f64>,
    /// Absent for batches read back from a file.
    pub seed: Option<u64>,
    pub fingerprint: Option<u64>,
}

impl SampleBatch {
    pub fn from_values(m: usize, n_out: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n_out {
            return Err(Error::DimensionMismatch {
                expected: m * n_out,
                got: values.len(),
            });
        }
        Ok(Self {
            m,
            n_out,
            values,
            seed: None,
            fingerprint: None,
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_out.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Unbiased sample variance of coordinate `j`.
    pub fn column_variance(&self, j: usize) -> f64 {
        let col = self.column(j);
        let mean = pairwise_mean(&col);
        let sq: Vec<f64> = col.iter().map(|v| (v - mean) * (v - mean)).collect();
        pairwise_sum(&sq) / (col.len() as f64 - 1.0)
    }

    /// Flat binary: `"GNNS"`, version, `m`, `n_out` (u32 little-endian), then
    /// the values as little-endian f64, row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let as_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::ResourceGuard(format!("{what} = {v} does not fit the binary header")))
        };
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&as_u32(self.m, "m")?.to_le_bytes())?;
        w.write_all(&as_u32(self.n_out, "n_out")?.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(Error::Parse("not a sample file (bad magic)".into()));
        }
        let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes")) as usize;
        if field(4) != BINARY_VERSION as usize {
            return Err(Error::Parse(format!("unsupported sample file version {}", field(4))));
        }
        let (m, n_out) = (field(8), field(12));
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != m * n_out * 8 {
            return Err(Error::Parse(format!(
                "sample file body has {} bytes, header promises {}",
                body.len(),
                m * n_out * 8
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_values(m, n_out, values)
    }

    /// CSV with header `z1,…,z{n_out}`; values use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n_out).map(|j| format!("z{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))??;
        let n_out = header.split(',').count();
        let mut values = Vec::new();
        let mut m = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("CSV line {}: {e}", i + 2)))?;
            if row.len() != n_out {
                return Err(Error::Parse(format!(
                    "CSV line {}: {} fields, header has {n_out}",
                    i + 2,
                    row.len()
                )));
            }
            values.extend(row);
            m += 1;
        }
        Self::from_values(m, n_out, values)
    }
}

/// `m` independent draws of the output `z⁽ᴸ⁺¹⁾(x)`, each from freshly
/// sampled weights and biases.
pub fn sample_outputs(net: &Network, settings: &SimulationSettings) -> Result<SampleBatch> {
    let depth = net.arch.depth();
    let n_out = net.arch.n_out;
    check_budget(net, depth + 1, settings, n_out)?;
    let m = settings.samples;
    let seed = settings.seed;
    let mut values = vec![0.0; m * n_out];
    settings.run(|| {
        values
            .par_chunks_mut(n_out)
            .enumerate()
            .for_each_init(Scratch::new, |scratch, (i, row)| {
                let mut rng = replicate_rng(seed, i);
                forward_hidden(net, &mut rng, depth, scratch);
                dense_layer(&mut rng, &scratch.prev, row, net.arch.cb, net.arch.cw);
            })
    })?;
    Ok(SampleBatch {
        m,
        n_out,
        values,
        seed: Some(seed),
        fingerprint: Some(network_fingerprint(net)),
    })
}

fn check_layer(net: &Network, layer: usize) -> Result<()> {
    if layer == 0 || layer > net.arch.depth() {
        return Err(Error::InvalidParameter(format!(
            "layer must be in 1..={}, got {layer}",
            net.arch.depth()
        )));
    }
    Ok(())
}

/// `m` draws of the collective observable `(1/n_ℓ) Σ_j σ(z_j⁽ℓ⁾)²`.
pub fn sample_collective(net: &Network, layer: usize, settings: &SimulationSettings) -> Result<Vec<f64>> {
    check_layer(net, layer)?;
    check_budget(net, layer, settings, 1)?;
    let seed = settings.seed;
    let mut draws = vec![0.0; settings.samples];
    settings.run(|| {
        draws.par_iter_mut().enumerate().for_each_init(Scratch::new, |scratch, (i, out)| {
            let mut rng = replicate_rng(seed, i);
            forward_hidden(net, &mut rng, layer, scratch);
            for a in scratch.prev.iter_mut() {
                *a *= *a;
            }
            *out = pairwise_mean(&scratch.prev);
        })
    })?;
    Ok(draws)
}

/// Output draws from the conditional law: given layer `ℓ−1`, the
/// coordinates of `z⁽ℓ⁾` are i.i.d. `N(0, C_b + C_W O_n⁽ℓ⁻¹⁾)`. Same law as
/// [`sample_outputs`] at a cost of `Σ n_ℓ` normals per replicate.
pub fn sample_outputs_layerwise(net: &Network, settings: &SimulationSettings) -> Result<SampleBatch> {
    settings.validate()?;
    let arch = &net.arch;
    let n_out = arch.n_out;
    let scalars = settings.samples.saturating_mul(n_out);
    if scalars > settings.max_stored {
        return Err(Error::ResourceGuard(format!(
            "{scalars} stored values exceed the budget of {}",
            settings.max_stored
        )));
    }
    let m = settings.samples;
    let seed = settings.seed;
    let o0 = net.o_zero();
    let mut values = vec![0.0; m * n_out];
    settings.run(|| {
        values
            .par_chunks_mut(n_out)
            .enumerate()
            .for_each_init(Vec::new, |buf: &mut Vec<f64>, (i, row)| {
                let mut rng = replicate_rng(seed, i);
                let mut o = o0;
                for &width in &arch.hidden {
                    let sd = (arch.cb + arch.cw * o).sqrt();
                    buf.clear();
                    buf.extend((0..width).map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        let a = net.activation.eval(sd * z);
                        a * a
                    }));
                    o = pairwise_mean(buf);
                }
                let sd = (arch.cb + arch.cw * o).sqrt();
                for v in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sd * z;
                }
            })
    })?;
    Ok(SampleBatch {
        m,
        n_out,
        values,
        seed: Some(seed),
        fingerprint: Some(network_fingerprint(net)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Ks,
    W1_1d,
    RectFreq,
    CollectiveRms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub statistic: Statistic,
    pub value: f64,
    /// 95% Monte-Carlo half-width.
    pub mc_halfwidth: f64,
    pub m: usize,
}

fn sorted_checked(samples: &[f64], nu_sq: f64) -> Result<Vec<f64>> {
    if !(nu_sq > 0.0) || !nu_sq.is_finite() {
        return Err(Error::Degenerate(format!("reference variance must be positive, got {nu_sq}")));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("samples must be finite".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `sup_t |F_m(t) − Φ(t/ν)|`, half-width `1.36/√m`.
pub fn empirical_ks(samples: &[f64], nu_sq: f64) -> Result<EmpiricalEstimate> {
    let s = sorted_checked(samples, nu_sq)?;
    let nu = nu_sq.sqrt();
    let m = s.len() as f64;
    let value = s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let g = normal_cdf(x / nu);
        d.max((i as f64 + 1.0) / m - g).max(g - i as f64 / m)
    });
    Ok(EmpiricalEstimate {
        statistic: Statistic::Ks,
        value,
        mc_halfwidth: KS95 / m.sqrt(),
        m: s.len(),
    })
}

/// `∫_a^b Φ(t/ν) dt` via the antiderivative `tΦ(t/ν) + νφ(t/ν)`.
fn int_cdf(a: f64, b: f64, nu: f64) -> f64 {
    let h = |t: f64| {
        if t == f64::NEG_INFINITY {
            0.0
        } else {
            t * normal_cdf(t / nu) + nu * normal_pdf(t / nu)
        }
    };
    h(b) - h(a)
}

/// `∫_a^b (1 − Φ(t/ν)) dt`, using the reflected antiderivative.
fn int_survival(a: f64, b: f64, nu: f64) -> f64 {
    int_cdf(-b, -a, nu)
}

/// `∫_a^b |c − Φ(t/ν)| dt` for `a < b`.
fn segment_gap(a: f64, b: f64, c: f64, nu: f64) -> f64 {
    // on [a, b] the gap changes sign once, at t* = νΦ⁻¹(c)
    let cross = if c <= 0.0 {
        f64::NEG_INFINITY
    } else if c >= 1.0 {
        f64::INFINITY
    } else {
        nu * crate::gaussmath::normal_quantile(c)
    };
    let t = cross.clamp(a, b);
    // Φ lies below c on [a, t] and above it on [t, b]
    let below = |lo: f64, hi: f64| {
        if lo >= hi {
            return 0.0;
        }
        if hi <= 0.0 {
            c * (hi - lo) - int_cdf(lo, hi, nu)
        } else {
            int_survival(lo, hi, nu) - (1.0 - c) * (hi - lo)
        }
    };
    let above = |lo: f64, hi: f64| {
        if lo >= hi {
            return 0.0;
        }
        if hi <= 0.0 {
            int_cdf(lo, hi, nu) - c * (hi - lo)
        } else {
            (1.0 - c) * (hi - lo) - int_survival(lo, hi, nu)
        }
    };
    below(a, t).max(0.0) + above(t, b).max(0.0)
}

fn w1_sorted(s: &[f64], nu: f64) -> f64 {
    let m = s.len() as f64;
    let mut acc = CompensatedSum::new();
    // (-∞, x_1): F_m = 0
    acc.add(int_cdf(f64::NEG_INFINITY, s[0], nu));
    for (i, w) in s.windows(2).enumerate() {
        if w[1] > w[0] {
            acc.add(segment_gap(w[0], w[1], (i as f64 + 1.0) / m, nu));
        }
    }
    // (x_m, ∞): F_m = 1
    acc.add(int_survival(s[s.len() - 1], f64::INFINITY, nu));
    acc.value()
}

/// `∫ |F_m(t) − Φ(t/ν)| dt`, computed exactly between order statistics.
/// The half-width comes from ten disjoint sub-samples (fewer when `m < 20`).
pub fn empirical_w1(samples: &[f64], nu_sq: f64) -> Result<EmpiricalEstimate> {
    let s = sorted_checked(samples, nu_sq)?;
    let nu = nu_sq.sqrt();
    let value = w1_sorted(&s, nu);

    let parts = (samples.len() / 2).min(10);
    let mc_halfwidth = if parts < 2 {
        value
    } else {
        let size = samples.len() / parts;
        let estimates: Vec<f64> = (0..parts)
            .map(|k| {
                let mut chunk = samples[k * size..(k + 1) * size].to_vec();
                chunk.sort_by(f64::total_cmp);
                w1_sorted(&chunk, nu)
            })
            .collect();
        let mean = pairwise_mean(&estimates);
        let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (parts as f64 - 1.0);
        Z95 * var.sqrt() / (parts as f64).sqrt()
    };
    Ok(EmpiricalEstimate {
        statistic: Statistic::W1_1d,
        value,
        mc_halfwidth,
        m: s.len(),
    })
}

/// Fraction of rows inside `rect`, half-width `1.96√(p̂(1−p̂)/m)`.
pub fn empirical_rect_freq(batch: &SampleBatch, rect: &Rect) -> Result<EmpiricalEstimate> {
    rect.check_dim(batch.n_out)?;
    if batch.m == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let hits = batch.rows().filter(|r| rect.contains(r)).count();
    let m = batch.m as f64;
    let p = hits as f64 / m;
    Ok(EmpiricalEstimate {
        statistic: Statistic::RectFreq,
        value: p,
        mc_halfwidth: Z95 * (p * (1.0 - p) / m).sqrt(),
        m: batch.m,
    })
}

/// `√(mean (draw − target)²)`; delta-method half-width.
pub fn collective_rms_error(draws: &[f64], target: f64) -> Result<EmpiricalEstimate> {
    if draws.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 draws, got {}", draws.len())));
    }
    let sq: Vec<f64> = draws.iter().map(|d| (d - target) * (d - target)).collect();
    let mse = pairwise_mean(&sq);
    let m = draws.len() as f64;
    let var_sq = sq.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / (m - 1.0);
    let value = mse.sqrt();
    let mc_halfwidth = if value > 0.0 {
        Z95 * var_sq.sqrt() / (2.0 * value * m.sqrt())
    } else {
        0.0
    };
    Ok(EmpiricalEstimate {
        statistic: Statistic::CollectiveRms,
        value,
        mc_halfwidth,
        m: draws.len(),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
