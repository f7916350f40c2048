//! Separation scores (SDR, SIR, SAR) and spectral diagnostics.
//!
//! An estimate `e` is split into four time-domain parts against the
//! references `r_1..r_N`, each extended by `proj_len - 1` trailing zeros:
//!
//! - `s_target`: gain projection of `e` onto the matched reference.
//! - `e_spat`: projection onto the matched reference filtered by up to
//!   `proj_len` causal taps, minus `s_target`.
//! - `e_interf`: projection onto all references filtered by `proj_len`
//!   taps, minus the single-reference projection.
//! - `e_artif`: the residual.
//!
//! With `proj_len = 1`, `e_spat` vanishes.

use alloc::vec;
use alloc::vec::Vec;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::signal::{convolve, correlate};

/// Scores are clamped to `[-SCORE_CAP_DB, SCORE_CAP_DB]`.
pub const SCORE_CAP_DB: f64 = 300.0;

pub const DEFAULT_PROJ_LEN: usize = 512;

const TIKHONOV: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub e_spat: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.s_target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_target.is_empty()
    }

    /// Sum of the four components.
    pub fn total(&self) -> Vec<f64> {
        (0..self.len())
            .map(|t| self.s_target[t] + self.e_spat[t] + self.e_interf[t] + self.e_artif[t])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn energy_of_sum(parts: &[&[f64]]) -> f64 {
    let len = parts[0].len();
    (0..len)
        .map(|t| {
            let s: f64 = parts.iter().map(|p| p[t]).sum();
            s * s
        })
        .sum()
}

pub fn sdr_sir_sar(dec: &Decomposition) -> Scores {
    let (s, sp, i, a) = (&dec.s_target[..], &dec.e_spat[..], &dec.e_interf[..], &dec.e_artif[..]);
    let target = energy(s);
    Scores {
        sdr: math::db_ratio(target, energy_of_sum(&[i, sp, a]), SCORE_CAP_DB),
        sir: math::db_ratio(energy_of_sum(&[s, sp]), energy(i), SCORE_CAP_DB),
        sar: math::db_ratio(energy_of_sum(&[s, i, sp]), energy(a), SCORE_CAP_DB),
    }
}

/// Least-squares projector onto the span of delayed copies of a fixed set
/// of references. The Gram matrix is exact (built from lag correlations)
/// and factored once.
struct Projector {
    refs: Vec<usize>,
    taps: usize,
    factor: Option<Vec<f64>>,
}

impl Projector {
    /// `xcorr[i][j][k] = sum_u r_i[u] r_j[u + k]`.
    fn new(refs: Vec<usize>, taps: usize, xcorr: &[Vec<Vec<f64>>]) -> Self {
        let dim = refs.len() * taps;
        let mut gram = vec![0.0; dim * dim];
        for (p, &i) in refs.iter().enumerate() {
            for (q, &j) in refs.iter().enumerate() {
                for a in 0..taps {
                    for b in 0..taps {
                        // sum_t r_i[t - a] r_j[t - b]
                        let v = if a >= b { xcorr[i][j][a - b] } else { xcorr[j][i][b - a] };
                        gram[(p * taps + a) * dim + q * taps + b] = v;
                    }
                }
            }
        }
        let trace: f64 = (0..dim).map(|d| gram[d * dim + d]).sum();
        let factor = if trace > 0.0 {
            linalg::spd_factor(&gram, dim, TIKHONOV)
        } else {
            None
        };
        Self { refs, taps, factor }
    }

    /// Projection of `est` (already zero padded to the output length).
    fn project(&self, est: &[f64], refs: &[Vec<f64>]) -> Vec<f64> {
        let out_len = est.len();
        let mut out = vec![0.0; out_len];
        let Some(l) = &self.factor else {
            return out;
        };
        let dim = self.refs.len() * self.taps;
        let mut rhs = Vec::with_capacity(dim);
        for &i in &self.refs {
            rhs.extend(correlate(&refs[i], est, self.taps));
        }
        let coef = linalg::cholesky_solve(l, dim, &rhs);
        for (p, &i) in self.refs.iter().enumerate() {
            let filt = &coef[p * self.taps..(p + 1) * self.taps];
            for (o, v) in out.iter_mut().zip(convolve(filt, &refs[i])) {
                *o += v;
            }
        }
        out
    }
}

/// Decomposer for a fixed set of references; reuses the factored Gram
/// matrices across estimates.
pub struct Evaluator {
    refs: Vec<Vec<f64>>,
    proj_len: usize,
    all: Projector,
    single: Vec<Projector>,
}

impl Evaluator {
    pub fn new(refs: &[Vec<f64>], proj_len: usize) -> Result<Self> {
        if proj_len == 0 {
            return Err(Error::InvalidConfig("proj_len must be at least 1"));
        }
        if refs.is_empty() {
            return Err(Error::InvalidConfig("no reference signals"));
        }
        let len = refs[0].len();
        if let Some(r) = refs.iter().find(|r| r.len() != len) {
            return Err(Error::shape("reference length", len, r.len()));
        }
        if refs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference signals"));
        }
        let n = refs.len();
        let xcorr: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| (0..n).map(|j| correlate(&refs[i], &refs[j], proj_len)).collect())
            .collect();
        let all = Projector::new((0..n).collect(), proj_len, &xcorr);
        let single = (0..n).map(|j| Projector::new(vec![j], proj_len, &xcorr)).collect();
        Ok(Self {
            refs: refs.to_vec(),
            proj_len,
            all,
            single,
        })
    }

    pub fn sources(&self) -> usize {
        self.refs.len()
    }

    pub fn signal_len(&self) -> usize {
        self.refs[0].len()
    }

    fn padded(&self, est: &[f64]) -> Result<Vec<f64>> {
        if est.len() != self.signal_len() {
            return Err(Error::shape("estimate length", self.signal_len(), est.len()));
        }
        if est.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("estimate"));
        }
        let mut e = est.to_vec();
        e.resize(est.len() + self.proj_len - 1, 0.0);
        Ok(e)
    }

    /// Decomposes `est` against reference `matched`.
    pub fn decompose(&self, est: &[f64], matched: usize) -> Result<Decomposition> {
        let e = self.padded(est)?;
        let p_all = self.all.project(&e, &self.refs);
        Ok(self.decompose_with(&e, &p_all, matched))
    }

    fn decompose_with(&self, e: &[f64], p_all: &[f64], matched: usize) -> Decomposition {
        let r = &self.refs[matched];
        let rr = energy(r);
        let gain = if rr > 0.0 {
            r.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / rr
        } else {
            0.0
        };
        let mut s_target = vec![0.0; e.len()];
        for (s, v) in s_target.iter_mut().zip(r) {
            *s = gain * v;
        }
        let p_ref = self.single[matched].project(e, &self.refs);
        let e_spat = p_ref.iter().zip(&s_target).map(|(p, s)| p - s).collect();
        let e_interf = p_all.iter().zip(&p_ref).map(|(a, p)| a - p).collect();
        let e_artif = e.iter().zip(p_all).map(|(x, a)| x - a).collect();
        Decomposition {
            s_target,
            e_spat,
            e_interf,
            e_artif,
        }
    }

    /// Scores of `est` against every reference, in reference order.
    pub fn score_all(&self, est: &[f64]) -> Result<Vec<Scores>> {
        let e = self.padded(est)?;
        let p_all = self.all.project(&e, &self.refs);
        Ok((0..self.sources())
            .map(|j| sdr_sir_sar(&self.decompose_with(&e, &p_all, j)))
            .collect())
    }
}

/// One-shot decomposition of `est` against `refs[matched]`.
pub fn decompose(est: &[f64], refs: &[Vec<f64>], matched: usize, proj_len: usize) -> Result<Decomposition> {
    if matched >= refs.len() {
        return Err(Error::InvalidConfig("matched reference out of range"));
    }
    Evaluator::new(refs, proj_len)?.decompose(est, matched)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceReport {
    pub estimate: usize,
    pub reference: usize,
    pub scores: Scores,
    /// Scores of the mixture reference channel against the same reference.
    pub baseline: Scores,
}

impl SourceReport {
    pub fn delta(&self) -> Scores {
        Scores {
            sdr: self.scores.sdr - self.baseline.sdr,
            sir: self.scores.sir - self.baseline.sir,
            sar: self.scores.sar - self.baseline.sar,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `permutation[i]` is the reference matched to estimate `i`.
    pub permutation: Vec<usize>,
    /// One row per estimate, in estimate order.
    pub sources: Vec<SourceReport>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl EvalReport {
    pub fn mean_delta(&self) -> Scores {
        Scores {
            sdr: mean(self.sources.iter().map(|s| s.delta().sdr)),
            sir: mean(self.sources.iter().map(|s| s.delta().sir)),
            sar: mean(self.sources.iter().map(|s| s.delta().sar)),
        }
    }

    pub fn mean_scores(&self) -> Scores {
        Scores {
            sdr: mean(self.sources.iter().map(|s| s.scores.sdr)),
            sir: mean(self.sources.iter().map(|s| s.scores.sir)),
            sar: mean(self.sources.iter().map(|s| s.scores.sar)),
        }
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Scores every estimate, aligning estimates to references by the
/// permutation with the highest mean SIR (first in lexicographic order on
/// ties). Deltas are taken against `mixture_ref` scored as an estimate of
/// each reference.
pub fn evaluate(ests: &[Vec<f64>], refs: &[Vec<f64>], mixture_ref: &[f64], proj_len: usize) -> Result<EvalReport> {
    let ev = Evaluator::new(refs, proj_len)?;
    evaluate_with(&ev, ests, mixture_ref)
}

/// As [`evaluate`] with a prepared [`Evaluator`].
pub fn evaluate_with(ev: &Evaluator, ests: &[Vec<f64>], mixture_ref: &[f64]) -> Result<EvalReport> {
    let n = ev.sources();
    if ests.len() != n {
        return Err(Error::shape("estimate count", n, ests.len()));
    }
    if n > 8 {
        return Err(Error::InvalidConfig("permutation search supports at most 8 sources"));
    }
    let table: Vec<Vec<Scores>> = ests.iter().map(|e| ev.score_all(e)).collect::<Result<_>>()?;
    let baseline = ev.score_all(mixture_ref)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let sir = mean(perm.iter().enumerate().map(|(i, &j)| table[i][j].sir));
        if best.as_ref().is_none_or(|(b, _)| sir > *b) {
            best = Some((sir, perm));
        }
    }
    let (_, permutation) = best.expect("at least one permutation");
    let sources = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| SourceReport {
            estimate: i,
            reference: j,
            scores: table[i][j],
            baseline: baseline[j],
        })
        .collect();
    Ok(EvalReport { permutation, sources })
}

/// Convenience wrapper over [`AudioBuffer`]s.
pub fn evaluate_buffers(ests: &AudioBuffer, refs: &AudioBuffer, mixture_ref: &[f64], proj_len: usize) -> Result<EvalReport> {
    if ests.sample_rate() != refs.sample_rate() {
        return Err(Error::InvalidConfig("estimate and reference sample rates differ"));
    }
    evaluate(ests.channels(), refs.channels(), mixture_ref, proj_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` increasing edges over `log10` of normalized power.
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Frequency bin for per-band histograms.
    pub freq_bin: Option<usize>,
}

/// Histograms of `log10(P / max P)` for a power tensor laid out as
/// `[channel][bin][frame]` (`bins * frames` values per channel).
///
/// Cells with zero power are skipped. All histograms share edges spanning
/// the observed range, `nbins` equal-width bins, last bin closed. With
/// `per_band` one histogram is emitted per frequency bin, pooling channels.
pub fn histogram_from_power(power: &[f64], bins: usize, frames: usize, nbins: usize, per_band: bool) -> Result<Vec<Histogram>> {
    if nbins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin"));
    }
    let cell = bins * frames;
    if cell == 0 || power.len() % cell != 0 {
        return Err(Error::shape("power tensor", cell, power.len()));
    }
    if power.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("power"));
    }
    if power.iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeEntry("power"));
    }
    let max = power.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::AllZero("spectrogram power"));
    }
    let logs: Vec<f64> = power
        .iter()
        .map(|&p| if p > 0.0 { math::log10(p / max) } else { f64::NAN })
        .collect();
    let (lo, hi) = logs
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let width = (hi - lo) / nbins as f64;
    let mut edges: Vec<f64> = (0..nbins).map(|k| lo + k as f64 * width).collect();
    edges.push(hi);
    let slot = |v: f64| (((v - lo) / width) as usize).min(nbins - 1);
    let finish = |counts: Vec<f64>, freq_bin| {
        let total: f64 = counts.iter().sum();
        let probabilities = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            counts
        };
        Histogram {
            edges: edges.clone(),
            probabilities,
            freq_bin,
        }
    };
    if !per_band {
        let mut counts = vec![0.0; nbins];
        for &v in logs.iter().filter(|v| !v.is_nan()) {
            counts[slot(v)] += 1.0;
        }
        return Ok(vec![finish(counts, None)]);
    }
    let channels = power.len() / cell;
    Ok((0..bins)
        .map(|f| {
            let mut counts = vec![0.0; nbins];
            for n in 0..channels {
                let base = n * cell + f * frames;
                for &v in logs[base..base + frames].iter().filter(|v| !v.is_nan()) {
                    counts[slot(v)] += 1.0;
                }
            }
            finish(counts, Some(f))
        })
        .collect())
}

/// Pearson correlation over frames between band power trajectories of a
/// `bins x frames` matrix; returns a row-major `bins x bins` matrix.
///
/// The diagonal is 1; pairs involving a constant band are 0.
pub fn interband_from_power(power: &[f64], bins: usize, frames: usize) -> Result<Vec<f64>> {
    if power.len() != bins * frames {
        return Err(Error::shape("band power matrix", bins * frames, power.len()));
    }
    if frames < 2 {
        return Err(Error::InvalidConfig("interband correlation needs at least two frames"));
    }
    if power.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("power"));
    }
    let mut centered = vec![0.0; bins * frames];
    let mut norms = vec![0.0; bins];
    for f in 0..bins {
        let row = &power[f * frames..(f + 1) * frames];
        let mu = row.iter().sum::<f64>() / frames as f64;
        let dst = &mut centered[f * frames..(f + 1) * frames];
        for (d, v) in dst.iter_mut().zip(row) {
            *d = v - mu;
        }
        norms[f] = math::sqrt(energy(dst));
    }
    let mut out = vec![0.0; bins * bins];
    for f in 0..bins {
        out[f * bins + f] = 1.0;
        for g in f + 1..bins {
            let rho = if norms[f] > 0.0 && norms[g] > 0.0 {
                let a = &centered[f * frames..(f + 1) * frames];
                let b = &centered[g * frames..(g + 1) * frames];
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (dot / (norms[f] * norms[g])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[f * bins + g] = rho;
            out[g * bins + f] = rho;
        }
    }
    Ok(out)
}

#[cfg(feature = "std")]
mod stft_based {
    use super::*;
    use crate::stft::{self, StftConfig};

    /// Histogram of normalized log power of the STFT of `buf`.
    pub fn spectral_histogram(buf: &AudioBuffer, cfg: StftConfig, nbins: usize, per_band: bool) -> Result<Vec<Histogram>> {
        let spec = stft::analyze(buf, cfg)?;
        histogram_from_power(&spec.power(), spec.bins(), spec.frames(), nbins, per_band)
    }

    /// Interband correlation of the channel-summed STFT power of `buf`.
    pub fn interband_correlation(buf: &AudioBuffer, cfg: StftConfig) -> Result<Vec<f64>> {
        let spec = stft::analyze(buf, cfg)?;
        let (bins, frames) = (spec.bins(), spec.frames());
        let power = spec.power();
        let mut summed = vec![0.0; bins * frames];
        for chunk in power.chunks(bins * frames) {
            for (s, p) in summed.iter_mut().zip(chunk) {
                *s += p;
            }
        }
        interband_from_power(&summed, bins, frames)
    }
}

#[cfg(feature = "std")]
pub use stft_based::{interband_correlation, spectral_histogram};

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(len: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        v[k] = 1.0;
        v
    }

    #[test]
    fn self_estimate_is_pure_target() {
        let refs = vec![vec![1.0, -2.0, 0.5, 3.0], vec![0.0, 1.0, 1.0, -1.0]];
        let d = decompose(&refs[0], &refs, 0, 1).unwrap();
        for t in 0..4 {
            assert!((d.s_target[t] - refs[0][t]).abs() < 1e-12);
            assert!(d.e_spat[t].abs() < 1e-12 && d.e_interf[t].abs() < 1e-12 && d.e_artif[t].abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_estimate_is_artifact() {
        let refs = vec![basis(4, 0), basis(4, 1)];
        let est = basis(4, 3);
        let d = decompose(&est, &refs, 0, 1).unwrap();
        assert_eq!(d.s_target, vec![0.0; 4]);
        assert_eq!(d.e_artif, est);
    }

    #[test]
    fn gain_only_component_energies() {
        let refs = vec![basis(5, 0), basis(5, 1)];
        let noise = [0.0, 0.0, 0.2, -0.1, 0.0];
        let est: Vec<f64> = (0..5).map(|t| 0.5 * refs[0][t] + 0.3 * refs[1][t] + noise[t]).collect();
        let d = decompose(&est, &refs, 0, 1).unwrap();
        assert!((energy(&d.s_target) - 0.25).abs() < 1e-12);
        assert!((energy(&d.e_interf) - 0.09).abs() < 1e-12);
        assert!((energy(&d.e_artif) - 0.05).abs() < 1e-12);
        assert!(energy(&d.e_spat) < 1e-24);
    }

    #[test]
    fn filtered_reference_counts_as_spatial() {
        let r = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let refs = vec![r, basis(6, 4)];
        let est = vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0];
        let d = decompose(&est, &refs, 0, 2).unwrap();
        assert_eq!(d.len(), 7);
        assert!((d.e_spat[1] - 0.5).abs() < 1e-12);
        assert!(energy(&d.e_artif) < 1e-20);
        assert!(energy(&d.e_interf) < 1e-20);
    }

    #[test]
    fn sdr_twenty_db() {
        let dec = Decomposition {
            s_target: vec![1.0, 0.0, 0.0, 0.0],
            e_spat: vec![0.0, 0.05, 0.0, 0.0],
            e_interf: vec![0.0, 0.0, 0.05, 0.0],
            e_artif: vec![0.0, 0.0, 0.0, (0.01f64 - 0.005).sqrt()],
        };
        assert!((sdr_sir_sar(&dec).sdr - 20.0).abs() < 1e-9);
    }

    #[test]
    fn caps_apply() {
        let dec = Decomposition {
            s_target: vec![1.0, 2.0],
            e_spat: vec![0.0; 2],
            e_interf: vec![0.0; 2],
            e_artif: vec![0.0; 2],
        };
        let s = sdr_sir_sar(&dec);
        assert_eq!((s.sdr, s.sir, s.sar), (SCORE_CAP_DB, SCORE_CAP_DB, SCORE_CAP_DB));
        let zero = Decomposition {
            s_target: vec![0.0; 2],
            e_spat: vec![0.0; 2],
            e_interf: vec![0.0; 2],
            e_artif: vec![1.0, 0.0],
        };
        assert_eq!(sdr_sir_sar(&zero).sdr, -SCORE_CAP_DB);
    }

    #[test]
    fn permutations_lexicographic() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(
            permutations(3),
            vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
        );
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn swapped_estimates_are_aligned() {
        let refs = vec![vec![1.0, 0.2, -0.3, 0.0, 0.5], vec![0.1, -1.0, 0.0, 0.7, 0.2]];
        let mix: Vec<f64> = (0..5).map(|t| refs[0][t] + refs[1][t]).collect();
        let straight = evaluate(&refs, &refs, &mix, 1).unwrap();
        let swapped = evaluate(&[refs[1].clone(), refs[0].clone()], &refs, &mix, 1).unwrap();
        assert_eq!(straight.permutation, vec![0, 1]);
        assert_eq!(swapped.permutation, vec![1, 0]);
        assert_eq!(straight.sources[0].scores, swapped.sources[1].scores);
        assert_eq!(straight.sources[0].scores.sdr, SCORE_CAP_DB);
    }

    #[test]
    fn evaluate_rejects_bad_shapes() {
        let refs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(evaluate(&refs[..1], &refs, &[1.0, 1.0], 1).is_err());
        assert!(evaluate(&[vec![1.0], vec![1.0]], &refs, &[1.0, 1.0], 1).is_err());
        assert!(evaluate(&refs, &refs, &[1.0], 1).is_err());
    }

    #[test]
    fn constant_power_single_bin() {
        let h = histogram_from_power(&[2.0; 12], 3, 4, 10, false).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].probabilities[0], 1.0);
        assert_eq!(h[0].edges.len(), 11);
    }

    #[test]
    fn two_level_histogram() {
        let power: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { 1e-3 }).collect();
        let h = histogram_from_power(&power, 4, 5, 6, false).unwrap();
        let p = &h[0].probabilities;
        assert_eq!(p[0], 0.5);
        assert_eq!(p[5], 0.5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_band_histograms_share_edges() {
        let power: Vec<f64> = (1..=24).map(|i| i as f64).collect();
        let h = histogram_from_power(&power, 3, 4, 5, true).unwrap();
        assert_eq!(h.len(), 3);
        for (f, hist) in h.iter().enumerate() {
            assert_eq!(hist.freq_bin, Some(f));
            assert_eq!(hist.edges, h[0].edges);
            assert!((hist.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_power_is_error() {
        assert_eq!(
            histogram_from_power(&[0.0; 6], 2, 3, 4, false),
            Err(Error::AllZero("spectrogram power"))
        );
    }

    #[test]
    fn interband_identical_and_constant_bands() {
        let power = vec![1.0, 2.0, 4.0, 2.0, 4.0, 8.0, 3.0, 3.0, 3.0];
        let c = interband_from_power(&power, 3, 3).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-12);
        assert_eq!(c[2], 0.0);
        for f in 0..3 {
            assert_eq!(c[f * 3 + f], 1.0);
        }
        assert!(interband_from_power(&[1.0, 2.0], 2, 1).is_err());
    }
}
