//! Synthetic mixtures with ground truth.
//!
//! Sources are mixed either instantaneously through a gain matrix or
//! convolutively through an `M x N` bank of impulse responses
//! `x_m[t] = sum_n sum_l h_mn[l] s_n[t - l]`, truncated to the source
//! length. Synthetic responses are a delayed unit impulse followed by an
//! exponentially decaying Gaussian tail reaching -60 dB after `decay_s`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::math;
use crate::signal;

const TAIL_GAIN: f64 = 0.3;

/// Longest response convolved directly; longer ones go through the FFT.
pub const DIRECT_CONVOLUTION_MAX_TAPS: usize = 4096;

/// `h[delay] = 1`, `h[k > delay] = 0.3 g_k exp(-3 ln(10) (k - delay) / (decay_s sr))`
/// with `g_k ~ N(0, 1)` drawn from ChaCha8 seeded with `seed`.
/// `decay_s = 0` yields a pure delayed impulse.
pub fn synth_rir(seed: u64, len_taps: usize, decay_s: f64, delay_taps: usize, sample_rate: u32) -> Result<Vec<f64>> {
    if len_taps < delay_taps + 1 {
        return Err(Error::InvalidConfig("impulse response shorter than its delay"));
    }
    if !(decay_s >= 0.0 && decay_s.is_finite()) {
        return Err(Error::InvalidConfig("decay must be finite and non-negative"));
    }
    if sample_rate == 0 {
        return Err(Error::InvalidConfig("sample rate must be positive"));
    }
    let mut h = vec![0.0; len_taps];
    h[delay_taps] = 1.0;
    if decay_s > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = 3.0 * math::ln(10.0) / (decay_s * sample_rate as f64);
        for (k, v) in h.iter_mut().enumerate().skip(delay_taps + 1) {
            let g: f64 = rng.sample(StandardNormal);
            *v = TAIL_GAIN * g * math::exp(-rate * (k - delay_taps) as f64);
        }
    }
    Ok(h)
}

/// `M x N` impulse responses of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct RirBank {
    mics: usize,
    sources: usize,
    taps: usize,
    /// Row-major `[m][n]`.
    responses: Vec<Vec<f64>>,
}

impl RirBank {
    /// `responses[m][n]` is the response from source `n` to microphone `m`.
    pub fn new(responses: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let mics = responses.len();
        let sources = responses.first().map_or(0, Vec::len);
        if mics == 0 || sources == 0 {
            return Err(Error::InvalidConfig("empty impulse response bank"));
        }
        let taps = responses[0][0].len();
        if taps == 0 {
            return Err(Error::InvalidConfig("empty impulse response"));
        }
        let mut flat = Vec::with_capacity(mics * sources);
        for row in responses {
            if row.len() != sources {
                return Err(Error::shape("impulse response bank width", sources, row.len()));
            }
            for h in row {
                if h.len() != taps {
                    return Err(Error::shape("impulse response length", taps, h.len()));
                }
                if h.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("impulse response"));
                }
                flat.push(h);
            }
        }
        Ok(Self {
            mics,
            sources,
            taps,
            responses: flat,
        })
    }

    /// Seeded synthetic bank. Source `n` reaches microphone `m` after
    /// `base + m * offset_n` samples, where the offsets are distinct draws
    /// from `-4..=4`; every response has its own tail seed. `len_taps` is
    /// raised if needed so that every delay fits.
    pub fn synthetic(seed: u64, mics: usize, sources: usize, len_taps: usize, decay_s: f64, sample_rate: u32) -> Result<Self> {
        if sources > 9 {
            return Err(Error::InvalidConfig("synthetic banks support at most 9 sources"));
        }
        if mics == 0 || sources == 0 {
            return Err(Error::InvalidConfig("empty impulse response bank"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool: Vec<i64> = (-4..=4).collect();
        let mut offsets = Vec::with_capacity(sources);
        for _ in 0..sources {
            let k = rng.random_range(0..pool.len());
            offsets.push(pool.swap_remove(k));
        }
        let base = 4 * mics.saturating_sub(1) as i64;
        let longest = offsets
            .iter()
            .map(|&off| (base + (mics as i64 - 1) * off).max(base) as usize)
            .max()
            .unwrap_or(0);
        let len_taps = len_taps.max(longest + 1);
        let mut responses = Vec::with_capacity(mics);
        for m in 0..mics {
            let mut row = Vec::with_capacity(sources);
            for &off in &offsets {
                let delay = (base + m as i64 * off) as usize;
                let tail_seed: u64 = rng.random();
                row.push(synth_rir(tail_seed, len_taps, decay_s, delay, sample_rate)?);
            }
            responses.push(row);
        }
        Self::new(responses)
    }

    pub fn mics(&self) -> usize {
        self.mics
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn response(&self, m: usize, n: usize) -> &[f64] {
        &self.responses[m * self.sources + n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MixSpec {
    Convolutive(RirBank),
    /// Row-major `mics x sources` gains.
    Instantaneous { mics: usize, sources: usize, gains: Vec<f64> },
}

impl MixSpec {
    pub fn instantaneous(mics: usize, sources: usize, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != mics * sources {
            return Err(Error::shape("gain matrix", mics * sources, gains.len()));
        }
        if gains.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gain matrix"));
        }
        Ok(MixSpec::Instantaneous { mics, sources, gains })
    }

    pub fn mics(&self) -> usize {
        match self {
            MixSpec::Convolutive(b) => b.mics(),
            MixSpec::Instantaneous { mics, .. } => *mics,
        }
    }

    pub fn sources(&self) -> usize {
        match self {
            MixSpec::Convolutive(b) => b.sources(),
            MixSpec::Instantaneous { sources, .. } => *sources,
        }
    }

    /// Contribution of source `n` at microphone `m`, truncated to the
    /// source length.
    fn image(&self, s: &[f64], m: usize, n: usize) -> Vec<f64> {
        match self {
            MixSpec::Instantaneous { sources, gains, .. } => {
                let g = gains[m * sources + n];
                s.iter().map(|v| g * v).collect()
            }
            MixSpec::Convolutive(bank) => {
                let mut out = convolve_response(bank.response(m, n), s);
                out.truncate(s.len());
                out
            }
        }
    }
}

fn convolve_response(h: &[f64], s: &[f64]) -> Vec<f64> {
    #[cfg(feature = "std")]
    if h.len() > DIRECT_CONVOLUTION_MAX_TAPS {
        return signal::convolve_fft(h, s);
    }
    signal::convolve_direct(h, s)
}

fn check_sources(sources: &AudioBuffer, spec: &MixSpec) -> Result<()> {
    if sources.num_channels() != spec.sources() {
        return Err(Error::shape("source count", spec.sources(), sources.num_channels()));
    }
    Ok(())
}

/// Mixes `sources` (one channel per source) into `spec.mics()` channels.
/// Source contributions are summed in source order.
pub fn convolve_mix(sources: &AudioBuffer, spec: &MixSpec) -> Result<AudioBuffer> {
    check_sources(sources, spec)?;
    let len = sources.len();
    let mut out = vec![vec![0.0; len]; spec.mics()];
    for (m, x) in out.iter_mut().enumerate() {
        for n in 0..spec.sources() {
            for (a, b) in x.iter_mut().zip(spec.image(sources.channel(n), m, n)) {
                *a += b;
            }
        }
    }
    AudioBuffer::new(out, sources.sample_rate())
}

/// Image of every source at microphone `reference`; these are the
/// references for scoring separated outputs.
pub fn source_images(sources: &AudioBuffer, spec: &MixSpec, reference: usize) -> Result<AudioBuffer> {
    check_sources(sources, spec)?;
    if reference >= spec.mics() {
        return Err(Error::InvalidConfig("reference channel out of range"));
    }
    let images = (0..spec.sources())
        .map(|n| spec.image(sources.channel(n), reference, n))
        .collect();
    AudioBuffer::new(images, sources.sample_rate())
}

/// I.i.d. unit-scale Laplacian samples (inverse CDF of a uniform draw).
pub fn laplacian(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let u: f64 = rng.random_range(-0.5..0.5);
            let mag = -math::ln(1.0 - 2.0 * u.abs()).min(f64::MAX);
            if u < 0.0 {
                -mag
            } else {
                mag
            }
        })
        .collect()
}

/// A seeded speech-like test signal: a sequence of voiced syllables
/// (harmonic series with a gliding pitch shaped by random formants),
/// unvoiced bursts and pauses, normalized to an RMS of 0.1.
pub fn speech_like(seed: u64, len: usize, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let nyquist = 0.5 * sr;
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut out = vec![0.0; len];
    let mut start = 0usize;
    while start < len {
        let dur = (rng.random_range(0.12..0.35) * sr) as usize;
        let end = (start + dur.max(1)).min(len);
        let kind: f64 = rng.random();
        if kind < 0.65 {
            let f0_start: f64 = rng.random_range(90.0..240.0);
            let f0_end = f0_start * rng.random_range(0.8..1.25);
            let formants: Vec<(f64, f64)> = (0..3)
                .map(|i| {
                    let centre = rng.random_range(300.0..1000.0) * (1.0 + 1.6 * i as f64);
                    (centre.min(0.9 * nyquist), rng.random_range(80.0..250.0))
                })
                .collect();
            let gain = rng.random_range(0.3..1.0);
            let harmonics = (nyquist / f0_start.min(f0_end)) as usize;
            let amps: Vec<f64> = (1..=harmonics)
                .map(|h| {
                    let f = h as f64 * 0.5 * (f0_start + f0_end);
                    let env: f64 = formants
                        .iter()
                        .map(|(c, bw)| {
                            let d = (f - c) / bw;
                            1.0 / (1.0 + d * d)
                        })
                        .sum();
                    (env + 0.02) / h as f64
                })
                .collect();
            let span = (end - start) as f64;
            let mut phase = vec![0.0f64; harmonics];
            for (i, t) in (start..end).enumerate() {
                let frac = i as f64 / span;
                let f0 = f0_start + (f0_end - f0_start) * frac;
                let env = math::sin(core::f64::consts::PI * frac);
                let mut v = 0.0;
                for (h, (ph, a)) in phase.iter_mut().zip(&amps).enumerate() {
                    let f = (h + 1) as f64 * f0;
                    if f >= nyquist {
                        break;
                    }
                    *ph += two_pi * f / sr;
                    if *ph > two_pi {
                        *ph -= two_pi;
                    }
                    v += a * math::sin(*ph);
                }
                out[t] = gain * env * env * v;
            }
        } else if kind < 0.85 {
            // unvoiced burst: first-difference (high-pass) noise
            let gain = rng.random_range(0.05..0.2);
            let span = (end - start) as f64;
            let mut prev = 0.0;
            for (i, t) in (start..end).enumerate() {
                let w: f64 = rng.sample(StandardNormal);
                let env = math::sin(core::f64::consts::PI * i as f64 / span);
                out[t] = gain * env * (w - prev);
                prev = w;
            }
        }
        start = end;
    }
    let rms = math::sqrt(out.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64);
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.1 / rms);
    }
    out
}

/// A seeded convolutive test scene.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub sources: AudioBuffer,
    pub spec: MixSpec,
    pub mixture: AudioBuffer,
}

impl Fixture {
    /// Two speech-like sources, a synthetic `2 x 2` bank with responses of
    /// `2 * decay_s` seconds, and the resulting mixture.
    pub fn speech_pair(seed: u64, seconds: f64, decay_s: f64, sample_rate: u32) -> Result<Self> {
        let len = (seconds * sample_rate as f64) as usize;
        let sources = AudioBuffer::new(
            vec![
                speech_like(seed.wrapping_mul(2), len, sample_rate),
                speech_like(seed.wrapping_mul(2).wrapping_add(1), len, sample_rate),
            ],
            sample_rate,
        )?;
        let taps = ((2.0 * decay_s * sample_rate as f64) as usize).max(1);
        let bank = RirBank::synthetic(seed ^ 0x5eed_0f_7a9e, 2, 2, taps, decay_s, sample_rate)?;
        let spec = MixSpec::Convolutive(bank);
        let mixture = convolve_mix(&sources, &spec)?;
        Ok(Self { sources, spec, mixture })
    }

    pub fn images(&self, reference: usize) -> Result<AudioBuffer> {
        source_images(&self.sources, &self.spec, reference)
    }
}
