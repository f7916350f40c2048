//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames are left-aligned (frame `t` covers samples `t*hop .. t*hop+frame_len`)
//! with no centering pad. Each frame is multiplied by a periodic Hamming
//! window, zero-padded to `fft_len` and transformed; only the one-sided
//! half `0..=fft_len/2` is kept.
//!
//! Synthesis divides the overlap-added windowed frames by the per-sample
//! sum of squared windows, which reconstructs any signal whose samples are
//! covered by at least one frame, whether or not the window satisfies COLA.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 256,
            fft_len: 1024,
            window: Window::Hamming,
        }
    }
}

impl StftConfig {
    pub fn new(frame_len: usize, hop: usize, fft_len: usize) -> Result<Self> {
        let cfg = Self {
            frame_len,
            hop,
            fft_len,
            window: Window::Hamming,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.frame_len == 0 || self.fft_len == 0 {
            return Err(Error::InvalidConfig("STFT lengths must be positive"));
        }
        if self.hop > self.frame_len {
            return Err(Error::InvalidConfig("hop must not exceed frame_len"));
        }
        if self.frame_len > self.fft_len {
            return Err(Error::InvalidConfig("frame_len must not exceed fft_len"));
        }
        Ok(())
    }

    /// One-sided bin count `fft_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Length of the signal produced by synthesizing `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_len
        }
    }

    pub fn window(&self) -> Vec<f64> {
        match self.window {
            Window::Hamming => hamming(self.frame_len),
        }
    }
}

/// Periodic Hamming window.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.54 - 0.46 * math::cos(2.0 * PI * k as f64 / len as f64))
        .collect()
}

/// Complex STFT tensor indexed by (channel, bin, frame); frames are
/// contiguous for a fixed (channel, bin).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    channels: usize,
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
    config: StftConfig,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn zeros(channels: usize, frames: usize, config: StftConfig, sample_rate: u32) -> Self {
        let bins = config.bins();
        Self {
            channels,
            bins,
            frames,
            data: vec![Complex64::new(0.0, 0.0); channels * bins * frames],
            config,
            sample_rate,
        }
    }

    pub fn from_parts(
        channels: usize,
        frames: usize,
        data: Vec<Complex64>,
        config: StftConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        let bins = config.bins();
        if data.len() != channels * bins * frames {
            return Err(Error::shape("spectrogram data", channels * bins * frames, data.len()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram data"));
        }
        Ok(Self {
            channels,
            bins,
            frames,
            data,
            config,
            sample_rate,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, n: usize, f: usize, t: usize) -> usize {
        (n * self.bins + f) * self.frames + t
    }

    #[inline]
    pub fn get(&self, n: usize, f: usize, t: usize) -> Complex64 {
        self.data[self.index(n, f, t)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, f: usize, t: usize, v: Complex64) {
        let i = self.index(n, f, t);
        self.data[i] = v;
    }

    /// All frames of channel `n` at bin `f`.
    pub fn row(&self, n: usize, f: usize) -> &[Complex64] {
        let start = self.index(n, f, 0);
        &self.data[start..start + self.frames]
    }

    pub fn row_mut(&mut self, n: usize, f: usize) -> &mut [Complex64] {
        let start = self.index(n, f, 0);
        let frames = self.frames;
        &mut self.data[start..start + frames]
    }

    /// `|X|^2` laid out like the spectrogram.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Same shape, scaled by a real factor.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= c);
        out
    }
}

/// In-place complex FFT of a fixed length.
pub trait FftBackend {
    fn len(&self) -> usize;
    fn forward(&self, buf: &mut [Complex64]);
    /// Unnormalized inverse transform.
    fn inverse(&self, buf: &mut [Complex64]);
}

#[cfg(feature = "std")]
pub use rustfft_backend::RustFft;

#[cfg(feature = "std")]
mod rustfft_backend {
    use std::sync::Arc;

    use num_complex::Complex64;
    use rustfft::{Fft, FftPlanner};

    use super::FftBackend;

    /// FFT backend planned by `rustfft`.
    #[derive(Clone)]
    pub struct RustFft {
        len: usize,
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
    }

    impl RustFft {
        pub fn new(len: usize) -> Self {
            let mut planner = FftPlanner::new();
            Self {
                len,
                fwd: planner.plan_fft_forward(len),
                inv: planner.plan_fft_inverse(len),
            }
        }
    }

    impl FftBackend for RustFft {
        fn len(&self) -> usize {
            self.len
        }

        fn forward(&self, buf: &mut [Complex64]) {
            self.fwd.process(buf);
        }

        fn inverse(&self, buf: &mut [Complex64]) {
            self.inv.process(buf);
        }
    }
}

/// STFT analysis/synthesis pair bound to one configuration and FFT backend.
pub struct Stft<B> {
    config: StftConfig,
    window: Vec<f64>,
    fft: B,
}

#[cfg(feature = "std")]
impl Stft<RustFft> {
    pub fn new(config: StftConfig) -> Result<Self> {
        Self::with_backend(config, RustFft::new(config.fft_len))
    }
}

impl<B: FftBackend> Stft<B> {
    pub fn with_backend(config: StftConfig, fft: B) -> Result<Self> {
        config.validate()?;
        if fft.len() != config.fft_len {
            return Err(Error::shape("FFT backend length", config.fft_len, fft.len()));
        }
        Ok(Self {
            window: config.window(),
            config,
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn analyze(&self, buf: &AudioBuffer) -> Result<ComplexSpectrogram> {
        let cfg = &self.config;
        if buf.len() < cfg.frame_len {
            return Err(Error::SignalTooShort {
                len: buf.len(),
                frame_len: cfg.frame_len,
            });
        }
        let frames = cfg.frames_for(buf.len());
        let bins = cfg.bins();
        let mut spec = ComplexSpectrogram::zeros(buf.num_channels(), frames, *cfg, buf.sample_rate());
        let mut scratch = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        for n in 0..buf.num_channels() {
            let x = buf.channel(n);
            for t in 0..frames {
                let start = t * cfg.hop;
                for (k, s) in scratch.iter_mut().enumerate() {
                    *s = if k < cfg.frame_len {
                        Complex64::new(x[start + k] * self.window[k], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
                self.fft.forward(&mut scratch);
                for (f, v) in scratch.iter().take(bins).enumerate() {
                    spec.set(n, f, t, *v);
                }
            }
        }
        Ok(spec)
    }

    /// Weighted overlap-add synthesis; output has
    /// `(frames - 1) * hop + frame_len` samples per channel.
    pub fn synthesize(&self, spec: &ComplexSpectrogram) -> Result<AudioBuffer> {
        let cfg = &self.config;
        if spec.config().fft_len != cfg.fft_len || spec.bins() != cfg.bins() {
            return Err(Error::shape("spectrogram bins", cfg.bins(), spec.bins()));
        }
        let frames = spec.frames();
        let len = cfg.signal_len(frames);
        let mut norm = vec![0.0; len];
        for t in 0..frames {
            for (k, w) in self.window.iter().enumerate() {
                norm[t * cfg.hop + k] += w * w;
            }
        }
        let bins = cfg.bins();
        let inv_n = 1.0 / cfg.fft_len as f64;
        let mut scratch = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
        let mut out = Vec::with_capacity(spec.channels());
        for n in 0..spec.channels() {
            let mut y = vec![0.0; len];
            for t in 0..frames {
                for k in 0..cfg.fft_len {
                    scratch[k] = if k < bins {
                        spec.get(n, k, t)
                    } else {
                        spec.get(n, cfg.fft_len - k, t).conj()
                    };
                }
                self.fft.inverse(&mut scratch);
                let start = t * cfg.hop;
                for k in 0..cfg.frame_len {
                    y[start + k] += scratch[k].re * inv_n * self.window[k];
                }
            }
            for (v, d) in y.iter_mut().zip(&norm) {
                *v = if *d > 1e-12 { *v / d } else { 0.0 };
            }
            out.push(y);
        }
        AudioBuffer::new(out, spec.sample_rate())
    }
}

/// Analyzes `buf` with the default `rustfft` backend.
#[cfg(feature = "std")]
pub fn analyze(buf: &AudioBuffer, cfg: StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(cfg)?.analyze(buf)
}

/// Synthesizes `spec` with the default `rustfft` backend.
#[cfg(feature = "std")]
pub fn synthesize(spec: &ComplexSpectrogram) -> Result<AudioBuffer> {
    Stft::new(*spec.config())?.synthesize(spec)
}

#[cfg(all(test, feature = "std"))]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft_bin(frame: &[f64], fft_len: usize, f: usize) -> Complex64 {
        frame
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let ang = -2.0 * PI * (f * k) as f64 / fft_len as f64;
                Complex64::new(x * ang.cos(), x * ang.sin())
            })
            .sum()
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(512, 256, 1024).is_ok());
        assert!(StftConfig::new(512, 600, 1024).is_err());
        assert!(StftConfig::new(1024, 256, 512).is_err());
        assert!(StftConfig::new(0, 0, 16).is_err());
        assert_eq!(StftConfig::default().bins(), 513);
    }

    #[test]
    fn frame_count_formula() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frames_for(512), 1);
        assert_eq!(cfg.frames_for(767), 1);
        assert_eq!(cfg.frames_for(768), 2);
        assert_eq!(cfg.frames_for(48000), (48000 - 512) / 256 + 1);
    }

    #[test]
    fn short_signal_is_an_error() {
        let buf = AudioBuffer::mono(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            analyze(&buf, StftConfig::default()),
            Err(Error::SignalTooShort { len: 100, frame_len: 512 })
        ));
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let buf = AudioBuffer::silence(2, 2048, 16000).unwrap();
        let spec = analyze(&buf, StftConfig::default()).unwrap();
        assert!(spec.data().iter().all(|z| z.norm() == 0.0));
        let back = synthesize(&spec).unwrap();
        assert!(back.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_signal_concentrates_window_sum_at_bin_zero() {
        let cfg = StftConfig::default();
        let buf = AudioBuffer::mono(vec![1.0; 2048], 16000).unwrap();
        let spec = analyze(&buf, cfg).unwrap();
        let wsum: f64 = hamming(512).iter().sum();
        for t in 0..spec.frames() {
            assert!((spec.get(0, 0, t).norm() - wsum).abs() < 1e-9);
        }
    }

    #[test]
    fn impulse_gives_flat_first_frame() {
        let cfg = StftConfig::default();
        let mut x = vec![0.0; 2048];
        x[0] = 1.0;
        let spec = analyze(&AudioBuffer::mono(x, 16000).unwrap(), cfg).unwrap();
        let w0 = hamming(512)[0];
        for f in 0..spec.bins() {
            assert!((spec.get(0, f, 0).norm() - w0).abs() < 1e-12);
            for t in 1..spec.frames() {
                assert_eq!(spec.get(0, f, t).norm(), 0.0);
            }
        }
    }

    #[test]
    fn analysis_matches_direct_dft() {
        let cfg = StftConfig::new(64, 16, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = analyze(&AudioBuffer::mono(x.clone(), 8000).unwrap(), cfg).unwrap();
        let w = hamming(64);
        for t in [0, 3, spec.frames() - 1] {
            let frame: Vec<f64> = (0..64).map(|k| x[t * 16 + k] * w[k]).collect();
            for f in [0, 1, 17, 64] {
                let e = naive_dft_bin(&frame, 128, f);
                assert!((spec.get(0, f, t) - e).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_frame_reproduces_frame() {
        let cfg = StftConfig::new(32, 16, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = analyze(&AudioBuffer::mono(x.clone(), 8000).unwrap(), cfg).unwrap();
        assert_eq!(spec.frames(), 1);
        let y = synthesize(&spec).unwrap();
        for (a, b) in x.iter().zip(y.channel(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = analyze(&AudioBuffer::mono(x.clone(), 16000).unwrap(), cfg).unwrap();
        let w = hamming(512);
        let n = cfg.fft_len;
        for t in 0..spec.frames() {
            let time: f64 = (0..512).map(|k| (x[t * 256 + k] * w[k]).powi(2)).sum();
            // interior bins appear twice in the full spectrum
            let freq: f64 = (0..spec.bins())
                .map(|f| {
                    let m = if f == 0 || f == n / 2 { 1.0 } else { 2.0 };
                    m * spec.get(0, f, t).norm_sqr()
                })
                .sum::<f64>()
                / n as f64;
            assert!((time - freq).abs() <= 1e-9 * time);
        }
    }

    #[test]
    fn synthesis_rejects_mismatched_config() {
        let spec = ComplexSpectrogram::zeros(1, 4, StftConfig::new(64, 32, 64).unwrap(), 8000);
        let stft = Stft::new(StftConfig::default()).unwrap();
        assert!(stft.synthesize(&spec).is_err());
    }
}
