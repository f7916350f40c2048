//! Determined separation by iterative projection (IP) demixing updates.
//!
//! Four variance models drive the IP updates:
//!
//! - [`Method::AuxIva`]: time-varying Gaussian with a frequency-flat
//!   variance `sigma2[n, t] = mean_f |y_n(f, t)|^2`.
//! - [`Method::SIva`]: the same flat variance, re-allocated across bands by
//!   the transport plan against `|y_n(:, t)|^2` before weighting.
//! - [`Method::Ilrma`]: one NMF sweep fitting `|y|^2`; weights are `U V`.
//! - [`Method::SIlrma`]: the previous iteration's `U V` is re-allocated
//!   against `|y|^2` first, the NMF sweep then fits the re-allocated
//!   variances, and the weights are the new `U V`.
//!
//! Every iteration ends with a full IP pass over all bins and sources
//! followed by demixing. Per-frame transport solves and per-bin IP updates
//! are independent and run on rayon with the `parallel` feature; results
//! do not depend on the thread count.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::math;
use crate::source_model::{NmfFactors, UpdateRule, VarianceTensor};
use crate::stft::ComplexSpectrogram;
use crate::transport::{self, SinkhornParams, SinkhornWorkspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AuxIva,
    SIva,
    Ilrma,
    SIlrma,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AuxIva, Method::SIva, Method::Ilrma, Method::SIlrma];

    pub fn name(self) -> &'static str {
        match self {
            Method::AuxIva => "auxiva",
            Method::SIva => "siva",
            Method::Ilrma => "ilrma",
            Method::SIlrma => "silrma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn uses_transport(self) -> bool {
        matches!(self, Method::SIva | Method::SIlrma)
    }

    pub fn uses_nmf(self) -> bool {
        matches!(self, Method::Ilrma | Method::SIlrma)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationConfig {
    pub method: Method,
    /// Outer iterations `J`.
    pub iters: usize,
    /// NMF order `K`.
    pub nmf_order: usize,
    pub sinkhorn: SinkhornParams,
    pub nmf_rule: UpdateRule,
    pub seed: u64,
    pub reference_channel: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            method: Method::SIlrma,
            iters: 100,
            nmf_order: 10,
            sinkhorn: SinkhornParams::default(),
            nmf_rule: UpdateRule::Standard,
            seed: 0,
            reference_channel: 0,
        }
    }
}

impl SeparationConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidConfig("iters must be at least 1"));
        }
        if self.nmf_order == 0 {
            return Err(Error::InvalidConfig("nmf_order must be at least 1"));
        }
        self.sinkhorn.validate()
    }
}

/// Per-bin demixing matrices; row `n` of `D(f)` is `d_n(f)^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixingStack {
    mats: Vec<CMatrix>,
}

impl DemixingStack {
    pub fn identity(channels: usize, bins: usize) -> Self {
        Self {
            mats: vec![CMatrix::identity(channels); bins],
        }
    }

    pub fn from_matrices(mats: Vec<CMatrix>) -> Result<Self> {
        let n = mats.first().map_or(0, CMatrix::dim);
        if let Some(bad) = mats.iter().find(|m| m.dim() != n) {
            return Err(Error::shape("demixing matrix size", n, bad.dim()));
        }
        if mats.iter().flat_map(|m| m.as_slice()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("demixing matrices"));
        }
        Ok(Self { mats })
    }

    pub fn channels(&self) -> usize {
        self.mats.first().map_or(0, CMatrix::dim)
    }

    pub fn bins(&self) -> usize {
        self.mats.len()
    }

    pub fn matrix(&self, f: usize) -> &CMatrix {
        &self.mats[f]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.mats
    }

    /// `d_n(f)`, i.e. the conjugate of row `n` of `D(f)`.
    pub fn filter(&self, n: usize, f: usize) -> Vec<Complex64> {
        let m = &self.mats[f];
        (0..m.dim()).map(|j| m.get(n, j).conj()).collect()
    }
}

/// `O[n, f] = (1/T) sum_t x(f, t) x(f, t)^H / sigma2[n, f, t]`.
pub fn weighted_covariance(x: &ComplexSpectrogram, weights: &VarianceTensor, n: usize, f: usize) -> CMatrix {
    covariance_from_row(x, weights.row(n, f), f)
}

fn covariance_from_row(x: &ComplexSpectrogram, w: &[f64], f: usize) -> CMatrix {
    let m = x.channels();
    let frames = x.frames();
    let inv: Vec<f64> = w.iter().map(|&v| 1.0 / v).collect();
    let mut o = CMatrix::zeros(m);
    for i in 0..m {
        let xi = x.row(i, f);
        for j in i..m {
            let xj = x.row(j, f);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..frames {
                acc += xi[t] * xj[t].conj() * inv[t];
            }
            acc /= frames as f64;
            o.set(i, j, acc);
            if i != j {
                o.set(j, i, acc.conj());
            }
        }
    }
    o
}

const IP_REGULARIZATION: f64 = 1e-10;

fn ip_update_matrix(d: &mut CMatrix, o: &CMatrix, n: usize, f: usize) -> Result<()> {
    let dim = d.dim();
    let mut unit = vec![Complex64::new(0.0, 0.0); dim];
    unit[n] = Complex64::new(1.0, 0.0);
    let solved = d.matmul(o).solve(&unit).map(|v| (v, o.clone())).or_else(|| {
        let mut reg = o.clone();
        let delta = IP_REGULARIZATION * o.trace().re / dim as f64;
        for i in 0..dim {
            let v = reg.get(i, i) + delta;
            reg.set(i, i, v);
        }
        d.matmul(&reg).solve(&unit).map(|v| (v, reg))
    });
    let (mut w, o_used) = solved.ok_or(Error::Singular { bin: f })?;
    let ow = o_used.matvec(&w);
    let quad: f64 = w.iter().zip(&ow).map(|(a, b)| (a.conj() * b).re).sum();
    if !(quad > 0.0 && quad.is_finite()) {
        return Err(Error::Singular { bin: f });
    }
    let scale = 1.0 / math::sqrt(quad);
    for (j, wj) in w.iter_mut().enumerate() {
        *wj *= scale;
        d.set(n, j, wj.conj());
    }
    Ok(())
}

/// IP update of `d_n(f)`: `d <- (D(f) O)^{-1} e_n`, then
/// `d <- d / sqrt(d^H O d)`.
///
/// A singular `D(f) O` is retried once with `O + delta tr(O)/N I`
/// (`delta = 1e-10`).
pub fn ip_update(stack: &mut DemixingStack, o: &CMatrix, n: usize, f: usize) -> Result<()> {
    if o.dim() != stack.channels() {
        return Err(Error::shape("weighted covariance", stack.channels(), o.dim()));
    }
    ip_update_matrix(&mut stack.mats[f], o, n, f)
}

/// `y(f, t) = D(f) x(f, t)`.
pub fn demix(x: &ComplexSpectrogram, stack: &DemixingStack) -> Result<ComplexSpectrogram> {
    let mut y = x.clone();
    demix_into(x, stack, &mut y)?;
    Ok(y)
}

fn demix_into(x: &ComplexSpectrogram, stack: &DemixingStack, y: &mut ComplexSpectrogram) -> Result<()> {
    let m = x.channels();
    if stack.bins() != x.bins() {
        return Err(Error::shape("demixing stack bins", x.bins(), stack.bins()));
    }
    if stack.channels() != m {
        return Err(Error::shape("demixing stack channels", m, stack.channels()));
    }
    for f in 0..x.bins() {
        let d = stack.matrix(f);
        for n in 0..m {
            let coeffs: Vec<Complex64> = (0..m).map(|j| d.get(n, j)).collect();
            let out = y.row_mut(n, f);
            out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (j, c) in coeffs.iter().enumerate() {
                for (o, xv) in out.iter_mut().zip(x.row(j, f)) {
                    *o += c * xv;
                }
            }
        }
    }
    Ok(())
}

/// Rescales each estimate to its image at microphone `reference`:
/// `y_n(f, t) <- [D(f)^{-1}]_{reference, n} y_n(f, t)`.
pub fn project_back(y: &ComplexSpectrogram, stack: &DemixingStack, reference: usize) -> Result<ComplexSpectrogram> {
    if reference >= y.channels() {
        return Err(Error::InvalidConfig("reference channel out of range"));
    }
    if stack.bins() != y.bins() || stack.channels() != y.channels() {
        return Err(Error::shape("demixing stack bins", y.bins(), stack.bins()));
    }
    let mut out = y.clone();
    for f in 0..y.bins() {
        let inv = stack.matrix(f).inverse().ok_or(Error::Singular { bin: f })?;
        for n in 0..y.channels() {
            let g = inv.get(reference, n);
            out.row_mut(n, f).iter_mut().for_each(|v| *v *= g);
        }
    }
    Ok(out)
}

/// Diagnostics recorded after each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    /// 1-based.
    pub iteration: usize,
    /// `sum_{n,f,t} [|y|^2 / sigma2 + ln sigma2] - 2 T sum_f ln |det D(f)|`.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SeparationOutput {
    /// Demixed estimates (before projection back).
    pub estimates: ComplexSpectrogram,
    pub demixing: DemixingStack,
    pub trace: Vec<IterationStats>,
}

/// Runs the configured method for `cfg.iters` iterations.
pub fn run_separation(x: &ComplexSpectrogram, cfg: &SeparationConfig) -> Result<SeparationOutput> {
    run_separation_with(x, cfg, |_| {})
}

/// As [`run_separation`], calling `observe` after every iteration.
pub fn run_separation_with(
    x: &ComplexSpectrogram,
    cfg: &SeparationConfig,
    mut observe: impl FnMut(&IterationStats),
) -> Result<SeparationOutput> {
    cfg.validate()?;
    let mut state = Separator::new(x, cfg)?;
    let mut trace = Vec::with_capacity(cfg.iters);
    for it in 1..=cfg.iters {
        let stats = state.step(it).map_err(|e| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        })?;
        observe(&stats);
        trace.push(stats);
    }
    Ok(SeparationOutput {
        estimates: state.y,
        demixing: state.demixing,
        trace,
    })
}

/// Iteration state; exposed so callers can inspect the weights and
/// covariances used by each IP pass.
pub struct Separator<'a> {
    x: &'a ComplexSpectrogram,
    cfg: SeparationConfig,
    y: ComplexSpectrogram,
    demixing: DemixingStack,
    /// Weights used by the most recent IP pass (initially `|x|^2`).
    weights: VarianceTensor,
    nmf: Option<NmfFactors>,
}

impl<'a> Separator<'a> {
    pub fn new(x: &'a ComplexSpectrogram, cfg: &SeparationConfig) -> Result<Self> {
        cfg.validate()?;
        let (m, bins, frames) = (x.channels(), x.bins(), x.frames());
        if m < 2 {
            return Err(Error::InvalidConfig("separation needs at least two channels"));
        }
        if frames == 0 {
            return Err(Error::InvalidConfig("spectrogram has no frames"));
        }
        let eps = cfg.sinkhorn.eps_floor;
        let weights = VarianceTensor::from_vec(m, bins, frames, x.power(), eps)?;
        let nmf = cfg.method.uses_nmf().then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            NmfFactors::random(m, bins, frames, cfg.nmf_order, &mut rng)
        });
        Ok(Self {
            x,
            cfg: *cfg,
            y: x.clone(),
            demixing: DemixingStack::identity(m, bins),
            weights,
            nmf,
        })
    }

    pub fn estimates(&self) -> &ComplexSpectrogram {
        &self.y
    }

    pub fn demixing(&self) -> &DemixingStack {
        &self.demixing
    }

    pub fn weights(&self) -> &VarianceTensor {
        &self.weights
    }

    fn power(&self) -> Result<VarianceTensor> {
        let y = &self.y;
        VarianceTensor::from_vec(y.channels(), y.bins(), y.frames(), y.power(), self.cfg.sinkhorn.eps_floor)
    }

    fn flat_variances(&self) -> VarianceTensor {
        let y = &self.y;
        let (m, bins, frames) = (y.channels(), y.bins(), y.frames());
        let eps = self.cfg.sinkhorn.eps_floor;
        let mut out = VarianceTensor::filled(m, bins, frames, 0.0);
        for n in 0..m {
            let mut mean = vec![0.0; frames];
            for f in 0..bins {
                for (acc, v) in mean.iter_mut().zip(y.row(n, f)) {
                    *acc += v.norm_sqr();
                }
            }
            let src = out.source_mut(n);
            for f in 0..bins {
                for t in 0..frames {
                    src[f * frames + t] = (mean[t] / bins as f64).max(eps);
                }
            }
        }
        out
    }

    /// Computes the variance model for the next IP pass.
    fn next_weights(&mut self) -> Result<VarianceTensor> {
        let eps = self.cfg.sinkhorn.eps_floor;
        match self.cfg.method {
            Method::AuxIva => Ok(self.flat_variances()),
            Method::SIva => {
                let model = self.flat_variances();
                reallocate_all(&model, &self.power()?, &self.cfg.sinkhorn)
            }
            Method::Ilrma => {
                let target = self.power()?;
                let nmf = self.nmf.as_mut().expect("NMF factors for ILRMA");
                for n in 0..target.sources() {
                    nmf.update(&target, n, self.cfg.nmf_rule, eps)?;
                }
                Ok(nmf.model_variances(eps))
            }
            Method::SIlrma => {
                let target = reallocate_all(&self.weights, &self.power()?, &self.cfg.sinkhorn)?;
                let nmf = self.nmf.as_mut().expect("NMF factors for sILRMA");
                for n in 0..target.sources() {
                    nmf.update(&target, n, self.cfg.nmf_rule, eps)?;
                }
                Ok(nmf.model_variances(eps))
            }
        }
    }

    /// One outer iteration: variance model, IP pass, demix.
    pub fn step(&mut self, iteration: usize) -> Result<IterationStats> {
        self.weights = self.next_weights()?;
        ip_pass(self.x, &self.weights, &mut self.demixing)?;
        demix_into(self.x, &self.demixing, &mut self.y)?;
        Ok(IterationStats {
            iteration,
            objective: surrogate_objective(&self.y, &self.weights, &self.demixing),
        })
    }
}

fn ip_bin(x: &ComplexSpectrogram, weights: &VarianceTensor, d: &mut CMatrix, f: usize) -> Result<()> {
    for n in 0..x.channels() {
        let o = covariance_from_row(x, weights.row(n, f), f);
        ip_update_matrix(d, &o, n, f)?;
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn ip_pass(x: &ComplexSpectrogram, weights: &VarianceTensor, stack: &mut DemixingStack) -> Result<()> {
    use rayon::prelude::*;
    stack
        .mats
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(f, d)| ip_bin(x, weights, d, f))
}

#[cfg(not(feature = "parallel"))]
fn ip_pass(x: &ComplexSpectrogram, weights: &VarianceTensor, stack: &mut DemixingStack) -> Result<()> {
    stack
        .mats
        .iter_mut()
        .enumerate()
        .try_for_each(|(f, d)| ip_bin(x, weights, d, f))
}

/// Re-allocates `model[n, :, t]` against `power[n, :, t]` for every
/// source and frame.
pub fn reallocate_all(
    model: &VarianceTensor,
    power: &VarianceTensor,
    params: &SinkhornParams,
) -> Result<VarianceTensor> {
    let (m, bins, frames) = (model.sources(), model.bins(), model.frames());
    if power.sources() != m || power.bins() != bins || power.frames() != frames {
        return Err(Error::shape("power tensor", m * bins * frames, power.as_slice().len()));
    }
    let mut out = VarianceTensor::filled(m, bins, frames, 0.0);
    let mut frame_major = vec![0.0; frames * bins];
    for n in 0..m {
        let (ms, ps) = (model.source(n), power.source(n));
        solve_frames(ms, ps, bins, frames, params, &mut frame_major)?;
        let dst = out.source_mut(n);
        for t in 0..frames {
            for f in 0..bins {
                dst[f * frames + t] = frame_major[t * bins + f].max(params.eps_floor);
            }
        }
    }
    Ok(out)
}

fn gather(src: &[f64], frames: usize, t: usize, dst: &mut [f64]) {
    for (f, d) in dst.iter_mut().enumerate() {
        *d = src[f * frames + t];
    }
}

fn solve_frame(
    ms: &[f64],
    ps: &[f64],
    frames: usize,
    t: usize,
    params: &SinkhornParams,
    ws: &mut (SinkhornWorkspace, Vec<f64>, Vec<f64>),
    out: &mut [f64],
) -> Result<()> {
    let (work, s, y) = ws;
    s.resize(out.len(), 0.0);
    y.resize(out.len(), 0.0);
    gather(ms, frames, t, s);
    gather(ps, frames, t, y);
    transport::reallocate(s, y, params, work, out)
}

#[cfg(feature = "parallel")]
fn solve_frames(
    ms: &[f64],
    ps: &[f64],
    bins: usize,
    frames: usize,
    params: &SinkhornParams,
    out: &mut [f64],
) -> Result<()> {
    use rayon::prelude::*;
    out.par_chunks_mut(bins).enumerate().try_for_each_init(
        || (SinkhornWorkspace::default(), Vec::new(), Vec::new()),
        |ws, (t, chunk)| solve_frame(ms, ps, frames, t, params, ws, chunk),
    )
}

#[cfg(not(feature = "parallel"))]
fn solve_frames(
    ms: &[f64],
    ps: &[f64],
    bins: usize,
    frames: usize,
    params: &SinkhornParams,
    out: &mut [f64],
) -> Result<()> {
    let mut ws = (SinkhornWorkspace::default(), Vec::new(), Vec::new());
    out.chunks_mut(bins)
        .enumerate()
        .try_for_each(|(t, chunk)| solve_frame(ms, ps, frames, t, params, &mut ws, chunk))
}

/// Negative log-likelihood surrogate of the current estimates under
/// `weights`.
pub fn surrogate_objective(y: &ComplexSpectrogram, weights: &VarianceTensor, stack: &DemixingStack) -> f64 {
    let mut acc = 0.0;
    for (v, &w) in y.data().iter().zip(weights.as_slice()) {
        acc += v.norm_sqr() / w + math::ln(w);
    }
    let logdet: f64 = stack.matrices().iter().map(CMatrix::log_abs_det).sum();
    acc - 2.0 * y.frames() as f64 * logdet
}
