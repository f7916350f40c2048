//! Source variance models: variance tensors, the Itakura-Saito contrast,
//! and the low-rank (NMF) variance model with multiplicative updates.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Nonnegative source variances indexed (source, bin, frame), frames
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTensor {
    sources: usize,
    bins: usize,
    frames: usize,
    data: Vec<f64>,
}

impl VarianceTensor {
    pub fn filled(sources: usize, bins: usize, frames: usize, value: f64) -> Self {
        Self {
            sources,
            bins,
            frames,
            data: vec![value; sources * bins * frames],
        }
    }

    /// Wraps `data`, flooring every entry at `eps_floor`.
    pub fn from_vec(sources: usize, bins: usize, frames: usize, data: Vec<f64>, eps_floor: f64) -> Result<Self> {
        if data.len() != sources * bins * frames {
            return Err(Error::shape("variance tensor", sources * bins * frames, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("variance tensor"));
        }
        Ok(Self {
            sources,
            bins,
            frames,
            data: data.into_iter().map(|v| v.max(eps_floor)).collect(),
        })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, n: usize, f: usize, t: usize) -> f64 {
        self.data[(n * self.bins + f) * self.frames + t]
    }

    #[inline]
    pub fn set(&mut self, n: usize, f: usize, t: usize, v: f64) {
        self.data[(n * self.bins + f) * self.frames + t] = v;
    }

    /// The `bins x frames` block of source `n`.
    pub fn source(&self, n: usize) -> &[f64] {
        let len = self.bins * self.frames;
        &self.data[n * len..(n + 1) * len]
    }

    pub fn source_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.bins * self.frames;
        &mut self.data[n * len..(n + 1) * len]
    }

    /// Frames of source `n` at bin `f`.
    pub fn row(&self, n: usize, f: usize) -> &[f64] {
        let start = (n * self.bins + f) * self.frames;
        &self.data[start..start + self.frames]
    }
}

/// Itakura-Saito divergence `sum target/model - ln(target/model) - 1`.
///
/// This is the offset form of `sum target/model + ln model`; the minimizer
/// is the same and the minimum value is zero.
pub fn is_divergence(target: &[f64], model: &[f64]) -> Result<f64> {
    if target.len() != model.len() {
        return Err(Error::shape("IS divergence operands", target.len(), model.len()));
    }
    let mut acc = 0.0;
    for (&x, &m) in target.iter().zip(model) {
        if !(x > 0.0) {
            return Err(Error::NonPositive("IS divergence target"));
        }
        if !(m > 0.0) {
            return Err(Error::NonPositive("IS divergence model"));
        }
        let r = x / m;
        acc += r - math::ln(r) - 1.0;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Multiplicative IS-NMF update (monotone in the IS divergence).
    #[default]
    Standard,
    /// The square-root rule with the denominator weighted by the target and
    /// no leading factor.
    Literal,
}

/// Per-source basis `U` (bins x order) and activations `V` (order x frames).
#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    sources: usize,
    bins: usize,
    frames: usize,
    order: usize,
    basis: Vec<f64>,
    activations: Vec<f64>,
}

impl NmfFactors {
    /// Uniform draws in `[0.1, 1]`.
    pub fn random<R: Rng + ?Sized>(sources: usize, bins: usize, frames: usize, order: usize, rng: &mut R) -> Self {
        let basis = (0..sources * bins * order).map(|_| rng.random_range(0.1..=1.0)).collect();
        let activations = (0..sources * order * frames)
            .map(|_| rng.random_range(0.1..=1.0))
            .collect();
        Self {
            sources,
            bins,
            frames,
            order,
            basis,
            activations,
        }
    }

    pub fn from_parts(
        sources: usize,
        bins: usize,
        frames: usize,
        order: usize,
        basis: Vec<f64>,
        activations: Vec<f64>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("NMF order must be at least 1"));
        }
        if basis.len() != sources * bins * order {
            return Err(Error::shape("NMF basis", sources * bins * order, basis.len()));
        }
        if activations.len() != sources * order * frames {
            return Err(Error::shape("NMF activations", sources * order * frames, activations.len()));
        }
        if basis.iter().chain(&activations).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositive("NMF factors"));
        }
        Ok(Self {
            sources,
            bins,
            frames,
            order,
            basis,
            activations,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    /// `bins x order` basis of source `n`, row-major.
    pub fn basis(&self, n: usize) -> &[f64] {
        let len = self.bins * self.order;
        &self.basis[n * len..(n + 1) * len]
    }

    /// `order x frames` activations of source `n`, row-major.
    pub fn activations(&self, n: usize) -> &[f64] {
        let len = self.order * self.frames;
        &self.activations[n * len..(n + 1) * len]
    }

    fn model_into(&self, n: usize, out: &mut [f64]) {
        let (bins, frames, order) = (self.bins, self.frames, self.order);
        let u = self.basis(n);
        let v = self.activations(n);
        out.iter_mut().for_each(|o| *o = 0.0);
        for f in 0..bins {
            let row = &mut out[f * frames..(f + 1) * frames];
            for k in 0..order {
                let ufk = u[f * order + k];
                for (o, &vkt) in row.iter_mut().zip(&v[k * frames..(k + 1) * frames]) {
                    *o += ufk * vkt;
                }
            }
        }
    }

    /// One sweep over source `n`: all of `U` first, then all of `V`, each
    /// against the current model. Entries are floored at `eps_floor`.
    pub fn update(&mut self, target: &VarianceTensor, n: usize, rule: UpdateRule, eps_floor: f64) -> Result<()> {
        if target.bins != self.bins || target.frames != self.frames {
            return Err(Error::shape("NMF target", self.bins * self.frames, target.bins * target.frames));
        }
        if n >= self.sources || n >= target.sources {
            return Err(Error::shape("NMF source index", self.sources, n));
        }
        let (bins, frames, order) = (self.bins, self.frames, self.order);
        let x = target.source(n);
        let mut model = vec![0.0; bins * frames];
        let mut a = vec![0.0; bins * frames];
        let mut b = vec![0.0; bins * frames];

        let weights = |model: &[f64], a: &mut [f64], b: &mut [f64]| {
            for i in 0..model.len() {
                let m = model[i].max(eps_floor);
                let inv = 1.0 / m;
                a[i] = x[i] * inv * inv;
                b[i] = match rule {
                    UpdateRule::Standard => inv,
                    UpdateRule::Literal => x[i] * inv,
                };
            }
        };

        self.model_into(n, &mut model);
        weights(&model, &mut a, &mut b);
        {
            let v = &self.activations[n * order * frames..(n + 1) * order * frames];
            let u = &mut self.basis[n * bins * order..(n + 1) * bins * order];
            for f in 0..bins {
                let arow = &a[f * frames..(f + 1) * frames];
                let brow = &b[f * frames..(f + 1) * frames];
                for k in 0..order {
                    let vk = &v[k * frames..(k + 1) * frames];
                    let num: f64 = arow.iter().zip(vk).map(|(p, q)| p * q).sum();
                    let den: f64 = match rule {
                        UpdateRule::Standard => brow.iter().zip(vk).map(|(p, q)| p * q).sum(),
                        UpdateRule::Literal => brow.iter().sum(),
                    };
                    let ratio = math::sqrt(num / den.max(eps_floor));
                    let cur = &mut u[f * order + k];
                    *cur = match rule {
                        UpdateRule::Standard => *cur * ratio,
                        UpdateRule::Literal => ratio,
                    }
                    .max(eps_floor);
                }
            }
        }

        self.model_into(n, &mut model);
        weights(&model, &mut a, &mut b);
        {
            let u = &self.basis[n * bins * order..(n + 1) * bins * order];
            let v = &mut self.activations[n * order * frames..(n + 1) * order * frames];
            let mut num = vec![0.0; order * frames];
            let mut den = vec![0.0; order * frames];
            for f in 0..bins {
                let arow = &a[f * frames..(f + 1) * frames];
                let brow = &b[f * frames..(f + 1) * frames];
                for k in 0..order {
                    let ufk = u[f * order + k];
                    let nrow = &mut num[k * frames..(k + 1) * frames];
                    nrow.iter_mut().zip(arow).for_each(|(o, p)| *o += ufk * p);
                    let drow = &mut den[k * frames..(k + 1) * frames];
                    match rule {
                        UpdateRule::Standard => drow.iter_mut().zip(brow).for_each(|(o, p)| *o += ufk * p),
                        UpdateRule::Literal => drow.iter_mut().zip(brow).for_each(|(o, p)| *o += p),
                    }
                }
            }
            for i in 0..order * frames {
                let ratio = math::sqrt(num[i] / den[i].max(eps_floor));
                v[i] = match rule {
                    UpdateRule::Standard => v[i] * ratio,
                    UpdateRule::Literal => ratio,
                }
                .max(eps_floor);
            }
        }
        Ok(())
    }

    /// `sigma2[n, f, t] = sum_k U[n, f, k] V[n, k, t]`, floored.
    pub fn model_variances(&self, eps_floor: f64) -> VarianceTensor {
        let mut out = VarianceTensor::filled(self.sources, self.bins, self.frames, 0.0);
        for n in 0..self.sources {
            self.model_into(n, out.source_mut(n));
        }
        out.data.iter_mut().for_each(|v| *v = v.max(eps_floor));
        out
    }
}

/// Free-function form of [`NmfFactors::update`].
pub fn nmf_update(
    factors: &mut NmfFactors,
    target: &VarianceTensor,
    n: usize,
    rule: UpdateRule,
    eps_floor: f64,
) -> Result<()> {
    factors.update(target, n, rule, eps_floor)
}

/// Free-function form of [`NmfFactors::model_variances`].
pub fn model_variances(factors: &NmfFactors, eps_floor: f64) -> VarianceTensor {
    factors.model_variances(eps_floor)
}
