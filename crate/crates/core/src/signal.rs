//! Real convolution and correlation helpers.

use alloc::vec;
use alloc::vec::Vec;

/// Direct full convolution, length `a.len() + b.len() - 1`.
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Full convolution through a zero-padded FFT.
#[cfg(feature = "std")]
pub fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    use num_complex::Complex64;
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let n = len.next_power_of_two();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (d, &s) in buf.iter_mut().zip(x) {
            d.re = s;
        }
        buf
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (p, q) in fa.iter_mut().zip(&fb) {
        *p *= q;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..len].iter().map(|z| z.re * scale).collect()
}

/// Full convolution; uses the FFT when available and both inputs are long.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    #[cfg(feature = "std")]
    if a.len().min(b.len()) > 64 {
        return convolve_fft(a, b);
    }
    convolve_direct(a, b)
}

/// `c[k] = sum_u a[u] b[u + k]` for `k` in `0..lags`, with zeros outside
/// the supports.
pub fn correlate(a: &[f64], b: &[f64], lags: usize) -> Vec<f64> {
    let mut out = vec![0.0; lags];
    if a.is_empty() || b.is_empty() {
        return out;
    }
    let rev: Vec<f64> = a.iter().rev().copied().collect();
    let full = convolve(&rev, b);
    let zero = a.len() - 1;
    for (k, o) in out.iter_mut().enumerate() {
        if let Some(&v) = full.get(zero + k) {
            *o = v;
        }
    }
    out
}
