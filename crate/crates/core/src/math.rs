//! Scalar math: the platform implementation with `std`, `libm` without.

#[inline]
pub fn exp(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.exp();
    #[cfg(not(feature = "std"))]
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.ln();
    #[cfg(not(feature = "std"))]
    libm::log(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.log10();
    #[cfg(not(feature = "std"))]
    libm::log10(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.sqrt();
    #[cfg(not(feature = "std"))]
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.powf(y);
    #[cfg(not(feature = "std"))]
    libm::pow(x, y)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.cos();
    #[cfg(not(feature = "std"))]
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    #[cfg(feature = "std")]
    return x.sin();
    #[cfg(not(feature = "std"))]
    libm::sin(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Decibel ratio `10 log10(num / den)` clamped to `[-cap, cap]`.
///
/// A zero denominator maps to `+cap`, a zero numerator to `-cap`.
pub fn db_ratio(num: f64, den: f64, cap: f64) -> f64 {
    if num <= 0.0 {
        return -cap;
    }
    if den <= 0.0 {
        return cap;
    }
    (10.0 * log10(num / den)).clamp(-cap, cap)
}
