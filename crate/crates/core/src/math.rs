//! Thin wrappers over `libm` so the kernel builds without `std`.

pub(crate) const TAU: f64 = core::f64::consts::TAU;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// `ln(1 + x)`, accurate for small `x`.
#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    libm::sincos(x)
}

/// `base^mu` with `0^mu = 0` for every exponent, including zero.
#[inline]
pub(crate) fn pow_weight(base: f64, mu: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else if mu == 1.0 {
        base
    } else {
        libm::pow(base, mu)
    }
}

/// Wraps onto `[0, 1)`.
#[inline]
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x - floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
