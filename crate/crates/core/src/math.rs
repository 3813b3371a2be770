//! Float helpers that work without `std`.

#[inline]
pub fn sqrt(v: f64) -> f64 {
    libm::sqrt(v)
}

#[inline]
pub fn round(v: f64) -> f64 {
    libm::round(v)
}

#[inline]
pub fn floor(v: f64) -> f64 {
    libm::floor(v)
}

#[inline]
pub fn ceil(v: f64) -> f64 {
    libm::ceil(v)
}

#[inline]
pub fn abs(v: f64) -> f64 {
    libm::fabs(v)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// `(sin, cos)` of an angle given in degrees.
#[inline]
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    libm::sincos(deg.to_radians())
}

/// Rounds to two fraction digits, mapping `-0.0` to `0.0`.
#[inline]
pub fn round2(v: f64) -> f64 {
    let r = round(v * 100.0) / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Normalizes an angle in degrees into `(-180, 180]`.
pub fn normalize_angle(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    if a == 0.0 {
        0.0
    } else {
        a
    }
}
