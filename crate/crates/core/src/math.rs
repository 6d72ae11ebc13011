//! Scalar math shims and small vector helpers.
//!
//! The crate builds without `std`, so every transcendental goes through
//! [`libm`]. Using libm unconditionally (also in test builds) keeps the
//! numerics bit-identical between hosted and embedded targets.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Dot product, summed left to right (deterministic order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm.
#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    sqrt(dot(v, v))
}

/// Max-absolute-entry norm; 0 for an empty slice.
#[inline]
pub fn norm_inf(v: &[f64]) -> f64 {
    let mut m = 0.0;
    for &x in v {
        let a = abs(x);
        if a > m {
            m = a;
        }
    }
    m
}

/// Squared Euclidean distance between two equally sized slices.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shims_match_std() {
        // libm and the platform libm may differ in the last ulp.
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * b.abs().max(1.0);
        for &x in &[-2.5, -0.3, 0.0, 0.7, 3.1] {
            assert!(close(exp(x), f64::exp(x)));
            assert!(close(tanh(x), f64::tanh(x)));
            assert_eq!(abs(x), f64::abs(x));
        }
        assert!(close(ln(2.0), f64::ln(2.0)));
        assert_eq!(sqrt(2.0), f64::sqrt(2.0));
    }

    #[test]
    fn norms() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm_inf(&[1.0, -7.0, 2.0]), 7.0);
        assert_eq!(dist2(&[1.0, 2.0], &[0.0, 0.0]), 5.0);
        assert_eq!(norm_inf(&[]), 0.0);
    }
}
