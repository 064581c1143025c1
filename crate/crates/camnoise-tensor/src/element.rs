//! Scalar element types that tensors can store.

/// A floating-point scalar a [`Tensor`](crate::Tensor) can store.
///
/// The engine stores activations and parameters as `F: Element`. Dense dot
/// products, losses, and Adam moments accumulate in `f64`; the convolution
/// kernels accumulate in `F` itself so the hot loops vectorize at the native
/// lane width. Every reduction runs in a fixed index order, so results are
/// bit-identical from run to run either way, and instantiating a graph at
/// `f64` makes the whole pipeline double-precision — which is what makes
/// `f64` graphs usable as finite-difference gradient-check references.
pub trait Element:
    Copy
    + PartialOrd
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    /// Additive identity.
    const ZERO: Self;
    /// Multiplicative identity.
    const ONE: Self;

    /// Round-to-nearest conversion from the `f64` accumulation domain.
    fn from_f64(v: f64) -> Self;
    /// Exact widening into the `f64` accumulation domain.
    fn to_f64(self) -> f64;
    /// Conversion from the `f32` checkpoint storage format.
    fn from_f32(v: f32) -> Self;
    /// Conversion to the `f32` checkpoint storage format (rounds for `f64`).
    fn to_f32(self) -> f32;
}

impl Element for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        v
    }

    #[inline(always)]
    fn to_f32(self) -> f32 {
        self
    }
}

impl Element for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_f32(v: f32) -> Self {
        f64::from(v)
    }

    #[inline(always)]
    fn to_f32(self) -> f32 {
        self as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_round_trips_through_f64_exactly() {
        for v in [0.0f32, -1.5, 3.25e-7, f32::MAX, f32::MIN_POSITIVE] {
            assert_eq!(f32::from_f64(v.to_f64()), v);
        }
    }

    #[test]
    fn f64_conversions_are_identities() {
        for v in [0.0f64, -1.5, 1.0e-300, std::f64::consts::PI] {
            assert_eq!(f64::from_f64(v.to_f64()), v);
        }
    }
}
