//! Scalar abstraction for the closed-form kernel.
//!
//! The rate/delay/payoff formulas are plain scalar math, so they are written
//! once over a [`Scalar`] bound and instantiated at `f32` or `f64`. The
//! simulation stack itself runs at [`crate::Real`].

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the closed-form kernel: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + 'static {
    /// Lossy conversion from `f64` (exact for `f64`, rounded for `f32`).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    /// Base-10 logarithm scaled by 10, i.e. the dB of a linear power ratio.
    fn to_db(self) -> Self {
        Self::from_f64_lossy(10.0) * self.log10()
    }

    /// Linear power ratio of a dB value.
    fn db_to_linear(self) -> Self {
        Self::from_f64_lossy(10.0).powf(self / Self::from_f64_lossy(10.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// dBm to watts.
pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    (dbm - T::from_f64_lossy(30.0)).db_to_linear()
}

/// Watts to dBm.
pub fn watts_to_dbm<T: Scalar>(watts: T) -> T {
    watts.to_db() + T::from_f64_lossy(30.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn db_round_trip() {
        let x: f64 = 13.7;
        assert_relative_eq!(x.db_to_linear().to_db(), x, max_relative = 1e-12);
        let y: f32 = -7.25;
        assert_relative_eq!(y.db_to_linear().to_db(), y, max_relative = 1e-5);
    }

    #[test]
    fn dbm_conversions() {
        assert_relative_eq!(dbm_to_watts(30.0_f64), 1.0, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(20.0_f64), 0.1, max_relative = 1e-12);
        assert_relative_eq!(watts_to_dbm(1e-3_f64), 0.0, max_relative = 1e-12);
    }
}
