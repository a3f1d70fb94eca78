//! Scalar abstraction shared by the estimators and diagnostics.
//!
//! Everything that is pure arithmetic over a finite pool (stratum weights,
//! proposal masses, exact estimator moments) is written against [`Scalar`],
//! so the same code runs in `f64` for production, `f32` for cheap sweeps,
//! and exact rationals ([`Exact`]) for closed-form checks.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, Signed, ToPrimitive};

/// Exact rational scalar used by closed-form tests and small-pool audits.
pub type Exact = Ratio<i128>;

pub trait Scalar: Copy + Num + Signed + PartialOrd + Debug + Send + Sync + 'static {
    /// Converts a finite real. Rational impls recover short decimals exactly
    /// (`0.9` becomes `9/10`).
    fn from_real(x: f64) -> Self;

    fn to_real(self) -> f64;

    fn from_count(n: usize) -> Self;

    /// `self^exponent` for a non-negative base. Rationals stay exact for
    /// integral exponents and otherwise round to a denominator of at most
    /// [`MAX_ROUNDED_DENOMINATOR`].
    fn pow_real(self, exponent: f64) -> Self;
}

impl Scalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }

    fn to_real(self) -> f64 {
        self
    }

    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn pow_real(self, exponent: f64) -> Self {
        self.powf(exponent)
    }
}

impl Scalar for f32 {
    fn from_real(x: f64) -> Self {
        x as f32
    }

    fn to_real(self) -> f64 {
        self as f64
    }

    fn from_count(n: usize) -> Self {
        n as f32
    }

    fn pow_real(self, exponent: f64) -> Self {
        self.powf(exponent as f32)
    }
}

impl Scalar for Exact {
    fn from_real(x: f64) -> Self {
        Ratio::approximate_float(x)
            .unwrap_or_else(|| panic!("{x} has no rational representation within i128"))
    }

    fn to_real(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        Ratio::from_integer(n as i128)
    }

    fn pow_real(self, exponent: f64) -> Self {
        if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
            self.pow(exponent as i32)
        } else {
            bounded_rational(self.to_real().powf(exponent), MAX_ROUNDED_DENOMINATOR)
        }
    }
}

/// Denominator cap for irrational powers in exact arithmetic; keeps sums of
/// squared weights inside `i128`.
pub const MAX_ROUNDED_DENOMINATOR: i128 = 10_000;

/// Best rational approximation of `x >= 0` with denominator `<= max_den`
/// (continued-fraction convergents).
fn bounded_rational(x: f64, max_den: i128) -> Exact {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rest = x;
    loop {
        let a = rest.floor();
        let ai = a as i128;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = rest - a;
        if frac < 1e-15 {
            break;
        }
        rest = 1.0 / frac;
    }
    Ratio::new(h1, k1)
}

/// Neumaier-compensated sum. Exact scalars carry a zero compensation term.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
