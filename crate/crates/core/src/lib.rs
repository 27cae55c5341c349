//! Counts and Ω-moments of h-free and h-full elements in arithmetical
//! semigroups given by a norm spectrum, with the Euler-product constants and
//! main-term predictions that describe them.

pub mod arith;
pub mod asymptotics;
pub mod constants;
pub mod enumeration;
pub mod error;
pub mod monoid;

pub use asymptotics::{
    error_exponent_h_free, error_exponent_h_full, predict, residual_report, ErrorClass, Moment, Observation,
    Prediction, Ratio, Residual,
};
pub use constants::{ConstantEntry, ConstantsBundle, EulerValue, TailKind};
pub use enumeration::{
    count_all, count_selected, decomposition_moment, normal_order_exceptions, tally_norm_range, tally_selected,
    ExceptionCount, Family, MomentTally, SetSelector,
};
pub use error::{Error, Result};
pub use monoid::{
    build_integer_spectrum, build_polynomial_spectrum, load_synthetic_spectrum, read_synthetic_spectrum,
    Factorization, MonoidParams, NormSpectrum, PrimeSlot, SpectrumKind, XMode,
};
