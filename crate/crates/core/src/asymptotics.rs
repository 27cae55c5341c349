//! Main-term predictions for counts and Ω-moments, error-term classes, and
//! residual diagnostics.

use std::cmp::Ordering;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::constants::ConstantsBundle;
use crate::enumeration::{Family, MomentTally};
use crate::error::{Error, Result};
use crate::monoid::{check_h, MonoidParams};

/// Smallest `x` for which `log log x` is used (`16 > e^e`).
pub const MIN_PREDICTION_X: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moment {
    Count,
    M1,
    M2,
}

impl Moment {
    pub const ALL: [Moment; 3] = [Moment::Count, Moment::M1, Moment::M2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Moment::Count => "count",
            Moment::M1 => "m1",
            Moment::M2 => "m2",
        }
    }

    /// The matching empirical quantity of a tally.
    pub fn of(&self, tally: &MomentTally) -> u64 {
        match self {
            Moment::Count => tally.count(),
            Moment::M1 => tally.sum_omega(),
            Moment::M2 => tally.sum_omega_sq(),
        }
    }
}

impl fmt::Display for Moment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-negative rational number, compared exactly.
#[derive(Debug, Clone, Copy, Eq)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0);
        let g = gcd(num, den);
        Self { num: num / g, den: den / g }
    }

    /// Best approximation with denominator at most `10^9`; recovers short
    /// fractions such as `2/3` from their `f64` value exactly.
    pub fn from_f64(v: f64) -> Self {
        assert!(v >= 0.0 && v.is_finite());
        const MAX_DEN: u64 = 1_000_000_000;
        // continued-fraction convergents
        let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
        let mut rest = v;
        loop {
            let a = rest.floor();
            if a > u64::MAX as f64 / 2.0 {
                break;
            }
            let a = a as u64;
            let Some(p2) = a.checked_mul(p1).and_then(|t| t.checked_add(p0)) else { break };
            let Some(q2) = a.checked_mul(q1).and_then(|t| t.checked_add(q0)) else { break };
            if q2 > MAX_DEN {
                break;
            }
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let frac = rest - a as f64;
            if (p1 as f64 / q1 as f64 - v).abs() <= 1e-15 * v.max(1.0) || frac < 1e-12 {
                break;
            }
            rest = 1.0 / frac;
        }
        Self::new(p1, q1.max(1))
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn div_int(self, k: u64) -> Self {
        Self::new(self.num, self.den * k)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorFamily {
    HFreeCount,
    HFullCount,
    Moment,
}

/// Error scale `x^exponent · (log x)^log_power · (log log x)^loglog_power`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorClass {
    pub exponent: Ratio,
    pub log_power: i32,
    pub loglog_power: u32,
    pub family: ErrorFamily,
}

impl ErrorClass {
    pub fn scale(&self, x: f64) -> f64 {
        x.powf(self.exponent.as_f64())
            * x.ln().powi(self.log_power)
            * x.ln().ln().powi(self.loglog_power as i32)
    }

    /// Error scale of the Ω-moment asymptotics: `x/log x`, `x loglog x/log x`
    /// (h-free) and `x^(1/h)/log x`, `x^(1/h) loglog x/log x` (h-full).
    pub fn moment(family: Family, moment: Moment, h: u32) -> Self {
        let exponent = match family {
            Family::HFree => Ratio::new(1, 1),
            Family::HFull => Ratio::new(1, h as u64),
        };
        Self {
            exponent,
            log_power: -1,
            loglog_power: u32::from(moment == Moment::M2),
            family: ErrorFamily::Moment,
        }
    }
}

impl Serialize for ErrorClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ErrorClass", 5)?;
        st.serialize_field("exponent", &self.exponent.as_f64())?;
        st.serialize_field("exponent_ratio", &self.exponent.to_string())?;
        st.serialize_field("log_power", &self.log_power)?;
        st.serialize_field("loglog_power", &self.loglog_power)?;
        st.serialize_field("family", &self.family)?;
        st.end()
    }
}

fn check_theta(theta: f64, h: u32) -> Result<Ratio> {
    check_h(h)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, 1), got {theta}")));
    }
    Ok(Ratio::from_f64(theta))
}

/// Error class of the h-free count: `x^θ` if `1/h < θ`, `x^θ log x` if
/// `1/h = θ`, `x^(1/h)` if `1/h > θ`.
pub fn error_exponent_h_free(theta: f64, h: u32) -> Result<ErrorClass> {
    let theta = check_theta(theta, h)?;
    let inv_h = Ratio::new(1, h as u64);
    let (exponent, log_power) = match inv_h.cmp(&theta) {
        Ordering::Less => (theta, 0),
        Ordering::Equal => (theta, 1),
        Ordering::Greater => (inv_h, 0),
    };
    Ok(ErrorClass { exponent, log_power, loglog_power: 0, family: ErrorFamily::HFreeCount })
}

/// Error class of the h-full count: `x^(θ/h)` if `h/(h+1) < θ`,
/// `x^(1/(h+1)) log x` if `θ = h/(h+i)` for some `1 <= i <= h-1`, and
/// `x^(1/(h+1))` otherwise.
pub fn error_exponent_h_full(theta: f64, h: u32) -> Result<ErrorClass> {
    let theta = check_theta(theta, h)?;
    let h64 = h as u64;
    let (exponent, log_power) = if Ratio::new(h64, h64 + 1) < theta {
        (theta.div_int(h64), 0)
    } else if (1..h64).any(|i| Ratio::new(h64, h64 + i) == theta) {
        (Ratio::new(1, h64 + 1), 1)
    } else {
        (Ratio::new(1, h64 + 1), 0)
    };
    Ok(ErrorClass { exponent, log_power, loglog_power: 0, family: ErrorFamily::HFullCount })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: &'static str,
    pub value: f64,
}

/// Main term of a count or moment, split into its terms (largest order first).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub x: u64,
    pub h: u32,
    pub family: Family,
    pub moment: Moment,
    pub main_value: f64,
    pub terms: Vec<Term>,
    pub error_class: ErrorClass,
}

impl Prediction {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("prediction serialises")
    }
}

/// Main-term prediction for `x`.
///
/// h-free (`c = κ/ζ_M(h)`):
/// * count `c·x`
/// * m1 `c·x·L + c·C3·x`
/// * m2 `c·x·L² + c(2C3+1)·x·L + c·C4·x`
///
/// h-full (`g = κγ_h`, `y = x^(1/h)`):
/// * count `g·y`
/// * m1 `h·g·y·L + D3·g·y`
/// * m2 `h²·g·y·L² + (2D3+h)h·g·y·L + D4·g·y`
///
/// with `L = log log x`.
pub fn predict(
    x: u64,
    h: u32,
    family: Family,
    moment: Moment,
    bundle: &ConstantsBundle,
    params: &MonoidParams,
) -> Result<Prediction> {
    check_h(h)?;
    if x < MIN_PREDICTION_X {
        return Err(Error::Domain(format!("predictions need x >= {MIN_PREDICTION_X}, got {x}")));
    }
    if bundle.h != h {
        return Err(Error::Mismatch(format!("constants computed for h = {}, prediction asks h = {h}", bundle.h)));
    }
    if bundle.x_mode != params.x_mode() {
        return Err(Error::Mismatch(format!(
            "constants computed for {} norms, monoid has {}",
            bundle.x_mode,
            params.x_mode()
        )));
    }
    let xf = x as f64;
    let ll = xf.ln().ln();
    let kappa = params.kappa();
    let hf = h as f64;
    let terms = match family {
        Family::HFree => {
            let c = kappa / bundle.zeta_h.value;
            let (c3, c4) = (bundle.c3.value, bundle.c4.value);
            match moment {
                Moment::Count => vec![Term { label: "x", value: c * xf }],
                Moment::M1 => vec![
                    Term { label: "x loglog x", value: c * xf * ll },
                    Term { label: "x", value: c * c3 * xf },
                ],
                Moment::M2 => vec![
                    Term { label: "x (loglog x)^2", value: c * xf * ll * ll },
                    Term { label: "x loglog x", value: c * (2.0 * c3 + 1.0) * xf * ll },
                    Term { label: "x", value: c * c4 * xf },
                ],
            }
        }
        Family::HFull => {
            let g = kappa * bundle.gamma_h.value;
            let y = xf.powf(1.0 / hf);
            let (d3, d4) = (bundle.d3.value, bundle.d4.value);
            match moment {
                Moment::Count => vec![Term { label: "x^(1/h)", value: g * y }],
                Moment::M1 => vec![
                    Term { label: "x^(1/h) loglog x", value: hf * g * y * ll },
                    Term { label: "x^(1/h)", value: d3 * g * y },
                ],
                Moment::M2 => vec![
                    Term { label: "x^(1/h) (loglog x)^2", value: hf * hf * g * y * ll * ll },
                    Term { label: "x^(1/h) loglog x", value: (2.0 * d3 + hf) * hf * g * y * ll },
                    Term { label: "x^(1/h)", value: d4 * g * y },
                ],
            }
        }
    };
    let error_class = match moment {
        Moment::Count => match family {
            Family::HFree => error_exponent_h_free(params.theta(), h)?,
            Family::HFull => error_exponent_h_full(params.theta(), h)?,
        },
        _ => ErrorClass::moment(family, moment, h),
    };
    Ok(Prediction {
        x,
        h,
        family,
        moment,
        main_value: terms.iter().map(|t| t.value).sum(),
        terms,
        error_class,
    })
}

/// An empirical count or moment at a given `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub x: u64,
    pub h: u32,
    pub family: Family,
    pub moment: Moment,
    pub value: u64,
}

impl Observation {
    pub fn from_tally(x: u64, h: u32, family: Family, moment: Moment, tally: &MomentTally) -> Self {
        Self { x, h, family, moment, value: moment.of(tally) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// `empirical - main_value`
    pub residual: f64,
    /// `residual` divided by the error scale at `x`.
    pub normalized: f64,
}

/// Compares an observation with its prediction.
pub fn residual_report(observed: &Observation, pred: &Prediction) -> Result<Residual> {
    if (observed.x, observed.h, observed.family, observed.moment) != (pred.x, pred.h, pred.family, pred.moment) {
        return Err(Error::Mismatch(format!(
            "observation ({}, h={}, {}, {}) does not match prediction ({}, h={}, {}, {})",
            observed.x, observed.h, observed.family, observed.moment, pred.x, pred.h, pred.family, pred.moment
        )));
    }
    let residual = observed.value as f64 - pred.main_value;
    Ok(Residual { residual, normalized: residual / pred.error_class.scale(pred.x as f64) })
}
