//! Euler products and prime-sum constants, truncated at a prime-norm bound
//! `P`, each reported with an estimate of the neglected tail.
//!
//! Tail estimates come in three kinds (see [`TailKind`]). On the integer
//! spectrum they are integral-comparison bounds: the summand is enveloped by
//! `c · n^-β` beyond `P` and `sum_{n > P} n^-β <= P^(1-β)/(β-1)`. Elsewhere
//! the spectrum's prime density is not known explicitly, so the last block
//! of terms below `P` is reported instead.

use std::f64::consts::PI;

use serde::Serialize;
use twofloat::TwoFloat;

use crate::arith::compensated_sum;
use crate::error::{Error, Result};
use crate::monoid::{check_h, NormSpectrum, SpectrumKind, XMode};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// How a [`EulerValue::tail_estimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    /// Bound over all integers beyond the truncation, via an integral.
    IntegralBound,
    /// Magnitude of the last block of terms below the truncation (heuristic).
    BlockHeuristic,
    /// Drift of the partial value over the last block (heuristic).
    Drift,
    /// Nothing neglected.
    Exact,
}

/// A truncated constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EulerValue {
    pub value: f64,
    /// Largest prime norm included.
    pub truncation_norm: u64,
    pub tail_estimate: f64,
    /// Number of prime slots that contributed a term.
    pub term_count: usize,
    pub tail_kind: TailKind,
}

impl EulerValue {
    /// A value with no truncation error, e.g. a user-supplied input.
    pub fn exact(value: f64, truncation_norm: u64) -> Self {
        Self { value, truncation_norm, tail_estimate: 0.0, term_count: 0, tail_kind: TailKind::Exact }
    }
}

/// Runs of equal norms `(norm, multiplicity)` among slots with norm `<= limit`.
fn norm_runs(s: &NormSpectrum, limit: u64) -> Vec<(u64, usize)> {
    let head = &s.norms()[..s.slots_up_to(limit)];
    let mut runs: Vec<(u64, usize)> = Vec::new();
    for &n in head {
        match runs.last_mut() {
            Some((m, c)) if *m == n => *c += 1,
            _ => runs.push((n, 1)),
        }
    }
    runs
}

/// Block below `limit` used for heuristic tails: `(limit/2, limit]` for
/// rational norms, `(limit/q, limit]` for q-power norms.
fn block_start(s: &NormSpectrum, limit: u64) -> u64 {
    match s.params().x_mode() {
        XMode::Rational => limit / 2,
        XMode::QPower(q) => limit / q,
    }
}

/// `sum_{N(p) <= limit} term(N(p))` plus a tail estimate for `|terms|` decaying
/// like `N^-beta`.
struct PrimeSum {
    sum: f64,
    tail: f64,
    term_count: usize,
    tail_kind: TailKind,
}

fn prime_sum(s: &NormSpectrum, limit: u64, beta: f64, term: impl Fn(f64) -> f64) -> Result<PrimeSum> {
    s.ensure_complete(limit)?;
    let runs = norm_runs(s, limit);
    let term_count = runs.iter().map(|&(_, c)| c).sum();
    let sum = compensated_sum(runs.iter().map(|&(n, c)| c as f64 * term(n as f64)));
    let (tail, tail_kind) = if s.kind() == SpectrumKind::Integers {
        (integral_tail(limit, beta, &term), TailKind::IntegralBound)
    } else {
        let from = block_start(s, limit);
        let block = compensated_sum(
            runs.iter().filter(|&&(n, _)| n > from).map(|&(n, c)| c as f64 * term(n as f64).abs()),
        );
        (block, TailKind::BlockHeuristic)
    };
    Ok(PrimeSum { sum, tail, term_count, tail_kind })
}

/// `c · P^(1-β)/(β-1)` where `c` envelopes `|term(n)| n^β` on geometric
/// samples `n = P·2^j`, with a factor 2 margin between samples.
fn integral_tail(limit: u64, beta: f64, term: &impl Fn(f64) -> f64) -> f64 {
    let p = limit.max(2) as f64;
    let envelope = (0..=40)
        .map(|j| {
            let n = p * 2f64.powi(j);
            term(n).abs() * n.powf(beta)
        })
        .fold(0.0f64, f64::max);
    2.0 * envelope * p.powf(1.0 - beta) / (beta - 1.0)
}

fn product_from_logs(sum: PrimeSum, truncation_norm: u64) -> EulerValue {
    let value = sum.sum.exp();
    EulerValue {
        value,
        truncation_norm,
        tail_estimate: value * sum.tail.exp_m1(),
        term_count: sum.term_count,
        tail_kind: sum.tail_kind,
    }
}

/// `zeta_M(s) = prod_p (1 - N(p)^-s)^-1` over `N(p) <= P`.
pub fn zeta_m(s_exp: f64, s: &NormSpectrum, truncation: u64) -> Result<EulerValue> {
    if !(s_exp > 1.0) {
        return Err(Error::Domain(format!("zeta_M(s) diverges for s = {s_exp} <= 1")));
    }
    let logs = prime_sum(s, truncation, s_exp, |n| -(-n.powf(-s_exp)).ln_1p())?;
    Ok(product_from_logs(logs, truncation))
}

fn gamma_factor(n: f64, h: f64) -> f64 {
    let root = n.powf(1.0 / h);
    (n - root) / (n * n * (root - 1.0))
}

/// `gamma_h = prod_p (1 + (N - N^(1/h)) / (N^2 (N^(1/h) - 1)))` over `N(p) <= P`.
pub fn gamma_h(h: u32, s: &NormSpectrum, truncation: u64) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let logs = prime_sum(s, truncation, 1.0 + 1.0 / hf, |n| gamma_factor(n, hf).ln_1p())?;
    Ok(product_from_logs(logs, truncation))
}

/// Generalised Mertens constant.
///
/// On the integer spectrum this is `γ + sum_p (log(1 - 1/p) + 1/p)`, whose
/// terms are `O(p^-2)`. Otherwise it is the partial value
/// `sum_{N(p) <= P} 1/N(p) - log log P`, which converges only like
/// `O(1/log P)`; the tail estimate is then its drift over the last block.
pub fn mertens_a(s: &NormSpectrum, truncation: u64) -> Result<EulerValue> {
    if truncation < 2 {
        return Err(Error::Domain(format!("log log P needs P >= 2, got {truncation}")));
    }
    if s.kind() == SpectrumKind::Integers {
        let sum = prime_sum(s, truncation, 2.0, |n| (-1.0 / n).ln_1p() + 1.0 / n)?;
        return Ok(EulerValue {
            value: EULER_GAMMA + sum.sum,
            truncation_norm: truncation,
            tail_estimate: sum.tail,
            term_count: sum.term_count,
            tail_kind: sum.tail_kind,
        });
    }
    s.ensure_complete(truncation)?;
    let runs = norm_runs(s, truncation);
    let partial = |limit: u64| {
        compensated_sum(runs.iter().filter(|&&(n, _)| n <= limit).map(|&(n, c)| c as f64 / n as f64))
            - (limit as f64).ln().ln()
    };
    let value = partial(truncation);
    let earlier = block_start(s, truncation);
    let tail_estimate = if earlier >= 2 { (value - partial(earlier)).abs() } else { value.abs() };
    Ok(EulerValue {
        value,
        truncation_norm: truncation,
        tail_estimate,
        term_count: runs.iter().map(|&(_, c)| c).sum(),
        tail_kind: TailKind::Drift,
    })
}

/// `-π²/6` for rational norms, `(log log q)² - π²/6` for q-power norms.
pub fn b_const(x_mode: XMode) -> Result<f64> {
    let zeta2 = PI * PI / 6.0;
    match x_mode {
        XMode::Rational => Ok(-zeta2),
        XMode::QPower(q) if q >= 2 => {
            let ll = (q as f64).ln().ln();
            Ok(ll * ll - zeta2)
        }
        XMode::QPower(q) => Err(Error::Domain(format!("q-power mode needs an integer q >= 2, got {q}"))),
    }
}

fn with_base(base: &EulerValue, sum: PrimeSum, truncation: u64) -> EulerValue {
    EulerValue {
        value: base.value + sum.sum,
        truncation_norm: truncation,
        tail_estimate: base.tail_estimate + sum.tail,
        term_count: sum.term_count,
        tail_kind: sum.tail_kind,
    }
}

fn c3_term(n: f64, h: f64) -> f64 {
    let nh = n.powf(h);
    (nh - h * n * n + h * n - 1.0) / (n * (n - 1.0) * (nh - 1.0))
}

fn c3_prime_term(n: f64, h: f64) -> f64 {
    let nh = n.powf(h);
    let num = nh * (3.0 * n - 1.0) + (n - 1.0) * (n - 1.0)
        - n * (h * h * n * n + (-2.0 * h * h + 2.0 * h + 1.0) * n + (h - 1.0) * (h - 1.0));
    num / (n * (n - 1.0) * (n - 1.0) * (nh - 1.0))
}

fn c4_term(n: f64, h: f64) -> f64 {
    let nh = n.powf(h);
    let inner = (nh - h * n + h - 1.0) / ((n - 1.0) * (nh - 1.0));
    inner * inner
}

fn d3_term(n: f64, h: f64) -> f64 {
    let root = n.powf(1.0 / h);
    let co = n.powf(1.0 - 1.0 / h);
    (h * (n - co - root + 1.0) + n) / (n * (root - 1.0) * (n - co + 1.0))
}

fn d3_prime_term(n: f64, h: f64) -> f64 {
    let t = n.powf(1.0 / h);
    let num = (2.0 * h * h + 2.0 * h - 1.0) * n.powf((1.0 + h) / h)
        - (1.0 + h) * (1.0 + h) * n.powf((2.0 + h) / h)
        - h * h * (n - t + 2.0 * t * t - t * t * t);
    let den = n * (-n.powf((1.0 + h) / h) - t + n) * (t - 1.0) * (t - 1.0);
    num / den
}

fn d4_term(n: f64, h: f64) -> f64 {
    let t = n.powf(1.0 / h);
    let inner = (h * (t - 1.0) + 1.0) / ((t - 1.0) * (n - n.powf(1.0 - 1.0 / h) + 1.0));
    inner * inner
}

/// `C3 = A + sum_p (N^h - hN^2 + hN - 1) / (N(N-1)(N^h-1))`.
pub fn c3(h: u32, s: &NormSpectrum, truncation: u64, a: &EulerValue) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let sum = prime_sum(s, truncation, 2.0, |n| c3_term(n, hf))?;
    Ok(with_base(a, sum, truncation))
}

/// `C3' = A + sum_p [N^h(3N-1) + (N-1)^2 - N(h^2N^2 + (-2h^2+2h+1)N + (h-1)^2)] / (N(N-1)^2(N^h-1))`.
pub fn c3_prime(h: u32, s: &NormSpectrum, truncation: u64, a: &EulerValue) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let sum = prime_sum(s, truncation, 2.0, |n| c3_prime_term(n, hf))?;
    Ok(with_base(a, sum, truncation))
}

/// The squared prime sum subtracted in `C4`.
pub fn c4_correction(h: u32, s: &NormSpectrum, truncation: u64) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let sum = prime_sum(s, truncation, 2.0, |n| c4_term(n, hf))?;
    Ok(with_base(&EulerValue::exact(0.0, truncation), sum, truncation))
}

fn check_components(truncation: u64, parts: &[&EulerValue]) -> Result<()> {
    match parts.iter().find(|p| p.truncation_norm != truncation) {
        Some(p) => Err(Error::Mismatch(format!(
            "component truncated at {} but {} was requested",
            p.truncation_norm, truncation
        ))),
        None => Ok(()),
    }
}

/// `C4 = C3^2 + C3' + B - sum_p ((N^h - hN + h - 1)/((N-1)(N^h-1)))^2`.
pub fn c4(
    h: u32,
    c3: &EulerValue,
    c3p: &EulerValue,
    b: f64,
    s: &NormSpectrum,
    truncation: u64,
) -> Result<EulerValue> {
    check_components(truncation, &[c3, c3p])?;
    let corr = c4_correction(h, s, truncation)?;
    Ok(compose(c3, c3p, 1.0, b, &corr))
}

/// `square(first) + second + b_weight * b - corr`.
fn compose(first: &EulerValue, second: &EulerValue, b_weight: f64, b: f64, corr: &EulerValue) -> EulerValue {
    EulerValue {
        value: first.value * first.value + second.value + b_weight * b - corr.value,
        truncation_norm: corr.truncation_norm,
        tail_estimate: 2.0 * first.value.abs() * first.tail_estimate
            + first.tail_estimate * first.tail_estimate
            + second.tail_estimate
            + corr.tail_estimate,
        term_count: corr.term_count,
        tail_kind: corr.tail_kind,
    }
}

/// `D3 = h(A - log h) + sum_p (h(N - N^(1-1/h) - N^(1/h) + 1) + N) / (N(N^(1/h)-1)(N - N^(1-1/h) + 1))`.
pub fn d3(h: u32, s: &NormSpectrum, truncation: u64, a: &EulerValue) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let base = EulerValue { value: hf * (a.value - hf.ln()), tail_estimate: hf * a.tail_estimate, ..*a };
    let sum = prime_sum(s, truncation, 1.0 + 1.0 / hf, |n| d3_term(n, hf))?;
    Ok(with_base(&base, sum, truncation))
}

/// `D3' = h^2(A - log h) + sum_p [...]`, the k²-weighted analogue of `D3`.
pub fn d3_prime(h: u32, s: &NormSpectrum, truncation: u64, a: &EulerValue) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let base = EulerValue {
        value: hf * hf * (a.value - hf.ln()),
        tail_estimate: hf * hf * a.tail_estimate,
        ..*a
    };
    let sum = prime_sum(s, truncation, 1.0 + 1.0 / hf, |n| d3_prime_term(n, hf))?;
    Ok(with_base(&base, sum, truncation))
}

/// The squared prime sum subtracted in `D4`.
pub fn d4_correction(h: u32, s: &NormSpectrum, truncation: u64) -> Result<EulerValue> {
    check_h(h)?;
    let hf = h as f64;
    let sum = prime_sum(s, truncation, 2.0, |n| d4_term(n, hf))?;
    Ok(with_base(&EulerValue::exact(0.0, truncation), sum, truncation))
}

/// `D4 = D3^2 + D3' + h^2 B - sum_p ((h(N^(1/h)-1)+1)/((N^(1/h)-1)(N - N^(1-1/h) + 1)))^2`.
pub fn d4(
    h: u32,
    d3: &EulerValue,
    d3p: &EulerValue,
    b: f64,
    s: &NormSpectrum,
    truncation: u64,
) -> Result<EulerValue> {
    check_components(truncation, &[d3, d3p])?;
    let corr = d4_correction(h, s, truncation)?;
    Ok(compose(d3, d3p, (h * h) as f64, b, &corr))
}

fn check_ratio(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("ratio must lie in (0, 1), got {a}")))
    }
}

/// Closed form of `sum_{k=h}^{r} k a^k`; zero when `r < h`.
///
/// `h a^h/(1-a) + a^(h+1)/(1-a)^2 + a^(r+1)(ar - r - 1)/(1-a)^2`, evaluated in
/// double-double arithmetic since its terms cancel heavily as `a -> 1`.
pub fn geom_sum_k(a: f64, h: u32, r: u32) -> Result<f64> {
    check_ratio(a)?;
    if r < h {
        return Ok(0.0);
    }
    let a = TwoFloat::from(a);
    let (hf, rf) = (TwoFloat::from(h), TwoFloat::from(r));
    let u = TwoFloat::from(1.0) - a;
    let u2 = u * u;
    let value = hf * a.powi(h as i32) / u + a.powi(h as i32 + 1) / u2
        + a.powi(r as i32 + 1) * (a * rf - rf - 1.0) / u2;
    Ok(value.into())
}

/// Closed form of `sum_{k=h}^{r} k^2 a^k`; zero when `r < h`.
///
/// `[h^2 a^h + (-2h^2+2h+1) a^(h+1) + (h-1)^2 a^(h+2)]/(1-a)^3
///  + a^(r+1)(a^2 r^2 + (-2r^2-2r+1)a + (r+1)^2)/(a-1)^3`, in double-double.
pub fn geom_sum_k2(a: f64, h: u32, r: u32) -> Result<f64> {
    check_ratio(a)?;
    if r < h {
        return Ok(0.0);
    }
    let a = TwoFloat::from(a);
    let (hf, rf) = (TwoFloat::from(h), TwoFloat::from(r));
    let one = TwoFloat::from(1.0);
    let u = one - a;
    let cube = u * u * u;
    let head = (hf * hf * a.powi(h as i32)
        + (hf * hf * -2.0 + hf * 2.0 + 1.0) * a.powi(h as i32 + 1)
        + (hf - 1.0) * (hf - 1.0) * a.powi(h as i32 + 2))
        / cube;
    let rest = a.powi(r as i32 + 1)
        * (a * a * rf * rf + (rf * rf * -2.0 - rf * 2.0 + 1.0) * a + (rf + 1.0) * (rf + 1.0))
        / -cube;
    Ok((head + rest).into())
}

/// Every constant the moment predictions need, for one `h` and one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsBundle {
    pub h: u32,
    pub x_mode: XMode,
    pub truncation_norm: u64,
    pub a: EulerValue,
    pub b: f64,
    pub zeta_h: EulerValue,
    pub gamma_h: EulerValue,
    pub c3: EulerValue,
    pub c3_prime: EulerValue,
    pub c4: EulerValue,
    /// Squared prime sum subtracted inside `c4`.
    pub c4_correction: EulerValue,
    pub d3: EulerValue,
    pub d3_prime: EulerValue,
    pub d4: EulerValue,
    /// Squared prime sum subtracted inside `d4`.
    pub d4_correction: EulerValue,
}

/// One line of the serialised bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEntry {
    pub name: &'static str,
    pub value: f64,
    pub truncation_norm: Option<u64>,
    pub tail_estimate: f64,
}

impl ConstantsBundle {
    pub fn compute(s: &NormSpectrum, h: u32, truncation: u64) -> Result<Self> {
        check_h(h)?;
        let x_mode = s.params().x_mode();
        let a = mertens_a(s, truncation)?;
        let b = b_const(x_mode)?;
        let c3v = c3(h, s, truncation, &a)?;
        let c3p = c3_prime(h, s, truncation, &a)?;
        let c4_corr = c4_correction(h, s, truncation)?;
        let d3v = d3(h, s, truncation, &a)?;
        let d3p = d3_prime(h, s, truncation, &a)?;
        let d4_corr = d4_correction(h, s, truncation)?;
        Ok(Self {
            h,
            x_mode,
            truncation_norm: truncation,
            zeta_h: zeta_m(h as f64, s, truncation)?,
            gamma_h: gamma_h(h, s, truncation)?,
            c4: compose(&c3v, &c3p, 1.0, b, &c4_corr),
            d4: compose(&d3v, &d3p, (h * h) as f64, b, &d4_corr),
            a,
            b,
            c3: c3v,
            c3_prime: c3p,
            c4_correction: c4_corr,
            d3: d3v,
            d3_prime: d3p,
            d4_correction: d4_corr,
        })
    }

    /// `C4 - (C3^2 + C3' + B - correction)`.
    pub fn c4_recomposition_error(&self) -> f64 {
        let rebuilt = self.c3.value * self.c3.value + self.c3_prime.value + self.b - self.c4_correction.value;
        (self.c4.value - rebuilt).abs()
    }

    /// `D4 - (D3^2 + D3' + h^2 B - correction)`.
    pub fn d4_recomposition_error(&self) -> f64 {
        let h2 = (self.h * self.h) as f64;
        let rebuilt =
            self.d3.value * self.d3.value + self.d3_prime.value + h2 * self.b - self.d4_correction.value;
        (self.d4.value - rebuilt).abs()
    }

    /// The ten constants in a fixed order.
    pub fn entries(&self) -> Vec<ConstantEntry> {
        let e = |name, v: &EulerValue| ConstantEntry {
            name,
            value: v.value,
            truncation_norm: Some(v.truncation_norm),
            tail_estimate: v.tail_estimate,
        };
        vec![
            e("A", &self.a),
            ConstantEntry { name: "B", value: self.b, truncation_norm: None, tail_estimate: 0.0 },
            e("zeta_h", &self.zeta_h),
            e("gamma_h", &self.gamma_h),
            e("C3", &self.c3),
            e("C3p", &self.c3_prime),
            e("C4", &self.c4),
            e("D3", &self.d3),
            e("D3p", &self.d3_prime),
            e("D4", &self.d4),
        ]
    }

    /// `{"h", "x_mode", "constants": [{name, value, truncation_norm, tail_estimate}, ...]}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc {
            h: u32,
            x_mode: XMode,
            truncation_norm: u64,
            constants: Vec<ConstantEntry>,
        }
        let doc = Doc {
            h: self.h,
            x_mode: self.x_mode,
            truncation_norm: self.truncation_norm,
            constants: self.entries(),
        };
        serde_json::to_string_pretty(&doc).expect("bundle serialises")
    }
}
