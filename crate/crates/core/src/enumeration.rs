//! Exact enumeration over h-free and h-full elements.
//!
//! Every routine here walks the monoid depth-first over prime slots in
//! increasing order, choosing an exponent for each slot and pruning as soon as
//! the partial norm exceeds the cut-off. Subtrees that can only be a single
//! element (a slot whose next admissible power already overflows the
//! remaining budget) are counted in bulk with a binary search, which is what
//! keeps the dense h-free walks at desk scale.
//!
//! Two independent routes compute the Ω-moments: [`tally_selected`] visits
//! elements directly, while [`decomposition_moment`] splits each element as
//! `k·p + y` with `p` not dividing `y` and only ever counts restricted sets.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{compensated_sum, int_root};
use crate::error::{Error, Result};
use crate::monoid::{check_h, NormSpectrum, SpectrumKind, XMode};

/// Below this cut-off the top level of a walk is not split across threads.
const PARALLEL_CUTOFF: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    HFree,
    HFull,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::HFree => "h-free",
            Family::HFull => "h-full",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "h-free" | "free" => Ok(Family::HFree),
            "h-full" | "full" => Ok(Family::HFull),
            other => Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// Which elements to count: a family, its `h`, and prime slots that must not
/// divide the element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSelector {
    family: Family,
    h: u32,
    excluded: Vec<usize>,
}

impl SetSelector {
    pub fn new(family: Family, h: u32, excluded: impl IntoIterator<Item = usize>) -> Result<Self> {
        check_h(h)?;
        let mut excluded: Vec<usize> = excluded.into_iter().collect();
        excluded.sort_unstable();
        excluded.dedup();
        Ok(Self { family, h, excluded })
    }

    pub fn h_free(h: u32) -> Result<Self> {
        Self::new(Family::HFree, h, [])
    }

    pub fn h_full(h: u32) -> Result<Self> {
        Self::new(Family::HFull, h, [])
    }

    /// The same selector with additional excluded slots.
    pub fn excluding(&self, ids: impl IntoIterator<Item = usize>) -> Self {
        let mut excluded = self.excluded.clone();
        excluded.extend(ids);
        excluded.sort_unstable();
        excluded.dedup();
        Self { excluded, ..*self }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }
}

/// Count, ΣΩ, ΣΩ² and the Ω histogram of a set of elements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MomentTally {
    count: u64,
    sum_omega: u64,
    sum_omega_sq: u64,
    histogram: Vec<u64>,
}

impl MomentTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, omega: u64) {
        self.record_many(omega, 1);
    }

    pub fn record_many(&mut self, omega: u64, n: u64) {
        if n == 0 {
            return;
        }
        self.count += n;
        self.sum_omega += omega * n;
        self.sum_omega_sq += omega * omega * n;
        let slot = omega as usize;
        if self.histogram.len() <= slot {
            self.histogram.resize(slot + 1, 0);
        }
        self.histogram[slot] += n;
    }

    /// Adds another tally into this one. Associative and commutative.
    pub fn merge(&mut self, other: &MomentTally) {
        self.count += other.count;
        self.sum_omega += other.sum_omega;
        self.sum_omega_sq += other.sum_omega_sq;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
    }

    pub fn merged(mut self, other: &MomentTally) -> Self {
        self.merge(other);
        self
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum_omega(&self) -> u64 {
        self.sum_omega
    }

    pub fn sum_omega_sq(&self) -> u64 {
        self.sum_omega_sq
    }

    /// Histogram indexed by Ω; trailing entries may be absent.
    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    /// Non-zero histogram entries as an ordered map.
    pub fn histogram_map(&self) -> BTreeMap<u64, u64> {
        self.histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| (k as u64, c))
            .collect()
    }

    /// Checks the histogram against the running sums.
    pub fn is_consistent(&self) -> bool {
        let (mut n, mut s1, mut s2) = (0u64, 0u64, 0u64);
        for (k, &c) in self.histogram.iter().enumerate() {
            let k = k as u64;
            n += c;
            s1 += k * c;
            s2 += k * k * c;
        }
        n == self.count
            && s1 == self.sum_omega
            && s2 == self.sum_omega_sq
            && (self.count as u128) * (self.sum_omega_sq as u128)
                >= (self.sum_omega as u128) * (self.sum_omega as u128)
    }

    /// Fault injection for harness self-tests.
    #[doc(hidden)]
    pub fn corrupt_sum_omega(&mut self, delta: u64) {
        self.sum_omega += delta;
    }
}

/// Depth-first walk over the selected family.
struct Walk<'a> {
    norms: &'a [u64],
    family: Family,
    h: u32,
    excluded: &'a [usize],
}

impl<'a> Walk<'a> {
    fn new(norms: &'a [u64], sel: &'a SetSelector) -> Self {
        Self { norms, family: sel.family, h: sel.h, excluded: &sel.excluded }
    }

    fn with_excluded(norms: &'a [u64], family: Family, h: u32, excluded: &'a [usize]) -> Self {
        Self { norms, family, h, excluded }
    }

    fn is_excluded(&self, j: usize) -> bool {
        self.excluded.binary_search(&j).is_ok()
    }

    fn excluded_between(&self, lo: usize, hi: usize) -> u64 {
        let a = self.excluded.partition_point(|&e| e < lo);
        let b = self.excluded.partition_point(|&e| e < hi);
        (b - a) as u64
    }

    /// Smallest exponent a slot may carry.
    fn first_exponent(&self) -> u32 {
        match self.family {
            Family::HFree => 1,
            Family::HFull => self.h,
        }
    }

    /// Whether exponent `e` (>= first) is admissible.
    fn admits(&self, e: u32) -> bool {
        match self.family {
            Family::HFree => e < self.h,
            Family::HFull => true,
        }
    }

    /// Slots in `[start, end)` have `p^first <= limit`; of those, `[start,
    /// deep)` can take a larger exponent or a further slot, while `[deep,
    /// end)` only ever form a single element `p^first`.
    fn split(&self, start: usize, limit: u64) -> (usize, usize) {
        let tail = &self.norms[start..];
        let first = self.first_exponent();
        let fits = |n: u64, k: u32| n.checked_pow(k).is_some_and(|v| v <= limit);
        let end = start + tail.partition_point(|&n| fits(n, first));
        // a further slot q >= p needs p^first * q^first <= limit
        // a larger exponent needs p^(first+1) <= limit
        let deep_exp = match self.family {
            Family::HFree => 2,
            Family::HFull => self.h + 1,
        };
        let deep = start + self.norms[start..end].partition_point(|&n| fits(n, deep_exp));
        (deep, end)
    }

    /// Elements (identity included) using only slots `>= start`, norm `<= limit`.
    fn count(&self, start: usize, limit: u64) -> u64 {
        let (deep, end) = self.split(start, limit);
        let mut total = 1 + (end - deep) as u64 - self.excluded_between(deep, end);
        for j in start..deep {
            if self.is_excluded(j) {
                continue;
            }
            total += self.each_power(j, limit, |rest, _| self.count(j + 1, rest)).0;
        }
        total
    }

    /// Runs `f(limit / p^e, e)` for each admissible exponent of slot `j` and
    /// sums the results.
    fn each_power<F: FnMut(u64, u32) -> u64>(&self, j: usize, limit: u64, mut f: F) -> (u64, u32) {
        let p = self.norms[j];
        let mut e = self.first_exponent();
        let Some(mut pk) = p.checked_pow(e) else { return (0, 0) };
        let mut total = 0;
        let mut visited = 0;
        while pk <= limit && self.admits(e) {
            total += f(limit / pk, e);
            visited += 1;
            match pk.checked_mul(p) {
                Some(next) => pk = next,
                None => break,
            }
            e += 1;
        }
        (total, visited)
    }

    fn tally(&self, start: usize, limit: u64, omega: u64, out: &mut MomentTally) {
        out.record(omega);
        let (deep, end) = self.split(start, limit);
        let leaves = (end - deep) as u64 - self.excluded_between(deep, end);
        out.record_many(omega + self.first_exponent() as u64, leaves);
        for j in start..deep {
            if !self.is_excluded(j) {
                self.tally_slot(j, limit, omega, out);
            }
        }
    }

    fn tally_slot(&self, j: usize, limit: u64, omega: u64, out: &mut MomentTally) {
        self.each_power(j, limit, |rest, e| {
            self.tally(j + 1, rest, omega + e as u64, out);
            0
        });
    }

    /// Tally of the whole tree, with the top level split across threads.
    fn tally_root(&self, limit: u64) -> MomentTally {
        if limit < PARALLEL_CUTOFF {
            let mut out = MomentTally::new();
            self.tally(0, limit, 0, &mut out);
            return out;
        }
        let (deep, end) = self.split(0, limit);
        let mut root = MomentTally::new();
        root.record(0);
        root.record_many(self.first_exponent() as u64, (end - deep) as u64 - self.excluded_between(deep, end));
        (0..deep)
            .into_par_iter()
            .filter(|&j| !self.is_excluded(j))
            .fold(MomentTally::new, |mut acc, j| {
                self.tally_slot(j, limit, 0, &mut acc);
                acc
            })
            .reduce(MomentTally::new, |a, b| a.merged(&b))
            .merged(&root)
    }

    fn count_root(&self, limit: u64) -> u64 {
        if limit < PARALLEL_CUTOFF {
            return self.count(0, limit);
        }
        let (deep, end) = self.split(0, limit);
        let leaves = 1 + (end - deep) as u64 - self.excluded_between(deep, end);
        leaves
            + (0..deep)
                .into_par_iter()
                .filter(|&j| !self.is_excluded(j))
                .map(|j| self.each_power(j, limit, |rest, _| self.count(j + 1, rest)).0)
                .sum::<u64>()
    }

    /// Calls `f(norm, omega)` for every element, identity first.
    fn visit<F: FnMut(u64, u64)>(&self, start: usize, limit: u64, norm: u64, omega: u64, f: &mut F) {
        f(norm, omega);
        let first = self.first_exponent();
        for j in start..self.norms.len() {
            let p = self.norms[j];
            match p.checked_pow(first) {
                Some(v) if v <= limit => {}
                _ => break,
            }
            if self.is_excluded(j) {
                continue;
            }
            let mut e = first;
            let mut pk = p.pow(first);
            while pk <= limit && self.admits(e) {
                self.visit(j + 1, limit / pk, norm * pk, omega + e as u64, f);
                match pk.checked_mul(p) {
                    Some(next) => pk = next,
                    None => break,
                }
                e += 1;
            }
        }
    }
}

/// Largest norm that can occur in a selected element of norm `<= x`.
fn required_bound(x: u64, family: Family, h: u32) -> u64 {
    match family {
        Family::HFree => x,
        Family::HFull => int_root(x, h),
    }
}

fn check_x(x: u64) -> Result<()> {
    if x < 1 {
        Err(Error::InvalidParameter("x must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_selector(s: &NormSpectrum, x: u64, sel: &SetSelector) -> Result<()> {
    check_x(x)?;
    if let Some(&bad) = sel.excluded.iter().find(|&&id| id >= s.len()) {
        return Err(Error::InvalidParameter(format!("excluded slot {bad} is not in the spectrum")));
    }
    s.ensure_complete(required_bound(x, sel.family, sel.h))
}

/// All elements of norm `<= x`, identity included.
pub fn count_all(s: &NormSpectrum, x: u64) -> Result<u64> {
    check_x(x)?;
    s.ensure_complete(x)?;
    if s.kind() == SpectrumKind::Integers {
        return Ok(x);
    }
    let all = SetSelector::new(Family::HFree, u32::MAX, [])?;
    Ok(Walk::new(s.norms(), &all).count_root(x))
}

/// Elements of the selected family with norm `<= x`, identity included.
pub fn count_selected(s: &NormSpectrum, x: u64, sel: &SetSelector) -> Result<u64> {
    check_selector(s, x, sel)?;
    Ok(Walk::new(s.norms(), sel).count_root(x))
}

/// Count, ΣΩ, ΣΩ² and Ω histogram over the selected family up to `x`.
pub fn tally_selected(s: &NormSpectrum, x: u64, sel: &SetSelector) -> Result<MomentTally> {
    check_selector(s, x, sel)?;
    Ok(Walk::new(s.norms(), sel).tally_root(x))
}

/// Tally restricted to elements whose norm lies in `range`.
pub fn tally_norm_range(
    s: &NormSpectrum,
    range: RangeInclusive<u64>,
    sel: &SetSelector,
) -> Result<MomentTally> {
    let (lo, hi) = (*range.start(), *range.end());
    let mut out = MomentTally::new();
    if hi < lo || hi == 0 {
        return Ok(out);
    }
    check_selector(s, hi, sel)?;
    Walk::new(s.norms(), sel).visit(0, hi, 1, 0, &mut |norm, omega| {
        if norm >= lo {
            out.record(omega);
        }
    });
    Ok(out)
}

/// First (`order = 1`) or second (`order = 2`) Ω-moment of the selected
/// family, computed through the prime decomposition `m = k·p + y`:
///
/// * order 1: `sum_p sum_k k · #{y selected, N(y) <= x / N(p)^k, p ∤ y}`
/// * order 2: the same with `k^2`, plus `sum_{p != q} sum_{k,l} k·l ·
///   #{y selected, N(y) <= x / (N(p)^k N(q)^l), p, q ∤ y}`
///
/// The exponent ranges are `1..=min(h-1, K_p)` (h-free) and `h..=K_p`
/// (h-full) with `K_p` the largest `k` having `N(p)^k <= x`, found by exact
/// integer multiplication.
pub fn decomposition_moment(s: &NormSpectrum, x: u64, sel: &SetSelector, order: u32) -> Result<u64> {
    if order != 1 && order != 2 {
        return Err(Error::InvalidParameter(format!("moment order must be 1 or 2, got {order}")));
    }
    check_selector(s, x, sel)?;
    let norms = s.norms();
    let base = Walk::new(norms, sel);
    let (_, top) = base.split(0, x);

    let restricted_count = |limit: u64, extra: &[usize]| -> u64 {
        let mut excluded = sel.excluded.clone();
        excluded.extend_from_slice(extra);
        excluded.sort_unstable();
        Walk::with_excluded(norms, sel.family, sel.h, &excluded).count(0, limit)
    };

    let per_prime = |i: usize| -> u64 {
        if base.is_excluded(i) {
            return 0;
        }
        let weight = |k: u32| if order == 1 { k as u64 } else { (k as u64) * (k as u64) };
        let diagonal = base.each_power(i, x, |rest, k| weight(k) * restricted_count(rest, &[i])).0;
        if order == 1 {
            return diagonal;
        }
        let cross = base
            .each_power(i, x, |rest_p, k| {
                let (_, q_end) = base.split(i + 1, rest_p);
                (i + 1..q_end)
                    .filter(|&j| !base.is_excluded(j))
                    .map(|j| {
                        base.each_power(j, rest_p, |rest_pq, l| {
                            (k as u64) * (l as u64) * restricted_count(rest_pq, &[i, j])
                        })
                        .0
                    })
                    .sum()
            })
            .0;
        diagonal + 2 * cross
    };

    Ok(if x < PARALLEL_CUTOFF {
        (0..top).map(per_prime).sum()
    } else {
        (0..top).into_par_iter().map(per_prime).sum()
    })
}

/// Result of a normal-order scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExceptionCount {
    /// Eligible elements violating the inequality.
    pub exceptions: u64,
    /// Selected elements with norm above the cut-off.
    pub eligible: u64,
}

impl ExceptionCount {
    pub fn fraction(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.exceptions as f64 / self.eligible as f64
        }
    }
}

/// Elements of norm `<= NORMAL_ORDER_CUTOFF` are never eligible (`e^e < 16`).
pub const NORMAL_ORDER_CUTOFF: u64 = 16;

/// Counts selected elements with `16 < N(m) <= x` whose Ω falls outside
/// `[(1-ε)F, (1+ε)F]`, where `F = log log N(m)` for h-free and
/// `h · log log N(m)` for h-full.
pub fn normal_order_exceptions(
    s: &NormSpectrum,
    x: u64,
    sel: &SetSelector,
    epsilon: f64,
) -> Result<ExceptionCount> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    check_selector(s, x, sel)?;
    let scale = match sel.family {
        Family::HFree => 1.0,
        Family::HFull => sel.h as f64,
    };
    let mut result = ExceptionCount { exceptions: 0, eligible: 0 };
    Walk::new(s.norms(), sel).visit(0, x, 1, 0, &mut |norm, omega| {
        if norm <= NORMAL_ORDER_CUTOFF {
            return;
        }
        result.eligible += 1;
        let target = scale * (norm as f64).ln().ln();
        let omega = omega as f64;
        if omega < (1.0 - epsilon) * target || omega > (1.0 + epsilon) * target {
            result.exceptions += 1;
        }
    });
    Ok(result)
}

/// Number of prime slots with norm `<= x`.
pub fn prime_count(s: &NormSpectrum, x: u64) -> Result<u64> {
    s.ensure_complete(x)?;
    Ok(s.slots_up_to(x) as u64)
}

/// Empirical prime sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimeSumKind {
    /// `sum_{N(p) <= x} 1/N(p)`
    Mertens,
    /// `sum_{N(p) <= x} N(p)^-alpha`
    RecipPower(f64),
    /// `sum_{N(p) <= x/c} 1 / (N(p) log(x/N(p)))`
    LogWeighted,
    /// `sum_{N(p) <= x/c} log log(x/N(p)) / N(p)`
    LoglogWeighted,
    /// `sum_{N(p)N(q) <= x} 1/(N(p)N(q))` over ordered pairs
    DoubleRecip,
    /// `sum_{N(p) <= x/c} 1 / (N(p) log^2(x/N(p)))`
    LogSqWeighted,
}

/// Evaluates a prime sum exactly as a partial sum. For the log-weighted
/// kinds `c` is 2 in rational mode and `q` in q-power mode.
pub fn prime_sum_empirical(s: &NormSpectrum, x: u64, kind: PrimeSumKind) -> Result<f64> {
    check_x(x)?;
    let divisor = match s.params().x_mode() {
        XMode::Rational => 2,
        XMode::QPower(q) => q,
    };
    let cutoff = x / divisor;
    let needed = match kind {
        PrimeSumKind::Mertens | PrimeSumKind::RecipPower(_) => x,
        _ => cutoff,
    };
    s.ensure_complete(needed)?;
    let xf = x as f64;
    let head = |limit: u64| &s.norms()[..s.slots_up_to(limit)];
    let value = match kind {
        PrimeSumKind::Mertens => compensated_sum(head(x).iter().map(|&n| 1.0 / n as f64)),
        PrimeSumKind::RecipPower(alpha) => {
            compensated_sum(head(x).iter().map(|&n| (n as f64).powf(-alpha)))
        }
        PrimeSumKind::LogWeighted => compensated_sum(
            head(cutoff).iter().map(|&n| 1.0 / (n as f64 * (xf / n as f64).ln())),
        ),
        PrimeSumKind::LoglogWeighted => compensated_sum(
            head(cutoff).iter().map(|&n| (xf / n as f64).ln().ln() / n as f64),
        ),
        PrimeSumKind::LogSqWeighted => compensated_sum(head(cutoff).iter().map(|&n| {
            let l = (xf / n as f64).ln();
            1.0 / (n as f64 * l * l)
        })),
        PrimeSumKind::DoubleRecip => {
            let ps = head(x);
            let mut prefix = Vec::with_capacity(ps.len() + 1);
            prefix.push(0.0f64);
            let mut running = 0.0;
            for &n in ps {
                running += 1.0 / n as f64;
                prefix.push(running);
            }
            compensated_sum(ps.iter().map(|&n| {
                let partners = s.slots_up_to(x / n).min(ps.len());
                prefix[partners] / n as f64
            }))
        }
    };
    Ok(value)
}
