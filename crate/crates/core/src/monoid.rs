//! Norm spectra, elements, and the arithmetic functions Ω and ω.
//!
//! A free abelian monoid is determined, for every counting question asked in
//! this crate, by the multiset of norms of its prime elements. A
//! [`NormSpectrum`] stores that multiset as a sorted list of prime slots,
//! complete up to a declared norm bound, together with the monoid's
//! [`MonoidParams`] (the density `kappa`, the error exponent `theta` and the
//! value set of the norm).

use std::fmt;
use std::path::Path;

use serde::{Serialize, Serializer};

use crate::arith::{as_prime_power, divisors, mobius, primes_up_to};
use crate::error::{Error, Result};

/// The set in which norms (and the cut-off `x`) are allowed to live.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XMode {
    /// All positive rationals.
    Rational,
    /// Integral powers of `q`.
    QPower(u64),
}

impl fmt::Display for XMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XMode::Rational => f.write_str("rational"),
            XMode::QPower(q) => write!(f, "q-power({q})"),
        }
    }
}

impl Serialize for XMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Density data of the monoid: `M(x) = kappa * x + O(x^theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonoidParams {
    kappa: f64,
    theta: f64,
    x_mode: XMode,
}

impl MonoidParams {
    pub fn new(kappa: f64, theta: f64, x_mode: XMode) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("theta must lie in [0, 1), got {theta}")));
        }
        if let XMode::QPower(q) = x_mode {
            if q < 2 {
                return Err(Error::InvalidParameter(format!("q-power mode needs q >= 2, got {q}")));
            }
        }
        Ok(Self { kappa, theta, x_mode })
    }

    /// The natural numbers: `kappa = 1`, `theta = 0`, rational norms.
    pub fn integers() -> Self {
        Self { kappa: 1.0, theta: 0.0, x_mode: XMode::Rational }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn x_mode(&self) -> XMode {
        self.x_mode
    }
}

/// Where a spectrum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpectrumKind {
    Integers,
    MonicPolynomials { q: u64 },
    Synthetic,
}

/// One prime element: a dense id and its norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PrimeSlot {
    pub id: usize,
    pub norm: u64,
}

/// Prime slots sorted by `(norm, id)`, complete up to `norm_bound`.
///
/// Slot ids are the positions in the sorted order, so ids run consecutively
/// from 0 and every id's norm is `norms()[id]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpectrum {
    norms: Vec<u64>,
    norm_bound: u64,
    kind: SpectrumKind,
    params: MonoidParams,
}

impl NormSpectrum {
    pub fn norms(&self) -> &[u64] {
        &self.norms
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn norm_bound(&self) -> u64 {
        self.norm_bound
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn params(&self) -> &MonoidParams {
        &self.params
    }

    pub fn slot(&self, id: usize) -> Option<PrimeSlot> {
        self.norms.get(id).map(|&norm| PrimeSlot { id, norm })
    }

    pub fn slots(&self) -> impl Iterator<Item = PrimeSlot> + '_ {
        self.norms.iter().enumerate().map(|(id, &norm)| PrimeSlot { id, norm })
    }

    /// Number of slots with norm `<= x`.
    pub fn slots_up_to(&self, x: u64) -> usize {
        self.norms.partition_point(|&n| n <= x)
    }

    /// Fails unless every prime of norm `<= needed` is present.
    pub fn ensure_complete(&self, needed: u64) -> Result<()> {
        if needed > self.norm_bound {
            Err(Error::InsufficientSpectrum { bound: self.norm_bound, needed })
        } else {
            Ok(())
        }
    }
}

/// Rational primes up to `norm_bound`, with `kappa = 1`, `theta = 0`.
pub fn build_integer_spectrum(norm_bound: u64) -> Result<NormSpectrum> {
    if norm_bound < 2 {
        return Err(Error::EmptySpectrum(format!(
            "integer spectrum needs a bound of at least 2, got {norm_bound}"
        )));
    }
    Ok(NormSpectrum {
        norms: primes_up_to(norm_bound),
        norm_bound,
        kind: SpectrumKind::Integers,
        params: MonoidParams::integers(),
    })
}

/// Number of monic irreducible polynomials of degree `d` over a field with
/// `q` elements: `(1/d) * sum_{e | d} mu(e) q^(d/e)`.
///
/// Returns `None` if `q^d` does not fit in `u64`.
pub fn irreducible_count(q: u64, d: u32) -> Option<u64> {
    assert!(d >= 1);
    q.checked_pow(d)?;
    let total: i128 = divisors(d as u64)
        .into_iter()
        .map(|e| mobius(e) as i128 * (q as i128).pow(d / e as u32))
        .sum();
    Some((total / d as i128) as u64)
}

/// Monic polynomials over `F_q` up to degree `max_degree`: `pi_q(d)` slots of
/// norm `q^d` for each `d`, with `kappa = q/(q-1)`, `theta = 0`.
pub fn build_polynomial_spectrum(q: u64, max_degree: u32) -> Result<NormSpectrum> {
    if as_prime_power(q).is_none() {
        return Err(Error::InvalidParameter(format!("q = {q} is not a prime power")));
    }
    if max_degree < 1 {
        return Err(Error::InvalidParameter("max_degree must be at least 1".into()));
    }
    let norm_bound = q.checked_pow(max_degree).ok_or_else(|| {
        Error::InvalidParameter(format!("{q}^{max_degree} does not fit in 64 bits"))
    })?;
    let mut norms = Vec::new();
    for d in 1..=max_degree {
        let count = irreducible_count(q, d).expect("q^d checked above");
        let norm = q.pow(d);
        norms.extend(std::iter::repeat_n(norm, count as usize));
    }
    let params = MonoidParams::new(q as f64 / (q as f64 - 1.0), 0.0, XMode::QPower(q))?;
    Ok(NormSpectrum {
        norms,
        norm_bound,
        kind: SpectrumKind::MonicPolynomials { q },
        params,
    })
}

/// Spectrum with `count` prime slots of each listed `norm`.
///
/// A synthetic spectrum is taken to describe the whole monoid, so it is
/// complete at every norm.
pub fn load_synthetic_spectrum(records: &[(u64, u64)], params: MonoidParams) -> Result<NormSpectrum> {
    let mut norms = Vec::new();
    let mut previous = None;
    for (i, &(norm, count)) in records.iter().enumerate() {
        if norm < 2 {
            return Err(Error::InvalidParameter(format!("record {}: norm must be at least 2", i + 1)));
        }
        if count < 1 {
            return Err(Error::InvalidParameter(format!("record {}: count must be at least 1", i + 1)));
        }
        if previous.is_some_and(|p| norm <= p) {
            return Err(Error::Format {
                line: i + 1,
                message: format!("norms must be strictly increasing, {norm} follows {}", previous.unwrap()),
            });
        }
        previous = Some(norm);
        norms.extend(std::iter::repeat_n(norm, count as usize));
    }
    Ok(NormSpectrum {
        norms,
        norm_bound: u64::MAX,
        kind: SpectrumKind::Synthetic,
        params,
    })
}

/// Parses `<norm> <count>` records, one per line, with `#` comments.
pub fn parse_spectrum_records(text: &str) -> Result<Vec<(u64, u64)>> {
    let mut records = Vec::new();
    let mut previous: Option<u64> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let bad = |message: String| Error::Format { line: line_no, message };
        let mut fields = line.split_whitespace();
        let (Some(n), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad(format!("expected `<norm> <count>`, got {line:?}")));
        };
        let norm: u64 = n.parse().map_err(|_| bad(format!("bad norm {n:?}")))?;
        let count: u64 = c.parse().map_err(|_| bad(format!("bad count {c:?}")))?;
        if norm < 2 {
            return Err(bad(format!("norm must be at least 2, got {norm}")));
        }
        if count < 1 {
            return Err(bad(format!("count must be at least 1, got {count}")));
        }
        if previous.is_some_and(|p| norm <= p) {
            return Err(bad(format!("norms must be strictly increasing, {norm} follows {}", previous.unwrap())));
        }
        previous = Some(norm);
        records.push((norm, count));
    }
    Ok(records)
}

/// Reads a synthetic spectrum file.
pub fn read_synthetic_spectrum(path: &Path, params: MonoidParams) -> Result<NormSpectrum> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    load_synthetic_spectrum(&parse_spectrum_records(&text)?, params)
}

/// An element as sorted `(slot_id, exponent)` pairs; empty is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Factorization {
    terms: Vec<(usize, u32)>,
}

impl Factorization {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(terms: Vec<(usize, u32)>) -> Result<Self> {
        if let Some(&(id, _)) = terms.iter().find(|&&(_, e)| e == 0) {
            return Err(Error::InvalidFactorization(format!("slot {id} has exponent 0")));
        }
        if terms.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidFactorization(
                "slot ids must be distinct and increasing".into(),
            ));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(usize, u32)] {
        &self.terms
    }

    pub fn is_identity(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exponent-wise sum (the monoid operation).
    pub fn combine(&self, other: &Factorization) -> Factorization {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Factorization { terms: out }
    }
}

/// `N(m) = prod N(p)^e`, exactly in 128 bits.
pub fn norm_of(f: &Factorization, s: &NormSpectrum) -> Result<u128> {
    let mut acc: u128 = 1;
    for &(id, e) in f.terms() {
        let norm = s.slot(id).ok_or_else(|| {
            Error::InvalidFactorization(format!("slot {id} is not in the spectrum ({} slots)", s.len()))
        })?;
        let power = (norm.norm as u128).checked_pow(e).ok_or(Error::Overflow)?;
        acc = acc.checked_mul(power).ok_or(Error::Overflow)?;
    }
    Ok(acc)
}

/// Ω: number of prime factors with multiplicity.
pub fn big_omega(f: &Factorization) -> u64 {
    f.terms().iter().map(|&(_, e)| e as u64).sum()
}

/// ω: number of distinct prime factors.
pub fn small_omega(f: &Factorization) -> u64 {
    f.terms().len() as u64
}

pub(crate) fn check_h(h: u32) -> Result<()> {
    if h < 2 {
        Err(Error::InvalidParameter(format!("h must be at least 2, got {h}")))
    } else {
        Ok(())
    }
}

/// Every exponent is at most `h - 1`.
pub fn is_h_free(f: &Factorization, h: u32) -> Result<bool> {
    check_h(h)?;
    Ok(f.terms().iter().all(|&(_, e)| e < h))
}

/// Every exponent is at least `h`.
pub fn is_h_full(f: &Factorization, h: u32) -> Result<bool> {
    check_h(h)?;
    Ok(f.terms().iter().all(|&(_, e)| e >= h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(terms: &[(usize, u32)]) -> Factorization {
        Factorization::new(terms.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        let ints = build_integer_spectrum(10).unwrap();
        assert_eq!(norm_of(&Factorization::identity(), &ints).unwrap(), 1);
        assert_eq!(norm_of(&fact(&[(0, 2), (1, 1)]), &ints).unwrap(), 12);

        let poly = build_polynomial_spectrum(2, 3).unwrap();
        let cubic = poly.slots().find(|s| s.norm == 8).unwrap();
        assert_eq!(norm_of(&fact(&[(cubic.id, 2)]), &poly).unwrap(), 64);
    }

    #[test]
    fn norm_errors() {
        let ints = build_integer_spectrum(10).unwrap();
        assert!(matches!(
            norm_of(&fact(&[(4, 1)]), &ints),
            Err(Error::InvalidFactorization(_))
        ));
        assert_eq!(norm_of(&fact(&[(0, 128)]), &ints), Err(Error::Overflow));
        assert_eq!(norm_of(&fact(&[(0, 127)]), &ints).unwrap(), 1u128 << 127);
        assert_eq!(norm_of(&fact(&[(0, 100), (1, 30)]), &ints), Err(Error::Overflow));
    }

    #[test]
    fn omega_examples() {
        let twelve = fact(&[(0, 2), (1, 1)]);
        let two_pow_ten = fact(&[(0, 10)]);
        let id = Factorization::identity();
        assert_eq!(big_omega(&id), 0);
        assert_eq!(big_omega(&twelve), 3);
        assert_eq!(big_omega(&two_pow_ten), 10);
        assert_eq!(small_omega(&id), 0);
        assert_eq!(small_omega(&twelve), 2);
        assert_eq!(small_omega(&two_pow_ten), 1);
    }

    #[test]
    fn free_and_full_examples() {
        let twelve = fact(&[(0, 2), (1, 1)]);
        let seventy_two = fact(&[(0, 3), (1, 2)]);
        let id = Factorization::identity();
        assert!(is_h_free(&twelve, 3).unwrap());
        assert!(!is_h_free(&twelve, 2).unwrap());
        assert!(is_h_free(&id, 2).unwrap());
        assert!(!is_h_full(&twelve, 2).unwrap());
        assert!(is_h_full(&seventy_two, 2).unwrap());
        assert!(is_h_full(&id, 5).unwrap());
        assert!(is_h_free(&id, 1).is_err());
        assert!(is_h_full(&id, 0).is_err());
    }

    #[test]
    fn factorization_validation() {
        assert!(Factorization::new(vec![(1, 1), (0, 1)]).is_err());
        assert!(Factorization::new(vec![(1, 1), (1, 2)]).is_err());
        assert!(Factorization::new(vec![(3, 0)]).is_err());
    }

    #[test]
    fn integer_spectra() {
        let s = build_integer_spectrum(10).unwrap();
        assert_eq!(s.norms(), &[2, 3, 5, 7]);
        assert_eq!(build_integer_spectrum(2).unwrap().len(), 1);
        assert_eq!(build_integer_spectrum(100).unwrap().len(), 25);
        assert!(matches!(build_integer_spectrum(1), Err(Error::EmptySpectrum(_))));
        let ids: Vec<usize> = s.slots().map(|p| p.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    /// Irreducibility of a monic polynomial over F_2, coefficients as bits,
    /// by trial division against every monic polynomial of lower degree.
    fn gf2_irreducible(poly: u64) -> bool {
        let deg = 63 - poly.leading_zeros();
        if deg == 0 {
            return false;
        }
        let rem = |mut a: u64, b: u64| {
            let db = 63 - b.leading_zeros();
            while a != 0 && 63 - a.leading_zeros() >= db {
                a ^= b << (63 - a.leading_zeros() - db);
            }
            a
        };
        (2u64..(1 << deg)).filter(|d| 63 - d.leading_zeros() >= 1).all(|d| {
            let dd = 63 - d.leading_zeros();
            dd * 2 > deg || rem(poly, d) != 0
        })
    }

    #[test]
    fn necklace_counts_match_brute_force_irreducibility() {
        for d in 1..=8u32 {
            let brute = ((1u64 << d)..(1u64 << (d + 1))).filter(|&p| gf2_irreducible(p)).count() as u64;
            assert_eq!(irreducible_count(2, d), Some(brute), "degree {d}");
        }
        assert_eq!(
            (1..=4).map(|d| irreducible_count(2, d).unwrap()).collect::<Vec<_>>(),
            vec![2, 1, 2, 3]
        );
    }

    #[test]
    fn polynomial_spectra() {
        let s = build_polynomial_spectrum(3, 1).unwrap();
        assert_eq!(s.len(), 3);
        let s = build_polynomial_spectrum(2, 4).unwrap();
        assert_eq!(s.norms(), &[2, 2, 4, 8, 8, 16, 16, 16]);
        assert_eq!(s.params().kappa(), 2.0);
        assert_eq!(s.params().x_mode(), XMode::QPower(2));
        assert_eq!(s.norm_bound(), 16);
        assert!(build_polynomial_spectrum(6, 3).is_err());
        assert!(build_polynomial_spectrum(2, 0).is_err());
        assert!(build_polynomial_spectrum(2, 64).is_err());
    }

    #[test]
    fn gauss_identity_for_polynomial_counts() {
        for q in [2u64, 3, 4, 5, 7, 8, 9] {
            for n in 1..=20u32 {
                let Some(qn) = q.checked_pow(n) else { break };
                let weighted: u64 = divisors(n as u64)
                    .into_iter()
                    .map(|d| d * irreducible_count(q, d as u32).unwrap())
                    .sum();
                assert_eq!(weighted, qn, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn synthetic_spectra() {
        let params = MonoidParams::integers();
        let s = load_synthetic_spectrum(&[(4, 2)], params).unwrap();
        assert_eq!(s.norms(), &[4, 4]);
        assert!(load_synthetic_spectrum(&[], params).unwrap().is_empty());
        assert!(matches!(
            load_synthetic_spectrum(&[(3, 1), (2, 1)], params),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            load_synthetic_spectrum(&[(3, 1), (3, 1)], params),
            Err(Error::Format { .. })
        ));
        assert!(load_synthetic_spectrum(&[(1, 1)], params).is_err());
        assert!(load_synthetic_spectrum(&[(2, 0)], params).is_err());
    }

    #[test]
    fn spectrum_file_format() {
        let text = "# primes below ten\n2 1\n3 1   # three\n\n5 1\n7 1\n";
        assert_eq!(parse_spectrum_records(text).unwrap(), vec![(2, 1), (3, 1), (5, 1), (7, 1)]);
        assert!(parse_spectrum_records("").unwrap().is_empty());
        let err = parse_spectrum_records("2 1\n2 3\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }));
        assert!(matches!(parse_spectrum_records("1 1"), Err(Error::Format { line: 1, .. })));
        assert!(parse_spectrum_records("2").is_err());
        assert!(parse_spectrum_records("2 1 3").is_err());
        assert!(parse_spectrum_records("two 1").is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MonoidParams::new(0.0, 0.0, XMode::Rational).is_err());
        assert!(MonoidParams::new(1.0, 1.0, XMode::Rational).is_err());
        assert!(MonoidParams::new(1.0, -0.1, XMode::Rational).is_err());
        assert!(MonoidParams::new(1.0, 0.5, XMode::QPower(1)).is_err());
        assert!(MonoidParams::new(1.5, 0.5, XMode::QPower(3)).is_ok());
    }
}
