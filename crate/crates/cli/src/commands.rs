//! The subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::time::Instant;

use anyhow::Context;
use monoid_moments::arith::{checked_pow, int_root, max_exponent};
use monoid_moments::asymptotics::MIN_PREDICTION_X;
use monoid_moments::constants::{geom_sum_k, geom_sum_k2};
use monoid_moments::{
    build_integer_spectrum, build_polynomial_spectrum, count_selected, decomposition_moment,
    normal_order_exceptions, predict, read_synthetic_spectrum, residual_report, tally_norm_range, tally_selected,
    ConstantsBundle, Family, Moment, MonoidParams, NormSpectrum, Observation, SetSelector, XMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MonoidChoice, OutputFormat, UsageError};
use crate::report::{write_rows, CheckRow, CountRow, NormalOrderRow, ReportRow};

const DEFAULT_INTEGER_BOUND: u64 = 1_000_000;
/// Default truncation for polynomial monoids: the largest `q^d <= 2^20`.
const DEFAULT_POLY_BOUND: u64 = 1 << 20;

fn out_writer(cfg: &ExperimentConfig) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: serde::Serialize>(cfg: &ExperimentConfig, rows: &[T]) -> anyhow::Result<()> {
    let mut w = out_writer(cfg)?;
    write_rows(rows, cfg.output, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Truncation norm for the constants.
pub fn prime_bound(cfg: &ExperimentConfig, spectrum: Option<&NormSpectrum>) -> u64 {
    if let Some(p) = cfg.prime_bound {
        return p;
    }
    match cfg.monoid {
        MonoidChoice::Integers => DEFAULT_INTEGER_BOUND,
        MonoidChoice::Poly { q } => checked_pow(q, max_exponent(q, DEFAULT_POLY_BOUND).max(1)).unwrap_or(q),
        MonoidChoice::Synthetic { .. } => spectrum.and_then(|s| s.norms().last().copied()).unwrap_or(2).max(2),
    }
}

/// Largest norm the enumeration of `family` up to `x` needs.
fn enumeration_bound(x: u64, family: Family, h: u32) -> u64 {
    match family {
        Family::HFree => x,
        Family::HFull => int_root(x, h),
    }
}

/// Builds the spectrum, complete up to `bound` for the built-in monoids.
pub fn build_spectrum(cfg: &ExperimentConfig, bound: u64) -> anyhow::Result<NormSpectrum> {
    let bound = bound.max(2);
    Ok(match &cfg.monoid {
        MonoidChoice::Integers => build_integer_spectrum(bound)?,
        MonoidChoice::Poly { q } => build_polynomial_spectrum(*q, max_exponent(*q, bound).max(1))?,
        MonoidChoice::Synthetic { path } => {
            let params = MonoidParams::new(cfg.kappa.unwrap_or(1.0), cfg.theta.unwrap_or(0.0), XMode::Rational)
                .map_err(|e| UsageError(e.to_string()))?;
            read_synthetic_spectrum(path, params)?
        }
    })
}

fn warn_off_grid(cfg: &ExperimentConfig) {
    if let MonoidChoice::Poly { q } = cfg.monoid {
        for x in cfg.off_grid_x() {
            eprintln!("warning: x = {x} is not a power of q = {q}; norms only take the values q^n");
        }
    }
}

fn elapsed_ms(cfg: &ExperimentConfig, start: Instant) -> u64 {
    if cfg.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

pub fn constants(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let spectrum = match cfg.monoid {
        MonoidChoice::Synthetic { .. } => build_spectrum(cfg, 2)?,
        _ => build_spectrum(cfg, prime_bound(cfg, None))?,
    };
    let bundle = ConstantsBundle::compute(&spectrum, cfg.h, prime_bound(cfg, Some(&spectrum)))?;
    match cfg.output {
        OutputFormat::Json => {
            let mut w = out_writer(cfg)?;
            writeln!(w, "{}", bundle.to_json())?;
            w.flush()?;
        }
        OutputFormat::Csv => emit(cfg, &bundle.entries())?,
    }
    Ok(())
}

pub fn count(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let xs = cfg.require_x()?;
    warn_off_grid(cfg);
    let top = *xs.last().unwrap();
    let spectrum = build_spectrum(cfg, enumeration_bound(top, cfg.family, cfg.h))?;
    let sel = SetSelector::new(cfg.family, cfg.h, [])?;
    let rows = xs
        .par_iter()
        .map(|&x| Ok(CountRow { x, h: cfg.h, family: cfg.family, count: count_selected(&spectrum, x, &sel)? }))
        .collect::<anyhow::Result<Vec<_>>>()?;
    emit(cfg, &rows)
}

fn warn_below_prediction_domain(xs: &[u64]) {
    for x in xs.iter().filter(|&&x| x < MIN_PREDICTION_X) {
        eprintln!("warning: no prediction for x = {x}; predictions need x >= {MIN_PREDICTION_X}");
    }
}

/// Tallies `x` and reports count, m1 and m2 against their predictions.
fn moment_rows(
    cfg: &ExperimentConfig,
    spectrum: &NormSpectrum,
    bundle: &ConstantsBundle,
    family: Family,
    x: u64,
) -> anyhow::Result<Vec<ReportRow>> {
    let h = bundle.h;
    let start = Instant::now();
    let tally = tally_selected(spectrum, x, &SetSelector::new(family, h, [])?)?;
    let runtime_ms = elapsed_ms(cfg, start);
    Moment::ALL
        .iter()
        .map(|&moment| {
            let obs = Observation::from_tally(x, h, family, moment, &tally);
            let mut row = ReportRow {
                x,
                h,
                family,
                moment,
                empirical: obs.value,
                predicted: None,
                residual: None,
                normalized: None,
                runtime_ms,
            };
            if x >= MIN_PREDICTION_X {
                let pred = predict(x, h, family, moment, bundle, spectrum.params())?;
                let r = residual_report(&obs, &pred)?;
                row.predicted = Some(pred.main_value);
                row.residual = Some(r.residual);
                row.normalized = Some(r.normalized);
            }
            Ok(row)
        })
        .collect()
}

pub fn moments(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let xs = cfg.require_x()?;
    warn_below_prediction_domain(xs);
    warn_off_grid(cfg);
    let top = *xs.last().unwrap();
    let spectrum = build_spectrum(cfg, enumeration_bound(top, cfg.family, cfg.h).max(prime_bound(cfg, None)))?;
    let bundle = ConstantsBundle::compute(&spectrum, cfg.h, prime_bound(cfg, Some(&spectrum)))?;
    let rows: Vec<Vec<ReportRow>> = xs
        .par_iter()
        .map(|&x| moment_rows(cfg, &spectrum, &bundle, cfg.family, x))
        .collect::<anyhow::Result<_>>()?;
    emit(cfg, &rows.concat())
}

pub fn sweep(cfg: &ExperimentConfig, h_values: &[u32]) -> anyhow::Result<()> {
    let xs = cfg.require_x()?;
    warn_below_prediction_domain(xs);
    if let Some(h) = h_values.iter().find(|&&h| h < 2) {
        return Err(UsageError(format!("h must be at least 2, got {h}")).into());
    }
    warn_off_grid(cfg);
    let top = *xs.last().unwrap();
    let spectrum = build_spectrum(cfg, top.max(prime_bound(cfg, None)))?;
    let p = prime_bound(cfg, Some(&spectrum));
    let bundles = h_values
        .iter()
        .map(|&h| ConstantsBundle::compute(&spectrum, h, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::new();
    for bundle in &bundles {
        for family in [Family::HFree, Family::HFull] {
            for &x in xs {
                points.push((bundle, family, x));
            }
        }
    }
    let mut rows: Vec<ReportRow> = points
        .par_iter()
        .map(|&(bundle, family, x)| moment_rows(cfg, &spectrum, bundle, family, x))
        .collect::<anyhow::Result<Vec<_>>>()?
        .concat();
    rows.sort_by_key(|r| (r.x, r.h, r.family, r.moment));
    emit(cfg, &rows)
}

pub fn normal_order(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let xs = cfg.require_x()?;
    let epsilon = cfg.epsilon()?;
    warn_off_grid(cfg);
    let top = *xs.last().unwrap();
    let spectrum = build_spectrum(cfg, enumeration_bound(top, cfg.family, cfg.h))?;
    let sel = SetSelector::new(cfg.family, cfg.h, [])?;
    let rows = xs
        .par_iter()
        .map(|&x| {
            let e = normal_order_exceptions(&spectrum, x, &sel, epsilon)?;
            Ok(NormalOrderRow {
                x,
                h: cfg.h,
                family: cfg.family,
                epsilon,
                exceptions: e.exceptions,
                eligible: e.eligible,
                fraction: e.fraction(),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    emit(cfg, &rows)
}

/// x values for `verify` when none are given: 10^3, 10^4, 10^5, rounded
/// down to powers of q for polynomial monoids.
fn verify_x(cfg: &ExperimentConfig) -> Vec<u64> {
    if !cfg.x_list.is_empty() {
        return cfg.x_list.clone();
    }
    let base = [1_000u64, 10_000, 100_000];
    match cfg.monoid {
        MonoidChoice::Poly { q } => base.iter().map(|&x| checked_pow(q, max_exponent(q, x)).unwrap_or(1)).collect(),
        _ => base.to_vec(),
    }
}

fn check(check: &str, subject: String, passed: bool, detail: String) -> CheckRow {
    CheckRow { check: check.to_string(), subject, passed, detail }
}

fn decomposition_checks(
    spectrum: &NormSpectrum,
    xs: &[u64],
    h: u32,
    inject_fault: bool,
) -> anyhow::Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for family in [Family::HFree, Family::HFull] {
        let sel = SetSelector::new(family, h, [])?;
        for &x in xs {
            let mut tally = tally_selected(spectrum, x, &sel)?;
            if inject_fault {
                tally.corrupt_sum_omega(1);
            }
            let m1 = decomposition_moment(spectrum, x, &sel, 1)?;
            let m2 = decomposition_moment(spectrum, x, &sel, 2)?;
            rows.push(check(
                "decomposition",
                format!("{family} h={h} x={x}"),
                m1 == tally.sum_omega() && m2 == tally.sum_omega_sq(),
                format!(
                    "order 1 {m1} vs {}; order 2 {m2} vs {}",
                    tally.sum_omega(),
                    tally.sum_omega_sq()
                ),
            ));
        }
    }
    Ok(rows)
}

fn geometric_check(rng: &mut ChaCha8Rng) -> anyhow::Result<CheckRow> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a: f64 = rng.gen_range(0.01..0.99);
        let h: u32 = rng.gen_range(2..=10);
        let r: u32 = rng.gen_range(h..=60);
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        for k in (h..=r).rev() {
            let t = a.powi(k as i32);
            d1 += k as f64 * t;
            d2 += (k * k) as f64 * t;
        }
        let e1 = (geom_sum_k(a, h, r)? - d1).abs() / d1.abs().max(1.0);
        let e2 = (geom_sum_k2(a, h, r)? - d2).abs() / d2.abs().max(1.0);
        worst = worst.max(e1).max(e2);
    }
    Ok(check(
        "geometric-sums",
        "1000 random (a, h, r)".into(),
        worst <= 1e-12,
        format!("max error relative to max(1, |sum|): {worst:.3e}"),
    ))
}

fn recomposition_check(bundle: &ConstantsBundle) -> CheckRow {
    let (c4, d4) = (bundle.c4_recomposition_error(), bundle.d4_recomposition_error());
    check(
        "recomposition",
        format!("h={} P={}", bundle.h, bundle.truncation_norm),
        c4 <= 1e-12 && d4 <= 1e-12,
        format!("C4 error {c4:.3e}; D4 error {d4:.3e}"),
    )
}

fn exclusion_checks(
    spectrum: &NormSpectrum,
    xs: &[u64],
    h: u32,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let slots = spectrum.len().min(64);
    for family in [Family::HFree, Family::HFull] {
        let base = SetSelector::new(family, h, [])?;
        for &x in xs {
            let picks: Vec<usize> = (0..4).map(|_| rng.gen_range(0..slots.max(1))).collect();
            let mut counts = vec![count_selected(spectrum, x, &base)?];
            let mut ok = counts[0] == count_selected(spectrum, x, &base.excluding([]))?;
            for i in 1..=picks.len().min(slots) {
                let c = count_selected(spectrum, x, &base.excluding(picks[..i].iter().copied()))?;
                ok &= c <= *counts.last().unwrap();
                counts.push(c);
            }
            rows.push(check(
                "exclusion-monotone",
                format!("{family} h={h} x={x} slots={picks:?}"),
                ok,
                format!("counts {counts:?}"),
            ));
        }
    }
    Ok(rows)
}

fn merge_checks(spectrum: &NormSpectrum, xs: &[u64], h: u32, rng: &mut ChaCha8Rng) -> anyhow::Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for family in [Family::HFree, Family::HFull] {
        let sel = SetSelector::new(family, h, [])?;
        for &x in xs {
            let mut cuts: Vec<u64> = (0..3).map(|_| rng.gen_range(1..=x)).collect();
            cuts.push(x);
            cuts.sort_unstable();
            cuts.dedup();
            let mut merged = monoid_moments::MomentTally::new();
            let mut lo = 1;
            for &hi in &cuts {
                merged.merge(&tally_norm_range(spectrum, lo..=hi, &sel)?);
                lo = hi + 1;
            }
            rows.push(check(
                "tally-merge",
                format!("{family} h={h} x={x} cuts={cuts:?}"),
                merged == tally_selected(spectrum, x, &sel)?,
                format!("merged count {}", merged.count()),
            ));
        }
    }
    Ok(rows)
}

/// Runs every identity check; returns whether all passed.
pub fn verify(cfg: &ExperimentConfig, inject_fault: bool) -> anyhow::Result<bool> {
    let xs = verify_x(cfg);
    warn_off_grid(cfg);
    let top = *xs.last().unwrap();
    let spectrum = build_spectrum(cfg, top.max(prime_bound(cfg, None)))?;
    let bundle = ConstantsBundle::compute(&spectrum, cfg.h, prime_bound(cfg, Some(&spectrum)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = decomposition_checks(&spectrum, &xs, cfg.h, inject_fault)?;
    rows.push(geometric_check(&mut rng)?);
    rows.push(recomposition_check(&bundle));
    rows.extend(exclusion_checks(&spectrum, &xs, cfg.h, &mut rng)?);
    rows.extend(merge_checks(&spectrum, &xs, cfg.h, &mut rng)?);
    emit(cfg, &rows)?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    eprintln!("{} checks, {failed} failed", rows.len());
    Ok(failed == 0)
}
