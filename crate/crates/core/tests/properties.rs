use proptest::prelude::*;

use monoid_moments::constants::{geom_sum_k, geom_sum_k2};
use monoid_moments::monoid::{big_omega, is_h_free, is_h_full, norm_of, small_omega};
use monoid_moments::{
    build_integer_spectrum, count_all, count_selected, decomposition_moment, error_exponent_h_free,
    error_exponent_h_full, load_synthetic_spectrum, tally_norm_range, tally_selected, Factorization, Family,
    MomentTally, MonoidParams, NormSpectrum, Ratio, SetSelector,
};

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::HFree), Just(Family::HFull)]
}

/// Sorted, distinct norms in `2..=48`, each with multiplicity 1 to 3.
fn spectrum() -> impl Strategy<Value = NormSpectrum> {
    prop::collection::btree_map(2u64..=48, 1u64..=3, 1..8).prop_map(|m| {
        let records: Vec<(u64, u64)> = m.into_iter().collect();
        load_synthetic_spectrum(&records, MonoidParams::integers()).unwrap()
    })
}

fn factorization(slots: usize) -> impl Strategy<Value = Factorization> {
    prop::collection::btree_map(0..slots, 1u32..6, 0..5)
        .prop_map(|m| Factorization::new(m.into_iter().collect()).unwrap())
}

/// Every element of norm `<= x` as `(norm, exponents)`, built slot by slot.
fn brute_elements(s: &NormSpectrum, x: u64) -> Vec<(u64, Vec<u32>)> {
    let mut elements = vec![(1u64, Vec::new())];
    for &p in s.norms() {
        let mut next = Vec::new();
        for (n, e) in &elements {
            let (mut m, mut k) = (*n, 0u32);
            loop {
                let mut e2 = e.clone();
                if k > 0 {
                    e2.push(k);
                }
                next.push((m, e2));
                match m.checked_mul(p) {
                    Some(v) if v <= x => {
                        m = v;
                        k += 1;
                    }
                    _ => break,
                }
            }
        }
        elements = next;
    }
    elements
}

fn brute_tally(s: &NormSpectrum, x: u64, family: Family, h: u32) -> MomentTally {
    let mut t = MomentTally::new();
    for (_, e) in brute_elements(s, x) {
        let ok = match family {
            Family::HFree => e.iter().all(|&k| k < h),
            Family::HFull => e.iter().all(|&k| k >= h),
        };
        if ok {
            t.record(e.iter().map(|&k| k as u64).sum());
        }
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn omega_is_additive(f in factorization(12), g in factorization(12)) {
        let fg = f.combine(&g);
        prop_assert_eq!(big_omega(&fg), big_omega(&f) + big_omega(&g));
        prop_assert!(small_omega(&fg) <= small_omega(&f) + small_omega(&g));
        prop_assert!(big_omega(&f) >= small_omega(&f));
        prop_assert_eq!(big_omega(&f) == small_omega(&f), is_h_free(&f, 2).unwrap());
    }

    #[test]
    fn norm_is_multiplicative(f in factorization(12), g in factorization(12)) {
        let s = build_integer_spectrum(100).unwrap();
        let fg = f.combine(&g);
        prop_assert_eq!(norm_of(&fg, &s).unwrap(), norm_of(&f, &s).unwrap() * norm_of(&g, &s).unwrap());
    }

    #[test]
    fn h_membership_nests(f in factorization(12), h in 2u32..8) {
        if is_h_free(&f, h).unwrap() {
            prop_assert!(is_h_free(&f, h + 1).unwrap());
        }
        if is_h_full(&f, h + 1).unwrap() {
            prop_assert!(is_h_full(&f, h).unwrap());
        }
    }

    #[test]
    fn tally_matches_brute_force(s in spectrum(), x in 1u64..20_000, fam in family(), h in 2u32..5) {
        let sel = SetSelector::new(fam, h, []).unwrap();
        prop_assert_eq!(tally_selected(&s, x, &sel).unwrap(), brute_tally(&s, x, fam, h));
        prop_assert_eq!(count_all(&s, x).unwrap(), brute_elements(&s, x).len() as u64);
    }

    #[test]
    fn decomposition_matches_tally(s in spectrum(), x in 1u64..100_000, fam in family(), h in 2u32..5) {
        let sel = SetSelector::new(fam, h, []).unwrap();
        let t = tally_selected(&s, x, &sel).unwrap();
        prop_assert_eq!(decomposition_moment(&s, x, &sel, 1).unwrap(), t.sum_omega());
        prop_assert_eq!(decomposition_moment(&s, x, &sel, 2).unwrap(), t.sum_omega_sq());
        prop_assert!(t.is_consistent());
        prop_assert!(t.count() as u128 * t.sum_omega_sq() as u128 >= (t.sum_omega() as u128).pow(2));
    }

    #[test]
    fn decomposition_matches_tally_on_integers(x in 1u64..100_000, fam in family(), h in 2u32..5) {
        let s = build_integer_spectrum(100_000).unwrap();
        let sel = SetSelector::new(fam, h, []).unwrap();
        let t = tally_selected(&s, x, &sel).unwrap();
        prop_assert_eq!(decomposition_moment(&s, x, &sel, 1).unwrap(), t.sum_omega());
        prop_assert_eq!(decomposition_moment(&s, x, &sel, 2).unwrap(), t.sum_omega_sq());
    }

    #[test]
    fn families_nest(s in spectrum(), x in 1u64..100_000, h in 2u32..5) {
        let free = |h| count_selected(&s, x, &SetSelector::h_free(h).unwrap()).unwrap();
        let full = |h| count_selected(&s, x, &SetSelector::h_full(h).unwrap()).unwrap();
        let all = count_all(&s, x).unwrap();
        prop_assert!(free(h) <= free(h + 1));
        prop_assert!(full(h + 1) <= full(h));
        prop_assert!(free(h + 1) <= all && full(h) <= all);
    }

    #[test]
    fn exclusion_never_adds(
        s in spectrum(),
        x in 1u64..100_000,
        fam in family(),
        h in 2u32..4,
        picks in prop::collection::vec(any::<prop::sample::Index>(), 0..4),
    ) {
        let base = SetSelector::new(fam, h, []).unwrap();
        let mut prev = count_selected(&s, x, &base).unwrap();
        prop_assert_eq!(prev, count_selected(&s, x, &base.excluding([])).unwrap());
        let mut ids = Vec::new();
        for pick in picks {
            ids.push(pick.index(s.len()));
            let now = count_selected(&s, x, &base.excluding(ids.clone())).unwrap();
            prop_assert!(now <= prev);
            prev = now;
        }
    }

    #[test]
    fn tallies_grow_with_x(s in spectrum(), x in 1u64..50_000, dx in 0u64..5_000, fam in family()) {
        let sel = SetSelector::new(fam, 2, []).unwrap();
        let a = tally_selected(&s, x, &sel).unwrap();
        let b = tally_selected(&s, x + dx, &sel).unwrap();
        prop_assert!(a.count() <= b.count());
        prop_assert!(a.sum_omega() <= b.sum_omega());
        prop_assert!(a.sum_omega_sq() <= b.sum_omega_sq());
    }

    #[test]
    fn tally_splits_over_norm_ranges(
        s in spectrum(),
        x in 2u64..50_000,
        cuts in prop::collection::btree_set(1u64..50_000, 0..4),
        fam in family(),
    ) {
        let sel = SetSelector::new(fam, 2, []).unwrap();
        let mut bounds: Vec<u64> = cuts.into_iter().filter(|&c| c < x).collect();
        bounds.push(x);
        let mut merged = MomentTally::new();
        let mut lo = 1;
        for hi in bounds {
            merged.merge(&tally_norm_range(&s, lo..=hi, &sel).unwrap());
            lo = hi + 1;
        }
        prop_assert_eq!(merged, tally_selected(&s, x, &sel).unwrap());
    }

    #[test]
    fn geometric_sums_match_direct_summation(a in 0.01f64..0.99, h in 2u32..=10, extra in 0u32..=58) {
        let r = (h + extra).min(60);
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for k in (h..=r).rev() {
            let t = a.powi(k as i32);
            d1 += k as f64 * t;
            d2 += (k * k) as f64 * t;
        }
        let tol = |v: f64| 1e-12 * v.abs().max(1.0);
        prop_assert!((geom_sum_k(a, h, r).unwrap() - d1).abs() <= tol(d1));
        prop_assert!((geom_sum_k2(a, h, r).unwrap() - d2).abs() <= tol(d2));
    }
}

#[test]
fn error_classes_partition_rational_grid() {
    for h in 2..=10u32 {
        let h64 = h as u64;
        for den in 1..=60u64 {
            for num in 0..den {
                let theta = Ratio::new(num, den);
                let t = num as f64 / den as f64;

                let free = error_exponent_h_free(t, h).unwrap();
                let inv_h = Ratio::new(1, h64);
                let cases = [inv_h < theta, inv_h == theta, inv_h > theta];
                assert_eq!(cases.iter().filter(|&&c| c).count(), 1);
                let expect = if cases[0] {
                    (theta, 0)
                } else if cases[1] {
                    (theta, 1)
                } else {
                    (inv_h, 0)
                };
                assert_eq!((free.exponent, free.log_power), expect, "free theta={theta} h={h}");

                let full = error_exponent_h_full(t, h).unwrap();
                let above = Ratio::new(h64, h64 + 1) < theta;
                let hit = (1..h64).any(|i| Ratio::new(h64, h64 + i) == theta);
                assert!(!(above && hit));
                let expect = if above {
                    (Ratio::new(num, den * h64), 0)
                } else if hit {
                    (Ratio::new(1, h64 + 1), 1)
                } else {
                    (Ratio::new(1, h64 + 1), 0)
                };
                assert_eq!((full.exponent, full.log_power), expect, "full theta={theta} h={h}");
                for e in [free.exponent, full.exponent] {
                    assert!(e > Ratio::new(0, 1) && e < Ratio::new(1, 1));
                }
            }
        }
    }
}
