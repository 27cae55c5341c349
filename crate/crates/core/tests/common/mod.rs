#![allow(dead_code)]

use monoid_moments::{Family, MomentTally};

/// Riemann zeta for real `s > 1` by Euler–Maclaurin with cut-off 1000.
pub fn zeta(s: f64) -> f64 {
    let n = 1000u32;
    let nf = n as f64;
    let head: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
    let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0];
    let mut tail = nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // sum_j B_2j/(2j)! * s(s+1)...(s+2j-2) * N^(-s-2j+1)
    let mut rising = s;
    let mut fact = 2.0;
    for (j, bj) in b.iter().enumerate() {
        let j = j as f64 + 1.0;
        tail += bj / fact * rising * nf.powf(-s - 2.0 * j + 1.0);
        rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    }
    head + tail
}

/// Smallest-prime-factor table for `0..=n`.
pub fn spf_table(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Exponents in the prime factorisation of `n`.
pub fn exponents(mut n: usize, spf: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    while n > 1 {
        let p = spf[n] as usize;
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        out.push(e);
    }
    out
}

pub fn selected(exps: &[u32], family: Family, h: u32) -> bool {
    match family {
        Family::HFree => exps.iter().all(|&e| e < h),
        Family::HFull => exps.iter().all(|&e| e >= h),
    }
}

/// Tally over `1..=x` by factoring every integer.
pub fn brute_integer_tally(x: usize, family: Family, h: u32) -> MomentTally {
    let spf = spf_table(x);
    let mut t = MomentTally::new();
    for n in 1..=x {
        let e = exponents(n, &spf);
        if selected(&e, family, h) {
            t.record(e.iter().map(|&k| k as u64).sum());
        }
    }
    t
}

/// GF(2) polynomials are bit masks, bit i holding the coefficient of t^i.
fn degree(a: u64) -> u32 {
    63 - a.leading_zeros()
}

fn poly_rem(mut a: u64, b: u64) -> u64 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

/// Exponents of the factorisation of every monic GF(2) polynomial of degree
/// `<= max_degree`, by trial division with irreducibles found along the way.
pub fn gf2_exponents(max_degree: u32) -> Vec<(u32, Vec<u32>)> {
    let mut irreducibles: Vec<u64> = Vec::new();
    let mut out = Vec::new();
    for f in 1u64..(1 << (max_degree + 1)) {
        let mut rest = f;
        let mut exps = Vec::new();
        for &g in &irreducibles {
            if rest == 1 || degree(g) > degree(rest) {
                break;
            }
            let mut e = 0;
            while rest != 1 && poly_rem(rest, g) == 0 {
                rest = divide(rest, g);
                e += 1;
            }
            if e > 0 {
                exps.push(e);
            }
        }
        if rest != 1 {
            irreducibles.push(rest);
            exps.push(1);
        }
        out.push((degree(f), exps));
    }
    out
}

fn divide(mut a: u64, b: u64) -> u64 {
    let db = degree(b);
    let mut q = 0;
    while a != 0 && degree(a) >= db {
        let shift = degree(a) - db;
        q |= 1 << shift;
        a ^= b << shift;
    }
    q
}

/// Per-prime constant oracles by direct summation over exponents.
pub mod local {
    /// `sum_{k=1}^{h-1} k^j w_k` with the h-free local weights
    /// `w_k = N^-k (N^h - N^(h-1)) / (N^h - 1)`.
    pub fn free_moment(n: f64, h: u32, j: i32) -> f64 {
        let nh = n.powi(h as i32);
        let scale = (nh - nh / n) / (nh - 1.0);
        (1..h).map(|k| (k as f64).powi(j) * n.powi(-(k as i32)) * scale).sum()
    }

    /// `sum_{k>=h} k^j a^k / (1 + N^-1/(1-a))` with `a = N^(-1/h)`.
    pub fn full_moment(n: f64, h: u32, j: i32) -> f64 {
        let a = n.powf(-1.0 / h as f64);
        let norm = 1.0 + (1.0 / n) / (1.0 - a);
        let mut total = 0.0;
        let mut k = h;
        loop {
            let t = (k as f64).powi(j) * a.powi(k as i32);
            total += t;
            if t < 1e-19 * total {
                break;
            }
            k += 1;
        }
        total / norm
    }
}
