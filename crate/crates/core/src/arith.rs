//! Small integer utilities: prime sieving, Möbius values, exact integer roots
//! and power bounds.

/// All primes `p <= n`, in increasing order.
///
/// Odd-only Eratosthenes over a packed bit array, so `n = 10^8` needs about
/// 6 MB of scratch space.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    // bit i represents the odd number 2i + 1
    let half = ((n - 1) / 2 + 1) as usize;
    let mut composite = vec![0u64; half.div_ceil(64)];
    let mut i = 1usize;
    loop {
        let p = 2 * i + 1;
        if (p as u64).saturating_mul(p as u64) > n {
            break;
        }
        if composite[i / 64] & (1 << (i % 64)) == 0 {
            let mut j = (p * p) / 2;
            while j < half {
                composite[j / 64] |= 1 << (j % 64);
                j += p;
            }
        }
        i += 1;
    }
    let estimate = if n > 16 {
        (1.3 * n as f64 / (n as f64).ln()) as usize
    } else {
        8
    };
    let mut primes = Vec::with_capacity(estimate);
    primes.push(2);
    for i in 1..half {
        if composite[i / 64] & (1 << (i % 64)) == 0 {
            primes.push(2 * i as u64 + 1);
        }
    }
    primes
}

/// Möbius function by trial division.
pub fn mobius(mut n: u64) -> i64 {
    assert!(n >= 1, "mobius is defined for n >= 1");
    let mut result = 1i64;
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            n /= d;
            if n.is_multiple_of(d) {
                return 0;
            }
            result = -result;
        }
        d += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Writes `q = p^k` with `p` prime, if possible.
pub fn as_prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 0;
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            p = d;
            break;
        }
        d += 1;
    }
    if p == 0 {
        return Some((q, 1));
    }
    let mut rest = q;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

/// Divisors of `n` in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// `base^exp`, or `None` on `u64` overflow.
pub fn checked_pow(base: u64, exp: u32) -> Option<u64> {
    base.checked_pow(exp)
}

/// Largest `k` with `base^k <= x`, by exact repeated multiplication.
///
/// Requires `base >= 2`; returns 0 when `base > x`.
pub fn max_exponent(base: u64, x: u64) -> u32 {
    debug_assert!(base >= 2);
    let mut k = 0;
    let mut acc = 1u64;
    while let Some(next) = acc.checked_mul(base) {
        if next > x {
            break;
        }
        acc = next;
        k += 1;
    }
    k
}

/// Largest `r` with `r^k <= x`.
pub fn int_root(x: u64, k: u32) -> u64 {
    assert!(k >= 1);
    if k == 1 || x < 2 {
        return x;
    }
    let mut r = (x as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > x) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= x) {
        r += 1;
    }
    r
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_prime(n: u64) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn sieve_matches_trial_division() {
        let sieved = primes_up_to(2000);
        let brute: Vec<u64> = (0..=2000).filter(|&n| trial_prime(n)).collect();
        assert_eq!(sieved, brute);
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(2), vec![2]);
        assert!(primes_up_to(1).is_empty());
        assert_eq!(primes_up_to(100).len(), 25);
        assert_eq!(primes_up_to(1_000_000).len(), 78_498);
    }

    #[test]
    fn mobius_small_values() {
        let expect = [1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0];
        for (i, &m) in expect.iter().enumerate() {
            assert_eq!(mobius(i as u64 + 1), m, "mu({})", i + 1);
        }
    }

    #[test]
    fn prime_powers() {
        assert_eq!(as_prime_power(2), Some((2, 1)));
        assert_eq!(as_prime_power(9), Some((3, 2)));
        assert_eq!(as_prime_power(64), Some((2, 6)));
        assert_eq!(as_prime_power(6), None);
        assert_eq!(as_prime_power(1), None);
        assert_eq!(as_prime_power(12), None);
    }

    #[test]
    fn exponent_bounds_are_exact_at_boundaries() {
        assert_eq!(max_exponent(2, 1), 0);
        assert_eq!(max_exponent(2, 8), 3);
        assert_eq!(max_exponent(2, 7), 2);
        assert_eq!(max_exponent(10, 1_000_000), 6);
        assert_eq!(max_exponent(10, 999_999), 5);
        assert_eq!(max_exponent(3, u64::MAX), 40);
        assert_eq!(int_root(10_000_000_000, 2), 100_000);
        assert_eq!(int_root(9_999_999_999, 2), 99_999);
        assert_eq!(int_root(64, 3), 4);
        assert_eq!(int_root(63, 3), 3);
        assert_eq!(int_root(u64::MAX, 2), 4_294_967_295);
    }

    #[test]
    fn divisor_listing() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(divisors(16), vec![1, 2, 4, 8, 16]);
    }
}
