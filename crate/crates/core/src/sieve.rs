//! Segmented sieve of Eratosthenes and a deterministic 64-bit primality test.

use crate::par::{map_chunks, Exec};

const SEGMENT_LEN: u64 = 1 << 18;

/// Deterministic Miller-Rabin; these bases are sufficient for all `u64`.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn small_primes(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// All primes `<= limit`, in increasing order.
pub fn primes_up_to(limit: u64, exec: Exec) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let root = (limit as f64).sqrt() as u64 + 1;
    let base = small_primes(root);
    let n_segments = (limit / SEGMENT_LEN + 1) as usize;

    let segments = map_chunks(exec, n_segments, |seg| {
        let lo = seg as u64 * SEGMENT_LEN;
        let hi = (lo + SEGMENT_LEN - 1).min(limit);
        sieve_segment(lo, hi, &base)
    });
    segments.concat()
}

fn sieve_segment(lo: u64, hi: u64, base: &[u64]) -> Vec<u64> {
    let len = (hi - lo + 1) as usize;
    let mut composite = vec![false; len];
    for &p in base {
        if p * p > hi {
            break;
        }
        let first = (p * p).max(lo.div_ceil(p) * p);
        let mut j = first;
        while j <= hi {
            composite[(j - lo) as usize] = true;
            j += p;
        }
    }
    composite
        .iter()
        .enumerate()
        .filter(|&(i, &c)| !c && lo + i as u64 >= 2)
        .map(|(i, _)| lo + i as u64)
        .collect()
}

/// An upper bound on the `n`-th prime (1-based): `n (ln n + ln ln n)` for
/// `n >= 6`, and 13 below that.
pub fn nth_prime_upper_bound(n: u64) -> u64 {
    if n < 6 {
        return 13;
    }
    let x = n as f64;
    (x * (x.ln() + x.ln().ln())).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        for n in 0..20_000 {
            assert_eq!(is_prime(n), trial_division(n), "n = {n}");
        }
    }

    #[test]
    fn miller_rabin_large_values() {
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(18_446_744_073_709_551_615));
        // strong pseudoprime to bases 2..=23
        assert!(!is_prime(3_825_123_056_546_413_051));
    }

    #[test]
    fn segmented_matches_simple_sieve_across_boundaries() {
        let limit = 3 * SEGMENT_LEN + 17;
        assert_eq!(primes_up_to(limit, Exec::Sequential), small_primes(limit));
        assert_eq!(primes_up_to(limit, Exec::Parallel), small_primes(limit));
    }

    #[test]
    fn tiny_limits() {
        assert!(primes_up_to(1, Exec::Sequential).is_empty());
        assert_eq!(primes_up_to(2, Exec::Sequential), vec![2]);
        assert_eq!(primes_up_to(10, Exec::Sequential), vec![2, 3, 5, 7]);
    }

    #[test]
    fn upper_bound_holds() {
        let primes = small_primes(200_000);
        for n in 1..=primes.len() as u64 {
            assert!(primes[n as usize - 1] <= nth_prime_upper_bound(n), "n = {n}");
        }
    }
}
