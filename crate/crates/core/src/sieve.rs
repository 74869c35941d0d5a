//! Segmented sieve of Eratosthenes over odd integers.

use std::sync::OnceLock;

/// Default number of integers covered by one segment.
pub const DEFAULT_SEGMENT: u64 = 1 << 20;

/// Primes below this bound are kept in a process-wide table.
const TABLE_BOUND: u64 = 1 << 24;

/// Plain sieve of Eratosthenes, primes `<= limit`.
pub fn simple_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::with_capacity(estimate_count(limit));
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn estimate_count(limit: u64) -> usize {
    let x = limit.max(3) as f64;
    (1.26 * x / x.ln()) as usize + 8
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Enumerates primes in `[lo, hi]` one segment at a time.
#[derive(Clone, Debug)]
pub struct SegmentedSieve {
    lo: u64,
    hi: u64,
    segment: u64,
    base: Vec<u64>,
}

impl SegmentedSieve {
    pub fn new(lo: u64, hi: u64) -> Self {
        Self::with_segment(lo, hi, DEFAULT_SEGMENT)
    }

    pub fn with_segment(lo: u64, hi: u64, segment: u64) -> Self {
        let segment = segment.max(64) & !1;
        let base = simple_primes(isqrt(hi));
        Self {
            lo,
            hi,
            segment,
            base,
        }
    }

    /// Calls `f` on every prime in range, in increasing order.
    pub fn for_each_prime<F: FnMut(u64)>(&self, mut f: F) {
        if self.hi < 2 || self.lo > self.hi {
            return;
        }
        if self.lo <= 2 {
            f(2);
        }
        // odd numbers only; index i of a segment starting at `start` is start + 2i
        let mut start = self.lo.max(3) | 1;
        let half = (self.segment / 2) as usize;
        let mut marks = vec![false; half];
        while start <= self.hi {
            let end = (start + self.segment - 2).min(self.hi);
            let len = ((end - start) / 2 + 1) as usize;
            marks[..len].iter_mut().for_each(|m| *m = false);
            for &p in self.base.iter().skip(1) {
                let sq = p * p;
                if sq > end {
                    break;
                }
                let mut first = if sq >= start {
                    sq
                } else {
                    start.div_ceil(p) * p
                };
                if first % 2 == 0 {
                    first += p;
                }
                let mut i = ((first - start) / 2) as usize;
                let step = p as usize;
                while i < len {
                    marks[i] = true;
                    i += step;
                }
            }
            for (i, &m) in marks[..len].iter().enumerate() {
                if !m {
                    let n = start + 2 * i as u64;
                    if n > 1 {
                        f(n);
                    }
                }
            }
            start = end + 2;
        }
    }

    pub fn primes(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(estimate_count(self.hi));
        self.for_each_prime(|p| out.push(p));
        out
    }
}

/// All primes in `[lo, hi]`.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    SegmentedSieve::new(lo, hi).primes()
}

pub fn primes_up_to(x: u64) -> Vec<u64> {
    primes_in_range(2, x)
}

/// Shared table of all primes below 2^24 (a little over a million primes).
pub fn prime_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        primes_in_range(2, TABLE_BOUND - 1)
            .into_iter()
            .map(|p| p as u32)
            .collect()
    })
}

/// Euler totient for every `n <= limit` (index 0 holds 0).
pub fn totient_table(limit: usize) -> Vec<u32> {
    let mut phi: Vec<u32> = (0..=limit as u32).collect();
    for i in 2..=limit {
        if phi[i] == i as u32 {
            let mut j = i;
            while j <= limit {
                phi[j] -= phi[j] / i as u32;
                j += i;
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{euler_phi, is_prime};
    use proptest::prelude::*;

    #[test]
    fn counts_match_pi() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(1).len(), 0);
        assert_eq!(primes_up_to(2), vec![2]);
        assert_eq!(primes_up_to(100_000).len(), 9592);
        assert_eq!(primes_up_to(1_000_000).len(), 78_498);
    }

    #[test]
    fn table_size() {
        // pi(2^24) = 1_077_871
        assert_eq!(prime_table().len(), 1_077_871);
    }

    #[test]
    fn tiny_segments_agree_with_simple_sieve() {
        let a = SegmentedSieve::with_segment(2, 20_000, 64).primes();
        assert_eq!(a, simple_primes(20_000));
    }

    #[test]
    fn totients() {
        let t = totient_table(2000);
        for n in 1..=2000u64 {
            assert_eq!(t[n as usize] as u64, euler_phi(n));
        }
    }

    proptest! {
        #[test]
        fn range_matches_primality(lo in 0u64..200_000, len in 0u64..5_000) {
            let hi = lo + len;
            let got = primes_in_range(lo, hi);
            let want: Vec<u64> = (lo..=hi).filter(|&n| is_prime(n)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
