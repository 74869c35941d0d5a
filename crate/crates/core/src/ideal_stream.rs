//! Prime ideal norms up to a bound, aggregated per rational prime.

use rayon::prelude::*;

use crate::arith::CompensatedSum;
use crate::field_catalog::FieldSpec;
use crate::sieve::SegmentedSieve;

/// All prime ideals above the rational prime `p`: `multiplicity` of them, each
/// of norm `norm = p^f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEvent {
    pub p: u64,
    pub norm: u64,
    pub multiplicity: u32,
    pub log_norm: f64,
    pub ramified: bool,
}

impl NormEvent {
    /// Contribution `g log Np` of the event to prime sums.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.multiplicity as f64 * self.log_norm
    }
}

/// Events for rational primes in `[lo, hi]` with norm at most `x`, in
/// increasing order of `p`.
pub fn norm_events_in_range(field: &FieldSpec, lo: u64, hi: u64, x: u64) -> Vec<NormEvent> {
    let mut out = Vec::new();
    let hi = hi.min(x);
    if hi < 2 || lo > hi {
        return out;
    }
    SegmentedSieve::new(lo, hi).for_each_prime(|p| {
        if let Some(s) = field.splitting_within(p, x) {
            if s.is_exact() {
                out.push(NormEvent {
                    p,
                    norm: p.pow(s.f),
                    multiplicity: s.g,
                    log_norm: s.f as f64 * (p as f64).ln(),
                    ramified: s.is_ramified(),
                });
            }
        }
    });
    out
}

/// Every norm event with norm at most `x`, ordered by `p`.
pub fn enumerate_norms(field: &FieldSpec, x: u64) -> Vec<NormEvent> {
    norm_events_in_range(field, 2, x, x)
}

/// Splits `[2, x]` into `parts` contiguous ranges.
pub fn partition(x: u64, parts: usize) -> Vec<(u64, u64)> {
    if x < 2 {
        return Vec::new();
    }
    let parts = parts.max(1) as u64;
    let span = (x - 1).div_ceil(parts).max(1);
    (0..parts)
        .map(|i| (2 + i * span, (2 + (i + 1) * span - 1).min(x)))
        .filter(|(lo, hi)| lo <= hi)
        .collect()
}

/// Same events as [`enumerate_norms`], with the ranges sieved concurrently
/// and concatenated in range order.
pub fn enumerate_norms_parallel(field: &FieldSpec, x: u64, parts: usize) -> Vec<NormEvent> {
    partition(x, parts)
        .into_par_iter()
        .map(|(lo, hi)| norm_events_in_range(field, lo, hi, x))
        .collect::<Vec<_>>()
        .concat()
}

/// `theta_K(x)` and the equal-norm square sum, accumulated together.
#[derive(Clone, Copy, Debug, Default)]
pub struct PrimeSums {
    theta: CompensatedSum,
    equal_norm_square: CompensatedSum,
}

impl PrimeSums {
    pub fn from_events(events: &[NormEvent]) -> Self {
        let mut sums = Self::default();
        for e in events {
            sums.push(e);
        }
        sums
    }

    pub fn push(&mut self, e: &NormEvent) {
        let g = e.multiplicity as f64;
        self.theta += g * e.log_norm;
        self.equal_norm_square += g * g * e.log_norm * e.log_norm;
    }

    pub fn merge(&mut self, other: &PrimeSums) {
        self.theta.merge(&other.theta);
        self.equal_norm_square.merge(&other.equal_norm_square);
    }

    pub fn theta(&self) -> f64 {
        self.theta.value()
    }

    pub fn equal_norm_square(&self) -> f64 {
        self.equal_norm_square.value()
    }
}

/// Sums over any partition of `[2, x]`, merged in range order.
pub fn prime_sums_partitioned(field: &FieldSpec, ranges: &[(u64, u64)], x: u64) -> PrimeSums {
    let partials: Vec<PrimeSums> = ranges
        .par_iter()
        .map(|&(lo, hi)| PrimeSums::from_events(&norm_events_in_range(field, lo, hi, x)))
        .collect();
    let mut total = PrimeSums::default();
    for s in &partials {
        total.merge(s);
    }
    total
}

/// `theta_K(x) = sum over prime ideals with Np <= x of log Np`.
pub fn theta_total(field: &FieldSpec, x: u64) -> f64 {
    PrimeSums::from_events(&enumerate_norms(field, x)).theta()
}

/// `sum_{Np <= x} sum_{Np' = Np} (log Np)^2`.
pub fn equal_norm_square_sum(field: &FieldSpec, x: u64) -> f64 {
    PrimeSums::from_events(&enumerate_norms(field, x)).equal_norm_square()
}

/// Contribution of ramified primes to both sums (diagnostic only).
pub fn ramified_contribution(field: &FieldSpec, x: u64) -> PrimeSums {
    let mut sums = PrimeSums::default();
    for &p in field.ramified_primes().iter().filter(|&&p| p <= x) {
        for e in norm_events_in_range(field, p, p, x) {
            sums.push(&e);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> FieldSpec {
        s.parse().unwrap()
    }

    fn summary(events: &[NormEvent]) -> Vec<(u64, u64, u32)> {
        events
            .iter()
            .map(|e| (e.p, e.norm, e.multiplicity))
            .collect()
    }

    #[test]
    fn stream_examples() {
        assert_eq!(
            summary(&enumerate_norms(&field("Q"), 10)),
            vec![(2, 2, 1), (3, 3, 1), (5, 5, 1), (7, 7, 1)]
        );
        let qi = enumerate_norms(&field("Q(i)"), 10);
        assert_eq!(summary(&qi), vec![(2, 2, 1), (3, 9, 1), (5, 5, 2)]);
        assert!(qi[0].ramified && !qi[1].ramified);
        assert_eq!(
            summary(&enumerate_norms(&field("cyc:5"), 20)),
            vec![(2, 16, 1), (5, 5, 1), (11, 11, 4)]
        );
    }

    #[test]
    fn theta_examples() {
        let q = field("Q");
        let want = 2f64.ln() + 3f64.ln() + 5f64.ln() + 7f64.ln();
        assert!((theta_total(&q, 10) - want).abs() < 1e-12);
        assert!((want - 5.347).abs() < 1e-3);
        assert_eq!(theta_total(&q, 1), 0.0);
        let sq: f64 = [2f64, 3., 5., 7.].iter().map(|p| p.ln().powi(2)).sum();
        assert!((equal_norm_square_sum(&q, 10) - sq).abs() < 1e-12);
        assert!((sq - 8.0643).abs() < 1e-4);
        assert_eq!(equal_norm_square_sum(&q, 1), 0.0);
    }

    #[test]
    fn theta_gaussian_million() {
        let t = theta_total(&field("Q(i)"), 1_000_000);
        assert!((t / 1e6 - 1.0).abs() < 0.005, "theta = {t}");
    }

    #[test]
    fn partitions_agree() {
        let f = field("cyc:12");
        let x = 300_000;
        let seq = PrimeSums::from_events(&enumerate_norms(&f, x));
        for parts in [1, 3, 7, 16] {
            let par = prime_sums_partitioned(&f, &partition(x, parts), x);
            assert!((par.theta() / seq.theta() - 1.0).abs() < 1e-12);
            assert!((par.equal_norm_square() / seq.equal_norm_square() - 1.0).abs() < 1e-12);
            assert_eq!(
                enumerate_norms_parallel(&f, x, parts),
                enumerate_norms(&f, x)
            );
        }
        // out-of-order ranges
        let mut ranges = partition(x, 5);
        ranges.reverse();
        let rev = prime_sums_partitioned(&f, &ranges, x);
        assert!((rev.theta() / seq.theta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multiplicity_degree_identity() {
        for f in crate::field_catalog::catalog() {
            for e in enumerate_norms(&f, 50_000).iter().filter(|e| !e.ramified) {
                let fdeg = (e.log_norm / (e.p as f64).ln()).round() as u32;
                assert_eq!(e.multiplicity * fdeg, f.degree());
                assert!(e.norm <= 50_000);
            }
        }
    }

    #[test]
    fn galois_generic_matches_quadratic() {
        let a = enumerate_norms(&field("Q(i)"), 20_000);
        let b = enumerate_norms(&field("galois:1,0,1;4;2:2:1"), 20_000);
        assert_eq!(a, b);
        // without local data at 2 the ramified prime is skipped
        let c = enumerate_norms(&field("galois:1,0,1;4;2"), 20_000);
        assert_eq!(&a[1..], &c[..]);
    }

    #[test]
    fn ramified_diagnostic() {
        let r = ramified_contribution(&field("Q(i)"), 100);
        assert!((r.theta() - 2f64.ln()).abs() < 1e-15);
    }
}
