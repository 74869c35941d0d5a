//! `theta_K(x; q, a)` tables, the variance `S(x; Q1, Q2)` with its split into
//! equal-norm (`H`) and distinct-norm (`J`) parts, and predicted values.
//!
//! The per-modulus work buckets one shared event list by residue. Each
//! modulus yields an independent contribution; these are collected in
//! modulus order and summed sequentially, so results do not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::arith::{factorize, gcd, CompensatedSum};
use crate::dirichlet_constants::ConstantSet;
use crate::error::{Error, Result};
use crate::field_catalog::FieldSpec;
use crate::galois_image::BaseData;
use crate::ideal_stream::{enumerate_norms_parallel, NormEvent};
use crate::sieve::primes_up_to;

/// Largest supported `x` (the event list is held in memory).
pub const MAX_X: u64 = 1_000_000_000;

/// Cap on the number of event pairs visited by the pairwise `J` routes.
pub const MAX_PAIRS: u64 = 100_000_000;

/// Per-residue totals `theta_K(x; q, a)` for `a` in `G_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTable {
    pub q: u64,
    pub x: u64,
    /// `(a, theta_K(x; q, a))` for every `a` in `G_q` (as a residue in
    /// `[1, q]`), ascending in `a`.
    pub values: Vec<(u64, f64)>,
    /// Mass of prime ideals whose norm shares a factor with `q`.
    pub excluded: f64,
}

impl ThetaTable {
    pub fn get(&self, a: u64) -> Option<f64> {
        let a = if a.is_multiple_of(self.q) {
            self.q
        } else {
            a % self.q
        };
        self.values
            .binary_search_by_key(&a, |&(r, _)| r)
            .ok()
            .map(|i| self.values[i].1)
    }

    pub fn total(&self) -> f64 {
        self.values
            .iter()
            .map(|&(_, v)| v)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values
            .iter()
            .map(|&(_, v)| v * v)
            .collect::<CompensatedSum>()
            .value()
    }
}

#[derive(Clone, Copy, Debug)]
struct Compact {
    p: u64,
    norm: u32,
    weight: f64,
}

/// Which statement of the asymptotic a prediction comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictedForm {
    /// `[K:Q] x^2 log x + C1 x^2`, for `Q = x`.
    Eq5FullRange,
    /// `[K:Q] x Q log x - (phi(m_K)/phi_K(m_K)) x Q log(x/Q) + C2 Q x`.
    Eq6General,
    /// `[K:Q] x Q log Q + C2 Q x`, the same expression when `K` is abelian.
    AbelianSimplified,
}

impl PredictedForm {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictedForm::Eq5FullRange => "eq5_full_range",
            PredictedForm::Eq6General => "eq6_general",
            PredictedForm::AbelianSimplified => "abelian_simplified",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub form: PredictedForm,
    /// The general form's value, kept alongside the simplified one.
    pub general: f64,
}

/// Predicted `S(x; 0, Q)`.
///
/// For abelian fields with `Q < x` the simplified form is returned after
/// checking it agrees with the general form.
pub fn predicted_s(
    field: &FieldSpec,
    x: u64,
    q: u64,
    constants: &ConstantSet,
) -> Result<Prediction> {
    if q == 0 || q > x {
        return Err(Error::Domain(format!(
            "prediction needs 1 <= Q <= x, got Q = {q}, x = {x}"
        )));
    }
    let degree = field.degree() as f64;
    let (xf, qf) = (x as f64, q as f64);
    if q == x {
        let value = degree * xf * xf * xf.ln() + constants.big_c1.value * xf * xf;
        return Ok(Prediction {
            value,
            form: PredictedForm::Eq5FullRange,
            general: value,
        });
    }
    let ratio = constants.ratio_mk as f64;
    let c2 = constants.big_c2.value;
    let general = degree * xf * qf * xf.ln() - ratio * xf * qf * (xf / qf).ln() + c2 * qf * xf;
    if field.is_abelian() && constants.ratio_mk == field.degree() as u64 {
        let simplified = degree * xf * qf * qf.ln() + c2 * qf * xf;
        let scale = degree * xf * qf * xf.ln() + (c2 * qf * xf).abs();
        assert!(
            (simplified - general).abs() <= 1e-12 * scale,
            "abelian simplification disagrees: {simplified} vs {general}"
        );
        return Ok(Prediction {
            value: simplified,
            form: PredictedForm::AbelianSimplified,
            general,
        });
    }
    Ok(Prediction {
        value: general,
        form: PredictedForm::Eq6General,
        general,
    })
}

/// Predicted `S(x; Q1, Q2)` as the difference of the predictions at `Q2` and
/// `Q1` (just the one at `Q2` when `Q1 = 0`).
pub fn predicted_range(
    field: &FieldSpec,
    x: u64,
    q1: u64,
    q2: u64,
    constants: &ConstantSet,
) -> Result<Prediction> {
    let upper = predicted_s(field, x, q2, constants)?;
    if q1 == 0 {
        return Ok(upper);
    }
    let lower = predicted_s(field, x, q1, constants)?;
    Ok(Prediction {
        value: upper.value - lower.value,
        form: upper.form,
        general: upper.general - lower.general,
    })
}

/// One `(x, Q1, Q2)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub x: u64,
    pub q1: u64,
    pub q2: u64,
    pub s: f64,
    pub h: Option<f64>,
    pub j: Option<f64>,
    pub predicted_s: f64,
    pub predicted_form: PredictedForm,
    /// `(S - predicted) / (x (Q2 - Q1))`; for `Q1 = 0, Q2 = x` this is
    /// `S/x^2 - log x - C1` in the rational case.
    pub residual: f64,
}

/// Scratch buffers for bucketing, reused across moduli.
struct Buckets {
    sums: Vec<f64>,
    touched: Vec<u32>,
}

impl Buckets {
    fn new(size: usize) -> Self {
        Self {
            sums: vec![0.0; size],
            touched: Vec::new(),
        }
    }
}

/// A norm event list for one `(K, x)`, shared by every modulus.
pub struct VarianceEngine<'a> {
    field: &'a FieldSpec,
    base: &'a BaseData,
    x: u64,
    events: Vec<Compact>,
    theta: f64,
    equal_norm_total: f64,
}

fn check_range(x: u64, q1: u64, q2: u64) -> Result<()> {
    if q1 < q2 && q2 <= x {
        Ok(())
    } else {
        Err(Error::EmptyRange { q1, q2, x })
    }
}

impl<'a> VarianceEngine<'a> {
    pub fn new(field: &'a FieldSpec, base: &'a BaseData, x: u64) -> Result<Self> {
        if x < 2 {
            return Err(Error::Domain(format!("x must be at least 2, got {x}")));
        }
        if x > MAX_X {
            return Err(Error::Budget(format!(
                "x = {x} exceeds the in-memory limit {MAX_X}"
            )));
        }
        let parts = 4 * rayon::current_num_threads();
        let events: Vec<Compact> = enumerate_norms_parallel(field, x, parts)
            .iter()
            .map(|e: &NormEvent| Compact {
                p: e.p,
                norm: e.norm as u32,
                weight: e.weight(),
            })
            .collect();
        let theta = events
            .iter()
            .map(|e| e.weight)
            .collect::<CompensatedSum>()
            .value();
        let equal_norm_total = events
            .iter()
            .map(|e| e.weight * e.weight)
            .collect::<CompensatedSum>()
            .value();
        Ok(Self {
            field,
            base,
            x,
            events,
            theta,
            equal_norm_total,
        })
    }

    pub fn field(&self) -> &FieldSpec {
        self.field
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// `theta_K(x)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Events whose rational prime divides `q`.
    fn events_dividing(&self, q: u64) -> Vec<&Compact> {
        factorize(q)
            .into_iter()
            .filter_map(|(p, _)| {
                self.events
                    .binary_search_by_key(&p, |e| e.p)
                    .ok()
                    .map(|i| &self.events[i])
            })
            .collect()
    }

    /// Buckets events by residue mod `q`, clears those sharing a factor with
    /// `q`, and returns their mass. Every remaining touched residue is
    /// checked against `G_q`.
    fn bucket(&self, q: u64, buckets: &mut Buckets) -> Result<f64> {
        let q32 = q as u32;
        for e in &self.events {
            let r = e.norm % q32;
            let slot = &mut buckets.sums[r as usize];
            if *slot == 0.0 {
                buckets.touched.push(r);
            }
            *slot += e.weight;
        }
        let mut excluded = 0.0;
        for e in self.events_dividing(q) {
            let r = (e.norm % q32) as usize;
            // only this event can land on a residue divisible by p
            excluded += buckets.sums[r];
            buckets.sums[r] = 0.0;
        }
        let d = gcd(q, self.base.m_k());
        if d > 1 {
            let image = self
                .base
                .image_at_divisor(d)
                .ok_or(Error::MissingBaseData(d))?;
            for &r in &buckets.touched {
                if buckets.sums[r as usize] != 0.0 && !image.contains(r as u64 % d) {
                    self.reset(buckets);
                    return Err(Error::ImageViolation { q, norm: r as u64 });
                }
            }
        }
        Ok(excluded)
    }

    fn reset(&self, buckets: &mut Buckets) {
        for &r in &buckets.touched {
            buckets.sums[r as usize] = 0.0;
        }
        buckets.touched.clear();
    }

    fn check_modulus(&self, q: u64) -> Result<()> {
        if q == 0 || q > self.x {
            return Err(Error::Domain(format!(
                "modulus {q} outside [1, x = {}]",
                self.x
            )));
        }
        Ok(())
    }

    /// `theta_K(x; q, a)` for every `a` in `G_q`.
    pub fn theta_table(&self, q: u64) -> Result<ThetaTable> {
        self.check_modulus(q)?;
        let mut buckets = Buckets::new(q as usize);
        let excluded = self.bucket(q, &mut buckets)?;
        let record = self.base.gq_record(q);
        let values = record
            .members()
            .into_iter()
            .map(|a| (a, buckets.sums[(a % q) as usize]))
            .collect();
        Ok(ThetaTable {
            q,
            x: self.x,
            values,
            excluded,
        })
    }

    /// `sum_{a in G_q} (theta_K(x; q, a) - x / phi_K(q))^2`.
    fn contribution(&self, q: u64, buckets: &mut Buckets) -> Result<f64> {
        self.bucket(q, buckets)?;
        let phi_k = self.base.phi_k(q);
        let mean = self.x as f64 / phi_k as f64;
        let mut acc = CompensatedSum::new();
        let mut occupied = 0u64;
        for &r in &buckets.touched {
            let v = buckets.sums[r as usize];
            if v != 0.0 {
                acc += (v - mean) * (v - mean);
                occupied += 1;
            }
        }
        acc += (phi_k - occupied) as f64 * mean * mean;
        self.reset(buckets);
        Ok(acc.value())
    }

    /// Per-modulus contributions to `S` for `q` in `(q1, q2]`, in order.
    pub fn contributions(&self, q1: u64, q2: u64) -> Result<Vec<f64>> {
        check_range(self.x, q1, q2)?;
        let size = q2 as usize;
        let chunk = 64u64;
        let starts: Vec<u64> = (q1 + 1..=q2).step_by(chunk as usize).collect();
        let blocks: Vec<Result<Vec<f64>>> = starts
            .into_par_iter()
            .map_init(
                || Buckets::new(size),
                |buckets, start| {
                    (start..=(start + chunk - 1).min(q2))
                        .map(|q| self.contribution(q, buckets))
                        .collect()
                },
            )
            .collect();
        let mut out = Vec::with_capacity((q2 - q1) as usize);
        for b in blocks {
            out.extend(b?);
        }
        Ok(out)
    }

    /// `S(x; Q1, Q2)`.
    pub fn variance(&self, q1: u64, q2: u64) -> Result<f64> {
        Ok(self
            .contributions(q1, q2)?
            .into_iter()
            .collect::<CompensatedSum>()
            .value())
    }

    /// `S(x; 0, Q)` for each `Q` in an ascending grid, from one pass over
    /// `q <= max Q`.
    pub fn variance_prefix(&self, grid: &[u64]) -> Result<Vec<f64>> {
        let Some(&top) = grid.last() else {
            return Ok(Vec::new());
        };
        if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
            return Err(Error::Domain(
                "Q grid must be positive and strictly increasing".into(),
            ));
        }
        let contributions = self.contributions(0, top)?;
        let mut acc = CompensatedSum::new();
        let mut out = Vec::with_capacity(grid.len());
        let mut next = grid.iter().peekable();
        for (i, c) in contributions.into_iter().enumerate() {
            acc += c;
            while next.peek().is_some_and(|&&g| g == i as u64 + 1) {
                out.push(acc.value());
                next.next();
            }
        }
        Ok(out)
    }

    /// `sum_{a in G_q} theta_K(x; q, a)^2`.
    pub fn sum_theta_squared(&self, q: u64) -> Result<f64> {
        Ok(self.theta_table(q)?.sum_of_squares())
    }

    /// `(H_q, J_q)` for one modulus, with `J_q` by a direct loop over pairs
    /// of distinct congruent norms.
    pub fn hj_for_modulus(&self, q: u64) -> Result<(f64, f64)> {
        self.check_modulus(q)?;
        let n = self.events.len() as u64;
        if n * n.saturating_sub(1) / 2 > MAX_PAIRS {
            return Err(Error::Budget(format!(
                "{n} events exceed the pair budget {MAX_PAIRS}"
            )));
        }
        let kept: Vec<(u64, f64)> = self
            .events
            .iter()
            .filter(|e| !q.is_multiple_of(e.p))
            .map(|e| (e.norm as u64 % q, e.weight))
            .collect();
        let h = kept
            .iter()
            .map(|&(_, w)| w * w)
            .collect::<CompensatedSum>()
            .value();
        let mut j = CompensatedSum::new();
        for (i, &(ri, wi)) in kept.iter().enumerate() {
            for &(rj, wj) in &kept[i + 1..] {
                if ri == rj {
                    j += 2.0 * wi * wj;
                }
            }
        }
        Ok((h, j.value()))
    }

    /// `(H, J)` over `q` in `(q1, q2]`.
    ///
    /// `J` is accumulated by differences: a pair of distinct norms `N < N'`
    /// contributes `2 w w'` once for every divisor of `N' - N` in the range.
    /// Such a divisor is automatically coprime to both norms, since the
    /// rational primes below them differ.
    pub fn decomposition_hj(&self, q1: u64, q2: u64) -> Result<(f64, f64)> {
        check_range(self.x, q1, q2)?;
        let n = self.events.len() as u64;
        if n * n.saturating_sub(1) / 2 > MAX_PAIRS {
            return Err(Error::Budget(format!(
                "{n} events exceed the pair budget {MAX_PAIRS}"
            )));
        }
        let mut h = CompensatedSum::new();
        for q in q1 + 1..=q2 {
            let removed: f64 = self
                .events_dividing(q)
                .iter()
                .map(|e| e.weight * e.weight)
                .sum();
            h += self.equal_norm_total - removed;
        }
        let mut by_norm: Vec<(u32, f64)> = self.events.iter().map(|e| (e.norm, e.weight)).collect();
        by_norm.sort_unstable_by_key(|&(nm, _)| nm);
        let mut diff_weight = vec![0.0f64; self.x as usize + 1];
        for (i, &(ni, wi)) in by_norm.iter().enumerate() {
            for &(nj, wj) in &by_norm[i + 1..] {
                diff_weight[(nj - ni) as usize] += 2.0 * wi * wj;
            }
        }
        let mut j = CompensatedSum::new();
        for q in q1 + 1..=q2 {
            let mut m = q;
            while m <= self.x {
                j += diff_weight[m as usize];
                m += q;
            }
        }
        Ok((h.value(), j.value()))
    }

    /// Measured `S` and its prediction for one cell; `H` and `J` only when
    /// requested.
    pub fn report(
        &self,
        q1: u64,
        q2: u64,
        constants: &ConstantSet,
        with_hj: bool,
    ) -> Result<VarianceReport> {
        let s = self.variance(q1, q2)?;
        let (h, j) = if with_hj {
            let (h, j) = self.decomposition_hj(q1, q2)?;
            (Some(h), Some(j))
        } else {
            (None, None)
        };
        let prediction = predicted_range(self.field, self.x, q1, q2, constants)?;
        Ok(VarianceReport {
            x: self.x,
            q1,
            q2,
            s,
            h,
            j,
            predicted_s: prediction.value,
            predicted_form: prediction.form,
            residual: (s - prediction.value) / (self.x as f64 * (q2 - q1) as f64),
        })
    }
}

/// `S(x; Q1, Q2)` from scratch.
#[allow(non_snake_case)]
pub fn variance_S(field: &FieldSpec, base: &BaseData, x: u64, q1: u64, q2: u64) -> Result<f64> {
    check_range(x, q1, q2)?;
    VarianceEngine::new(field, base, x)?.variance(q1, q2)
}

/// `theta_K(x; q, a)` table from scratch.
pub fn theta_table(field: &FieldSpec, base: &BaseData, x: u64, q: u64) -> Result<ThetaTable> {
    VarianceEngine::new(field, base, x)?.theta_table(q)
}

/// Reference `theta_K(x; q, a)` by a double loop over classes and prime
/// ideals, one ideal at a time. Quadratic in the input; for checking only.
pub fn brute_force_theta(
    field: &FieldSpec,
    base: &BaseData,
    x: u64,
    q: u64,
) -> Result<Vec<(u64, f64)>> {
    let mut ideals = Vec::new();
    for p in primes_up_to(x) {
        let s = field.splitting(p)?;
        let norm = p.checked_pow(s.f).unwrap_or(u64::MAX);
        if norm <= x && s.is_exact() {
            for _ in 0..s.g {
                ideals.push(norm);
            }
        }
    }
    Ok(base
        .gq_record(q)
        .members()
        .into_iter()
        .map(|a| {
            let mut acc = 0.0;
            for &n in &ideals {
                if gcd(n, q) == 1 && n % q == a % q {
                    acc += (n as f64).ln();
                }
            }
            (a, acc)
        })
        .collect())
}

/// `{x / 2^k, ..., x / 2, x}`.
pub fn geometric_grid(x: u64, k: u32) -> Vec<u64> {
    let mut grid: Vec<u64> = (0..=k).rev().map(|i| x >> i).filter(|&q| q > 0).collect();
    grid.dedup();
    grid
}
