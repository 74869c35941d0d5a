//! Univariate polynomials over `Z` and over `F_p`.
//!
//! Coefficients are stored low-to-high. Everything here works with monic
//! integer polynomials, which is all the field catalog needs.

use num_complex::Complex64;

use crate::arith::{is_prime, mul_mod, pow_mod};

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn degree(v: &[u64]) -> Option<usize> {
    v.iter().rposition(|&c| c != 0)
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Reduction of a monic integer polynomial modulo a prime.
pub fn reduce_mod_p(f: &[i64], p: u64) -> Vec<u64> {
    let mut v: Vec<u64> = f.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
    trim(&mut v);
    v
}

/// Remainder of `a` modulo `m` (`m` nonzero) over `F_p`.
fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    trim(&mut r);
    let dm = degree(m).expect("division by zero polynomial");
    let lead_inv = inv_mod(m[dm], p);
    while let Some(dr) = degree(&r) {
        if dr < dm {
            break;
        }
        let c = mul_mod(r[dr], lead_inv, p);
        let shift = dr - dm;
        for (i, &mc) in m.iter().enumerate().take(dm + 1) {
            let sub = mul_mod(c, mc, p);
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        trim(&mut r);
    }
    r
}

fn quo(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    trim(&mut r);
    let dm = degree(m).expect("division by zero polynomial");
    let lead_inv = inv_mod(m[dm], p);
    let mut q = vec![0u64; r.len().saturating_sub(dm).max(1)];
    while let Some(dr) = degree(&r) {
        if dr < dm {
            break;
        }
        let c = mul_mod(r[dr], lead_inv, p);
        let shift = dr - dm;
        q[shift] = c;
        for (i, &mc) in m.iter().enumerate().take(dm + 1) {
            let sub = mul_mod(c, mc, p);
            r[shift + i] = (r[shift + i] + p - sub) % p;
        }
        trim(&mut r);
    }
    trim(&mut q);
    q
}

fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + mul_mod(x, y, p)) % p;
        }
    }
    trim(&mut out);
    out
}

fn mul_rem(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    rem(&mul(a, b, p), m, p)
}

fn pow_rem(base: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = rem(base, m, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_rem(&acc, &b, m, p);
        }
        e >>= 1;
        if e > 0 {
            b = mul_rem(&b, &b, m, p);
        }
    }
    acc
}

fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let mut out: Vec<u64> = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim(&mut out);
    out
}

fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = rem(&a, &b, p);
        a = b;
        b = r;
    }
    if let Some(d) = degree(&a) {
        let inv = inv_mod(a[d], p);
        a.iter_mut().for_each(|c| *c = mul_mod(*c, inv, p));
    }
    a
}

fn derivative(a: &[u64], p: u64) -> Vec<u64> {
    let mut out: Vec<u64> = a
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| mul_mod(c, i as u64 % p, p))
        .collect();
    trim(&mut out);
    out
}

/// Whether the reduction `f mod p` (same degree, since `f` is monic) is squarefree.
pub fn is_squarefree_mod_p(f: &[i64], p: u64) -> bool {
    let fp = reduce_mod_p(f, p);
    let d = derivative(&fp, p);
    if d.is_empty() {
        return false;
    }
    degree(&gcd(&fp, &d, p)) == Some(0)
}

/// Smallest degree of an irreducible factor of `f mod p`, i.e. the least `d`
/// with `gcd(X^(p^d) - X, f)` nontrivial. Returns `None` when `f mod p` is not
/// squarefree.
pub fn smallest_factor_degree(f: &[i64], p: u64) -> Option<u32> {
    smallest_factor_degree_at_most(f, p, u32::MAX).map(|d| d.expect("some factor exists"))
}

/// As [`smallest_factor_degree`], but stops searching past `max_degree`; the
/// inner `None` means every irreducible factor has degree above the cap.
pub fn smallest_factor_degree_at_most(f: &[i64], p: u64, max_degree: u32) -> Option<Option<u32>> {
    if !is_squarefree_mod_p(f, p) {
        return None;
    }
    let fp = reduce_mod_p(f, p);
    let n = degree(&fp)?;
    let x = vec![0, 1];
    let mut h = rem(&x, &fp, p);
    for d in 1..=n.min(max_degree as usize) {
        h = pow_rem(&h, p, &fp, p);
        let g = gcd(&sub(&h, &x, p), &fp, p);
        if degree(&g).is_some_and(|dg| dg > 0) {
            return Some(Some(d as u32));
        }
    }
    Some(None)
}

/// Degrees of the irreducible factors of a squarefree `f mod p` (distinct-degree
/// factorization). `None` if `f mod p` is not squarefree.
pub fn factor_degrees_mod_p(f: &[i64], p: u64) -> Option<Vec<u32>> {
    if !is_squarefree_mod_p(f, p) {
        return None;
    }
    let mut rest = reduce_mod_p(f, p);
    let x = vec![0, 1];
    let mut h = x.clone();
    let mut out = Vec::new();
    let mut d = 0u32;
    while degree(&rest).is_some_and(|dr| dr > 0) {
        d += 1;
        if 2 * d as usize > degree(&rest).unwrap() {
            out.push(degree(&rest).unwrap() as u32);
            break;
        }
        h = pow_rem(&h, p, &rest, p);
        let g = gcd(&sub(&h, &x, p), &rest, p);
        let dg = degree(&g).unwrap_or(0);
        if dg > 0 {
            out.extend(std::iter::repeat_n(d, dg / d as usize));
            rest = quo(&rest, &g, p);
            h = rem(&h, &rest, p);
        }
    }
    Some(out)
}

/// Exact quotient of integer polynomials by a monic divisor, or `None` if the
/// division leaves a remainder.
pub fn exact_div_monic(a: &[i64], m: &[i64]) -> Option<Vec<i64>> {
    let dm = m.len().checked_sub(1)?;
    debug_assert_eq!(m[dm], 1);
    let mut r: Vec<i128> = a.iter().map(|&c| c as i128).collect();
    if r.len() < m.len() {
        return r.iter().all(|&c| c == 0).then(Vec::new);
    }
    let mut q = vec![0i128; r.len() - dm];
    for shift in (0..q.len()).rev() {
        let c = r[shift + dm];
        q[shift] = c;
        for (i, &mc) in m.iter().enumerate() {
            r[shift + i] -= c * mc as i128;
        }
    }
    if r.iter().any(|&c| c != 0) {
        return None;
    }
    q.into_iter().map(|c| i64::try_from(c).ok()).collect()
}

/// The n-th cyclotomic polynomial.
pub fn cyclotomic_polynomial(n: u64) -> Vec<i64> {
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in crate::arith::divisors(n) {
        if d < n {
            let phi_d = cyclotomic_polynomial(d);
            num = exact_div_monic(&num, &phi_d).expect("cyclotomic division is exact");
        }
    }
    num
}

fn eval_complex(f: &[i64], z: Complex64) -> Complex64 {
    f.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c as f64)
}

/// Complex roots of a monic squarefree polynomial (Durand-Kerner).
fn complex_roots(f: &[i64]) -> Vec<Complex64> {
    let n = f.len() - 1;
    let bound = 1.0
        + f[..n]
            .iter()
            .map(|&c| (c as f64).abs())
            .fold(0.0f64, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32) * (bound / 2.0).max(1.0))
        .collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let zi = roots[i];
            let denom = roots
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, (_, &zj)| acc * (zi - zj));
            let step = eval_complex(f, zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-14 * bound {
            break;
        }
    }
    roots
}

/// Advances `idx` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn subset_sums(degrees: &[u32], n: usize) -> Vec<bool> {
    let mut reach = vec![false; n + 1];
    reach[0] = true;
    for &d in degrees {
        for s in (d as usize..=n).rev() {
            if reach[s - d as usize] {
                reach[s] = true;
            }
        }
    }
    reach
}

/// Irreducibility over `Q` of a monic integer polynomial.
///
/// Factor-degree patterns modulo small primes rule out most candidate factor
/// degrees; the remaining degrees are settled by testing products of complex
/// roots for an exact integer factor.
pub fn is_irreducible_over_q(f: &[i64]) -> bool {
    let n = f.len() - 1;
    if n <= 1 {
        return n == 1;
    }
    let mut possible = vec![true; n + 1];
    let mut seen = 0;
    for p in (2u64..).filter(|&p| is_prime(p)).take(300) {
        if let Some(degs) = factor_degrees_mod_p(f, p) {
            seen += 1;
            let reach = subset_sums(&degs, n);
            possible.iter_mut().zip(&reach).for_each(|(a, &b)| *a &= b);
            if seen >= 40 {
                break;
            }
        }
    }
    if seen == 0 {
        // no squarefree reduction: f has a repeated factor over Q
        return false;
    }
    let candidates: Vec<usize> = (1..=n / 2).filter(|&k| possible[k]).collect();
    if candidates.is_empty() {
        return true;
    }
    let roots = complex_roots(f);
    for k in candidates {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut prod = vec![Complex64::new(1.0, 0.0)];
            for &i in &idx {
                let mut next = vec![Complex64::new(0.0, 0.0); prod.len() + 1];
                for (j, &c) in prod.iter().enumerate() {
                    next[j + 1] += c;
                    next[j] -= c * roots[i];
                }
                prod = next;
            }
            let near_integer = prod
                .iter()
                .all(|c| c.im.abs() < 1e-6 && (c.re - c.re.round()).abs() < 1e-6);
            if near_integer {
                let g: Vec<i64> = prod.iter().map(|c| c.re.round() as i64).collect();
                if exact_div_monic(f, &g).is_some() {
                    return false;
                }
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclotomic_polys() {
        assert_eq!(cyclotomic_polynomial(1), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(5), vec![1, 1, 1, 1, 1]);
        assert_eq!(cyclotomic_polynomial(8), vec![1, 0, 0, 0, 1]);
        assert_eq!(cyclotomic_polynomial(12), vec![1, 0, -1, 0, 1]);
    }

    #[test]
    fn ddf_degrees() {
        // x^2 + 1 splits mod 5, stays irreducible mod 3
        assert_eq!(factor_degrees_mod_p(&[1, 0, 1], 5), Some(vec![1, 1]));
        assert_eq!(factor_degrees_mod_p(&[1, 0, 1], 3), Some(vec![2]));
        assert_eq!(factor_degrees_mod_p(&[1, 0, 1], 2), None);
        // Phi_5 mod 19: order of 19 mod 5 is 2
        assert_eq!(factor_degrees_mod_p(&[1, 1, 1, 1, 1], 19), Some(vec![2, 2]));
        assert_eq!(smallest_factor_degree(&[1, 1, 1, 1, 1], 19), Some(2));
        assert_eq!(smallest_factor_degree(&[1, 1, 1, 1, 1], 11), Some(1));
        assert_eq!(smallest_factor_degree(&[1, 1, 1, 1, 1], 2), Some(4));
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible_over_q(&[1, 0, 1]));
        assert!(is_irreducible_over_q(&[1, 0, 0, 0, 1])); // x^4+1, reducible mod every p
        assert!(is_irreducible_over_q(&[1, 0, -10, 0, 1])); // Q(sqrt2, sqrt3)
        assert!(is_irreducible_over_q(&[1, -1, 0, 1])); // x^3 - x + 1... reversed: 1 - x + x^3
        assert!(!is_irreducible_over_q(&[-1, 0, 1])); // x^2 - 1
        assert!(!is_irreducible_over_q(&[4, 0, 5, 0, 1])); // (x^2+1)(x^2+4)
        assert!(!is_irreducible_over_q(&[1, 2, 1])); // (x+1)^2
        assert!(!is_irreducible_over_q(&[-2, 0, 0, 0, 0, 1, 0, 0, 1]));
    }

    #[test]
    fn exact_division() {
        assert_eq!(exact_div_monic(&[-1, 0, 1], &[1, 1]), Some(vec![-1, 1]));
        assert_eq!(exact_div_monic(&[1, 0, 1], &[1, 1]), None);
    }
}
