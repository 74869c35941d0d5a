//! The Euler product `h(s)`, the local correction factors `D_{K,l}(s)` and
//! the constants in the asymptotics of `sum 1/phi_K(n)`.
//!
//! `D_K(s) = sum phi_K(n)^-1 n^(1-s)` factors as
//! `zeta(s) zeta(s+1) h(s) F_m(s)` where `F_m` collects the Euler factors at
//! the primes dividing `m_K`. When the local product formula for `phi_K`
//! holds, `F_m` is the product of the `D_{K,l}`; [`correction_product`]
//! computes it from the subgroups `G_d` directly, so it is also valid for
//! fields where that formula fails.
//!
//! With `F(s) = h(s) F_m(s)`, the residues of the Perron integrals give
//!
//! ```text
//! c1 = zeta(2) F(1)
//! c2 = F(1) zeta'(2) + zeta(2) F'(1) + zeta(2) F(1) (gamma - 3/2)
//! c3 = F(0) (gamma + log 2 pi) + F'(0),        F(0) = phi(m_K) / phi_K(m_K)
//! c4 = F(1) zeta'(2) + zeta(2) F'(1) + gamma zeta(2) F(1)
//! C1 = c2 - [K:Q]
//! C2 = -[K:Q] - c3
//! ```

use std::sync::OnceLock;

use crate::arith::{divisors, euler_phi, factorize, valuation, CompensatedSum};
use crate::error::{Error, Result};
use crate::field_catalog::FieldSpec;
use crate::galois_image::BaseData;
use crate::regression::{fit_line, mean_with_error};
use crate::sieve::{prime_table, simple_primes};
use crate::zeta::{zeta, zeta_derivative, EULER_GAMMA};

/// `h(s)` is evaluated for `s` strictly above this bound.
pub const H_DOMAIN_MIN: f64 = -0.4;

/// Default finite-difference step for `F'`.
pub const DERIVATIVE_STEP: f64 = 1e-5;

/// Fits whose residual RMS exceeds this are flagged.
pub const FIT_RESIDUAL_FLAG: f64 = 1e-3;

/// Primes up to this bound enter `h(s)` explicitly; the rest are summed as
/// a series in prime zeta tails.
const SPLIT: u64 = 10_000;
const SERIES_DEGREE: usize = 18;
const NEGLIGIBLE: f64 = 1e-22;

/// `1 - l^-s`, accurate near `s = 0`.
fn one_minus_pow(l: f64, s: f64) -> f64 {
    -(-s * l.ln()).exp_m1()
}

/// `h(s) = prod_l (1 + u_l(s))`.
fn local_u(l: f64, s: f64) -> f64 {
    l.powf(-(s + 2.0)) * one_minus_pow(l, s) / (1.0 - 1.0 / l)
}

fn check_h_domain(s: f64) -> Result<()> {
    if s.is_finite() && s > H_DOMAIN_MIN {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "h(s) needs s > {H_DOMAIN_MIN}, got {s}"
        )))
    }
}

fn small_primes() -> &'static [f64] {
    static PRIMES: OnceLock<Vec<f64>> = OnceLock::new();
    PRIMES.get_or_init(|| simple_primes(SPLIT).into_iter().map(|p| p as f64).collect())
}

/// Coefficients `c_ab` of `log(1 + u) = sum c_ab w^a t^b`, where
/// `u = (w - w^2) t^2 / (1 - t)`, `w = l^-s`, `t = 1/l`.
fn log_series() -> &'static [(u32, u32, f64)] {
    static SERIES: OnceLock<Vec<(u32, u32, f64)>> = OnceLock::new();
    SERIES.get_or_init(|| {
        let d = SERIES_DEGREE;
        let mut u = vec![vec![0.0; d + 1]; d + 1];
        for b in 2..=d {
            u[1][b] = 1.0;
            u[2][b] = -1.0;
        }
        let mut acc = vec![vec![0.0; d + 1]; d + 1];
        let mut power = u.clone();
        for k in 1..=d / 2 {
            let c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            for a in 0..=d {
                for b in 0..=d {
                    acc[a][b] += c * power[a][b];
                }
            }
            let mut next = vec![vec![0.0; d + 1]; d + 1];
            for a1 in 0..=d {
                for b1 in 0..=d {
                    if power[a1][b1] == 0.0 {
                        continue;
                    }
                    for a2 in 1..=2 {
                        for b2 in 2..=d {
                            if a1 + a2 > d || b1 + b2 > d {
                                break;
                            }
                            next[a1 + a2][b1 + b2] += power[a1][b1] * u[a2][b2];
                        }
                    }
                }
            }
            power = next;
        }
        let mut out = Vec::new();
        for (a, row) in acc.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    out.push((a as u32, b as u32, c));
                }
            }
        }
        out
    })
}

fn mobius(k: u64) -> i32 {
    let f = factorize(k);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `log` of `zeta(z)` with the Euler factors at primes `<= SPLIT` removed.
fn log_rough_zeta(z: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    acc += zeta(z).ln();
    for &p in small_primes() {
        acc += (-p.powf(-z)).ln_1p();
    }
    acc.value()
}

/// `sum_{p > SPLIT} p^-z` for `z > 1`, by Moebius inversion of the rough zeta.
fn prime_zeta_tail(z: f64) -> f64 {
    let split = SPLIT as f64;
    let mut acc = CompensatedSum::new();
    for k in 1u64.. {
        let e = k as f64 * z;
        if split.powf(1.0 - e) / (e - 1.0) < NEGLIGIBLE {
            break;
        }
        let mu = mobius(k);
        if mu != 0 {
            acc += mu as f64 / k as f64 * log_rough_zeta(e);
        }
    }
    acc.value()
}

/// `h(s) = prod_l {1 + l^-(s+2) (1 - l^-s) (1 - 1/l)^-1}` for `s > -0.4`.
///
/// Factors for `l <= 10^4` are multiplied directly; the remaining ones are
/// summed in log form as a double power series whose terms are prime zeta
/// tails, giving full double precision across the domain.
pub fn euler_h(s: f64) -> Result<f64> {
    check_h_domain(s)?;
    let mut log_h = CompensatedSum::new();
    for &l in small_primes() {
        log_h += local_u(l, s).ln_1p();
    }
    let split = SPLIT as f64;
    for &(a, b, c) in log_series() {
        let e = a as f64 * s + b as f64;
        if split.powf(1.0 - e) / (e - 1.0) < NEGLIGIBLE {
            continue;
        }
        log_h += c * prime_zeta_tail(e);
    }
    Ok(log_h.value().exp())
}

/// The product over primes `l <= p_max` only, with a rigorous bound on
/// `|h(s) - partial|`. Primes are taken from the table below `2^24`.
pub fn euler_h_truncated(s: f64, p_max: u64) -> Result<(f64, f64)> {
    check_h_domain(s)?;
    let table = prime_table();
    let mut log_h = CompensatedSum::new();
    let mut last = 1u64;
    for &p in table.iter().take_while(|&&p| (p as u64) <= p_max) {
        log_h += local_u(p as f64, s).ln_1p();
        last = p as u64;
    }
    let partial = log_h.value().exp();
    // Past P = last the factors satisfy |u_l| <= (1 + 1/P) l^-sigma with
    // sigma = s + 2 (s >= 0) or 2s + 2 (s < 0), and sum_{n > P} n^-sigma is
    // at most P^(1-sigma) / (sigma - 1).
    let pf = last.max(2) as f64;
    let sigma = if s >= 0.0 { s + 2.0 } else { 2.0 * s + 2.0 };
    let c = 1.0 + 1.0 / pf;
    let u_max = c * pf.powf(-sigma);
    let sum_u = c * pf.powf(1.0 - sigma) / (sigma - 1.0);
    let log_bound = sum_u / (1.0 - u_max);
    Ok((partial, partial * log_bound.exp_m1()))
}

/// `D_{K,l}(s)` for a prime `l | m_K`, including the limits at `s = 0, 1`.
///
/// Numerator and denominator are both multiplied by `1 - l^-s`, which
/// clears the removable singularity at `s = 0`; the singularity at `s = 1`
/// disappears once the geometric sum is written out term by term.
pub fn correction_factor(base: &BaseData, l: u64, s: f64) -> Result<f64> {
    let local = base
        .locals()
        .get(&l)
        .copied()
        .ok_or(Error::NotConductorPrime(l))?;
    let lf = l as f64;
    let inv = 1.0 / local.phi_k_at_l as f64;
    let r = lf.powf(1.0 - s);
    let mut geometric = 0.0;
    let mut rp = 1.0;
    for _ in 1..local.b {
        rp *= r;
        geometric += rp;
    }
    let num = one_minus_pow(lf, s) * (1.0 + inv * geometric) + inv * r.powi(local.b as i32);
    let den = 1.0 + lf.powf(-s) / (lf - 1.0);
    Ok(num / den)
}

/// The Euler factors of `D_K(s)` at primes dividing `m_K`, divided by those
/// of `D(s)`. Uses `phi_K(n) = phi(n) / [A_d : Q]` with `d = gcd(n, m_K)`.
/// Equals the product of [`correction_factor`] over `l | m_K` whenever the
/// local product formula holds.
pub fn correction_product(base: &BaseData, s: f64) -> f64 {
    let locals: Vec<(u64, u32)> = base.locals().iter().map(|(&l, loc)| (l, loc.b)).collect();
    let mut num = CompensatedSum::new();
    for d in divisors(base.m_k()) {
        let mut w = base.index_at(d) as f64;
        for &(l, b) in &locals {
            let lf = l as f64;
            let beta = valuation(d, l);
            let scale = |k: u32| lf.powf(k as f64 * (1.0 - s)) / euler_phi(l.pow(k)) as f64;
            w *= if beta == 0 {
                one_minus_pow(lf, s)
            } else if beta < b {
                one_minus_pow(lf, s) * scale(beta)
            } else {
                scale(b)
            };
        }
        num += w;
    }
    let den: f64 = locals
        .iter()
        .map(|&(l, _)| 1.0 + (l as f64).powf(-s) / (l as f64 - 1.0))
        .product();
    num.value() / den
}

/// `F(s) = h(s) F_m(s)`.
pub fn euler_f(base: &BaseData, s: f64) -> Result<f64> {
    Ok(euler_h(s)? * correction_product(base, s))
}

/// `zeta(s) zeta(s+1) h(s) F_m(s)`, the factored form of `D_K(s)` (`s > 1`).
pub fn dirichlet_product(base: &BaseData, s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!(
            "D_K(s) converges for s > 1, got {s}"
        )));
    }
    Ok(zeta(s) * zeta(s + 1.0) * euler_f(base, s)?)
}

/// `sum_{n <= n_max} 1 / (phi_K(n) n^(s-1))`.
pub fn dirichlet_partial_sum(base: &BaseData, s: f64, n_max: usize) -> f64 {
    let table = base.phi_k_table(n_max);
    let mut acc = CompensatedSum::new();
    for n in (1..=n_max).rev() {
        acc += (n as f64).powf(1.0 - s) / table[n] as f64;
    }
    acc.value()
}

/// Central difference with one Richardson step.
pub fn derivative<F>(f: F, s: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let d = |h: f64| -> Result<f64> { Ok((f(s + h)? - f(s - h)?) / (2.0 * h)) };
    Ok((4.0 * d(step / 2.0)? - d(step)?) / 3.0)
}

/// `c1 = zeta(2) zeta(3) / zeta(6) prod_{l | m_K} D_{K,l}(1)`.
pub fn leading_constant_c1(base: &BaseData) -> f64 {
    zeta(2.0) * zeta(3.0) / zeta(6.0) * correction_product(base, 1.0)
}

/// `C1` with `F'(1)` taken at the given finite-difference step.
pub fn constant_c1_with_step(base: &BaseData, step: f64) -> Result<f64> {
    let f1 = euler_f(base, 1.0)?;
    let df1 = derivative(|s| euler_f(base, s), 1.0, step)?;
    let z2 = zeta(2.0);
    let c2 = f1 * zeta_derivative(2.0) + z2 * df1 + z2 * f1 * (EULER_GAMMA - 1.5);
    Ok(c2 - base.degree() as f64)
}

/// `C1 = F(1) zeta'(2) + F(1) (2 gamma - 3) pi^2 / 12 + F'(1) pi^2 / 6 - [K:Q]`.
#[allow(non_snake_case)]
pub fn constant_C1(base: &BaseData) -> Result<f64> {
    constant_c1_with_step(base, DERIVATIVE_STEP)
}

/// Every constant from its closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaurentConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub big_c1: f64,
    pub big_c2: f64,
    pub f1: f64,
    pub f1_prime: f64,
    pub f0_prime: f64,
}

pub fn laurent_constants(base: &BaseData) -> Result<LaurentConstants> {
    let f = |s: f64| euler_f(base, s);
    let f1 = f(1.0)?;
    let f1_prime = derivative(f, 1.0, DERIVATIVE_STEP)?;
    let f0_prime = derivative(f, 0.0, DERIVATIVE_STEP)?;
    let z2 = zeta(2.0);
    let dz2 = zeta_derivative(2.0);
    let degree = base.degree() as f64;
    let ratio = base.ratio_mk() as f64;
    let c2 = f1 * dz2 + z2 * f1_prime + z2 * f1 * (EULER_GAMMA - 1.5);
    let c3 = ratio * (EULER_GAMMA + (2.0 * std::f64::consts::PI).ln()) + f0_prime;
    Ok(LaurentConstants {
        c1: leading_constant_c1(base),
        c2,
        c3,
        c4: f1 * dz2 + z2 * f1_prime + EULER_GAMMA * z2 * f1,
        big_c1: c2 - degree,
        big_c2: -degree - c3,
        f1,
        f1_prime,
        f0_prime,
    })
}

/// Prefix sums of `n^k / phi_K(n)` for `k = 0, 1, 2`, answering both
/// partial sums for any `x` up to the table size.
pub struct PhiKSums {
    s0: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl PhiKSums {
    pub fn new(base: &BaseData, x_max: u64) -> Self {
        let table = base.phi_k_table(x_max as usize);
        let len = table.len();
        let (mut s0, mut s1, mut s2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let (mut a0, mut a1, mut a2) = (
            CompensatedSum::new(),
            CompensatedSum::new(),
            CompensatedSum::new(),
        );
        for n in 1..len {
            let nf = n as f64;
            let a = 1.0 / table[n] as f64;
            a0 += a;
            a1 += nf * a;
            a2 += nf * nf * a;
            s0[n] = a0.value();
            s1[n] = a1.value();
            s2[n] = a2.value();
        }
        Self { s0, s1, s2 }
    }

    pub fn x_max(&self) -> u64 {
        (self.s0.len() - 1) as u64
    }

    /// `sum_{n < x} (1 - n/x)^2 / phi_K(n)`.
    pub fn id1(&self, x: u64) -> f64 {
        let i = (x - 1) as usize;
        let xf = x as f64;
        self.s0[i] - 2.0 * self.s1[i] / xf + self.s2[i] / (xf * xf)
    }

    /// `sum_{n <= x} 1 / phi_K(n)`.
    pub fn id2(&self, x: u64) -> f64 {
        self.s0[x as usize]
    }
}

/// `(sum_{n<x} (1 - n/x)^2 / phi_K(n), sum_{n<=x} 1 / phi_K(n))`.
pub fn partial_sums(base: &BaseData, x: u64) -> Result<(f64, f64)> {
    if x < 2 {
        return Err(Error::Domain(format!("partial sums need x >= 2, got {x}")));
    }
    let table = base.phi_k_table(x as usize);
    let xf = x as f64;
    let mut id1 = CompensatedSum::new();
    let mut id2 = CompensatedSum::new();
    for n in 1..=x {
        let a = 1.0 / table[n as usize] as f64;
        id2 += a;
        if n < x {
            id1 += (1.0 - n as f64 / xf).powi(2) * a;
        }
    }
    Ok((id1.value(), id2.value()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Fitted,
    Derived,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Fitted => "fitted",
            Provenance::Derived => "derived",
        }
    }
}

/// A numerical constant with an estimated (not certified) uncertainty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub uncertainty: f64,
    pub provenance: Provenance,
}

/// Fitted values of `c2, c3, c4` and the derived `C2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedConstants {
    pub c2: Constant,
    pub c3: Constant,
    pub c4: Constant,
    pub big_c2: Constant,
    pub id1_rms: f64,
    pub id2_rms: f64,
    /// Either residual RMS exceeded [`FIT_RESIDUAL_FLAG`].
    pub flagged: bool,
}

/// Geometric grid `10^(3 + k/4)`, `k = 0..=12`.
pub fn default_fit_grid() -> Vec<u64> {
    (0..=12)
        .map(|k| 10f64.powf(3.0 + k as f64 / 4.0).round() as u64)
        .collect()
}

/// Fits `c2, c3` from `id1 - c1 log x - ratio log x / x = c2 + c3 / x` and
/// `c4` as the mean of `id2 - c1 log x`.
pub fn fit_lemma_constants(base: &BaseData, xs: &[u64]) -> Result<FittedConstants> {
    if xs.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 x values, got {}",
            xs.len()
        )));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) || xs[0] < 1000 {
        return Err(Error::Fit(
            "x values must be increasing and at least 1000".into(),
        ));
    }
    let c1 = leading_constant_c1(base);
    let ratio = base.ratio_mk() as f64;
    let sums = PhiKSums::new(base, *xs.last().unwrap());
    let inv_x: Vec<f64> = xs.iter().map(|&x| 1.0 / x as f64).collect();
    let y1: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let lx = (x as f64).ln();
            sums.id1(x) - c1 * lx - ratio * lx / x as f64
        })
        .collect();
    let y2: Vec<f64> = xs
        .iter()
        .map(|&x| sums.id2(x) - c1 * (x as f64).ln())
        .collect();
    let line = fit_line(&inv_x, &y1, 4)?;
    let (c4, c4_err) = mean_with_error(&y2)?;
    let id2_rms = (y2.iter().map(|y| (y - c4).powi(2)).sum::<f64>() / y2.len() as f64).sqrt();
    let fitted = |value, uncertainty| Constant {
        value,
        uncertainty,
        provenance: Provenance::Fitted,
    };
    Ok(FittedConstants {
        c2: fitted(line.intercept, line.intercept_err),
        c3: fitted(line.slope, line.slope_err),
        c4: fitted(c4, c4_err),
        big_c2: Constant {
            value: -(base.degree() as f64) - line.slope,
            uncertainty: line.slope_err,
            provenance: Provenance::Derived,
        },
        id1_rms: line.rms_residual,
        id2_rms,
        flagged: line.rms_residual > FIT_RESIDUAL_FLAG || id2_rms > FIT_RESIDUAL_FLAG,
    })
}

/// Every constant of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantSet {
    pub field: String,
    pub degree: u32,
    pub c1: Constant,
    pub c2: Constant,
    pub c3: Constant,
    pub c4: Constant,
    pub big_c1: Constant,
    pub big_c2: Constant,
    pub ratio_mk: u64,
    pub h1: f64,
    pub laurent: LaurentConstants,
    pub fit_flagged: bool,
}

impl ConstantSet {
    /// The same set with every fitted constant replaced by its closed form,
    /// for predictions without a fit.
    pub fn closed_form(field: &FieldSpec, base: &BaseData) -> Result<Self> {
        let laurent = laurent_constants(base)?;
        let closed = |value: f64| Constant {
            value,
            uncertainty: 1e-9 * value.abs().max(1.0),
            provenance: Provenance::ClosedForm,
        };
        Ok(Self {
            field: field.to_string(),
            degree: field.degree(),
            c1: closed(laurent.c1),
            c2: closed(laurent.c2),
            c3: closed(laurent.c3),
            c4: closed(laurent.c4),
            big_c1: closed(laurent.big_c1),
            big_c2: Constant {
                provenance: Provenance::Derived,
                ..closed(laurent.big_c2)
            },
            ratio_mk: base.ratio_mk(),
            h1: euler_h(1.0)?,
            laurent,
            fit_flagged: false,
        })
    }
}

/// Closed-form `c1`, `C1`; fitted `c2, c3, c4`; derived `C2`.
pub fn constant_set(field: &FieldSpec, base: &BaseData, xs: &[u64]) -> Result<ConstantSet> {
    let laurent = laurent_constants(base)?;
    let fit = fit_lemma_constants(base, xs)?;
    let c1_step = constant_C1(base)?;
    let c1_half = constant_c1_with_step(base, DERIVATIVE_STEP / 2.0)?;
    Ok(ConstantSet {
        field: field.to_string(),
        degree: field.degree(),
        c1: Constant {
            value: laurent.c1,
            uncertainty: 1e-14 * laurent.c1,
            provenance: Provenance::ClosedForm,
        },
        c2: fit.c2,
        c3: fit.c3,
        c4: fit.c4,
        big_c1: Constant {
            value: c1_step,
            uncertainty: (c1_step - c1_half).abs() + 1e-12,
            provenance: Provenance::ClosedForm,
        },
        big_c2: fit.big_c2,
        ratio_mk: base.ratio_mk(),
        h1: euler_h(1.0)?,
        laurent,
        fit_flagged: fit.flagged,
    })
}
