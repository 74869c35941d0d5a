//! Supported Galois number fields and the splitting of rational primes in them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::arith::{
    euler_phi, gcd, is_prime, is_squarefree, kronecker_prime, multiplicative_order, prime_factors,
    valuation,
};
use crate::error::{Error, Result};
use crate::poly;

/// Cyclotomic fields up to this conductor cache a residue-degree table.
const ORDER_TABLE_LIMIT: u64 = 10_000_000;

/// Residue degree and ramification index supplied for a ramified prime of a
/// generic Galois field. The number of primes above it follows from `e f g = n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RamifiedLocal {
    pub e: u32,
    pub f: u32,
}

/// Parsed field descriptor, before validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldDescriptor {
    Rational,
    Quadratic {
        d: i64,
    },
    Cyclotomic {
        n: u64,
    },
    Galois {
        poly: Vec<i64>,
        m_k: i64,
        ramified: BTreeMap<u64, Option<RamifiedLocal>>,
    },
}

impl FromStr for FieldDescriptor {
    type Err = Error;

    /// Accepts `Q`, `Q(i)`, `quad:d`, `cyc:n` and
    /// `galois:c0,c1,...,ck;mK;p1,p2,...` where a ramified entry may carry its
    /// local data as `p:e:f`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Descriptor {
            descriptor: s.to_string(),
            reason: reason.to_string(),
        };
        let t = s.trim();
        match t {
            "Q" | "q" | "rational" => return Ok(FieldDescriptor::Rational),
            "Q(i)" => return Ok(FieldDescriptor::Quadratic { d: -1 }),
            _ => {}
        }
        let (head, rest) = t.split_once(':').ok_or_else(|| bad("unknown field kind"))?;
        match head {
            "quad" => {
                let d = rest
                    .trim()
                    .parse()
                    .map_err(|_| bad("d must be an integer"))?;
                Ok(FieldDescriptor::Quadratic { d })
            }
            "cyc" => {
                let n = rest
                    .trim()
                    .parse()
                    .map_err(|_| bad("n must be a positive integer"))?;
                Ok(FieldDescriptor::Cyclotomic { n })
            }
            "galois" => {
                let parts: Vec<&str> = rest.split(';').collect();
                if parts.len() < 2 || parts.len() > 3 {
                    return Err(bad("expected coefficients;mK;ramified-primes"));
                }
                let poly = parts[0]
                    .split(',')
                    .map(|c| c.trim().parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("coefficients must be integers"))?;
                let m_k = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| bad("mK must be an integer"))?;
                let mut ramified = BTreeMap::new();
                if let Some(list) = parts.get(2) {
                    for entry in list.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                        let nums = entry
                            .split(':')
                            .map(|v| v.trim().parse::<u64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| bad("ramified entries are p or p:e:f"))?;
                        let local = match nums.as_slice() {
                            [_] => None,
                            [_, e, f] => Some(RamifiedLocal {
                                e: *e as u32,
                                f: *f as u32,
                            }),
                            _ => return Err(bad("ramified entries are p or p:e:f")),
                        };
                        ramified.insert(nums[0], local);
                    }
                }
                Ok(FieldDescriptor::Galois {
                    poly,
                    m_k,
                    ramified,
                })
            }
            _ => Err(bad("unknown field kind")),
        }
    }
}

impl fmt::Display for FieldDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldDescriptor::Rational => write!(f, "Q"),
            FieldDescriptor::Quadratic { d } => write!(f, "quad:{d}"),
            FieldDescriptor::Cyclotomic { n } => write!(f, "cyc:{n}"),
            FieldDescriptor::Galois {
                poly,
                m_k,
                ramified,
            } => {
                let coeffs: Vec<String> = poly.iter().map(i64::to_string).collect();
                let ram: Vec<String> = ramified
                    .iter()
                    .map(|(p, local)| match local {
                        Some(l) => format!("{p}:{}:{}", l.e, l.f),
                        None => p.to_string(),
                    })
                    .collect();
                write!(f, "galois:{};{};{}", coeffs.join(","), m_k, ram.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Rational,
    /// `Q(sqrt d)`, with `discriminant` the field discriminant.
    Quadratic {
        d: i64,
        discriminant: i64,
    },
    Cyclotomic {
        n: u64,
    },
    Galois {
        ramification: BTreeMap<u64, Option<RamifiedLocal>>,
    },
}

/// Whether a splitting datum is known exactly or is a placeholder for a prime
/// whose local behaviour the field description does not determine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Certainty {
    Exact,
    Conservative,
}

/// Ramification index, residue degree and number of primes above `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SplittingDatum {
    pub p: u64,
    pub e: u32,
    pub f: u32,
    pub g: u32,
    pub certainty: Certainty,
}

impl SplittingDatum {
    fn exact(p: u64, e: u32, f: u32, g: u32) -> Self {
        Self {
            p,
            e,
            f,
            g,
            certainty: Certainty::Exact,
        }
    }

    pub fn is_ramified(&self) -> bool {
        self.e > 1
    }

    pub fn is_exact(&self) -> bool {
        self.certainty == Certainty::Exact
    }
}

/// An immutable Galois number field `K/Q`.
#[derive(Clone, Debug)]
pub struct FieldSpec {
    descriptor: FieldDescriptor,
    kind: FieldKind,
    degree: u32,
    m_k: u64,
    ramified: BTreeSet<u64>,
    polynomial: Vec<i64>,
    order_table: Arc<OnceLock<Vec<u32>>>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.descriptor == other.descriptor
    }
}

/// Builds and validates a field from its descriptor.
pub fn build_field(descriptor: &FieldDescriptor) -> Result<FieldSpec> {
    let invalid = |msg: String| Error::InvalidField(msg);
    let (kind, degree, m_k, ramified, polynomial) = match descriptor {
        FieldDescriptor::Rational => (FieldKind::Rational, 1, 1, BTreeSet::new(), vec![0, 1]),
        FieldDescriptor::Quadratic { d } => {
            let d = *d;
            if d == 0 || d == 1 || !is_squarefree(d.unsigned_abs()) {
                return Err(invalid(format!(
                    "quadratic d = {d} must be squarefree and not 0 or 1"
                )));
            }
            let discriminant = if d.rem_euclid(4) == 1 { d } else { 4 * d };
            let ramified: BTreeSet<u64> = prime_factors(discriminant.unsigned_abs())
                .into_iter()
                .collect();
            let polynomial = if d.rem_euclid(4) == 1 {
                vec![-(d - 1) / 4, -1, 1]
            } else {
                vec![-d, 0, 1]
            };
            (
                FieldKind::Quadratic { d, discriminant },
                2,
                discriminant.unsigned_abs(),
                ramified,
                polynomial,
            )
        }
        FieldDescriptor::Cyclotomic { n } => {
            let n = *n;
            if n < 3 || n % 4 == 2 {
                return Err(invalid(format!(
                    "cyclotomic n = {n} must be >= 3 and not 2 mod 4"
                )));
            }
            if n > ORDER_TABLE_LIMIT {
                return Err(invalid(format!(
                    "cyclotomic n = {n} exceeds {ORDER_TABLE_LIMIT}"
                )));
            }
            let degree = u32::try_from(euler_phi(n))
                .map_err(|_| invalid(format!("cyclotomic n = {n} is too large")))?;
            let polynomial = if degree <= 64 {
                poly::cyclotomic_polynomial(n)
            } else {
                Vec::new()
            };
            (
                FieldKind::Cyclotomic { n },
                degree,
                n,
                prime_factors(n).into_iter().collect(),
                polynomial,
            )
        }
        FieldDescriptor::Galois {
            poly,
            m_k,
            ramified,
        } => {
            if *m_k <= 0 {
                return Err(invalid(format!("m_K = {m_k} must be positive")));
            }
            if poly.len() < 2 || *poly.last().unwrap() != 1 {
                return Err(invalid("polynomial must be monic of degree >= 1".into()));
            }
            let degree = (poly.len() - 1) as u32;
            if degree > 24 {
                return Err(invalid(
                    "polynomial degree above 24 is not supported".into(),
                ));
            }
            for (&p, local) in ramified {
                if !is_prime(p) {
                    return Err(invalid(format!("ramified entry {p} is not prime")));
                }
                if let Some(l) = local {
                    if l.e < 2 || l.f == 0 || !degree.is_multiple_of(l.e * l.f) {
                        return Err(invalid(format!(
                            "ramification data e = {}, f = {} at {p} incompatible with degree {degree}",
                            l.e, l.f
                        )));
                    }
                }
            }
            if !poly::is_irreducible_over_q(poly) {
                return Err(invalid("polynomial is reducible over Q".into()));
            }
            check_galois_pattern(poly, ramified)?;
            (
                FieldKind::Galois {
                    ramification: ramified.clone(),
                },
                degree,
                *m_k as u64,
                ramified.keys().copied().collect(),
                poly.clone(),
            )
        }
    };
    Ok(FieldSpec {
        descriptor: descriptor.clone(),
        kind,
        degree,
        m_k,
        ramified,
        polynomial,
        order_table: Arc::new(OnceLock::new()),
    })
}

/// In a Galois extension every unramified prime splits into factors of one
/// common degree; a polynomial violating this on small primes cannot define a
/// Galois field.
fn check_galois_pattern(
    poly: &[i64],
    ramified: &BTreeMap<u64, Option<RamifiedLocal>>,
) -> Result<()> {
    let mut checked = 0;
    for p in (2u64..).filter(|&p| is_prime(p)).take(400) {
        if ramified.contains_key(&p) {
            continue;
        }
        if let Some(degs) = poly::factor_degrees_mod_p(poly, p) {
            if degs.iter().any(|&d| d != degs[0]) {
                return Err(Error::InvalidField(format!(
                    "factor degrees {degs:?} modulo {p} are unequal; the field is not Galois"
                )));
            }
            checked += 1;
            if checked >= 60 {
                break;
            }
        }
    }
    Ok(())
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        build_field(&s.parse()?)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.descriptor.fmt(f)
    }
}

impl FieldSpec {
    pub fn rational() -> Self {
        build_field(&FieldDescriptor::Rational).expect("Q is valid")
    }

    pub fn descriptor(&self) -> &FieldDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// `[K:Q]`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Conductor of the maximal abelian subfield.
    pub fn m_k(&self) -> u64 {
        self.m_k
    }

    pub fn ramified_primes(&self) -> &BTreeSet<u64> {
        &self.ramified
    }

    /// Defining polynomial. For quadratic fields this generates the ring of
    /// integers, so it is squarefree modulo every unramified prime.
    pub fn polynomial(&self) -> &[i64] {
        &self.polynomial
    }

    /// True for the kinds known to be abelian over `Q`.
    pub fn is_abelian(&self) -> bool {
        !matches!(self.kind, FieldKind::Galois { .. })
    }

    fn cyclotomic_orders(&self, n: u64) -> &[u32] {
        self.order_table.get_or_init(|| {
            (0..n)
                .map(|r| {
                    if gcd(r, n) == 1 {
                        multiplicative_order(r, n) as u32
                    } else {
                        0
                    }
                })
                .collect()
        })
    }

    /// Splitting type of the rational prime `p`.
    pub fn splitting(&self, p: u64) -> Result<SplittingDatum> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(self.splitting_unchecked(p))
    }

    /// As [`FieldSpec::splitting`], for callers that already know `p` is prime.
    pub fn splitting_unchecked(&self, p: u64) -> SplittingDatum {
        match &self.kind {
            FieldKind::Rational => SplittingDatum::exact(p, 1, 1, 1),
            FieldKind::Quadratic { discriminant, .. } => match kronecker_prime(*discriminant, p) {
                0 => SplittingDatum::exact(p, 2, 1, 1),
                1 => SplittingDatum::exact(p, 1, 1, 2),
                _ => SplittingDatum::exact(p, 1, 2, 1),
            },
            FieldKind::Cyclotomic { n } => {
                let n = *n;
                if n % p != 0 {
                    let f = self.cyclotomic_orders(n)[(p % n) as usize];
                    SplittingDatum::exact(p, 1, f, self.degree / f)
                } else {
                    let a = valuation(n, p);
                    let pa = p.pow(a);
                    let rest = n / pa;
                    let e = euler_phi(pa) as u32;
                    let f = multiplicative_order(p % rest, rest) as u32;
                    let g = euler_phi(rest) as u32 / f;
                    SplittingDatum::exact(p, e, f, g)
                }
            }
            FieldKind::Galois { ramification } => {
                if let Some(local) = ramification.get(&p) {
                    return match local {
                        Some(l) => SplittingDatum::exact(p, l.e, l.f, self.degree / (l.e * l.f)),
                        None => SplittingDatum {
                            p,
                            e: self.degree,
                            f: 1,
                            g: 1,
                            certainty: Certainty::Conservative,
                        },
                    };
                }
                match poly::smallest_factor_degree(&self.polynomial, p) {
                    Some(f) if self.degree.is_multiple_of(f) => {
                        SplittingDatum::exact(p, 1, f, self.degree / f)
                    }
                    // p divides the index of Z[alpha]: the polynomial does not
                    // reveal the splitting
                    _ => SplittingDatum {
                        p,
                        e: 1,
                        f: self.degree,
                        g: 1,
                        certainty: Certainty::Conservative,
                    },
                }
            }
        }
    }

    /// Splitting of `p` if the norm `p^f` of the primes above it is at most
    /// `x`; `None` otherwise. Generic Galois fields stop the polynomial search
    /// at the largest admissible residue degree.
    pub fn splitting_within(&self, p: u64, x: u64) -> Option<SplittingDatum> {
        let max_f = max_exponent(p, x);
        if max_f == 0 {
            return None;
        }
        if let FieldKind::Galois { ramification } = &self.kind {
            if !ramification.contains_key(&p) {
                return match poly::smallest_factor_degree_at_most(&self.polynomial, p, max_f) {
                    Some(Some(f)) if self.degree.is_multiple_of(f) => {
                        Some(SplittingDatum::exact(p, 1, f, self.degree / f))
                    }
                    Some(None) => None,
                    _ => Some(SplittingDatum {
                        p,
                        e: 1,
                        f: self.degree,
                        g: 1,
                        certainty: Certainty::Conservative,
                    }),
                };
            }
        }
        let datum = self.splitting_unchecked(p);
        (datum.f <= max_f).then_some(datum)
    }

    /// Residue degree of an unramified `p` read off the defining polynomial by
    /// distinct-degree factorization, independently of the closed-form rules.
    /// `None` when the polynomial is not squarefree modulo `p`.
    pub fn splitting_by_polynomial(&self, p: u64) -> Option<SplittingDatum> {
        if self.polynomial.is_empty() {
            return None;
        }
        let f = poly::smallest_factor_degree(&self.polynomial, p)?;
        Some(SplittingDatum::exact(p, 1, f, self.degree / f))
    }
}

/// Largest `k` with `p^k <= x`.
pub(crate) fn max_exponent(p: u64, x: u64) -> u32 {
    let mut k = 0;
    let mut acc = 1u64;
    while let Some(next) = acc.checked_mul(p) {
        if next > x {
            break;
        }
        acc = next;
        k += 1;
    }
    k
}

/// Descriptors of the fields used by the verification and acceptance runs.
pub const CATALOG: [&str; 7] = ["Q", "Q(i)", "quad:5", "quad:-3", "cyc:5", "cyc:8", "cyc:12"];

pub fn catalog() -> Vec<FieldSpec> {
    CATALOG
        .iter()
        .map(|d| d.parse().expect("catalog descriptors are valid"))
        .collect()
}
