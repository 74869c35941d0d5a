//! The image `G_q` of `Gal(K(zeta_q)/K)` in `(Z/qZ)*` and the generalized
//! totient `phi_K(q) = |G_q|`.
//!
//! Two independent routes are provided. [`gq_by_generation`] builds the
//! subgroup generated by residues of prime ideal norms, which by Chebotarev
//! is all of `G_q` once enough primes have been sampled. [`phi_k_by_formula`]
//! evaluates the local product formula from the base data at the primes
//! dividing `m_K`.
//!
//! Since `K ∩ Q(zeta_q)` lies in `Q(zeta_d)` with `d = gcd(q, m_K)`, `G_q` is
//! the full preimage of `G_d` under reduction mod `d`. [`BaseData`] keeps
//! `G_d` for every divisor `d` of `m_K`, which gives `phi_K(q)` and image
//! membership for arbitrary `q` in constant time.

use std::collections::BTreeMap;

use crate::arith::{divisors, euler_phi, factorize, gcd, mul_mod, pow_mod, valuation};
use crate::error::{Error, Result};
use crate::field_catalog::FieldSpec;
use crate::sieve::{prime_table, totient_table};

/// Records are capped at this modulus.
pub const MAX_MODULUS: u64 = 10_000_000;

/// Hard cap on the number of sampled primes.
pub const MAX_SAMPLED_PRIMES: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Generated,
    Formula,
}

/// A subgroup of `(Z/qZ)*` stored as a membership bitmap over residues.
#[derive(Clone, Debug)]
pub struct GqRecord {
    q: u64,
    mask: Vec<bool>,
    elements: Vec<u64>,
    method: Method,
    sampled: usize,
    capped: bool,
}

impl GqRecord {
    fn trivial(q: u64, method: Method) -> Self {
        let mut mask = vec![false; q as usize];
        mask[(1 % q) as usize] = true;
        Self {
            q,
            mask,
            elements: vec![1 % q],
            method,
            sampled: 0,
            capped: false,
        }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn phi_k(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Number of primes examined before the subgroup was accepted.
    pub fn sampled(&self) -> usize {
        self.sampled
    }

    /// True when generation stopped at the sampling cap rather than by the
    /// stabilization rule.
    pub fn hit_cap(&self) -> bool {
        self.capped
    }

    pub fn contains(&self, a: u64) -> bool {
        self.mask[(a % self.q) as usize]
    }

    /// Members as residues in `[1, q]`, ascending.
    pub fn members(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self
            .elements
            .iter()
            .map(|&a| if a == 0 { self.q } else { a })
            .collect();
        out.sort_unstable();
        out
    }

    /// Adjoins `g`; returns whether the subgroup grew.
    fn adjoin(&mut self, g: u64) -> bool {
        let q = self.q;
        let g = g % q;
        if self.mask[g as usize] {
            return false;
        }
        let base: Vec<u64> = self.elements.clone();
        let mut coset_rep = g;
        while !self.mask[coset_rep as usize] {
            for &h in &base {
                let v = mul_mod(coset_rep, h, q);
                self.mask[v as usize] = true;
                self.elements.push(v);
            }
            coset_rep = mul_mod(coset_rep, g, q);
        }
        true
    }
}

/// Samples residues of prime ideal norms, caching residue degrees so that
/// repeated generation over many moduli does not redo the splitting work.
pub struct GqGenerator<'a> {
    field: &'a FieldSpec,
    excluded_mk: Vec<u64>,
    cache: Vec<(u64, u32)>,
    cursor: usize,
}

impl<'a> GqGenerator<'a> {
    pub fn new(field: &'a FieldSpec) -> Self {
        let mut excluded_mk: Vec<u64> =
            factorize(field.m_k()).into_iter().map(|(p, _)| p).collect();
        excluded_mk.extend(field.ramified_primes().iter().copied());
        excluded_mk.sort_unstable();
        excluded_mk.dedup();
        Self {
            field,
            excluded_mk,
            cache: Vec::new(),
            cursor: 0,
        }
    }

    /// The `i`-th usable prime with its residue degree, skipping primes
    /// dividing `m_K`, ramified primes, and primes with undetermined splitting.
    fn sample(&mut self, i: usize) -> Option<(u64, u32)> {
        let table = prime_table();
        while self.cache.len() <= i {
            let &p = table.get(self.cursor)?;
            self.cursor += 1;
            let p = p as u64;
            if self.excluded_mk.binary_search(&p).is_ok() {
                continue;
            }
            let s = self.field.splitting_unchecked(p);
            if s.is_exact() && !s.is_ramified() {
                self.cache.push((p, s.f));
            }
        }
        Some(self.cache[i])
    }

    /// Generates `G_q` from norm residues.
    ///
    /// Primes are sampled in increasing order (those dividing `q` are
    /// skipped). Generation stops once the subgroup has been unchanged for
    /// `20 [K:Q] log2(q+1)` consecutive samples and its index in `(Z/qZ)*`
    /// divides `[K:Q]`; it fails if the index condition still does not hold
    /// after [`MAX_SAMPLED_PRIMES`] samples.
    pub fn generate(&mut self, q: u64) -> Result<GqRecord> {
        if q == 0 || q > MAX_MODULUS {
            return Err(Error::Domain(format!(
                "modulus {q} outside [1, {MAX_MODULUS}]"
            )));
        }
        let mut rec = GqRecord::trivial(q, Method::Generated);
        if q <= 2 {
            return Ok(rec);
        }
        let degree = self.field.degree() as u64;
        let phi_q = euler_phi(q);
        let window = (20.0 * degree as f64 * ((q + 1) as f64).log2()).ceil() as usize;
        let index_ok = |rec: &GqRecord| degree.is_multiple_of(phi_q / rec.phi_k());
        let mut unchanged = 0usize;
        let mut sampled = 0usize;
        let mut i = 0usize;
        while sampled < MAX_SAMPLED_PRIMES {
            let Some((p, f)) = self.sample(i) else { break };
            i += 1;
            if q.is_multiple_of(p) {
                continue;
            }
            sampled += 1;
            let residue = pow_mod(p, f as u64, q);
            if rec.adjoin(residue) {
                unchanged = 0;
            } else {
                unchanged += 1;
            }
            if rec.phi_k() == phi_q || (unchanged >= window && index_ok(&rec)) {
                rec.sampled = sampled;
                return Ok(rec);
            }
        }
        rec.sampled = sampled;
        rec.capped = true;
        if index_ok(&rec) {
            Ok(rec)
        } else {
            Err(Error::Stabilization {
                q,
                sampled,
                index: phi_q / rec.phi_k(),
            })
        }
    }
}

/// `G_q` by subgroup generation from prime ideal norms.
pub fn gq_by_generation(field: &FieldSpec, q: u64) -> Result<GqRecord> {
    GqGenerator::new(field).generate(q)
}

/// Local data at a prime `l | m_K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalBase {
    /// Exponent of `l` in `m_K`.
    pub b: u32,
    /// `phi_K(l)`.
    pub phi_k_at_l: u64,
}

/// Base data of a field: the local values at primes dividing `m_K`, plus the
/// subgroups `G_d` for every divisor `d` of `m_K`.
#[derive(Clone, Debug)]
pub struct BaseData {
    m_k: u64,
    degree: u32,
    locals: BTreeMap<u64, LocalBase>,
    images: BTreeMap<u64, GqRecord>,
}

/// Computes [`BaseData`] by subgroup generation.
pub fn base_data(field: &FieldSpec) -> Result<BaseData> {
    let m = field.m_k();
    let mut generator = GqGenerator::new(field);
    let mut images = BTreeMap::new();
    for d in divisors(m) {
        images.insert(d, generator.generate(d)?);
    }
    let locals = factorize(m)
        .into_iter()
        .map(|(l, b)| {
            let local = LocalBase {
                b,
                phi_k_at_l: images[&l].phi_k(),
            };
            (l, local)
        })
        .collect();
    Ok(BaseData {
        m_k: m,
        degree: field.degree(),
        locals,
        images,
    })
}

impl BaseData {
    pub fn m_k(&self) -> u64 {
        self.m_k
    }

    pub fn locals(&self) -> &BTreeMap<u64, LocalBase> {
        &self.locals
    }

    pub fn local(&self, l: u64) -> Result<LocalBase> {
        self.locals
            .get(&l)
            .copied()
            .ok_or(Error::MissingBaseData(l))
    }

    /// `[A_d : Q] = phi(d) / phi_K(d)` for `d | m_K`.
    pub fn index_at(&self, d: u64) -> u64 {
        euler_phi(d) / self.images[&d].phi_k()
    }

    /// `phi_K(m_K)`.
    pub fn phi_k_m(&self) -> u64 {
        self.images[&self.m_k].phi_k()
    }

    /// `phi(m_K) / phi_K(m_K)`, an integer.
    pub fn ratio_mk(&self) -> u64 {
        self.index_at(self.m_k)
    }

    /// `phi_K(q)` for any `q >= 1`.
    pub fn phi_k(&self, q: u64) -> u64 {
        euler_phi(q) / self.index_at(gcd(q, self.m_k))
    }

    /// `phi_K(n)` for all `n <= limit` (index 0 holds 0).
    pub fn phi_k_table(&self, limit: usize) -> Vec<u64> {
        let phi = totient_table(limit);
        let index: BTreeMap<u64, u64> =
            self.images.keys().map(|&d| (d, self.index_at(d))).collect();
        phi.iter()
            .enumerate()
            .map(|(n, &v)| {
                if n == 0 {
                    0
                } else {
                    v as u64 / index[&gcd(n as u64, self.m_k)]
                }
            })
            .collect()
    }

    /// Whether a residue class `a` coprime to `q` lies in `G_q`.
    pub fn image_contains(&self, q: u64, a: u64) -> bool {
        let d = gcd(q, self.m_k);
        self.images[&d].contains(a % d)
    }

    /// `G_d` for a divisor `d` of `m_K`.
    pub fn image_at_divisor(&self, d: u64) -> Option<&GqRecord> {
        self.images.get(&d)
    }

    /// `G_q` as the preimage of `G_gcd(q, m_K)`.
    pub fn gq_record(&self, q: u64) -> GqRecord {
        let d = gcd(q, self.m_k);
        let mut mask = vec![false; q as usize];
        let mut elements = Vec::new();
        for a in 0..q {
            if gcd(a, q) == 1 && self.images[&d].contains(a % d) {
                mask[a as usize] = true;
                elements.push(a);
            }
        }
        GqRecord {
            q,
            mask,
            elements,
            method: Method::Formula,
            sampled: 0,
            capped: false,
        }
    }

    /// Whether the local product formula reproduces `phi_K(d)` at every
    /// divisor of `m_K`. Both sides have the form `phi(q) / g(gcd(q, m_K))`,
    /// so agreement on divisors of `m_K` means agreement for every `q`.
    pub fn local_product_exact(&self) -> bool {
        self.images
            .keys()
            .all(|&d| lemma_product(self, d).ok() == Some(self.images[&d].phi_k()))
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }
}

fn lemma_product(base: &BaseData, q: u64) -> Result<u64> {
    let mut out = 1u64;
    for (l, alpha) in factorize(q) {
        if !base.m_k.is_multiple_of(l) {
            out *= l.pow(alpha - 1) * (l - 1);
            continue;
        }
        let local = base.local(l)?;
        if alpha >= local.b {
            out *= l.pow(alpha - local.b) * local.phi_k_at_l;
        } else {
            out *= local.phi_k_at_l;
        }
    }
    Ok(out)
}

/// `phi_K(q)` by the local product over `l^alpha || q`: `l^(alpha-1) (l-1)`
/// for `l` not dividing `m_K`, `l^(alpha-b_l) phi_K(l)` when `alpha >= b_l`,
/// and `phi_K(l)` when `alpha < b_l`.
pub fn phi_k_by_formula(base: &BaseData, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::Domain("modulus must be positive".into()));
    }
    lemma_product(base, q)
}

/// Exponent of `l` in `m_K`.
pub fn conductor_exponent(field: &FieldSpec, l: u64) -> u32 {
    valuation(field.m_k(), l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> FieldSpec {
        s.parse().unwrap()
    }

    #[test]
    fn generation_examples() {
        let r = gq_by_generation(&field("Q"), 12).unwrap();
        assert_eq!((r.members(), r.phi_k()), (vec![1, 5, 7, 11], 4));
        let r = gq_by_generation(&field("Q(i)"), 4).unwrap();
        assert_eq!((r.members(), r.phi_k()), (vec![1], 1));
        let r = gq_by_generation(&field("quad:5"), 5).unwrap();
        assert_eq!((r.members(), r.phi_k()), (vec![1, 4], 2));
        assert_eq!(gq_by_generation(&field("Q"), 1).unwrap().members(), vec![1]);
        assert!(gq_by_generation(&field("Q"), 0).is_err());
    }

    #[test]
    fn formula_examples() {
        let qi = field("Q(i)");
        let base = base_data(&qi).unwrap();
        assert_eq!(
            base.local(2).unwrap(),
            LocalBase {
                b: 2,
                phi_k_at_l: 1
            }
        );
        assert_eq!(phi_k_by_formula(&base, 8).unwrap(), 2);
        assert_eq!(phi_k_by_formula(&base, 5).unwrap(), 4);
        let base_q = base_data(&field("Q")).unwrap();
        assert_eq!(phi_k_by_formula(&base_q, 1).unwrap(), 1);
        assert!(matches!(base_q.local(2), Err(Error::MissingBaseData(2))));
    }

    #[test]
    fn base_data_examples() {
        let b = base_data(&field("Q(i)")).unwrap();
        assert_eq!(b.ratio_mk(), 2);
        let b = base_data(&field("cyc:5")).unwrap();
        assert_eq!(
            b.local(5).unwrap(),
            LocalBase {
                b: 1,
                phi_k_at_l: 1
            }
        );
        assert_eq!(b.ratio_mk(), 4);
        let b = base_data(&field("Q")).unwrap();
        assert!(b.locals().is_empty());
        assert_eq!(b.ratio_mk(), 1);
    }

    #[test]
    fn subgroup_axioms() {
        for f in ["Q(i)", "quad:5", "cyc:12"].map(field) {
            let mut generator = GqGenerator::new(&f);
            for q in 1..200u64 {
                let r = generator.generate(q).unwrap();
                let m = r.members();
                assert!(r.contains(1));
                for &a in &m {
                    assert!(q == 1 || gcd(a, q) == 1);
                    for &b in &m {
                        assert!(r.contains(mul_mod(a, b, q)));
                    }
                }
                assert_eq!(euler_phi(q) % r.phi_k(), 0);
            }
        }
    }

    #[test]
    fn preimage_matches_generation() {
        for f in ["Q(i)", "quad:-3", "cyc:8", "quad:-15"].map(field) {
            let base = base_data(&f).unwrap();
            let mut generator = GqGenerator::new(&f);
            for q in 1..300u64 {
                let gen = generator.generate(q).unwrap();
                let pre = base.gq_record(q);
                assert_eq!(gen.members(), pre.members(), "{f} q={q}");
                assert_eq!(base.phi_k(q), gen.phi_k());
            }
        }
    }

    #[test]
    fn composite_discriminant_breaks_local_product() {
        // Q(sqrt -15): A_3 = A_5 = Q but A_15 = K, so phi_K is not multiplicative
        let f = field("quad:-15");
        let base = base_data(&f).unwrap();
        assert_eq!((base.phi_k(3), base.phi_k(5), base.phi_k(15)), (2, 4, 4));
        assert!(!base.local_product_exact());
        // Q(sqrt 2): (Z/8Z)* is not cyclic
        let base = base_data(&field("quad:2")).unwrap();
        assert_eq!(base.phi_k(8), 2);
        assert_eq!(phi_k_by_formula(&base, 8).unwrap(), 1);
        assert!(!base.local_product_exact());
        for f in crate::field_catalog::catalog() {
            assert!(base_data(&f).unwrap().local_product_exact(), "{f}");
        }
    }

    #[test]
    fn table_matches_pointwise() {
        let base = base_data(&field("cyc:12")).unwrap();
        let t = base.phi_k_table(500);
        for n in 1..=500u64 {
            assert_eq!(t[n as usize], base.phi_k(n));
        }
    }

    #[test]
    fn generic_galois_biquadratic() {
        // Q(sqrt 2, sqrt 3) is the real subfield of Q(zeta_24)
        let f = field("galois:1,0,-10,0,1;24;2,3");
        let base = base_data(&f).unwrap();
        assert_eq!(base.ratio_mk(), 4);
        assert_eq!(base.phi_k(24), 2);
    }
}
