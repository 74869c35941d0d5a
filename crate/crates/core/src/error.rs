use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field descriptor `{descriptor}`: {reason}")]
    Descriptor { descriptor: String, reason: String },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("subgroup generation mod {q} did not stabilize after sampling {sampled} primes (index {index} does not divide the degree)")]
    Stabilization { q: u64, sampled: usize, index: u64 },

    #[error("prime {0} does not divide the conductor m_K")]
    NotConductorPrime(u64),

    #[error("missing base data for prime {0}")]
    MissingBaseData(u64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("empty modulus range: need Q1 < Q2 <= x, got Q1 = {q1}, Q2 = {q2}, x = {x}")]
    EmptyRange { q1: u64, q2: u64, x: u64 },

    #[error("norm {norm} is coprime to {q} but its residue lies outside G_q")]
    ImageViolation { q: u64, norm: u64 },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
