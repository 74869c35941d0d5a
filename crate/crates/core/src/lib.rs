pub mod arith;
pub mod dirichlet_constants;
pub mod error;
pub mod experiment;
pub mod field_catalog;
pub mod galois_image;
pub mod ideal_stream;
pub mod poly;
pub mod regression;
pub mod sieve;
pub mod variance_engine;
pub mod zeta;

pub use error::{Error, Result};
pub use field_catalog::{build_field, FieldDescriptor, FieldSpec, SplittingDatum};
