pub mod character;
pub mod counting;
pub mod density;
pub mod descent;
pub mod error;
pub mod expsum;
pub mod field;
pub mod form;
pub mod ideal;
pub mod lattice;
pub mod linalg;
pub mod poly;

pub use error::{Error, Result};
pub use field::{Field, FieldElement, FieldExt, NumberField};
