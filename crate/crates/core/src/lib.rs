pub mod acceptance;
pub mod error;
pub mod expr;
pub mod free_norm;
pub mod hilbert;
pub mod projectivity;
pub mod qlat;
pub mod seed;
pub mod stable;

pub use error::{Error, Result};
pub use expr::{parse, LatticeExpr};
pub use qlat::CoordinateLattice;
