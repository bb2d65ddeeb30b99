//! C*-algebra valued learning: algebra arithmetic, Hilbert C*-modules,
//! reproducing kernel Hilbert C*-modules, and networks with algebra-valued
//! weights.

pub mod algebra;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod linalg;
pub mod net;
pub mod rkhm;

pub use algebra::{Algebra, AlgebraKind, Element, GroupTable};
pub use error::{Error, Result};
