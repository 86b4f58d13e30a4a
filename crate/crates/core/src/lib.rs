//! M-bounded persistent Betti numbers of planar point patterns and goodness-of-fit
//! tests built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geom;
pub mod gof;
pub mod io;
pub mod mbound;
pub mod oracle;
pub mod simulate;
pub mod summaries;
mod unionfind;

pub use error::{Error, Result};
