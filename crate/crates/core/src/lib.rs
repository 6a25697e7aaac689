//! Static probabilistic output analysis for a small first-order functional
//! language.

pub mod approximator;
pub mod constructor;
pub mod error;
pub mod lang;
pub mod oracle;
pub mod unfolder;
mod lexer;
pub mod pipeline;
pub mod probexpr;
pub mod simplifier;
