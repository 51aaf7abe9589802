//! Synthesis of verified rewrite rules for quantum circuits and a
//! beam-search optimizer that applies them.

pub mod amp;
pub mod bits;
pub mod circuit;
pub mod device;
pub mod evalmat;
pub mod field;
pub mod gateset;
pub mod interp;
pub mod matcher;
pub mod optimizer;
pub mod oracle;
pub mod param;
pub mod pathsum;
pub mod pattern;
pub mod polyrep;
pub mod qasm;
pub mod rules;
pub mod sexpr;
pub mod synth;
pub mod valuation;
pub mod verifier;
