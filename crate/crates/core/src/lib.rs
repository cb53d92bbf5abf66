//! Token-guided graph rewriting for call-by-need and call-by-value lambda
//! calculi, with a term-level reference machine and two token-passing baselines.

pub mod baselines;
pub mod bench;
pub mod check;
pub mod corpus;
pub mod cosim;
pub mod graph;
pub mod iso;
pub mod machine;
pub mod submachine;
pub mod term;
pub mod translate;
