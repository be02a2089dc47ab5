//! A laboratory for perfect-matching statistics of random d-regular graphs:
//! exact counting and enumeration oracles, evaluators for the asymptotic
//! moment formulas, exactly uniform samplers, and a degree-coupling of
//! G(n,d) with G(n,d+1) whose uniform marginal is machine-checkable at
//! enumerable scale.

pub mod acceptance;
pub mod asymptotics;
pub mod counting;
pub mod coupling;
pub mod graph;
pub mod sampler;
pub mod special;
pub mod stats;
