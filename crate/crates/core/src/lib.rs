//! Semi-discrete optimal transport from planar domains to the lower unit
//! hemisphere, with tools for checking boundary regularity estimates.

pub mod config;
pub mod density;
pub mod domain;
pub mod experiments;
pub mod export;
pub mod expr;
pub mod geometry;
pub mod laguerre;
pub mod oracle;
pub mod quadrature;
pub mod run;
pub mod solver;
pub mod sphere;
pub mod target;
