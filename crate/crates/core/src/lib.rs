pub mod config;
pub mod convergence;
pub mod experiment;
pub mod model;
pub mod observables;
pub mod output;
pub mod sde;
pub mod stats;
