pub mod error;
pub mod fock;
pub mod mme;
pub mod fit;
pub mod mcwf;
pub mod protocol;
pub mod config;
pub mod runner;
