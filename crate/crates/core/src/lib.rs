pub mod coeff;
pub mod config;
pub mod divdiff;
pub mod emit;
pub mod evaluate;
pub mod modular;
pub mod recursion;
pub mod spectral;
pub mod term;
pub mod torus;
pub mod verify;
