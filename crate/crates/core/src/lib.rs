pub mod balance;
pub mod design;
pub mod dist;
pub mod engine;
pub mod error;
pub mod exec;
pub mod io;
pub mod rng;
pub mod sim;
pub mod spectral;
