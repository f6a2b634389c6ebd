pub mod calculus;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod exchange;
pub mod interp;
pub mod linalg;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod verify;
