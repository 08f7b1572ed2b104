pub mod benchmark;
pub mod driver;
pub mod dsl;
pub mod generator;
pub mod merge;
pub mod pipeline;
pub mod rng;
