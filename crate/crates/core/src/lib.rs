pub mod accuracy;
pub mod cascade;
pub mod cli;
pub mod crystal;
pub mod linalg;
pub mod mask;
pub mod multiidx;
