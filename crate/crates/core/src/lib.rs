pub mod autograd;
pub mod eval;
pub mod ingest;
pub mod info;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod trainer;
pub mod views;
