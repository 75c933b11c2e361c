pub mod eval;
pub mod extract;
pub mod infer;
pub mod phi;
pub mod report;
pub mod synth;
pub mod train;
