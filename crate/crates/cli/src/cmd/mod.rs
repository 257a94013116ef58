pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod pose;
pub mod sim;
pub mod validate;
