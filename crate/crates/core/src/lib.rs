pub mod eval;
pub mod geometry;
pub mod graph;
pub mod item;
pub mod objectives;
pub mod sim;
