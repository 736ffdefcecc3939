pub mod expr;
pub mod model;
pub mod solver;
pub mod equiv;
pub mod gateway;
pub mod search;
pub mod harness;
pub mod cli;
