pub mod clustering;
pub mod detmax;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod netgen;
pub mod precoders;
pub mod rate_model;
