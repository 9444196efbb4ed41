pub mod data;
pub mod eval;
pub mod geometry;
pub mod oracle;
pub mod search;
pub mod training;
