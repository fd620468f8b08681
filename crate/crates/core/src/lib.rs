//! Analytics toolkit for crisis-time Bangla news headlines.

pub mod annotation;
pub mod augment;
pub mod classify;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod label;
pub mod lda;
pub mod preprocess;
pub mod temporal;

pub use label::Label;
