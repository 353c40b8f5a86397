//! Stylistic, syntactic and narrative complexity features for novels, and a
//! random-forest harness that classifies documents into quality categories
//! from those features.

pub mod arc_complexity;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod features;
pub mod forest;
pub mod lm;
pub mod par;
pub mod resources;
pub mod sentiment;
pub mod stylometry;
pub mod syntax_style;

pub use error::{Error, FeatureError, Result};
