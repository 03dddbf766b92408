//! Hijacking-report relevance pipeline.
//!
//! Ingest short posts, clean and featurize them, train and compare three neural
//! model families (TF-IDF fed 1-D CNNs, TF-IDF fed dense networks, and a small
//! from-scratch transformer encoder over token ids), then turn the posts judged
//! relevant into a point map of mentioned places.
//!
//! Modules follow the data flow:
//! [`corpus`] → [`textprep`] → [`models`] → [`eval`] → [`geomap`].

pub mod corpus;
pub mod error;
pub mod eval;
pub mod geomap;
pub mod models;
pub mod textprep;

pub use error::{Error, Result};
