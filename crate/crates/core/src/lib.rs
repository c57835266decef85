//! Offline pipeline from UK primary-legislation XML (CLML) to citation
//! graphs, a nested table of contents and hyperlinked section fragments.
//!
//! Phases, in order: [`ingest`] fetches and caches XML, [`parser`] builds the
//! [`model`], [`refs`] extracts cross-references, [`transform`] serializes
//! graphs and HTML, and [`integrity`] audits the result.

pub mod cli;
pub mod ingest;
pub mod integrity;
pub mod model;
pub mod parser;
pub mod refs;
pub mod transform;
