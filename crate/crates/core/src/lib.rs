//! Structural priming harness for language models.
//!
//! Generates dative-alternation prime/target corpora, scores them through a
//! uniform backend protocol, and tests for the inverse frequency effect:
//! whether less expected prime structures prime more strongly.

pub mod analysis;
pub mod backend;
pub mod conllu;
pub mod corpus;
pub mod gateway;
pub mod lexicon;
pub mod metrics;
pub mod miner;
pub mod oracle;
pub mod protocol;
pub mod regression;
pub mod report;
pub mod runner;
pub mod sentence;
pub mod server;
