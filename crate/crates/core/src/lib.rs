pub mod belief;
pub mod dialogue;
pub mod episode;
pub mod error;
pub mod featurize;
pub mod harness;
pub mod learn;
pub mod nncore;
pub mod ontology;
pub mod policy;
