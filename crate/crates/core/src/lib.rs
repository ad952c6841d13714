pub mod coreset;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod matching_graph;
pub mod oracle;
pub mod sketch;
