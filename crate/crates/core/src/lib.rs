//! Seek-then-solve question answering over hierarchical tables.
//!
//! The pipeline builds row and column header trees from a table, lists
//! their root-to-leaf paths as tuples, asks a model to pick the relevant
//! tuples with a rationale (Seek), then asks it to answer the question,
//! optionally continuing from that rationale over a sub-table or a hint
//! (Solve). A single-stage prompt combines both steps, taught by a
//! demonstration whose reasoning joins the two rationales.

pub mod eval;
pub mod gateway;
pub mod parse;
pub mod prompt;
pub mod simplify;
pub mod table;
pub mod tree;
