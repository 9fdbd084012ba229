//! Syntax-tree-guided retrieval and reasoning for complex questions.
//!
//! A question is parsed into a dependency or constituency tree, the tree is
//! pruned, and every remaining sub-phrase is resolved bottom-up: generate
//! focused queries, retrieve paragraphs with BM25, and condense them into
//! short evidence that feeds the parent node. A final prompt aggregates the
//! evidence from the whole tree into the answer.

pub mod syntax;
pub mod index;
pub mod llm;
pub mod pipeline;
pub mod eval;
