//! Toolkit for tuple relational calculus (TRC) queries: parsing, structural
//! normalization, syntactic safety checking, fragment rewrites, a finite-model
//! evaluation oracle, a diagrammatic representation with bidirectional
//! translation, size metrics, and deterministic SVG rendering.

pub mod ast;
pub mod diagram;
pub mod parser;
pub mod render;
pub mod eval;
pub mod fragment;
pub mod gen;
pub mod metrics;
pub mod safety;
pub mod translate;
