//! Core data model and algorithms for cross-lingual argument mining.
//!
//! Everything in this crate is pure and allocation-only: argument graphs and
//! their validation, the Persuasive-Essays to Microtext label projection,
//! stance/relation example extraction with leakage-free splits, class-balance
//! planning and candidate filtering for synthetic augmentation, and
//! classification metrics with the table and case-study renderers.
//!
//! IO, file formats, the neural model and the CLI live in the `argmine`
//! companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augment;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod graph;
pub mod pe;
pub mod seed;
pub mod text;

pub use graph::{Adu, ArgumentGraph, Edge, EdgeTarget, Edu, Language, RelationType, Stance};
