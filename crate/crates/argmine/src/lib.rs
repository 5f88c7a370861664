//! File formats, model training and the command-line pipeline built on
//! [`argmine_core`].

pub mod brat;
pub mod cli;
pub mod corpus_io;
pub mod evaluate;
pub mod generators;
pub mod microtext;
pub mod model;

pub use argmine_core as core;
