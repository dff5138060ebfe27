#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod cli;
pub mod descriptive;
pub mod dirichlet;
pub mod error;
pub mod homogeneity;
pub mod rng;
pub mod simulation;
pub mod special;
