//! Rewrite-driven vectorizer for FHE-style arithmetic circuits.
//!
//! Scalar expression programs are rewritten into SIMD-slot (batched) form by a
//! term rewriting system. Rewrites are chosen by greedy search, beam search or
//! a small learned hierarchical policy, all scored by an FHE-aware cost model.
//! Every rewrite can be checked against a modular slot interpreter.
//!
//! The main entry points:
//!
//! - [`ir`]: expression trees, typing, S-expression parsing and printing
//! - [`canon`]: identifier/constant canonical tokens used for dedup
//! - [`semantics`]: reference slot interpreter and prefix-equivalence oracle
//! - [`cost`]: operation cost, circuit depth, multiplicative depth
//! - [`rewrite`]: rule catalog, site enumeration and application
//! - [`env`]: the rewrite MDP (state, hierarchical actions, rewards)
//! - [`optimizer`]: greedy, beam, random and policy-driven search, training
//! - [`keys`]: rotation-key budgeting through non-adjacent form
//! - [`corpus`]: random programs, dataset loading, benchmark kernels
//! - [`report`]: benchmark suite CSV and run comparison

pub mod canon;
pub mod corpus;
pub mod cost;
pub mod env;
pub mod ir;
pub mod keys;
pub mod optimizer;
pub mod report;
pub mod rewrite;
pub mod semantics;

pub use ir::{Expr, ExprKind, Program, Ty, VarKind};
