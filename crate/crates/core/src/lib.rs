//! Futures-based operational semantics for a relaxed memory model with
//! semantic dependencies, and an Owicki-Gries style proof-outline checker.
//!
//! Programs are parsed by [`lang`], expanded into event structures and
//! initial futures by [`events`], and executed by [`executor`] over the
//! tagged action graphs of [`memory`]. [`proofcheck`] discharges proof
//! outlines written with the view assertions of [`assertions`].

pub mod assertions;
pub mod cli;
pub mod events;
pub mod executor;
pub mod futures;
pub mod lang;
pub mod lex;
pub mod memory;
pub mod proofcheck;
pub mod relation;
