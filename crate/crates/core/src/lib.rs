//! Human-steered hypothesis discovery.
//!
//! An exploratory engine grows a tree of coarse hypotheses by associating the
//! research background with inspiration papers; a refinement engine polishes a
//! chosen hypothesis level by level. A session state machine applies the
//! navigator's blueprint, routing and feedback signals and keeps an
//! event-sourced log that can be replayed. An evaluation harness simulates the
//! navigator with an oracle, and an HTTP service exposes sessions to clients.

pub mod domain;
pub mod eval;
pub mod explore;
pub mod llm;
pub mod protocol;
pub mod refine;
pub mod service;
pub mod text;
