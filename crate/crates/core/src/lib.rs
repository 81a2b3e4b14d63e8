//! Grid-house simulator and hierarchical interactive question-answering agent.

pub mod classes;
pub mod controllers;
pub mod geom;
pub mod harness;
pub mod memory;
pub mod planner;
pub mod questions;
pub mod rooms;
pub mod world;
