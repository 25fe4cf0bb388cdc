//! Conflict-Based Search for multi-agent pathfinding on 4-connected grids,
//! with bounded-suboptimal (BCBS, ECBS) and anytime variants.

pub mod anytime;
pub mod bound;
pub mod cat;
pub mod conflicts;
pub mod deadline;
pub mod gridmap;
pub mod highlevel;
pub mod instance;
pub mod lowlevel;
pub mod report;
pub mod validate;

pub use bound::Bound;
pub use conflicts::{Conflict, Constraint, Location, Path, Solution};
pub use deadline::Deadline;
pub use gridmap::{Cell, GridMap, Scenario, ScenarioEntry};
pub use instance::{build_instance, Agent, Instance};
