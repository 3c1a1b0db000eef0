#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod estimator;
pub mod planner;
pub mod plant;
pub mod runtime;
pub mod sim;
pub mod supervisor;
pub mod telemetry;
pub mod track;
