//! Exact arithmetic for finitely generated metabelian nilpotent groups and
//! their actions on the unit interval.

pub mod charts;
pub mod coset;
pub mod group;
pub mod interval;
pub mod lattice;
pub mod measure;
pub mod numeric;
pub mod realization;
pub mod regularity;
