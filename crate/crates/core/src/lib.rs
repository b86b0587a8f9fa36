//! Executable model of concurrent objects specified by subjective
//! histories: an elimination exchanger, a two-wire counting network and a
//! shared flip bit, plus a bounded schedule explorer for client programs.

pub mod check;
pub mod exchanger;
pub mod explore;
pub mod flip2;
pub mod native;
pub mod network;
pub mod pcm;
pub mod report;
pub mod scenarios;
pub mod trace;
pub mod vm;

pub use check::Violation;
