//! A desk-scale simulator of a federated grid testbed and its middleware.

pub mod infosys;
pub mod auth;
pub mod jdl;
pub mod fabric;
pub mod datamgmt;
pub mod wms;
pub mod monitor;
pub mod grid;
