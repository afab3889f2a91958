//! Behavioral analytics over per-frame animal perception outputs.

pub mod cluster;
pub mod embed;
pub mod imagery;
pub mod interchange;
pub mod maskops;
pub mod gait;
pub mod graze;
pub mod report;
pub mod rest;
pub mod speed;
pub mod synth;
