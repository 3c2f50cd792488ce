//! Mixed quantum–classical circuits: representation, teleportation
//! transpilation, germ-infected simulation and noise analysis.

pub mod circuit;
pub mod linalg;
pub mod transpile;
pub mod sim;
pub mod fixtures;
pub mod noise;
