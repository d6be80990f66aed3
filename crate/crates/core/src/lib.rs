pub mod anticonc;
pub mod cli;
pub mod construct;
pub mod cube;
pub mod decompose;
pub mod error;
pub mod params;
pub mod plank;
pub mod refute;
pub mod scalar;
pub mod system;
pub mod verify;
