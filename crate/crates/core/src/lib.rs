pub mod access;
pub mod bench;
pub mod descriptor;
pub mod fabric;
pub mod memspace;
pub mod orchestrator;
pub mod platform;
pub mod time;
