pub mod bindings;
pub mod broker;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod ns;
pub mod pseudonym;
pub mod signing;
pub mod translation;
pub mod trust_registry;
pub mod xml;
