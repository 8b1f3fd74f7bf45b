pub mod agent;
pub mod dataset;
pub mod embedding;
pub mod eval;
pub mod index;
pub mod mcp;
pub mod retrieval;
pub mod sync;
pub mod text;
pub mod tool_model;
pub mod workbench;
