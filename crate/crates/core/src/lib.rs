//! Translate C programs to Rust with an LLM backend, repair the output with
//! compiler and runtime feedback, and measure the results.

pub mod corpus;
pub mod llm;
pub mod buildcheck;
pub mod process;
pub mod exec;
pub mod prompt;
pub mod pipeline;
pub mod report;
pub mod vuln;
