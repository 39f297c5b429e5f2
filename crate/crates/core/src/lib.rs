mod digest;
pub mod cli;
pub mod events;
pub mod llm;
pub mod metrics;
pub mod news;
pub mod prompts;
pub mod strategies;
