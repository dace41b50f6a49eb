pub mod branch_steer;
pub mod cli;
pub mod code_model;
pub mod complexity;
mod java;
pub mod llm_gateway;
pub mod pipeline;
pub mod prompts;
pub mod seed_miner;
pub mod toolchain;
