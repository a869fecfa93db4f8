pub mod analysis;
pub mod cli;
pub mod clock;
pub mod fixtures;
pub mod harness;
pub mod oracle;
pub mod stats;
pub mod trace;
