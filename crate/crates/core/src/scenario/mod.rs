//! Batch front door: a `key = value` scenario file selects a mode, the run
//! writes `result.csv` (one checked quantity per row) and mode-specific
//! detail tables. Every random instance is drawn from a seeded ChaCha
//! stream, so identical configs produce identical bytes.

mod config;
mod report;
mod run;

pub use config::{key_reference, parse_config, parse_config_str, Mode, ScenarioConfig, KEYS};
pub use report::{real, Check, Checks, Status, Table};
pub use run::{perturb_eta, random_inner_instance, run, RunOutput};
