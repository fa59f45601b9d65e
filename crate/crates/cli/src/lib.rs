//! Front end for the fractional Hartree simulator: TOML experiment configs,
//! stamped artifacts and a verifier.

pub mod cli_io;
