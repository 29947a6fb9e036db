//! Regenerates the bundled synthetic dataset.
//!
//! `cargo run -p fairrec --example make_fixture [OUT_DIR]`

use std::path::PathBuf;

use fairrec::dataset::DatasetPaths;
use fairrec::synthetic::{generate, SyntheticConfig};

fn main() -> fairrec::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    std::fs::create_dir_all(&out).map_err(|e| fairrec::Error::Validation(e.to_string()))?;
    let data = generate(&SyntheticConfig::default())?;
    data.write(&DatasetPaths::in_dir(&out))?;
    println!("{}", serde_json::to_string_pretty(&data.summary())?);
    Ok(())
}
