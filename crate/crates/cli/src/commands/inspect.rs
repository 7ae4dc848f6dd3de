use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use crate::artifact::{read_file, sniff};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model (.elm) or ensemble (.elme) file.
    pub file: PathBuf,
}

pub fn run(args: &InspectArgs) -> CliResult {
    let bytes = read_file(&args.file)?;
    let sniffed = sniff(&bytes)?;
    let mut text = String::new();
    if let Some((count, seed)) = sniffed.ensemble {
        text.push_str(&format!("ensemble: {count} members, base seed {seed}\nfirst member header:\n"));
    }
    text.push_str(&serde_json::to_string_pretty(&sniffed.header).context("encoding header")?);
    text.push('\n');
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
