use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use log::warn;
use malelm::imaging::bytes_to_image_with_width;
use malelm::{bytes_to_image, GrayImage};
use walkdir::WalkDir;

use crate::error::{usage, CliError, CliResult};
use crate::output::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Pgm,
}

impl ImageFormat {
    fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Files or directories (searched recursively).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Directory for the images and manifest.csv.
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "png")]
    pub format: ImageFormat,
    /// Fixed row width instead of the size-bucketed one.
    #[arg(long)]
    pub width: Option<usize>,
}

fn collect_inputs(inputs: &[PathBuf]) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in WalkDir::new(input).sort_by_file_name() {
                match entry {
                    Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
                    Ok(_) => {}
                    Err(e) => warn!("skipping unreadable entry: {e}"),
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    files
}

fn convert_one(path: &Path, width: Option<usize>) -> anyhow::Result<(u64, GrayImage)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let image = match width {
        Some(w) => bytes_to_image_with_width(&bytes, w),
        None => bytes_to_image(&bytes),
    }
    .with_context(|| format!("converting {}", path.display()))?;
    Ok((bytes.len() as u64, image))
}

pub fn run(args: &ConvertArgs) -> CliResult {
    if args.width == Some(0) {
        return Err(usage("`width` must be at least 1"));
    }
    let files = collect_inputs(&args.inputs);
    if files.is_empty() {
        return Err(usage("no inputs"));
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest
        .write_record(["file", "size_bytes", "width", "height"])
        .map_err(anyhow::Error::from)?;
    let mut used_names = HashSet::new();
    let mut converted = 0usize;
    for path in &files {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let name = format!("{stem}.{}", args.format.extension());
        if !used_names.insert(name.clone()) {
            warn!("skipping {}: output name {name} already used", path.display());
            continue;
        }
        let result = convert_one(path, args.width).and_then(|(size, image)| {
            let mut encoded = Vec::new();
            match args.format {
                ImageFormat::Png => image.write_png(&mut encoded)?,
                ImageFormat::Pgm => image.write_pgm(&mut encoded)?,
            }
            write_atomic(&args.out.join(&name), &encoded)?;
            Ok((size, image))
        });
        match result {
            Ok((size, image)) => {
                manifest
                    .write_record([
                        path.display().to_string(),
                        size.to_string(),
                        image.width().to_string(),
                        image.height().to_string(),
                    ])
                    .map_err(anyhow::Error::from)?;
                converted += 1;
            }
            Err(e) => warn!("{e:#}"),
        }
    }
    if converted == 0 {
        return Err(CliError::Runtime(anyhow!("none of the {} inputs could be converted", files.len())));
    }
    let manifest = manifest.into_inner().map_err(|e| anyhow!("manifest: {e}"))?;
    write_atomic(&args.out.join("manifest.csv"), &manifest)?;
    println!("converted {converted} of {} files into {}", files.len(), args.out.display());
    Ok(())
}
