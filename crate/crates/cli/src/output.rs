use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const OUTPUT_ROOT_ENV: &str = "DFRC_OUTPUT_ROOT";

/// Output directory of one command. Files go to a hidden staging
/// directory that replaces `<root>/<command>` only on [`Staging::commit`];
/// dropping it uncommitted removes everything written so far.
pub struct Staging {
    dir: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(root: &Path, command: &str) -> Result<Self, CliError> {
        let dir = root.join(format!(".{command}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            target: root.join(command),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.dir, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// `DFRC_OUTPUT_ROOT` if set, else the configured `output_dir`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.clone())
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, S: Serialize> {
    // no timestamps: reruns must be byte-identical
    command: &'a str,
    version: &'a str,
    config_hash: String,
    seeds: S,
    files: Vec<FileEntry>,
    config_toml: String,
}

/// Writes `manifest.json` listing every staged file with its digest.
pub fn write_manifest<S: Serialize>(staging: &Staging, command: &str, cfg: &ExperimentConfig, seeds: S) -> Result<(), CliError> {
    let mut names: Vec<String> = fs::read_dir(staging.dir())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json" && !n.contains(".tmp"))
        .collect();
    names.sort();
    let files = names
        .into_iter()
        .map(|path| {
            let bytes = fs::read(staging.dir().join(&path))?;
            Ok(FileEntry {
                sha256: hex::encode(Sha256::digest(&bytes)),
                path,
            })
        })
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        seeds,
        files,
        config_toml: cfg.canonical_toml(),
    };
    dfrc_core::export::write_json(&staging.dir().join("manifest.json"), &m)?;
    Ok(())
}

/// Gnuplot script for an `index`/`x`-keyed CSV with one or more value columns.
pub fn gnuplot_curves(csv: &str, title: &str, xlabel: &str, ylabel: &str, logy: bool, with_ci: bool) -> String {
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset grid\n"
    );
    if logy {
        s.push_str("set logscale y\n");
    }
    if with_ci {
        s.push_str(&format!("plot '{csv}' using 1:2:3:4 with yerrorlines title '{title}'\n"));
    } else {
        s.push_str(&format!("plot for [c=2:*] '{csv}' using 1:c with lines\n"));
    }
    s
}

/// Gnuplot script drawing a range-Doppler magnitude CSV in dB.
pub fn gnuplot_map(csv: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\nset title '{title}'\nset xlabel 'Doppler bin'\nset ylabel 'range gate'\nset view map\nset cblabel 'dB'\nplot '{csv}' matrix rowheaders columnheaders using 1:2:(20*log10($3+1e-300)) with image notitle\n"
    )
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    dfrc_core::export::atomic_write(&dir.join(name), text.as_bytes())?;
    Ok(())
}
