//! Run manifests: the effective flags plus digests of everything written.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Common;

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    /// File path, or `-` for stdout.
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutputDigest {
    pub fn of(path: &str, content: &str) -> Self {
        Self { path: path.to_string(), bytes: content.len(), sha256: format!("{:x}", Sha256::digest(content.as_bytes())) }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Every flag with its effective value; usable as `--config`.
    pub flags: Value,
    pub master_seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<OutputDigest>,
}

/// Where the manifest goes, `None` meaning stderr.
pub fn manifest_path(common: &Common) -> Option<PathBuf> {
    common.manifest.clone().or_else(|| {
        common.out.as_ref().map(|out| {
            let mut s = out.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

/// Text of the trailing manifest reference in CSV outputs.
pub fn reference(common: &Common) -> String {
    match manifest_path(common) {
        Some(p) => format!("manifest: {}", p.file_name().map(Path::new).unwrap_or(&p).display()),
        None => "manifest: stderr".to_string(),
    }
}
