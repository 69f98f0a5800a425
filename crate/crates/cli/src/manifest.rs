//! Artifact manifest: one line per file under the output directory with a
//! 64-bit FNV-1a content hash, sorted by relative path.
//!
//! The manifest itself is excluded from the scan and rewritten after every
//! stage, so equal manifests mean byte-identical artifact sets — the
//! reproducibility contract checked across reruns and thread counts.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.txt";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a of a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Streaming FNV-1a of a file's contents.
pub fn hash_file(path: &Path) -> Result<u64> {
    let mut file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut buf = [0u8; 64 * 1024];
    let mut h = FNV_OFFSET;
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        for &b in &buf[..n] {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    Ok(h)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if !(dir == root && entry.file_name() == MANIFEST_NAME) {
            out.push(path);
        }
    }
    Ok(())
}

/// Relative path with `/` separators regardless of platform.
fn rel_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Scans `dir` recursively and rewrites its manifest. Returns the entries.
pub fn write_manifest(dir: &Path) -> Result<Vec<(u64, String)>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let mut entries: Vec<(u64, String)> = Vec::with_capacity(files.len());
    for path in &files {
        entries.push((hash_file(path)?, rel_name(dir, path)));
    }
    entries.sort_by(|a, b| a.1.cmp(&b.1));
    let mut text = String::new();
    for (hash, name) in &entries {
        text.push_str(&format!("{hash:016x}  {name}\n"));
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(entries)
}

/// Parses a manifest back into `(hash, relative path)` pairs.
pub fn read_manifest(path: &Path) -> Result<Vec<(u64, String)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (hash, name) = line.split_once("  ").ok_or_else(|| CliError::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: expected `<hash>  <path>`", i + 1),
        })?;
        let hash = u64::from_str_radix(hash, 16).map_err(|_| CliError::Format {
            path: path.to_path_buf(),
            reason: format!("line {}: bad hash `{hash}`", i + 1),
        })?;
        entries.push((hash, name.to_string()));
    }
    Ok(entries)
}
