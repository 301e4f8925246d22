//! Output files. Everything is written to a temporary sibling and renamed
//! into place, so a reader never observes a partial file.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::LabError;
use crate::experiments::ReplicateRow;

/// Test hook: abort the process after this many bytes of the next output
/// file have reached the temporary file.
pub const CRASH_AFTER_BYTES_ENV: &str = "TORUS_OT_LAB_CRASH_AFTER_BYTES";

fn crash_point() -> Option<usize> {
    std::env::var(CRASH_AFTER_BYTES_ENV).ok()?.parse().ok()
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let tmp = temp_path(path);
    let ctx = |what: &str| format!("{what} {}", tmp.display());
    let mut file = File::create(&tmp).map_err(|e| LabError::io(ctx("cannot create"), e))?;
    if let Some(k) = crash_point() {
        let k = k.min(bytes.len());
        file.write_all(&bytes[..k]).and_then(|_| file.sync_all()).map_err(|e| LabError::io(ctx("cannot write"), e))?;
        std::process::abort();
    }
    file.write_all(bytes).map_err(|e| LabError::io(ctx("cannot write"), e))?;
    file.sync_all().map_err(|e| LabError::io(ctx("cannot sync"), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        LabError::io(format!("cannot move output into {}", path.display()), e)
    })
}

/// `<dir>/<stem>[.<timestamp>].<ext>`.
pub fn output_path(dir: &Path, stem: &str, ext: &str, deterministic_names: bool) -> PathBuf {
    if deterministic_names {
        dir.join(format!("{stem}.{ext}"))
    } else {
        dir.join(format!("{stem}.{}.{ext}", chrono::Utc::now().format("%Y%m%dT%H%M%SZ")))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, LabError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| LabError::Encode(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn rows_to_csv(rows: &[ReplicateRow]) -> Result<Vec<u8>, LabError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| LabError::Encode(e.to_string()))?;
    }
    w.into_inner().map_err(|e| LabError::Encode(e.to_string()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), LabError> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(format!("cannot create {}", dir.display()), e))
}
