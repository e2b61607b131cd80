//! File output helpers. Every writer stages into a temporary sibling and
//! renames it into place, so readers never see a half-written file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::scalar::{to_f64, Cx, Real};

fn staging_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes `bytes` to `path` via temp-then-rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = staging_path(path);
    let res = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    atomic_write(path, &buf)
}

/// Serializes records (with a header row taken from the field names) to CSV.
pub fn csv_bytes<S: Serialize>(records: impl IntoIterator<Item = S>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| crate::error::Error::Serialization(e.to_string()))
}

/// Raw rows with an explicit header.
pub fn csv_rows_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| crate::error::Error::Serialization(e.to_string()))
}

pub fn write_csv<S: Serialize>(path: &Path, records: impl IntoIterator<Item = S>) -> Result<()> {
    atomic_write(path, &csv_bytes(records)?)
}

#[derive(Serialize)]
struct ComplexRow {
    index: usize,
    real: f64,
    imag: f64,
}

/// `index,real,imag` CSV of a complex vector.
pub fn complex_csv_bytes<T: Real>(v: &[Cx<T>]) -> Result<Vec<u8>> {
    csv_bytes(v.iter().enumerate().map(|(index, z)| ComplexRow {
        index,
        real: to_f64(z.re),
        imag: to_f64(z.im),
    }))
}

/// Full-precision float formatting that round-trips through `f64::from_str`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.json");
        write_json(&p, &vec![1, 2, 3]).unwrap();
        write_json(&p, &vec![4]).unwrap();
        let s = fs::read_to_string(&p).unwrap();
        assert!(s.contains('4') && !s.contains('1'));
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn complex_csv_layout() {
        let b = complex_csv_bytes(&[Cx::new(1.0f64, -2.0)]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "index,real,imag\n0,1.0,-2.0\n");
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1e-300, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
