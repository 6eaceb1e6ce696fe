//! Snapshot files, number formatting and atomic output.
//!
//! Snapshot CSV layout: one row per observable, one column per snapshot, no
//! header. Entries are real (`0.5`) or complex (`0.5-2e-3j`). Lines starting
//! with `#` are comments.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use koopman_core::observables::{Provenance, SnapshotMatrix};
use koopman_core::{KoopmanError, Result};
use num_complex::Complex64;
use serde_json::Value;

/// File format for bundles and snapshot files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Guess from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_complex(re: String, im: String) -> String {
    if im.starts_with(['-', '+']) {
        format!("{re}{im}j")
    } else {
        format!("{re}+{im}j")
    }
}

/// Shortest round-trip text, `re` alone when the imaginary part is `+0`.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 && z.im.is_sign_positive() {
        format!("{:?}", z.re)
    } else {
        join_complex(format!("{:?}", z.re), format!("{:?}", z.im))
    }
}

/// Like [`format_complex`] with 17 significant digits per part.
pub fn format_complex17(z: Complex64) -> String {
    if z.im == 0.0 && z.im.is_sign_positive() {
        fmt17(z.re)
    } else {
        join_complex(fmt17(z.re), fmt17(z.im))
    }
}

/// Parses `re`, `re+imj`, `re-imj` or `imj` (`i` is accepted for `j`).
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (body[..i].parse::<f64>().ok()?, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().ok()?,
    };
    Some(Complex64::new(re, im))
}

/// Reads a snapshot matrix from `path`. The format defaults to the file
/// extension.
pub fn ingest_snapshots(path: &Path, format: Option<Format>) -> Result<SnapshotMatrix> {
    let text = fs::read_to_string(path)
        .map_err(|e| KoopmanError::input(format!("cannot read {}: {e}", path.display())))?;
    let source = Provenance::File(path.display().to_string());
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Csv => parse_snapshots_csv(&text, source),
        Format::Json => parse_snapshots_json(&text, source),
    }
}

pub fn parse_snapshots_csv(text: &str, source: Provenance) -> Result<SnapshotMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            KoopmanError::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(KoopmanError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", first.len(), record.len()),
                });
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                parse_complex(field).ok_or_else(|| KoopmanError::Parse {
                    line,
                    message: format!("malformed entry '{field}' in column {}", c + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    from_rows(rows, source)
}

fn from_rows(rows: Vec<Vec<Complex64>>, source: Provenance) -> Result<SnapshotMatrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(KoopmanError::EmptyData("snapshot file has no entries".into()));
    }
    let count = rows[0].len();
    let columns: Vec<Vec<Complex64>> = (0..count).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    SnapshotMatrix::from_columns(&columns, source)
}

fn json_entry(v: &Value) -> Option<Complex64> {
    match v {
        Value::Number(n) => n.as_f64().map(|x| Complex64::new(x, 0.0)),
        Value::String(s) => parse_complex(s),
        Value::Object(o) => Some(Complex64::new(json_f64(o.get("re")?)?, json_f64(o.get("im")?)?)),
        _ => None,
    }
}

fn json_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// Accepts a bare array of rows or a result bundle carrying snapshots.
/// Row numbers stand in for line numbers in error messages.
pub fn parse_snapshots_json(text: &str, source: Provenance) -> Result<SnapshotMatrix> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| KoopmanError::Parse { line: e.line(), message: e.to_string() })?;
    let rows = doc.pointer("/payload/snapshots").unwrap_or(&doc);
    let rows = rows
        .as_array()
        .ok_or_else(|| KoopmanError::Parse { line: 1, message: "expected an array of rows".into() })?;
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| KoopmanError::Parse { line: i + 1, message: format!("row {} is not an array", i + 1) })?;
        if let Some(first) = out.first() {
            if row.len() != first.len() {
                return Err(KoopmanError::Parse {
                    line: i + 1,
                    message: format!("row {} has {} entries, expected {}", i + 1, row.len(), first.len()),
                });
            }
        }
        let values = row
            .iter()
            .map(|v| {
                json_entry(v)
                    .ok_or_else(|| KoopmanError::Parse { line: i + 1, message: format!("malformed entry {v} in row {}", i + 1) })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(values);
    }
    from_rows(out, source)
}

/// Snapshot CSV text readable by [`parse_snapshots_csv`].
pub fn emit_snapshots_csv(snapshots: &SnapshotMatrix) -> String {
    let data = snapshots.matrix();
    let mut out = String::new();
    for i in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|j| format_complex17(data[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Name of the file that marks a directory as a CSV result bundle.
pub const BUNDLE_MARKER: &str = "metadata.csv";

/// Builds a directory of files beside `path` and renames it into place. An
/// existing directory is replaced only if it holds a previous bundle.
pub fn write_dir_atomic(path: &Path, files: &[(String, Vec<u8>)]) -> io::Result<()> {
    let parent = parent_dir(path);
    let staging = tempfile::Builder::new().prefix(".koopman-out").tempdir_in(parent)?;
    for (name, bytes) in files {
        fs::write(staging.path().join(name), bytes)?;
    }
    if path.exists() {
        if !path.is_dir() || !path.join(BUNDLE_MARKER).is_file() {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("{} exists and is not a result bundle directory", path.display()),
            ));
        }
        let old = tempfile::Builder::new().prefix(".koopman-old").tempdir_in(parent)?;
        let old_path = old.path().join("previous");
        fs::rename(path, &old_path)?;
        fs::rename(staging.keep(), path)?;
        drop(old);
    } else {
        fs::rename(staging.keep(), path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> Provenance {
        Provenance::Synthetic("test".into())
    }

    #[test]
    fn complex_field_forms() {
        let c = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("1.5"), c(1.5, 0.0));
        assert_eq!(parse_complex("1.5+2j"), c(1.5, 2.0));
        assert_eq!(parse_complex("-1.5e-3-2.5E+2j"), c(-1.5e-3, -250.0));
        assert_eq!(parse_complex("3j"), c(0.0, 3.0));
        assert_eq!(parse_complex("-j"), c(0.0, -1.0));
        assert_eq!(parse_complex("1-i"), c(1.0, -1.0));
        assert_eq!(parse_complex(" 2e5 "), c(2e5, 0.0));
        assert!(parse_complex("inf").is_some_and(|z| z.re.is_infinite()));
        assert!(parse_complex("NaN").is_some_and(|z| z.re.is_nan()));
        assert_eq!(parse_complex("1..2"), None);
        assert_eq!(parse_complex("1+2"), None);
        assert_eq!(parse_complex(""), None);
        assert_eq!(parse_complex("abc"), None);
    }

    #[test]
    fn reals_shape() {
        let text = "1,2,3,4\n5,6,7,8\n9,10,11,12\n";
        let s = parse_snapshots_csv(text, src()).unwrap();
        assert_eq!((s.m(), s.count()), (3, 4));
        assert_eq!(s.matrix()[(1, 2)], Complex64::new(7.0, 0.0));
    }

    #[test]
    fn malformed_entry_names_its_line() {
        let mut text = String::new();
        for i in 0..10 {
            if i == 6 {
                text.push_str("1,2,oops\n");
            } else {
                text.push_str("1,2,3\n");
            }
        }
        let err = parse_snapshots_csv(&text, src()).unwrap_err();
        assert!(matches!(err, KoopmanError::Parse { line: 7, .. }), "{err:?}");
    }

    #[test]
    fn ragged_rows_name_their_line() {
        let err = parse_snapshots_csv("# header comment\n1,2,3\n4,5\n", src()).unwrap_err();
        assert!(matches!(err, KoopmanError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse_snapshots_csv("", src()), Err(KoopmanError::EmptyData(_))));
        assert!(matches!(parse_snapshots_csv("# nothing\n\n", src()), Err(KoopmanError::EmptyData(_))));
        assert!(matches!(parse_snapshots_json("[]", src()), Err(KoopmanError::EmptyData(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cols = vec![
            vec![Complex64::new(0.1, 0.0), Complex64::new(-1.0 / 3.0, 2.0f64.sqrt())],
            vec![Complex64::new(1e-300, -0.0), Complex64::new(std::f64::consts::PI, -7e10)],
        ];
        let s = SnapshotMatrix::from_columns(&cols, src()).unwrap();
        let back = parse_snapshots_csv(&emit_snapshots_csv(&s), src()).unwrap();
        assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn json_rows_accept_mixed_entries() {
        let s = parse_snapshots_json(r#"[[1, "2+1j", {"re": 3, "im": -1}], [4, 5, 6]]"#, src()).unwrap();
        assert_eq!((s.m(), s.count()), (2, 3));
        assert_eq!(s.matrix()[(0, 2)], Complex64::new(3.0, -1.0));
        let err = parse_snapshots_json("[[1,2],[3]]", src()).unwrap_err();
        assert!(matches!(err, KoopmanError::Parse { line: 2, .. }));
    }

    #[test]
    fn atomic_writes_replace_only_bundles() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.json");
        write_file_atomic(&file, b"one").unwrap();
        write_file_atomic(&file, b"two").unwrap();
        assert_eq!(fs::read_to_string(&file).unwrap(), "two");

        let out = dir.path().join("bundle");
        let files = vec![(BUNDLE_MARKER.to_string(), b"k,v\n".to_vec()), ("t.csv".to_string(), b"x\n1\n".to_vec())];
        write_dir_atomic(&out, &files).unwrap();
        write_dir_atomic(&out, &files[..1]).unwrap();
        assert!(!out.join("t.csv").exists());

        let plain = dir.path().join("plain");
        fs::create_dir(&plain).unwrap();
        assert!(write_dir_atomic(&plain, &files).is_err());
        let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".koopman")
        });
        assert_eq!(leftovers.count(), 0);
    }
}
