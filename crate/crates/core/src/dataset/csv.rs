//! Plain CSV sample files: one sample per line, reals separated by `", "`.
//!
//! Data and label files are parallel: line `i` of the label file is the
//! one-hot target of line `i` of the data file. The reader splits on commas
//! and whitespace alike, so `1.0, 2.5,3` reads as three values.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Orientation};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Shortest text that parses back to exactly `v`.
pub fn format_csv_value(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_line(values: &[f64]) -> String {
    let mut line = String::with_capacity(values.len() * 8);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push_str(", ");
        }
        // Debug prints the shortest representation that parses back exactly.
        write!(line, "{v:?}").expect("writing to a String");
    }
    line
}

pub fn parse_line(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

fn write_rows(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&format_line(row));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Writes samples and their targets to a data file and a label file.
pub fn write_csv(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    data_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("refusing to write an empty dataset".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dim(format!(
            "{} samples but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    write_rows(data_path, inputs)?;
    write_rows(labels_path, targets)
}

/// Reads `n_batches` consecutive `batchsize x n_atts` row-oriented batches
/// from the start of `path`. Lines after the last batch are ignored.
pub fn read_batches(path: &Path, n_atts: usize, batchsize: usize, n_batches: usize) -> Result<Vec<Matrix>> {
    if n_atts == 0 || batchsize == 0 {
        return Err(Error::InvalidArgument("n_atts and batchsize must be positive".into()));
    }
    let needed = batchsize * n_batches;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(needed * n_atts);
    let mut read = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        if read == needed {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        let row = parse_line(&line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        if row.len() != n_atts {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {n_atts} values, found {}", row.len()),
            });
        }
        values.extend(row);
        read += 1;
    }
    if read < needed {
        return Err(Error::PrematureEof {
            path: path.to_path_buf(),
            expected: needed,
            actual: read,
        });
    }
    values
        .chunks_exact(batchsize * n_atts)
        .map(|chunk| Matrix::from_row_major(chunk, batchsize, n_atts, Orientation::Row))
        .collect()
}

/// Number of values on the first non-empty line; zero for an empty file.
pub fn csv_file_width(path: &Path) -> Result<usize> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        return parse_line(&line).map(|v| v.len()).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        });
    }
    Ok(0)
}

/// Counts non-empty lines, for sizing a read.
pub fn count_samples(path: &Path) -> Result<usize> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut n = 0;
    for line in BufReader::new(file).lines() {
        if !line.map_err(|e| Error::io(path, e))?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_separators() {
        assert_eq!(parse_line("1.0, 2.5,3").unwrap(), vec![1.0, 2.5, 3.0]);
        assert_eq!(parse_line("-1e-3 ,  4").unwrap(), vec![-0.001, 4.0]);
        assert!(parse_line("1.0, x").is_err());
    }

    #[test]
    fn format_round_trips() {
        let v = [0.1, 1.0 / 3.0, -2.5e-300, 0.0, 1.0];
        let line = format_line(&v);
        assert!(line.starts_with("0.1, 0.3333333333333333, "));
        assert_eq!(parse_line(&line).unwrap(), v);
    }

    #[test]
    fn refuses_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_csv(&[], &[], &dir.path().join("d.csv"), &dir.path().join("l.csv"));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn batches_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("d.csv");
        let labels = dir.path().join("l.csv");
        let inputs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let targets: Vec<Vec<f64>> = (0..6).map(|i| vec![(i % 2) as f64, ((i + 1) % 2) as f64]).collect();
        write_csv(&inputs, &targets, &data, &labels).unwrap();

        let b = read_batches(&data, 2, 2, 3).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[2].to_row_major(), vec![4.0, 2.0, 5.0, 2.5]);
        let singles = read_batches(&labels, 2, 1, 6).unwrap();
        assert_eq!(singles.len(), 6);
        assert_eq!(singles[1].shape(), (1, 2));
        assert_eq!(count_samples(&data).unwrap(), 6);

        match read_batches(&data, 2, 4, 2) {
            Err(Error::PrematureEof { expected, actual, .. }) => assert_eq!((expected, actual), (8, 6)),
            other => panic!("unexpected {other:?}"),
        }
        match read_batches(&data, 3, 2, 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_batches(&dir.path().join("missing.csv"), 2, 1, 1),
            Err(Error::Io { .. })
        ));
    }
}
