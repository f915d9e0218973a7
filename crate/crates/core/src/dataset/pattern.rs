use std::path::Path;

use crate::error::{Error, Result};

pub const PATTERN_SIDE: usize = 8;
pub const NUM_CLASSES: usize = 10;

/// A hand-designed 8x8 base image for one digit class.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitPattern {
    pub digit: usize,
    pub grid: [[f64; PATTERN_SIDE]; PATTERN_SIDE],
}

impl DigitPattern {
    /// Parses eight lines of eight intensities in [0, 1]. Values are separated
    /// by whitespace; a line of exactly eight `0`/`1` characters is also
    /// accepted. Blank lines and lines starting with `#` are skipped.
    pub fn parse(digit: usize, text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse {
            path: format!("<digit {digit} pattern>").into(),
            line,
            message,
        };
        if digit >= NUM_CLASSES {
            return Err(Error::InvalidArgument(format!("digit class {digit} out of range")));
        }
        let mut grid = [[0.0; PATTERN_SIDE]; PATTERN_SIDE];
        let mut row = 0;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if row == PATTERN_SIDE {
                return Err(bad(n + 1, "more than 8 rows".into()));
            }
            let values: Vec<f64> = if !line.contains(char::is_whitespace)
                && line.len() == PATTERN_SIDE
                && line.chars().all(|c| c == '0' || c == '1')
            {
                line.chars().map(|c| if c == '1' { 1.0 } else { 0.0 }).collect()
            } else {
                line.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| bad(n + 1, format!("{t:?}: {e}"))))
                    .collect::<Result<_>>()?
            };
            if values.len() != PATTERN_SIDE {
                return Err(bad(n + 1, format!("expected 8 values, found {}", values.len())));
            }
            for (c, v) in values.into_iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(n + 1, format!("intensity {v} outside [0, 1]")));
                }
                grid[row][c] = v;
            }
            row += 1;
        }
        if row != PATTERN_SIDE {
            return Err(bad(row, format!("expected 8 rows, found {row}")));
        }
        if grid.iter().flatten().all(|&v| v == 0.0) {
            return Err(Error::InvalidArgument(format!("pattern for digit {digit} is blank")));
        }
        Ok(DigitPattern { digit, grid })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in &self.grid {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

macro_rules! builtin {
    ($($d:literal => [$($v:literal),+]),+ $(,)?) => {
        &[$($(($d, include_str!(concat!("../../patterns/digit", $d, "_v", $v, ".txt")))),+),+]
    };
}

const BUILTIN: &[(usize, &str)] = builtin! {
    0 => ["1", "2", "3"], 1 => ["1", "2", "3"], 2 => ["1", "2", "3"],
    3 => ["1", "2", "3"], 4 => ["1", "2", "3"], 5 => ["1", "2", "3"],
    6 => ["1", "2", "3"], 7 => ["1", "2", "3"], 8 => ["1", "2", "3"],
    9 => ["1", "2", "3"],
};

/// The three shipped patterns per digit, ordered by digit then variant.
pub fn builtin_patterns() -> Vec<DigitPattern> {
    BUILTIN
        .iter()
        .map(|&(d, text)| DigitPattern::parse(d, text).expect("shipped patterns are valid"))
        .collect()
}

/// Loads every `digit<D>_v<K>.txt` file in `dir`, sorted by digit then by
/// file name.
pub fn load_patterns(dir: &Path) -> Result<Vec<DigitPattern>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(digit) = name
            .strip_prefix("digit")
            .and_then(|rest| rest.split_once("_v"))
            .filter(|(_, tail)| tail.ends_with(".txt"))
            .and_then(|(d, _)| d.parse::<usize>().ok())
        else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let pattern = DigitPattern::parse(digit, &text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.clone(),
                line,
                message,
            },
            other => other,
        })?;
        found.push((digit, name.to_string(), pattern));
    }
    found.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(found.into_iter().map(|(_, _, p)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_set_is_complete() {
        let ps = builtin_patterns();
        assert_eq!(ps.len(), 30);
        for d in 0..NUM_CLASSES {
            assert_eq!(ps.iter().filter(|p| p.digit == d).count(), 3);
        }
        // no two shipped patterns are identical
        for (i, a) in ps.iter().enumerate() {
            for b in &ps[i + 1..] {
                assert_ne!(a.grid, b.grid);
            }
        }
    }

    #[test]
    fn parses_both_notations() {
        let compact = "00011000\n".repeat(8);
        let spaced = "0 0 0 1 1 0 0 0\n".repeat(8);
        let a = DigitPattern::parse(1, &compact).unwrap();
        let b = DigitPattern::parse(1, &spaced).unwrap();
        assert_eq!(a, b);
        let graded = "0 0.5 0 0 0 0 0 0\n".repeat(8);
        assert_eq!(DigitPattern::parse(2, &graded).unwrap().grid[3][1], 0.5);
    }

    #[test]
    fn rejects_bad_patterns() {
        assert!(DigitPattern::parse(1, &"0 0 0 1 1 0 0\n".repeat(8)).is_err());
        assert!(DigitPattern::parse(1, &"0 0 0 1 1 0 0 0\n".repeat(7)).is_err());
        assert!(DigitPattern::parse(1, &"0 0 0 1 2 0 0 0\n".repeat(8)).is_err());
        assert!(DigitPattern::parse(1, &"00000000\n".repeat(8)).is_err());
        assert!(DigitPattern::parse(10, &"00011000\n".repeat(8)).is_err());
    }

    #[test]
    fn text_round_trip() {
        for p in builtin_patterns() {
            assert_eq!(DigitPattern::parse(p.digit, &p.to_text()).unwrap(), p);
        }
    }
}
