use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use super::dataset::Dataset;
use crate::{Error, Result};

/// Read a LIBSVM file. See [`parse_libsvm`].
pub fn load_libsvm(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_libsvm(std::io::BufReader::new(file), dim)
}

pub fn parse_libsvm_str(text: &str, dim: Option<usize>) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), dim)
}

/// Parse `<label> <index>:<value> ...` lines with 1-based, strictly increasing
/// indices. Blank lines and `#` comments are skipped.
///
/// Labels must all come from one of `{-1, +1}`, `{0, 1}` or `{1, 2}`; the
/// larger value of the pair maps to `+1`. The dimension is the largest index
/// seen unless `dim` is given, in which case larger indices are an error.
pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut label_lines = Vec::new();
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut max_index = 0;

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().expect("non-empty line");
        let label: f64 = label_token
            .parse()
            .map_err(|_| parse_err(format!("invalid label `{label_token}`")))?;
        let mut previous = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected index:value, got `{token}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("invalid index in `{token}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("invalid value in `{token}`")))?;
            if idx == 0 {
                return Err(parse_err("indices are 1-based".into()));
            }
            if idx <= previous {
                return Err(parse_err(format!(
                    "index {idx} does not increase past {previous}"
                )));
            }
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite value in `{token}`")));
            }
            if let Some(d) = dim {
                if idx > d {
                    return Err(parse_err(format!("index {idx} exceeds dimension {d}")));
                }
            }
            previous = idx;
            max_index = max_index.max(idx);
            cols.push(idx - 1);
            vals.push(val);
        }
        raw_labels.push(label);
        label_lines.push(line_no);
        row_ptr.push(cols.len());
    }

    let labels = map_labels(&raw_labels, &label_lines)?;
    Dataset::from_csr(dim.unwrap_or(max_index), labels, row_ptr, cols, vals)
}

fn map_labels(raw: &[f64], lines: &[usize]) -> Result<Vec<f64>> {
    const ENCODINGS: [(f64, f64); 3] = [(-1.0, 1.0), (0.0, 1.0), (1.0, 2.0)];
    for (neg, pos) in ENCODINGS {
        if raw.iter().all(|&y| y == neg || y == pos) {
            return Ok(raw.iter().map(|&y| if y == pos { 1.0 } else { -1.0 }).collect());
        }
    }
    // Report the first label that rules out every encoding given the ones before it.
    for (i, &y) in raw.iter().enumerate() {
        let fits = ENCODINGS
            .iter()
            .any(|&(neg, pos)| raw[..=i].iter().all(|&z| z == neg || z == pos));
        if !fits {
            return Err(Error::Parse {
                line: lines[i],
                message: format!("label {y} does not fit a binary encoding"),
            });
        }
    }
    unreachable!("some label must break every encoding")
}

/// Canonical text: labels as `1`/`-1`, 1-based indices, shortest round-trip values.
pub fn serialize_libsvm(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..data.len() {
        out.push_str(if data.label(i) > 0.0 { "1" } else { "-1" });
        let (cols, vals) = data.row(i);
        for (c, v) in cols.iter().zip(vals) {
            let _ = write!(out, " {}:{}", c + 1, v);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_line() {
        let d = parse_libsvm_str("1 1:0.5 3:-2\n", Some(3)).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.label(0), 1.0);
        assert_eq!(d.dense_row(0), vec![0.5, 0.0, -2.0]);
    }

    #[test]
    fn empty_feature_list() {
        let d = parse_libsvm_str("-1\n", Some(4)).unwrap();
        assert_eq!(d.label(0), -1.0);
        assert_eq!(d.dense_row(0), vec![0.0; 4]);
    }

    #[test]
    fn non_increasing_indices() {
        let err = parse_libsvm_str("1 1:1\n1 2:1 1:1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn label_encodings() {
        let d = parse_libsvm_str("0 1:1\n1 2:1\n", None).unwrap();
        assert_eq!((d.label(0), d.label(1)), (-1.0, 1.0));
        let d = parse_libsvm_str("2 1:1\n1 2:1\n", None).unwrap();
        assert_eq!((d.label(0), d.label(1)), (1.0, -1.0));
        let err = parse_libsvm_str("1 1:1\n0 1:1\n-1 1:1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_libsvm_str("3 1:1\n", None).is_err());
    }

    #[test]
    fn malformed_tokens_carry_line_numbers() {
        for bad in ["1 1:x", "1 a:1", "1 0:1", "1 11", "x 1:1"] {
            let text = format!("1 1:1\n\n{bad}\n");
            let err = parse_libsvm_str(&text, None).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 3, .. }), "{bad}: {err}");
        }
        assert!(parse_libsvm_str("1 5:1\n", Some(4)).is_err());
    }

    #[test]
    fn dimension_override_pads() {
        let d = parse_libsvm_str("1 2:1\n", Some(6)).unwrap();
        assert_eq!(d.dim(), 6);
    }

    #[test]
    fn canonical_roundtrip() {
        let text = "1 1:0.5 3:-2\n-1\n-1 2:1e-7 4:3\n";
        let d = parse_libsvm_str(text, None).unwrap();
        let again = parse_libsvm_str(&serialize_libsvm(&d), None).unwrap();
        assert_eq!(d, again);
        assert_eq!(serialize_libsvm(&again), serialize_libsvm(&d));
    }
}
