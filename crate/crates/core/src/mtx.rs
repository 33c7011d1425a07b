//! Matrix Market (`.mtx`) reading and writing for real dense matrices.
//!
//! Reads `array` and `coordinate` files with `real`, `double` or `integer`
//! fields and `general` or `symmetric` symmetry. Writes `array real general`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Array,
    Coordinate,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, path)
}

/// Parses Matrix Market text; `path` is only used in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match tokens[2].as_str() {
        "array" => Format::Array,
        "coordinate" => Format::Coordinate,
        other => return Err(parse_err(path, 1, format!("unknown format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "double" | "integer" => {}
        other => return Err(parse_err(path, 1, format!("unsupported field '{other}', only real matrices"))),
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size_text) = body.next().ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let dims: Vec<usize> = size_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, size_line, format!("bad size line: {e}")))?;
    let expected_dims = if format == Format::Array { 2 } else { 3 };
    if dims.len() != expected_dims {
        return Err(parse_err(path, size_line, format!("size line needs {expected_dims} integers")));
    }
    let (m, n) = (dims[0], dims[1]);
    if m == 0 || n == 0 {
        return Err(parse_err(path, size_line, "matrix dimensions must be positive"));
    }
    if symmetric && m != n {
        return Err(parse_err(path, size_line, "symmetric matrix must be square"));
    }
    let parse_value = |line: usize, tok: &str| -> Result<f64> {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad number '{tok}'")))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        Ok(v)
    };

    let mut data = vec![0.0; m * n];
    match format {
        Format::Array => {
            let mut values = Vec::with_capacity(m * n);
            let mut last_line = size_line;
            for (line, text) in body {
                last_line = line;
                for tok in text.split_whitespace() {
                    values.push(parse_value(line, tok)?);
                }
            }
            if symmetric {
                let need = n * (n + 1) / 2;
                if values.len() != need {
                    return Err(parse_err(
                        path,
                        last_line,
                        format!("expected {need} values, found {}", values.len()),
                    ));
                }
                let mut it = values.into_iter();
                for j in 0..n {
                    for i in j..n {
                        let v = it.next().expect("counted");
                        data[i * n + j] = v;
                        data[j * n + i] = v;
                    }
                }
            } else {
                if values.len() != m * n {
                    return Err(parse_err(
                        path,
                        last_line,
                        format!("expected {} values, found {}", m * n, values.len()),
                    ));
                }
                return DenseMatrix::from_col_major(m, n, &values);
            }
        }
        Format::Coordinate => {
            let nnz = dims[2];
            let mut count = 0;
            let mut last_line = size_line;
            for (line, text) in body {
                last_line = line;
                let toks: Vec<&str> = text.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, line, "coordinate entry needs 'row col value'"));
                }
                let idx = |t: &str, bound: usize, what: &str| -> Result<usize> {
                    let v: usize = t
                        .parse()
                        .map_err(|_| parse_err(path, line, format!("bad {what} index '{t}'")))?;
                    if v == 0 || v > bound {
                        return Err(parse_err(path, line, format!("{what} index {v} out of range 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = idx(toks[0], m, "row")?;
                let j = idx(toks[1], n, "column")?;
                let v = parse_value(line, toks[2])?;
                data[i * n + j] += v;
                if symmetric && i != j {
                    data[j * n + i] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(parse_err(
                    path,
                    last_line,
                    format!("header declares {nnz} entries, found {count}"),
                ));
            }
        }
    }
    DenseMatrix::new(m, n, data)
}

/// `array real general` text with 17 significant digits per entry.
pub fn to_matrix_market(a: &DenseMatrix) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.rows(), a.cols());
    for v in a.to_col_major() {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub fn save_matrix_market(a: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_matrix_market(a)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::gaussian_matrix;

    fn parse(text: &str) -> Result<DenseMatrix> {
        parse_matrix_market(text, Path::new("t.mtx"))
    }

    #[test]
    fn array_identity() {
        let a = parse("%%MatrixMarket matrix array real general\n% c\n2 2\n1\n0\n0\n1\n").unwrap();
        assert_eq!(a, DenseMatrix::identity(2).unwrap());
    }

    #[test]
    fn coordinate_singleton() {
        let a = parse("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 2 5\n").unwrap();
        assert_eq!(a.to_rows(), vec![vec![0.0, 5.0, 0.0], vec![0.0, 0.0, 0.0]]);
    }

    #[test]
    fn symmetric_inputs() {
        let a = parse("%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 3\n2 1 4\n").unwrap();
        assert_eq!(a.to_rows(), vec![vec![3.0, 4.0], vec![4.0, 0.0]]);
        let b = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(b.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 3.0]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_header = parse("%%MatrixMarket vector array real general\n1 1\n1\n");
        assert!(matches!(bad_header, Err(Error::Parse { line: 1, .. })));
        let complex = parse("%%MatrixMarket matrix array complex general\n1 1\n1 0\n");
        assert!(matches!(complex, Err(Error::Parse { line: 1, .. })));
        let oob = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
        assert!(matches!(oob, Err(Error::Parse { line: 3, .. })));
        let short = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n");
        assert!(matches!(short, Err(Error::Parse { .. })));
        let nan = parse("%%MatrixMarket matrix array real general\n1 1\nnan\n");
        assert!(matches!(nan, Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn round_trip() {
        let a = gaussian_matrix(7, 4, 3.0, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        save_matrix_market(&a, &p).unwrap();
        let b = load_matrix_market(&p).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-12);
        assert_eq!(a, b);
    }
}
