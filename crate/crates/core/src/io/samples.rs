//! CSV sample matrices.

use std::path::Path;

use ndarray::Array2;

use super::table::write_atomic;
use crate::error::{Error, Result};

/// Reads an `N x d` matrix. A first row that fails to parse as numbers is
/// taken as a header. With `expected_dim` set, the column count must match.
pub fn read_csv_samples(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut width: Option<usize> = expected_dim;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = idx + 1;
        if idx == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            if let Some(w) = width {
                if record.len() != w {
                    return Err(bad(
                        path,
                        row,
                        record.len(),
                        format!("header has {} columns, expected {w}", record.len()),
                    ));
                }
            } else {
                width = Some(record.len());
            }
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(bad(
                path,
                row,
                record.len().min(w) + 1,
                format!("ragged row: {} fields, expected {w}", record.len()),
            ));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(path, row, col + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(bad(path, row, col + 1, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let w = width.unwrap_or(0);
    if rows == 0 || w == 0 {
        return Err(bad(path, 0, 0, "no sample rows".into()));
    }
    Ok(Array2::from_shape_vec((rows, w), data).expect("row lengths checked"))
}

/// Writes rows with shortest round-trip float formatting and an optional header.
pub fn write_csv_samples(path: impl AsRef<Path>, x: &Array2<f64>, header: Option<&[String]>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_csv(x, header))
}

pub fn encode_csv(x: &Array2<f64>, header: Option<&[String]>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).expect("in-memory write");
    }
    let mut fields = Vec::with_capacity(x.ncols());
    for row in x.rows() {
        fields.clear();
        fields.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&fields).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => {
            let row = match &other {
                csv::ErrorKind::Utf8 { pos: Some(p), .. } => p.record() as usize + 1,
                _ => 0,
            };
            bad(path, row, 0, format!("{other:?}"))
        }
    }
}

fn bad(path: &Path, row: usize, column: usize, message: String) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message,
    }
}

#[cfg(test)]
mod tests {
    use std::fs;

    use ndarray::array;

    use super::*;

    fn file(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, content).unwrap();
        (dir, p)
    }

    #[test]
    fn plain_and_header() {
        let (_d, p) = file("1,2,3\n4,5,6\n");
        assert_eq!(
            read_csv_samples(&p, None).unwrap(),
            array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
        );
        let (_d, p) = file("a,b,c\n1,2,3\n");
        assert_eq!(read_csv_samples(&p, Some(3)).unwrap(), array![[1.0, 2.0, 3.0]]);
    }

    #[test]
    fn errors_carry_position() {
        let (_d, p) = file("1,2\n3,NaN\n");
        match read_csv_samples(&p, None) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let (_d, p) = file("1,2\n3\n");
        assert!(matches!(read_csv_samples(&p, None), Err(Error::Csv { row: 2, .. })));
        let (_d, p) = file("1,2\n");
        assert!(read_csv_samples(&p, Some(3)).is_err());
        let (_d, p) = file("a,b\n");
        assert!(read_csv_samples(&p, None).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let x = array![[0.1, -1.0 / 3.0], [1e-300, 123456789.12345679]];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.csv");
        write_csv_samples(&p, &x, Some(&["u".into(), "v".into()])).unwrap();
        let y = read_csv_samples(&p, None).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
