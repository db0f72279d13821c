//! Series ingestion from CSV and TSV emission.
//!
//! Floats are written in `{:.16e}` form, which keeps 17 significant digits
//! and re-parses to the identical `f64`. Files are written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One column of observations read from a delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub name: String,
    pub values: Vec<Option<f64>>,
    /// Contents of the first column when another column holds the values.
    pub labels: Option<Vec<String>>,
}

impl SeriesFile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') && !first.contains(',') {
        b'\t'
    } else {
        b','
    }
}

/// Reads column `column` (1-based) of a comma- or tab-separated file.
///
/// Empty fields and `missing_token` become missing values. The first row is
/// treated as a header when its selected field is neither numeric nor the
/// missing token.
pub fn read_series(
    path: impl AsRef<Path>,
    column: usize,
    missing_token: &str,
) -> Result<SeriesFile> {
    let path = path.as_ref();
    if column == 0 {
        return Err(Error::InvalidSpec("column selector is 1-based".into()));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(sniff_delimiter(&text))
        .from_reader(text.as_bytes());

    let mut name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut header_seen = false;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record.get(column - 1).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("no column {column} (row has {} fields)", record.len()),
        })?;
        let value = if field.is_empty() || field == missing_token {
            None
        } else {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ if values.is_empty() && !header_seen => {
                    header_seen = true;
                    name = field.to_string();
                    continue;
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        message: format!("cannot parse '{field}' as a number"),
                    })
                }
            }
        };
        values.push(value);
        if column > 1 {
            labels.push(record.get(0).unwrap_or("").to_string());
        }
    }
    if values.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 0,
            message: "no data rows".into(),
        });
    }
    Ok(SeriesFile {
        name,
        values,
        labels: (column > 1).then_some(labels),
    })
}

/// Full-precision float formatting shared by all writers.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), fmt_float)
}

/// A header plus rows of already-formatted cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Tsv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Tsv {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cells of column `name` parsed as floats, `NA` as `None`.
    pub fn floats(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        Some(self.rows.iter().map(|r| r[c].parse().ok()).collect())
    }
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp: PathBuf = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

pub fn write_tsv(path: &Path, table: &Tsv) -> Result<()> {
    write_atomic(path, &table.render())
}

pub fn read_tsv(path: &Path) -> Result<Tsv> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split('\t').map(str::to_string).collect();
        if row.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Tsv { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn plain_column_with_missing() {
        let f = file("1.0\n2.5\nNA\n4\n");
        let s = read_series(f.path(), 1, "NA").unwrap();
        assert_eq!(s.values, vec![Some(1.0), Some(2.5), None, Some(4.0)]);
        assert_eq!(s.n_missing(), 1);
        assert!(s.labels.is_none());
    }

    #[test]
    fn header_is_detected() {
        let f = file("temp\n3\n\n4\n");
        let s = read_series(f.path(), 1, "NA").unwrap();
        assert_eq!(s.name, "temp");
        assert_eq!(s.values, vec![Some(3.0), Some(4.0)]);
    }

    #[test]
    fn second_column_and_labels() {
        let f = file("date,value\n2001-01,1.5\n2001-02,\n2001-03,-2\n");
        let s = read_series(f.path(), 2, "NA").unwrap();
        assert_eq!(s.values, vec![Some(1.5), None, Some(-2.0)]);
        assert_eq!(s.labels.unwrap(), vec!["2001-01", "2001-02", "2001-03"]);
        let f = file("a\tb\n1\t2\n3\t.\n");
        let s = read_series(f.path(), 2, ".").unwrap();
        assert_eq!(s.values, vec![Some(2.0), None]);
    }

    #[test]
    fn bad_cells_report_their_row() {
        let f = file("1\n2\nx\n");
        match read_series(f.path(), 1, "NA").unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 3),
            e => panic!("{e:?}"),
        }
        let f = file("1\n2\n");
        assert_eq!(
            read_series(f.path(), 3, "NA").unwrap_err().code(),
            "E_PARSE"
        );
        assert_eq!(
            read_series("/no/such/file.csv", 1, "NA")
                .unwrap_err()
                .code(),
            "E_IO"
        );
        let f = file("name\n");
        assert_eq!(
            read_series(f.path(), 1, "NA").unwrap_err().code(),
            "E_PARSE"
        );
    }

    #[test]
    fn tsv_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("t.tsv");
        let mut t = Tsv::new(["a", "b"]);
        t.push(vec!["1".into(), fmt_float(0.1)]);
        t.push(vec!["2".into(), fmt_opt(None)]);
        write_tsv(&path, &t).unwrap();
        let back = read_tsv(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("b").unwrap(), vec![Some(0.1), None]);
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let back: f64 = fmt_float(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
