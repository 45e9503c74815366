use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Column, ColumnData, ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a UTF-8, comma-separated file whose first line names the columns.
///
/// `specs` may declare the kind (and levels) of any subset of columns; the
/// remaining columns are inferred: all-numeric columns become continuous,
/// everything else categorical with lexicographically sorted levels. Rows
/// with an empty or `?` cell are dropped and counted
/// ([`Dataset::dropped_rows`]).
pub fn load_csv(path: impl AsRef<Path>, specs: Option<&[ColumnSpec]>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Schema(format!("{}: missing header line", path.display())));
    }

    let declared: HashMap<&str, &ColumnSpec> = specs
        .unwrap_or_default()
        .iter()
        .map(|s| (s.name.as_str(), s))
        .collect();
    for name in declared.keys() {
        if !header.iter().any(|h| h == name) {
            return Err(Error::Schema(format!("declared column '{name}' not found in header")));
        }
    }

    // (data row number, cells) for complete rows
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    let mut dropped = 0usize;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Row {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        rows.push((row, record));
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} rows with missing cells", path.display());
    }

    let mut columns = Vec::with_capacity(header.len());
    for (j, name) in header.iter().enumerate() {
        let kind = match declared.get(name.as_str()) {
            Some(spec) => spec.kind.clone(),
            None => infer_kind(rows.iter().map(|(_, r)| &r[j])),
        };
        let column = match kind {
            ColumnKind::Continuous => {
                let mut values = Vec::with_capacity(rows.len());
                for (row, record) in &rows {
                    let cell = &record[j];
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => values.push(v),
                        Ok(_) => {
                            return Err(Error::Row {
                                row: *row,
                                message: format!("column '{name}': non-finite value '{cell}'"),
                            })
                        }
                        Err(_) => {
                            return Err(Error::Row {
                                row: *row,
                                message: format!("column '{name}': '{cell}' is not a number"),
                            })
                        }
                    }
                }
                Column {
                    spec: ColumnSpec::continuous(name.clone()),
                    data: ColumnData::Continuous(values),
                }
            }
            ColumnKind::Categorical { levels } => {
                let levels = if levels.is_empty() {
                    rows.iter()
                        .map(|(_, r)| r[j].to_string())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect::<Vec<_>>()
                } else {
                    levels
                };
                let index: HashMap<&str, u32> = levels.iter().enumerate().map(|(k, l)| (l.as_str(), k as u32)).collect();
                let mut codes = Vec::with_capacity(rows.len());
                for (row, record) in &rows {
                    match index.get(&record[j]) {
                        Some(&c) => codes.push(c),
                        None => {
                            return Err(Error::Row {
                                row: *row,
                                message: format!("column '{name}': '{}' is not a declared level", &record[j]),
                            })
                        }
                    }
                }
                Column {
                    spec: ColumnSpec {
                        name: name.clone(),
                        kind: ColumnKind::Categorical { levels },
                    },
                    data: ColumnData::Categorical(codes),
                }
            }
        };
        columns.push(column);
    }

    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no complete data rows", path.display())));
    }
    Ok(Dataset::new(columns)?.with_dropped(dropped))
}

fn infer_kind<'a>(mut cells: impl Iterator<Item = &'a str>) -> ColumnKind {
    if cells.all(|c| parse_finite(c).is_some()) {
        ColumnKind::Continuous
    } else {
        ColumnKind::Categorical { levels: Vec::new() }
    }
}

/// Write a dataset as CSV with a header line.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(data.columns().iter().map(|c| c.name()))?;
    for row in 0..data.n_rows() {
        writer.write_record(data.columns().iter().map(|c| c.cell_text(row)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    let mut inner = writer.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file_infers_categoricals() {
        let f = write_tmp("s,y\na,1\nb,0\n");
        let ds = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.columns().len(), 2);
        assert!(ds.columns()[0].spec.is_categorical());
        // all-numeric column is inferred continuous
        assert!(!ds.columns()[1].spec.is_categorical());
        assert_eq!(ds.row_ids(), &[0, 1]);
    }

    #[test]
    fn inferred_levels_are_lexicographic() {
        let f = write_tmp("c\nzeta\nalpha\nbeta\nalpha\n");
        let ds = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.columns()[0].spec.levels().unwrap(), &["alpha", "beta", "zeta"]);
    }

    #[test]
    fn bad_number_in_declared_continuous_names_row() {
        let f = write_tmp("age,s\n39,a\nxyz,b\n");
        let specs = [ColumnSpec::continuous("age")];
        match load_csv(f.path(), Some(&specs)) {
            Err(Error::Row { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("xyz"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_in_declared_continuous_is_error() {
        let f = write_tmp("age\n1\ninf\n");
        let specs = [ColumnSpec::continuous("age")];
        assert!(matches!(load_csv(f.path(), Some(&specs)), Err(Error::Row { row: 2, .. })));
    }

    #[test]
    fn ragged_row_is_error() {
        let f = write_tmp("a,b\n1,2\n3\n");
        assert!(matches!(load_csv(f.path(), None), Err(Error::Row { row: 2, .. })));
    }

    #[test]
    fn undeclared_level_is_error() {
        let f = write_tmp("c\nx\ny\nz\n");
        let specs = [ColumnSpec::categorical("c", &["x", "y"])];
        assert!(matches!(load_csv(f.path(), Some(&specs)), Err(Error::Row { row: 3, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_csv("/nonexistent/file.csv", None), Err(Error::Io { .. })));
    }

    #[test]
    fn rows_with_missing_cells_are_dropped_and_counted() {
        let f = write_tmp("a,b\n1,x\n,y\n3,?\n4,z\n");
        let ds = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.dropped_rows(), 2);
        assert_eq!(ds.row_ids(), &[0, 1]);
    }

    #[test]
    fn quoted_fields_are_supported() {
        let f = write_tmp("name,v\n\"a, b\",1\nc,2\n");
        let ds = load_csv(f.path(), None).unwrap();
        assert_eq!(ds.columns()[0].cell_text(0), "a, b");
    }

    #[test]
    fn write_then_load_preserves_table() {
        let f = write_tmp("age,s,y\n39.5,a,1\n40,b,0\n");
        let ds = load_csv(f.path(), None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let back = load_csv(out.path(), None).unwrap();
        assert_eq!(ds, back);
    }
}
