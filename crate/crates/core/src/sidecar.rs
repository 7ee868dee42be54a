//! Sidecar feature files.
//!
//! Two row layouts share one container style (UTF-8 text, tab-separated
//! fields, comma-separated vector components):
//!
//! - utterance rows: `id<TAB>v0,v1,...` - one fixed-length vector per
//!   utterance (acoustic vectors, pooled visual vectors)
//! - frame rows: `id<TAB>frame_index<TAB>v0,v1,...` - one vector per sampled
//!   frame (raw visual descriptors)

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

fn parse_vector(field: &str, path: &str, line_no: usize) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, line_no, format!("bad component {:?}", c)))
        })
        .collect()
}

fn format_vector(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Loads utterance rows. All vectors must share one dimension; ids must be
/// unique. An empty file is a valid empty map.
pub fn read_utterance_rows(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let display = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut out = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let mut fields = line.splitn(2, '\t');
        let id = fields.next().unwrap_or("").trim();
        let vector_field = fields
            .next()
            .ok_or_else(|| Error::format(&display, line_no, "missing vector field"))?;
        if id.is_empty() {
            return Err(Error::format(&display, line_no, "empty utterance id"));
        }
        let vector = parse_vector(vector_field, &display, line_no)?;
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::format(
                    &display,
                    line_no,
                    format!("vector has dim {}, expected {}", vector.len(), d),
                ));
            }
            _ => {}
        }
        if out.insert(id.to_string(), vector).is_some() {
            return Err(Error::format(
                &display,
                line_no,
                format!("duplicate utterance id {}", id),
            ));
        }
    }
    Ok(out)
}

/// Writes utterance rows sorted by id so identical data gives identical
/// bytes.
pub fn write_utterance_rows(
    path: impl AsRef<Path>,
    rows: &BTreeMap<String, Vec<f64>>,
) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let file = File::create(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    for (id, vector) in rows {
        writeln!(w, "{}\t{}", id, format_vector(vector)).map_err(|e| Error::io(&display, e))?;
    }
    Ok(())
}

/// Loads frame rows grouped by utterance id and sorted by frame index.
/// Duplicate (id, frame_index) pairs and ragged dims are format errors.
pub fn read_frame_rows(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<Vec<f64>>>> {
    let display = path.as_ref().display().to_string();
    let file = File::open(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut staged: BTreeMap<String, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(&display, line_no, "expected id, frame index, vector"));
        }
        let id = fields[0].trim();
        let frame_index: u64 = fields[1].trim().parse().map_err(|_| {
            Error::format(&display, line_no, format!("bad frame index {:?}", fields[1]))
        })?;
        let vector = parse_vector(fields[2], &display, line_no)?;
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(Error::format(
                    &display,
                    line_no,
                    format!("vector has dim {}, expected {}", vector.len(), d),
                ));
            }
            _ => {}
        }
        if staged
            .entry(id.to_string())
            .or_default()
            .insert(frame_index, vector)
            .is_some()
        {
            return Err(Error::format(
                &display,
                line_no,
                format!("duplicate frame ({}, {})", id, frame_index),
            ));
        }
    }
    Ok(staged
        .into_iter()
        .map(|(id, frames)| (id, frames.into_values().collect()))
        .collect())
}

/// Writes frame rows sorted by (id, frame index).
pub fn write_frame_rows(
    path: impl AsRef<Path>,
    rows: &BTreeMap<String, Vec<Vec<f64>>>,
) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let file = File::create(path.as_ref()).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    for (id, frames) in rows {
        for (frame_index, vector) in frames.iter().enumerate() {
            writeln!(w, "{}\t{}\t{}", id, frame_index, format_vector(vector))
                .map_err(|e| Error::io(&display, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn utterance_rows_round_trip() {
        let mut rows = BTreeMap::new();
        rows.insert("u2".to_string(), vec![0.5, -1.25, 3.0]);
        rows.insert("u1".to_string(), vec![1.0, 2.0, 0.1]);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_utterance_rows(f.path(), &rows).unwrap();
        assert_eq!(read_utterance_rows(f.path()).unwrap(), rows);
    }

    #[test]
    fn ragged_utterance_row_names_line() {
        let f = write_file("a\t1,2,3\nb\t1,2\n");
        match read_utterance_rows(f.path()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {:?}", other),
        }
    }

    #[test]
    fn duplicate_utterance_id_rejected() {
        let f = write_file("a\t1,2\na\t3,4\n");
        assert!(matches!(
            read_utterance_rows(f.path()),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn empty_utterance_file_is_empty_map() {
        let f = write_file("");
        assert!(read_utterance_rows(f.path()).unwrap().is_empty());
    }

    #[test]
    fn frame_rows_reordered_by_index() {
        let f = write_file("u1\t2\t7,8\nu1\t0\t1,2\nu1\t1\t4,5\n");
        let rows = read_frame_rows(f.path()).unwrap();
        assert_eq!(rows["u1"], vec![vec![1.0, 2.0], vec![4.0, 5.0], vec![7.0, 8.0]]);
    }

    #[test]
    fn duplicate_frame_rejected() {
        let f = write_file("u1\t0\t1,2\nu1\t0\t3,4\n");
        assert!(matches!(
            read_frame_rows(f.path()),
            Err(Error::Format { line: 2, .. })
        ));
    }
}
