//! Line-oriented dataset files.
//!
//! Ratings: `<user> <item> <rating>` per line. Social: `<user> <user> [0|1]`.
//! Fields are whitespace separated; blank lines and lines starting with `#`
//! are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::data::{ItemId, RatingScale, RatingTable, SocialGraph, UserId};
use crate::error::{Error, Result};

/// Counters collected while reading a file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub records: usize,
    pub duplicates: usize,
    pub self_loops: usize,
    pub zero_links: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Yields `(line_number, fields)` for every data line.
fn data_lines<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, Vec<String>)>> + 'a {
    reader.lines().enumerate().filter_map(move |(idx, line)| {
        let line = match line {
            Ok(l) => l,
            Err(source) => return Some(Err(Error::Io { path: path.to_path_buf(), source })),
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(Ok((idx + 1, trimmed.split_whitespace().map(str::to_owned).collect())))
    })
}

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

pub fn load_ratings(path: impl AsRef<Path>, scale: RatingScale) -> Result<(RatingTable, IngestReport)> {
    let path = path.as_ref();
    read_ratings(open(path)?, path, scale)
}

pub fn read_ratings<R: BufRead>(
    reader: R,
    path: &Path,
    scale: RatingScale,
) -> Result<(RatingTable, IngestReport)> {
    let mut builder = RatingTable::builder(scale);
    let mut report = IngestReport::default();
    for entry in data_lines(reader, path) {
        let (line, fields) = entry?;
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 3 fields (user item rating), found {}", fields.len()),
            });
        }
        let user = UserId(parse_field(&fields[0], "user id", path, line)?);
        let item = ItemId(parse_field(&fields[1], "item id", path, line)?);
        let rating: f64 = parse_field(&fields[2], "rating", path, line)?;
        if !rating.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("non-finite rating {:?}", fields[2]),
            });
        }
        match builder.insert(user, item, rating) {
            Ok(Some(_)) => report.duplicates += 1,
            Ok(None) => {}
            Err(_) => {
                return Err(Error::Validation {
                    path: path.to_path_buf(),
                    line,
                    message: format!("rating {rating} outside [{}, {}]", scale.min, scale.max),
                })
            }
        }
        report.records += 1;
    }
    if report.duplicates > 0 {
        warn!("{}: {} duplicate ratings, kept the last occurrence", path.display(), report.duplicates);
    }
    Ok((builder.build(), report))
}

pub fn load_social(path: impl AsRef<Path>, directed: bool) -> Result<(SocialGraph, IngestReport)> {
    let path = path.as_ref();
    read_social(open(path)?, path, directed)
}

pub fn read_social<R: BufRead>(reader: R, path: &Path, directed: bool) -> Result<(SocialGraph, IngestReport)> {
    let mut graph = SocialGraph::new(directed);
    let mut report = IngestReport::default();
    for entry in data_lines(reader, path) {
        let (line, fields) = entry?;
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 2 or 3 fields (user user [0|1]), found {}", fields.len()),
            });
        }
        let a = UserId(parse_field(&fields[0], "user id", path, line)?);
        let b = UserId(parse_field(&fields[1], "user id", path, line)?);
        let linked = match fields.get(2).map(String::as_str) {
            None | Some("1") => true,
            Some("0") => false,
            Some(other) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("trust value must be 0 or 1, found {other:?}"),
                })
            }
        };
        report.records += 1;
        if !linked {
            report.zero_links += 1;
            continue;
        }
        if !graph.add_edge(a, b) {
            report.self_loops += 1;
        }
    }
    if report.self_loops > 0 {
        warn!("{}: dropped {} self-loops", path.display(), report.self_loops);
    }
    Ok((graph, report))
}

/// Writes the table in the ratings file format, in (user, item) order.
pub fn write_ratings<W: Write>(table: &RatingTable, mut out: W) -> std::io::Result<()> {
    for (u, i, r) in table.triples() {
        writeln!(out, "{u} {i} {r}")?;
    }
    Ok(())
}

/// Writes each stored arc once (undirected graphs: only `a < b`).
pub fn write_social<W: Write>(graph: &SocialGraph, mut out: W) -> std::io::Result<()> {
    for (a, b) in graph.arcs() {
        if graph.is_directed() || a < b {
            writeln!(out, "{a} {b}")?;
        }
    }
    Ok(())
}

pub fn save_ratings(table: &RatingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: PathBuf::from(path), source };
    let mut w = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    write_ratings(table, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn save_social(graph: &SocialGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io { path: PathBuf::from(path), source };
    let mut w = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    write_social(graph, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}
