//! Flat text export of value fields.
//!
//! One comma-separated file per mode, `mode<i>.csv` with one-based `i`,
//! rows ordered by time layer then node, plus `surfaces.json` describing the
//! grid and the scheme options. Floats are written in shortest round-trip
//! form so a re-read reproduces the field bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::field::ValueField;
use super::grid::Grid;
use super::theta::SchemeOptions;
use super::FdError;

pub const METADATA_FILE: &str = "surfaces.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub grid: Grid,
    pub options: SchemeOptions,
    pub mode_count: usize,
    pub brownian_dim: usize,
    pub files: Vec<String>,
}

pub fn mode_file_name(mode: usize) -> String {
    format!("mode{}.csv", mode + 1)
}

fn header(k: usize, d: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=k).map(|r| format!("x{r}")));
    cols.push("u".into());
    cols.extend((1..=d).map(|c| format!("z{c}")));
    cols.push("dK".into());
    cols.push("active".into());
    cols.join(",")
}

/// Writes every mode of `field` into `dir`, returning the paths written.
pub fn write_surfaces(
    dir: &Path,
    grid: &Grid,
    field: &ValueField,
    options: &SchemeOptions,
) -> Result<Vec<PathBuf>, FdError> {
    let m = field.mode_count();
    if m == 0 {
        return Err(FdError::Format("field has no modes".into()));
    }
    if field.layers() != grid.time_steps + 1 || field.nodes() != grid.node_count() {
        return Err(FdError::ShapeMismatch("field does not live on the given grid".into()));
    }
    fs::create_dir_all(dir)?;
    let k = grid.dim();
    let d = field.brownian_dim();
    let coords: Vec<Vec<f64>> = (0..grid.node_count()).map(|s| grid.coords(s)).collect();
    let mut paths = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut text = header(k, d);
        text.push('\n');
        for n in 0..field.layers() {
            let t = grid.time(n);
            for (s, x) in coords.iter().enumerate() {
                write!(text, "{t}").unwrap();
                for v in x {
                    write!(text, ",{v}").unwrap();
                }
                write!(text, ",{}", field.values[i][[n, s]]).unwrap();
                for c in 0..d {
                    write!(text, ",{}", field.gradients[i][[n, s, c]]).unwrap();
                }
                write!(text, ",{},", field.reflection_increments[i][[n, s]]).unwrap();
                if let Some(j) = field.active_obstacle[i][[n, s]] {
                    write!(text, "{}", j + 1).unwrap();
                }
                text.push('\n');
            }
        }
        let path = dir.join(mode_file_name(i));
        fs::write(&path, text)?;
        paths.push(path);
    }
    let meta = SurfaceMetadata {
        grid: grid.clone(),
        options: *options,
        mode_count: m,
        brownian_dim: d,
        files: (0..m).map(mode_file_name).collect(),
    };
    let path = dir.join(METADATA_FILE);
    let json = serde_json::to_string_pretty(&meta).map_err(|e| FdError::Format(e.to_string()))?;
    fs::write(&path, json + "\n")?;
    paths.push(path);
    Ok(paths)
}

fn parse_f64(field: &str, file: &str, line: usize) -> Result<f64, FdError> {
    field
        .parse()
        .map_err(|_| FdError::Format(format!("{file}:{line}: not a number: {field:?}")))
}

/// Reads back what [`write_surfaces`] wrote.
pub fn read_surfaces(dir: &Path) -> Result<(SurfaceMetadata, ValueField), FdError> {
    let meta_text = fs::read_to_string(dir.join(METADATA_FILE))?;
    let meta: SurfaceMetadata = serde_json::from_str(&meta_text).map_err(|e| FdError::Format(e.to_string()))?;
    if meta.mode_count == 0 || meta.files.len() != meta.mode_count {
        return Err(FdError::Format(
            "metadata lists no modes or an inconsistent file list".into(),
        ));
    }
    let grid = &meta.grid;
    let k = grid.dim();
    let d = meta.brownian_dim;
    let nodes = grid.node_count();
    let mut field = ValueField::zeros(grid, meta.mode_count, d);
    let expected_header = header(k, d);
    for (i, name) in meta.files.iter().enumerate() {
        let text = fs::read_to_string(dir.join(name))?;
        let mut lines = text.lines();
        if lines.next() != Some(expected_header.as_str()) {
            return Err(FdError::Format(format!("{name}: unexpected header")));
        }
        let mut count = 0;
        for (row, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != k + d + 4 {
                return Err(FdError::Format(format!(
                    "{name}:{}: expected {} columns",
                    row + 2,
                    k + d + 4
                )));
            }
            let (n, s) = (row / nodes, row % nodes);
            if n > grid.time_steps {
                return Err(FdError::Format(format!("{name}: too many rows")));
            }
            field.values[i][[n, s]] = parse_f64(cols[k + 1], name, row + 2)?;
            for c in 0..d {
                field.gradients[i][[n, s, c]] = parse_f64(cols[k + 2 + c], name, row + 2)?;
            }
            field.reflection_increments[i][[n, s]] = parse_f64(cols[k + d + 2], name, row + 2)?;
            let active = cols[k + d + 3];
            field.active_obstacle[i][[n, s]] = if active.is_empty() {
                None
            } else {
                let j: usize = active
                    .parse()
                    .map_err(|_| FdError::Format(format!("{name}:{}: bad active mode {active:?}", row + 2)))?;
                if j == 0 || j > meta.mode_count {
                    return Err(FdError::Format(format!(
                        "{name}:{}: active mode {j} out of range",
                        row + 2
                    )));
                }
                Some(j - 1)
            };
            count += 1;
        }
        if count != nodes * (grid.time_steps + 1) {
            return Err(FdError::Format(format!(
                "{name}: {count} rows, expected {}",
                nodes * (grid.time_steps + 1)
            )));
        }
    }
    Ok((meta, field))
}
