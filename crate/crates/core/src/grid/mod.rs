//! Raw cell grids and the containers that hold them: XLSX workbooks and
//! directories of CSV or TSV files. Nothing in here knows about markup.

mod delimited;
mod xlsx;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use delimited::{read_delimited, write_delimited};
pub use xlsx::{read_xlsx_bytes, write_xlsx_bytes};

/// Largest grid accepted from any container, matching XLSX sheet limits.
pub const MAX_ROWS: usize = 1 << 20;
pub const MAX_COLUMNS: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed container: {0}")]
    Format(String),
    #[error("files {first:?} and {second:?} both map to worksheet {name:?}")]
    NameCollision {
        name: String,
        first: String,
        second: String,
    },
}

impl GridError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        GridError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Write-side presentation hints. Only the XLSX writer honors them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellStyle {
    pub bold: bool,
    /// RGB fill color, e.g. `0xDDEBF7`.
    pub fill: Option<u32>,
    pub note: Option<String>,
    /// Store the cell as a number instead of a string.
    pub numeric: bool,
}

/// One worksheet: a rectangular, row-major matrix of optional strings.
///
/// Empty strings are stored as `None`, and trailing empty rows and columns
/// are trimmed, so two grids that display identically compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub name: String,
    cells: Vec<Vec<Option<String>>>,
    pub styles: BTreeMap<(usize, usize), CellStyle>,
}

impl Grid {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<Option<String>>>) -> Self {
        let mut grid = Grid {
            name: name.into(),
            cells: rows,
            styles: BTreeMap::new(),
        };
        grid.normalize();
        grid
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Grid::new(name, Vec::new())
    }

    /// Builds a grid from string rows; `""` marks an empty cell.
    pub fn from_rows<R, S>(name: impl Into<String>, rows: R) -> Self
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let rows = rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|s| Some(s.as_ref().to_string()))
                    .collect()
            })
            .collect();
        Grid::new(name, rows)
    }

    fn normalize(&mut self) {
        for row in &mut self.cells {
            for cell in row.iter_mut() {
                if cell.as_deref() == Some("") {
                    *cell = None;
                }
            }
        }
        while self
            .cells
            .last()
            .is_some_and(|r| r.iter().all(Option::is_none))
        {
            self.cells.pop();
        }
        let width = self
            .cells
            .iter()
            .map(|r| r.iter().rposition(Option::is_some).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0);
        for row in &mut self.cells {
            row.resize(width, None);
        }
        self.styles
            .retain(|&(r, c), _| r < self.cells.len() && c < width);
    }

    pub fn height(&self) -> usize {
        self.cells.len()
    }

    pub fn width(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn rows(&self) -> &[Vec<Option<String>>] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&str> {
        self.cells.get(row)?.get(col)?.as_deref()
    }

    /// Sets a cell, growing the grid as needed.
    pub fn set(&mut self, row: usize, col: usize, value: impl Into<String>) {
        let value = value.into();
        if value.is_empty() {
            if row < self.height() && col < self.width() {
                self.cells[row][col] = None;
            }
            return;
        }
        let width = self.width().max(col + 1);
        while self.cells.len() <= row {
            self.cells.push(Vec::new());
        }
        for r in &mut self.cells {
            r.resize(width, None);
        }
        self.cells[row][col] = Some(value);
    }

    pub fn style_mut(&mut self, row: usize, col: usize) -> &mut CellStyle {
        self.styles.entry((row, col)).or_default()
    }

    /// Swaps rows and columns, carrying styles along.
    pub fn transpose(&self) -> Grid {
        let mut rows = vec![vec![None; self.height()]; self.width()];
        for (r, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                rows[c][r] = cell.clone();
            }
        }
        let mut grid = Grid::new(self.name.clone(), rows);
        grid.styles = self
            .styles
            .iter()
            .map(|(&(r, c), s)| ((c, r), s.clone()))
            .collect();
        grid
    }

    pub(crate) fn check_size(&self) -> Result<(), GridError> {
        if self.height() > MAX_ROWS || self.width() > MAX_COLUMNS {
            return Err(GridError::Format(format!(
                "worksheet {:?} is {}x{}, larger than the {}x{} limit",
                self.name,
                self.height(),
                self.width(),
                MAX_ROWS,
                MAX_COLUMNS
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContainerFormat {
    Xlsx,
    CsvDir,
    TsvDir,
}

impl ContainerFormat {
    pub fn name(self) -> &'static str {
        match self {
            ContainerFormat::Xlsx => "xlsx",
            ContainerFormat::CsvDir => "csv",
            ContainerFormat::TsvDir => "tsv",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "xlsx" => Some(ContainerFormat::Xlsx),
            "csv" => Some(ContainerFormat::CsvDir),
            "tsv" => Some(ContainerFormat::TsvDir),
            _ => None,
        }
    }

    pub fn delimiter(self) -> Option<u8> {
        match self {
            ContainerFormat::Xlsx => None,
            ContainerFormat::CsvDir => Some(b','),
            ContainerFormat::TsvDir => Some(b'\t'),
        }
    }

    /// Guesses the container from a path: `.xlsx` files, or directories
    /// holding `.csv` (preferred) or `.tsv` files.
    pub fn infer(path: &Path) -> Option<Self> {
        if path.is_dir() {
            let mut saw_tsv = false;
            for entry in std::fs::read_dir(path).ok()?.flatten() {
                match extension_of(&entry.path()).as_deref() {
                    Some("csv") => return Some(ContainerFormat::CsvDir),
                    Some("tsv") => saw_tsv = true,
                    _ => {}
                }
            }
            return saw_tsv.then_some(ContainerFormat::TsvDir);
        }
        match extension_of(path).as_deref() {
            Some("xlsx") => Some(ContainerFormat::Xlsx),
            _ => None,
        }
    }
}

impl fmt::Display for ContainerFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn extension_of(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawWorkbook {
    pub grids: Vec<Grid>,
    pub source_format: ContainerFormat,
}

impl RawWorkbook {
    pub fn new(grids: Vec<Grid>, source_format: ContainerFormat) -> Self {
        RawWorkbook {
            grids,
            source_format,
        }
    }

    pub fn grid(&self, name: &str) -> Option<&Grid> {
        self.grids.iter().find(|g| g.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.grids.iter().map(|g| g.name.as_str()).collect()
    }

    /// Fails if two grids share a name.
    pub fn check_names(&self) -> Result<(), GridError> {
        let mut seen = HashMap::new();
        for grid in &self.grids {
            if let Some(prev) = seen.insert(grid.name.as_str(), grid.name.as_str()) {
                return Err(GridError::NameCollision {
                    name: grid.name.clone(),
                    first: prev.to_string(),
                    second: grid.name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// File name used for a grid inside a CSV/TSV set.
pub fn file_name_for(grid_name: &str, format: ContainerFormat) -> String {
    format!("{}.{}", grid_name.replace('/', "_"), format.name())
}

pub fn read_grids(source: &Path, format: ContainerFormat) -> Result<RawWorkbook, GridError> {
    if !source.exists() {
        return Err(GridError::io(
            source,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    match format {
        ContainerFormat::Xlsx => {
            let bytes = std::fs::read(source).map_err(|e| GridError::io(source, e))?;
            read_xlsx_bytes(&bytes)
        }
        ContainerFormat::CsvDir | ContainerFormat::TsvDir => read_delimited_dir(source, format),
    }
}

fn read_delimited_dir(dir: &Path, format: ContainerFormat) -> Result<RawWorkbook, GridError> {
    if !dir.is_dir() {
        return Err(GridError::Format(format!(
            "{} sets are directories; {} is not one",
            format,
            dir.display()
        )));
    }
    let delimiter = format.delimiter().unwrap_or(b',');
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| GridError::io(dir, e))? {
        let entry = entry.map_err(|e| GridError::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && extension_of(&path).as_deref() == Some(format.name()) {
            files.push(path);
        }
    }
    files.sort();

    let mut names: HashMap<String, String> = HashMap::new();
    let mut grids = Vec::with_capacity(files.len());
    for path in files {
        let file_name = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(first) = names.insert(name.clone(), file_name.clone()) {
            return Err(GridError::NameCollision {
                name,
                first,
                second: file_name,
            });
        }
        let bytes = std::fs::read(&path).map_err(|e| GridError::io(&path, e))?;
        grids.push(read_delimited(&name, &bytes, delimiter)?);
    }
    Ok(RawWorkbook::new(grids, format))
}

/// Writes `workbook` to `dest` and returns the paths created.
///
/// For XLSX `dest` is the file; for CSV/TSV it is a directory that is
/// created if needed.
pub fn write_grids(
    workbook: &RawWorkbook,
    format: ContainerFormat,
    dest: &Path,
) -> Result<Vec<PathBuf>, GridError> {
    workbook.check_names()?;
    match format {
        ContainerFormat::Xlsx => {
            let bytes = write_xlsx_bytes(workbook)?;
            if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| GridError::io(parent, e))?;
            }
            std::fs::write(dest, bytes).map_err(|e| GridError::io(dest, e))?;
            Ok(vec![dest.to_path_buf()])
        }
        ContainerFormat::CsvDir | ContainerFormat::TsvDir => {
            let delimiter = format.delimiter().unwrap_or(b',');
            std::fs::create_dir_all(dest).map_err(|e| GridError::io(dest, e))?;
            let files = delimited_files(workbook, format)?;
            let mut written = Vec::with_capacity(files.len());
            for (file_name, grid) in files {
                let path = dest.join(file_name);
                let bytes = write_delimited(grid, delimiter)?;
                std::fs::write(&path, bytes).map_err(|e| GridError::io(&path, e))?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

/// Pairs each grid with its file name, rejecting names that collide once
/// `/` is replaced.
pub fn delimited_files(
    workbook: &RawWorkbook,
    format: ContainerFormat,
) -> Result<Vec<(String, &Grid)>, GridError> {
    let mut seen: HashMap<String, &str> = HashMap::new();
    let mut out = Vec::with_capacity(workbook.grids.len());
    for grid in &workbook.grids {
        let file_name = file_name_for(&grid.name, format);
        if let Some(first) = seen.insert(file_name.clone(), &grid.name) {
            return Err(GridError::NameCollision {
                name: file_name,
                first: first.to_string(),
                second: grid.name.clone(),
            });
        }
        out.push((file_name, grid));
    }
    Ok(out)
}
