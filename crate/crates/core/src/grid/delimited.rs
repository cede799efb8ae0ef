use csv::{QuoteStyle, ReaderBuilder, WriterBuilder};

use super::{Grid, GridError, MAX_COLUMNS, MAX_ROWS};

/// Parses one CSV or TSV file into a grid. Quoting follows RFC 4180 for
/// both delimiters.
pub fn read_delimited(name: &str, bytes: &[u8], delimiter: u8) -> Result<Grid, GridError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| GridError::Format(format!("{name}: {e}")))?;
        if record.len() > MAX_COLUMNS {
            return Err(GridError::Format(format!(
                "{name}: row {} has {} columns, more than {MAX_COLUMNS}",
                rows.len() + 1,
                record.len()
            )));
        }
        rows.push(record.iter().map(|f| Some(f.to_string())).collect());
        if rows.len() > MAX_ROWS {
            return Err(GridError::Format(format!(
                "{name}: more than {MAX_ROWS} rows"
            )));
        }
    }
    let grid = Grid::new(name, rows);
    grid.check_size()?;
    Ok(grid)
}

pub fn write_delimited(grid: &Grid, delimiter: u8) -> Result<Vec<u8>, GridError> {
    let mut writer = WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter)
        .quote_style(QuoteStyle::Necessary)
        .from_writer(Vec::new());
    for row in grid.rows() {
        writer
            .write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))
            .map_err(|e| GridError::Format(e.to_string()))?;
    }
    writer
        .into_inner()
        .map_err(|e| GridError::Format(e.to_string()))
}
