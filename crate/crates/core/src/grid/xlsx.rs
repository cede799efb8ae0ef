use std::io::Cursor;

use calamine::{Data, Reader, Xlsx};
use rust_xlsxwriter::{Color, Format, FormatPattern, Note, Workbook};

use super::{ContainerFormat, Grid, GridError, RawWorkbook};

/// Largest integer an XLSX number cell holds exactly.
const EXACT_INTEGER_LIMIT: f64 = 9_007_199_254_740_992.0;

fn render(cell: &Data) -> Option<String> {
    match cell {
        Data::Empty => None,
        Data::String(s) => Some(s.clone()),
        Data::Int(i) => Some(i.to_string()),
        Data::Float(f) => Some(render_number(*f)),
        Data::Bool(b) => Some(if *b { "True" } else { "False" }.to_string()),
        Data::DateTime(dt) => {
            let rendered = dt.as_datetime().map(|t| {
                if t.time() == chrono::NaiveTime::MIN {
                    t.date().format("%Y-%m-%d").to_string()
                } else {
                    t.format("%Y-%m-%dT%H:%M:%S").to_string()
                }
            });
            Some(rendered.unwrap_or_else(|| dt.as_f64().to_string()))
        }
        Data::DateTimeIso(s) | Data::DurationIso(s) => Some(s.clone()),
        Data::Error(e) => Some(format!("#{e:?}")),
    }
}

/// Numbers render without grouping separators; integral values drop the
/// fractional part.
fn render_number(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < EXACT_INTEGER_LIMIT {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

pub fn read_xlsx_bytes(bytes: &[u8]) -> Result<RawWorkbook, GridError> {
    let mut workbook: Xlsx<_> = Xlsx::new(Cursor::new(bytes))
        .map_err(|e| GridError::Format(format!("not a readable XLSX file: {e}")))?;
    let names = workbook.sheet_names().to_vec();
    let mut grids = Vec::with_capacity(names.len());
    for name in names {
        let range = workbook
            .worksheet_range(&name)
            .map_err(|e| GridError::Format(format!("worksheet {name:?}: {e}")))?;
        // Ranges start at the first used cell; re-anchor at A1.
        let (row0, col0) = range
            .start()
            .map_or((0, 0), |(r, c)| (r as usize, c as usize));
        let mut rows: Vec<Vec<Option<String>>> = vec![Vec::new(); row0];
        for row in range.rows() {
            let mut cells = vec![None; col0];
            cells.extend(row.iter().map(render));
            rows.push(cells);
        }
        let grid = Grid::new(name, rows);
        grid.check_size()?;
        grids.push(grid);
    }
    let workbook = RawWorkbook::new(grids, ContainerFormat::Xlsx);
    workbook.check_names()?;
    Ok(workbook)
}

fn style_format(style: &super::CellStyle) -> Option<Format> {
    if !style.bold && style.fill.is_none() {
        return None;
    }
    let mut format = Format::new();
    if style.bold {
        format = format.set_bold();
    }
    if let Some(rgb) = style.fill {
        format = format
            .set_pattern(FormatPattern::Solid)
            .set_background_color(Color::RGB(rgb));
    }
    Some(format)
}

fn xlsx_error(e: rust_xlsxwriter::XlsxError) -> GridError {
    GridError::Format(format!("cannot write XLSX: {e}"))
}

pub fn write_xlsx_bytes(workbook: &RawWorkbook) -> Result<Vec<u8>, GridError> {
    let mut book = Workbook::new();
    for grid in &workbook.grids {
        let sheet = book.add_worksheet();
        sheet.set_name(&grid.name).map_err(xlsx_error)?;
        for (r, row) in grid.rows().iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let style = grid.styles.get(&(r, c));
                let format = style.and_then(style_format);
                let (r32, c16) = (r as u32, c as u16);
                match cell {
                    Some(text) => {
                        let number = style
                            .filter(|s| s.numeric)
                            .and_then(|_| text.parse::<i64>().ok())
                            .filter(|n| (*n as f64).abs() < EXACT_INTEGER_LIMIT);
                        match (number, &format) {
                            (Some(n), Some(f)) => {
                                sheet.write_number_with_format(r32, c16, n as f64, f)
                            }
                            (Some(n), None) => sheet.write_number(r32, c16, n as f64),
                            (None, Some(f)) => sheet.write_string_with_format(r32, c16, text, f),
                            (None, None) => sheet.write_string(r32, c16, text),
                        }
                        .map_err(xlsx_error)?;
                    }
                    None => {
                        if let Some(f) = &format {
                            sheet.write_blank(r32, c16, f).map_err(xlsx_error)?;
                        }
                    }
                }
                if let Some(note) = style.and_then(|s| s.note.as_deref()) {
                    let note = Note::new(note).add_author_prefix(false);
                    sheet.insert_note(r32, c16, &note).map_err(xlsx_error)?;
                }
            }
        }
    }
    book.save_to_buffer().map_err(xlsx_error)
}
