//! Offline loader for the daily stellar flux table.
//!
//! Whitespace-delimited text, one column per stellar object, one row per day.
//! Rows containing anything that does not parse as a finite number count as
//! missing and are dropped with a warning.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub const EXPECTED_COLUMNS: usize = 7;
pub const EXPECTED_ROWS: usize = 208;

#[derive(Debug)]
pub struct StellarFlux {
    /// One series per object (column-major relative to the file).
    pub series: Vec<Vec<f64>>,
    pub dropped_rows: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn load_stellar_flux(path: &Path) -> Result<StellarFlux> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading flux file {}", path.display()))?;

    let mut series: Vec<Vec<f64>> = vec![Vec::new(); EXPECTED_COLUMNS];
    let mut dropped_rows = Vec::new();
    let mut warnings = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue; // blank line
        }
        if fields.len() != EXPECTED_COLUMNS {
            bail!(
                "row {row_no}: found {} columns, expected {EXPECTED_COLUMNS}",
                fields.len()
            );
        }
        let parsed: Vec<Option<f64>> = fields
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if parsed.iter().any(|v| v.is_none()) {
            dropped_rows.push(row_no);
            continue;
        }
        for (col, v) in parsed.into_iter().enumerate() {
            series[col].push(v.expect("checked above"));
        }
    }

    if series[0].is_empty() {
        bail!("no usable rows in {}", path.display());
    }
    if !dropped_rows.is_empty() {
        warnings.push(format!(
            "dropped {} rows with missing values: {:?}",
            dropped_rows.len(),
            dropped_rows
        ));
    }
    if series[0].len() != EXPECTED_ROWS {
        warnings.push(format!(
            "{} usable rows, expected {EXPECTED_ROWS}",
            series[0].len()
        ));
    }

    Ok(StellarFlux {
        series,
        dropped_rows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn well_formed(rows: usize) -> String {
        let mut s = String::new();
        for r in 0..rows {
            let fields: Vec<String> = (0..EXPECTED_COLUMNS)
                .map(|c| format!("{}.{}", r, c))
                .collect();
            s.push_str(&fields.join(" "));
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_full_table() {
        let f = write_temp(&well_formed(208));
        let flux = load_stellar_flux(f.path()).unwrap();
        assert_eq!(flux.series.len(), 7);
        assert!(flux.series.iter().all(|s| s.len() == 208));
        assert!(flux.warnings.is_empty());
        assert!(flux.dropped_rows.is_empty());
        // Column-major transposition holds.
        assert_eq!(flux.series[3][5], 5.3);
    }

    #[test]
    fn drops_missing_rows_with_warning() {
        let mut text = well_formed(208);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[4] = "1 2 3 NA 5 6 7".to_string();
        lines[9] = "1 2 3 4 5 6 *".to_string();
        lines[30] = "1 2 inf 4 5 6 7".to_string();
        text = lines.join("\n");
        let f = write_temp(&text);
        let flux = load_stellar_flux(f.path()).unwrap();
        assert_eq!(flux.dropped_rows, vec![5, 10, 31]);
        assert!(flux.series.iter().all(|s| s.len() == 205));
        // Row-count warning plus the dropped-row warning.
        assert_eq!(flux.warnings.len(), 2);
    }

    #[test]
    fn wrong_column_count_errors() {
        let mut text = well_formed(10);
        text.push_str("1 2 3 4 5 6\n");
        let f = write_temp(&text);
        let err = load_stellar_flux(f.path()).unwrap_err();
        assert!(err.to_string().contains("row 11"), "{err}");
    }
}
