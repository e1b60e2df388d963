//! Reading forecast/outcome tables.
//!
//! One row per step: the step index, `H` values of forecast P, `H` values
//! of forecast Q and `H` realized outcomes. The header declares `H`:
//!
//! ```text
//! t,p_1,...,p_H,q_1,...,q_H,y_1,...,y_H
//! ```
//!
//! Commas, semicolons and tabs are accepted as delimiters (detected from the
//! header). Step indices must increase by exactly one. Trailing rows whose
//! outcome cells are all empty (outcomes not observed yet) are dropped and
//! counted.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use eselect_core::ForecastTriple;

use crate::error::{HarnessError, Result};

/// A validated input table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub triples: Vec<ForecastTriple>,
    pub horizon: usize,
    /// Trailing rows without outcomes that were dropped.
    pub dropped_trailing: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Fraction of overlapping outcome cells with `y[t][k] == y[t+1][k-1]`,
    /// i.e. how well the outcome columns behave like a shifted series.
    /// `None` when there is nothing to compare (`H = 1` or a single row).
    pub fn shift_consistency(&self) -> Option<f64> {
        let mut checked = 0usize;
        let mut agree = 0usize;
        for pair in self.triples.windows(2) {
            let (a, b) = (&pair[0].y, &pair[1].y);
            for k in 1..self.horizon {
                checked += 1;
                let (x, z) = (a[k], b[k - 1]);
                if (x - z).abs() <= 1e-9 * x.abs().max(z.abs()).max(1.0) {
                    agree += 1;
                }
            }
        }
        (checked > 0).then(|| agree as f64 / checked as f64)
    }
}

/// Reads and validates the table at `path`.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| HarnessError::io(path, e))?;
    parse_dataset(&text, &path.display().to_string())
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    for d in *b",;\t" {
        if header.as_bytes().contains(&d) {
            return d;
        }
    }
    b','
}

/// Parses table text; `source` names the input in error messages.
pub fn parse_dataset(text: &str, source: &str) -> Result<Dataset> {
    let err = |line: u64, message: String| HarnessError::Ingest {
        path: source.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let columns = header.len();
    if columns < 4 || (columns - 1) % 3 != 0 {
        return Err(err(
            1,
            format!("expected 1 + 3H columns (t, p_1..p_H, q_1..q_H, y_1..y_H), found {columns}"),
        ));
    }
    let horizon = (columns - 1) / 3;
    for (block, prefix) in ["p", "q", "y"].into_iter().enumerate() {
        for k in 0..horizon {
            let name = &header[1 + block * horizon + k];
            if !name.to_ascii_lowercase().starts_with(prefix) {
                return Err(err(
                    1,
                    format!(
                        "column {} is '{name}', expected a '{prefix}' column",
                        2 + block * horizon + k
                    ),
                ));
            }
        }
    }

    let mut triples: Vec<ForecastTriple> = Vec::new();
    let mut pending: Option<u64> = None;
    let mut dropped = 0usize;
    let mut prev_t: Option<u64> = None;
    for record in reader.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns {
            return Err(err(line, format!("expected {columns} cells, found {}", record.len())));
        }
        let t: u64 = record[0].parse().map_err(|_| {
            err(
                line,
                format!("step index '{}' is not a non-negative integer", &record[0]),
            )
        })?;
        if let Some(p) = prev_t {
            if t == p {
                return Err(err(line, format!("duplicate step index {t}")));
            }
            if t < p {
                return Err(err(line, format!("step index {t} after {p} is not increasing")));
            }
            if t != p + 1 {
                return Err(err(
                    line,
                    format!("step index jumps from {p} to {t}; steps must be contiguous"),
                ));
            }
        }
        prev_t = Some(t);

        let outcome_cells = &record.iter().collect::<Vec<_>>()[1 + 2 * horizon..];
        if outcome_cells.iter().all(|c| c.is_empty()) {
            pending.get_or_insert(line);
            dropped += 1;
            let forecasts = record.iter().skip(1).take(2 * horizon);
            for (j, cell) in forecasts.enumerate() {
                parse_cell(cell, 2 + j).map_err(|m| err(line, m))?;
            }
            continue;
        }
        if let Some(first) = pending {
            return Err(err(
                line,
                format!(
                    "row has outcomes but an earlier row (line {first}) did not; only trailing rows may omit outcomes"
                ),
            ));
        }
        let mut values = Vec::with_capacity(3 * horizon);
        for (j, cell) in record.iter().enumerate().skip(1) {
            values.push(parse_cell(cell, j + 1).map_err(|m| err(line, m))?);
        }
        let y = values.split_off(2 * horizon);
        let q = values.split_off(horizon);
        let triple = ForecastTriple::new(t, values, q, y).map_err(|e| err(line, e.to_string()))?;
        triples.push(triple);
    }
    Ok(Dataset {
        triples,
        horizon,
        dropped_trailing: dropped,
    })
}

fn parse_cell(cell: &str, column: usize) -> std::result::Result<f64, String> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("column {column}: non-finite value '{cell}'")),
        Err(_) if cell.is_empty() => Err(format!("column {column}: empty cell")),
        Err(_) => Err(format!("column {column}: '{cell}' is not a number")),
    }
}

/// Writes triples in the input format (used for synthetic data and tests).
pub fn write_dataset<W: std::io::Write>(out: W, triples: &[ForecastTriple]) -> std::io::Result<()> {
    let horizon = triples.first().map_or(1, |t| t.horizon());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for prefix in ["p", "q", "y"] {
        header.extend((1..=horizon).map(|k| format!("{prefix}_{k}")));
    }
    w.write_record(&header)?;
    for tr in triples {
        let mut row = vec![tr.t.to_string()];
        row.extend(tr.p.iter().chain(&tr.q).chain(&tr.y).map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}
