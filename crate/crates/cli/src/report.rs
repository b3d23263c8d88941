//! Tabular results rendered as CSV, JSON or plain text.

use std::io::Write;

use serde_json::{Map, Number, Value};

use crate::args::Format;

/// Largest count of significant digits a JSON number may carry before it
/// is emitted as a string.
const JSON_DIGITS: usize = 15;

/// A numeric literal, kept verbatim in every format.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell(String);

impl Cell {
    pub fn num(text: impl Into<String>) -> Self {
        Cell(text.into())
    }

    fn text(&self) -> &str {
        &self.0
    }

    fn to_json(&self) -> Value {
        if significant_digits(&self.0) <= JSON_DIGITS {
            if let Ok(n) = self.0.parse::<Number>() {
                return Value::Number(n);
            }
        }
        Value::String(self.0.clone())
    }
}

fn significant_digits(literal: &str) -> usize {
    let mantissa = literal.split(['e', 'E']).next().unwrap_or("");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trimmed = digits.trim_start_matches('0');
    trimmed.len().max(1)
}

/// Key/value metadata plus a table.
#[derive(Debug, Default)]
pub struct Report {
    pub meta: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { meta: Vec::new(), columns, rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: Cell) -> Self {
        self.meta.push((key.to_string(), value));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.render_csv(out),
            Format::Json => self.render_json(out),
            Format::Text => self.render_text(out),
        }
    }

    fn render_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::text))?;
        }
        writer.flush()
    }

    fn render_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let mut root = Map::new();
        for (key, value) in &self.meta {
            root.insert(key.clone(), value.to_json());
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let object: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::to_json))
                    .collect();
                Value::Object(object)
            })
            .collect();
        root.insert("rows".into(), Value::Array(rows));
        serde_json::to_writer_pretty(&mut *out, &Value::Object(root))?;
        writeln!(out)
    }

    fn render_text(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (key, value) in &self.meta {
            writeln!(out, "{key}: {}", value.text())?;
        }
        if !self.meta.is_empty() {
            writeln!(out)?;
        }
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.text().chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(self.columns.iter().map(String::as_str).collect()))?;
        for row in &self.rows {
            writeln!(out, "{}", line(row.iter().map(Cell::text).collect()))?;
        }
        Ok(())
    }
}
