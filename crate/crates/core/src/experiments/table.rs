//! Result tables and their CSV form: `# key=value` metadata lines, a header
//! row with units in parentheses, then data rows. Numbers are written with
//! 17 significant digits so they read back bit-for-bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Num(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// Empty for dimensionless or text columns.
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }

    fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{} ({})", self.name, self.unit)
        }
    }

    fn parse_header(h: &str) -> Self {
        match h.rfind(" (") {
            Some(i) if h.ends_with(')') => Self::new(&h[..i], &h[i + 2..h.len() - 1]),
            _ => Self::new(h, ""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

/// 17 significant digits, `nan`/`inf` spelled out.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_cell(s: &str) -> Cell {
    match s {
        "nan" => Cell::Num(f64::NAN),
        "inf" => Cell::Num(f64::INFINITY),
        "-inf" => Cell::Num(f64::NEG_INFINITY),
        _ => match s.parse::<f64>() {
            // a text cell never starts like a number
            Ok(x) if s.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') => Cell::Num(x),
            _ => Cell::Text(s.to_string()),
        },
    }
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            metadata: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Numeric column by name; text cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].num().unwrap_or(f64::NAN)).collect())
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let k = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Text(s) => s.clone(),
                    Cell::Num(x) => format_number(*x),
                })
                .collect(),
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.metadata {
            if k.contains('=') || k.contains('\n') || v.contains('\n') {
                return Err(Error::InvalidParameter(format!("metadata entry `{k}` cannot be written on one line")));
            }
            writeln!(w, "# {k}={v}")?;
        }
        let mut cw = csv::Writer::from_writer(&mut w);
        cw.write_record(self.columns.iter().map(Column::header)).map_err(csv_err)?;
        for row in &self.rows {
            cw.write_record(row.iter().map(|c| match c {
                Cell::Num(x) => format_number(*x),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(csv_err)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut rest = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                break;
            }
            if let Some(m) = line.strip_prefix("# ") {
                let m = m.trim_end_matches(['\n', '\r']);
                let (k, v) = m
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("malformed metadata line `{m}`")))?;
                metadata.push((k.to_string(), v.to_string()));
            } else {
                rest.push_str(&line);
                r.read_to_string(&mut rest)?;
                break;
            }
        }
        let mut cr = csv::Reader::from_reader(rest.as_bytes());
        let columns = cr.headers().map_err(csv_err)?.iter().map(Column::parse_header).collect();
        let mut rows = Vec::new();
        for rec in cr.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(parse_cell).collect());
        }
        Ok(Self {
            metadata,
            columns,
            rows,
        })
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        Self::read_csv(s.as_bytes())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("CSV: {other:?}")),
    }
}
