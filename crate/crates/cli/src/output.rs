//! Text tables, CSV rows and JSON documents for command results.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Where a setting's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Given,
    Default,
    DefaultRule,
}

#[derive(Debug, Clone, Serialize)]
pub struct Setting {
    pub name: &'static str,
    pub value: String,
    pub origin: Origin,
}

impl Setting {
    pub fn given(name: &'static str, value: impl ToString) -> Self {
        Self {
            name,
            value: value.to_string(),
            origin: Origin::Given,
        }
    }

    pub fn new(name: &'static str, value: impl ToString, given: bool) -> Self {
        Self {
            name,
            value: value.to_string(),
            origin: if given {
                Origin::Given
            } else {
                Origin::Default
            },
        }
    }

    pub fn rule(name: &'static str, value: impl ToString) -> Self {
        Self {
            name,
            value: value.to_string(),
            origin: Origin::DefaultRule,
        }
    }
}

/// `# command` followed by one `# name = value` line per setting, defaults
/// marked.
pub fn header(command: &str, settings: &[Setting]) -> String {
    let mut s = format!("# entbound {command}\n");
    for st in settings {
        let mark = match st.origin {
            Origin::Given => "",
            Origin::Default => " (default)",
            Origin::DefaultRule => " (default rule)",
        };
        s.push_str(&format!("# {} = {}{}\n", st.name, st.value, mark));
    }
    s
}

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// A header row and one record.
pub fn csv_record(headers: &[&str], values: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    w.write_record(values)?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}
