//! Writing tables and reports to stdout or a file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone, Debug)]
pub struct OutputArgs {
    /// Output format for tables and reports.
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Emit whitespace-separated numeric columns for gnuplot instead.
    #[arg(long, global = true)]
    pub plot_data: bool,
}

/// A rectangular result with string cells and an optional JSON report.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Columns for `--plot-data`, as indices into `header`.
    pub plot: Vec<usize>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table { header: header.to_vec(), rows: Vec::new(), plot: Vec::new() }
    }

    pub fn plot(mut self, cols: &[usize]) -> Table {
        self.plot = cols.to_vec();
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(&self.header)?;
        for r in &self.rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    }

    fn write_plot(&self, w: &mut dyn Write) -> Result<()> {
        let cols: Vec<usize> = if self.plot.is_empty() { (0..self.header.len()).collect() } else { self.plot.clone() };
        let names: Vec<&str> = cols.iter().map(|&i| self.header[i]).collect();
        writeln!(w, "# {}", names.join(" "))?;
        for r in &self.rows {
            // Rows with a missing value are skipped; gnuplot cannot use them.
            if cols.iter().any(|&i| r[i].is_empty()) {
                continue;
            }
            let cells: Vec<&str> = cols.iter().map(|&i| r[i].as_str()).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }

    fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|r| self.header.iter().zip(r).map(|(h, v)| (h.to_string(), serde_json::Value::String(v.clone()))).collect::<serde_json::Map<_, _>>())
            .map(serde_json::Value::Object)
            .collect();
        serde_json::Value::Array(rows)
    }
}

pub struct Sink {
    args: OutputArgs,
}

impl Sink {
    pub fn new(args: OutputArgs) -> Sink {
        Sink { args }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.args.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// Emits a report: JSON as given, CSV or plot data from `table`.
    pub fn report<T: Serialize>(&self, report: &T, table: Option<&Table>) -> Result<()> {
        let mut w = self.writer()?;
        match (self.args.plot_data, self.args.format, table) {
            (true, _, Some(t)) => t.write_plot(&mut w)?,
            (false, Format::Csv, Some(t)) => t.write_csv(&mut w)?,
            _ => {
                serde_json::to_writer_pretty(&mut w, report)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Emits a table; JSON output is an array of row objects.
    pub fn table(&self, table: &Table) -> Result<()> {
        self.report(&table.to_json(), Some(table))
    }
}

/// Whether `e` came from writing to a closed pipe.
pub fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().map(io::Error::kind);
        let json = c.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind);
        let csv = c.downcast_ref::<csv::Error>().and_then(|e| match e.kind() {
            csv::ErrorKind::Io(io) => Some(io.kind()),
            _ => None,
        });
        [io, json, csv].contains(&Some(io::ErrorKind::BrokenPipe))
    })
}
