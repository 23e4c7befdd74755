//! Per-sample diagnostics and the `series.csv` format.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SERIES_HEADER: [&str; 22] = [
    "t",
    "E",
    "D",
    "Ecal",
    "sup_nf",
    "sup_jf",
    "sup_ef",
    "R_supp",
    "w1_sur",
    "gradu_l2",
    "gradu_linf",
    "u_linf",
    "div_linf",
    "rho_l32",
    "gradrho_l2",
    "mass_f",
    "mom_x1",
    "mom_x2",
    "mom_x3",
    "B1",
    "B2",
    "B3",
];

/// One time sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub high_dissipation: f64,
    pub sup_nf: f64,
    pub sup_jf: f64,
    pub sup_ef: f64,
    pub support_radius: f64,
    pub w1_surrogate: f64,
    pub gradu_l2: f64,
    pub gradu_linf: f64,
    pub u_linf: f64,
    pub div_linf: f64,
    pub rho_l32: f64,
    pub gradrho_l2: f64,
    pub mass_f: f64,
    pub momentum: [f64; 3],
    pub bootstrap: [f64; 3],
}

impl DiagnosticsRecord {
    pub fn to_row(&self) -> [f64; 22] {
        [
            self.t,
            self.energy,
            self.dissipation,
            self.high_dissipation,
            self.sup_nf,
            self.sup_jf,
            self.sup_ef,
            self.support_radius,
            self.w1_surrogate,
            self.gradu_l2,
            self.gradu_linf,
            self.u_linf,
            self.div_linf,
            self.rho_l32,
            self.gradrho_l2,
            self.mass_f,
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
            self.bootstrap[0],
            self.bootstrap[1],
            self.bootstrap[2],
        ]
    }

    pub fn from_row(r: &[f64; 22]) -> Self {
        Self {
            t: r[0],
            energy: r[1],
            dissipation: r[2],
            high_dissipation: r[3],
            sup_nf: r[4],
            sup_jf: r[5],
            sup_ef: r[6],
            support_radius: r[7],
            w1_surrogate: r[8],
            gradu_l2: r[9],
            gradu_linf: r[10],
            u_linf: r[11],
            div_linf: r[12],
            rho_l32: r[13],
            gradrho_l2: r[14],
            mass_f: r[15],
            momentum: [r[16], r[17], r[18]],
            bootstrap: [r[19], r[20], r[21]],
        }
    }

    /// Name of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.to_row()
            .iter()
            .zip(SERIES_HEADER)
            .find(|(v, _)| !v.is_finite())
            .map(|(_, name)| name)
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn series_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = SERIES_HEADER.join(",");
    s.push('\n');
    for r in records {
        let row = r.to_row();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

pub fn write_series(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    crate::io::write_atomic(path, series_csv(records).as_bytes())
}

/// A numeric CSV table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_table(text: &str) -> std::result::Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| format!("row {}: `{s}`: {e}", line + 2))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { names, rows })
}

/// Reads a `series.csv` written by [`write_series`].
pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let table = read_table(path)?;
    if table.names != SERIES_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "unexpected series header".into(),
        });
    }
    Ok(table
        .rows
        .iter()
        .map(|r| {
            let mut a = [0.0; 22];
            a.copy_from_slice(r);
            DiagnosticsRecord::from_row(&a)
        })
        .collect())
}
