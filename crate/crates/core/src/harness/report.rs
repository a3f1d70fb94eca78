use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::designs::DesignKind;
use crate::error::{Error, Result};

/// Results for one (design, proposal, budget) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub design: DesignKind,
    pub strata: String,
    pub proposal: String,
    pub alpha: Option<f64>,
    pub n: usize,
    pub replications: usize,
    /// Tag mixed into the replication seeds of this cell.
    pub seed_tag: u64,
    pub mse: f64,
    pub mse_se: f64,
    pub mean_estimate: f64,
    pub mean_estimate_se: f64,
    pub analytic_var: f64,
    /// `None` together with `re_infinite` when the cell's MSE is zero.
    pub re_vs_rs: Option<f64>,
    pub re_se: Option<f64>,
    pub re_infinite: bool,
    #[serde(skip)]
    pub estimates: Vec<f64>,
    #[serde(skip)]
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub replications: usize,
    pub pool_size: usize,
    pub epsilon: f64,
    pub strata_labels: Vec<String>,
    pub cells: Vec<CellReport>,
}

pub const CSV_HEADER: [&str; 11] = [
    "design",
    "strata",
    "proposal",
    "alpha",
    "n",
    "M",
    "mse",
    "mse_se",
    "analytic_var",
    "re_vs_rs",
    "re_se",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SimReport {
    pub fn cell(&self, design: DesignKind, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.design == design && c.n == n)
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self).map_err(|e| Error::io("<report writer>", e.into()))?;
        writeln!(writer).and_then(|_| writer.flush()).map_err(|e| Error::io("<report writer>", e))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for c in &self.cells {
            let re = if c.re_infinite { "inf".to_string() } else { opt(c.re_vs_rs) };
            wtr.write_record([
                c.design.code().to_string(),
                c.strata.clone(),
                c.proposal.clone(),
                opt(c.alpha),
                c.n.to_string(),
                c.replications.to_string(),
                c.mse.to_string(),
                c.mse_se.to_string(),
                c.analytic_var.to_string(),
                re,
                opt(c.re_se),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<report writer>", e))
    }

    /// Writes `report.json` and `report.csv` into `dir`, creating it if needed.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("report.json");
        let file = std::fs::File::create(&json).map_err(|e| Error::io(&json, e))?;
        self.write_json(std::io::BufWriter::new(file))?;
        let csv_path = dir.join("report.csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
