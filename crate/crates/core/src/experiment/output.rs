//! CSV emission and read-back.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::Strategy;

use super::sweep::{SweepResult, SweepRow, SweptParameter};

pub const CSV_HEADER: [&str; 14] = [
    "grid_param",
    "grid_value",
    "strategy",
    "p_node",
    "p_fusion",
    "p_fusion_sim",
    "p_fusion_ci",
    "slots_paper",
    "slots_sim",
    "slots_ci",
    "energy_total",
    "energy_sim",
    "energy_ci",
    "fairness_mu",
];

/// 12 significant digits in scientific notation.
pub fn format_number(v: f64) -> String {
    format!("{v:.11e}")
}

fn field(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

fn row_fields(r: &SweepRow) -> [String; 14] {
    [
        r.grid_param.code().to_string(),
        format_number(r.grid_value),
        r.strategy.code().to_string(),
        field(r.p_node),
        field(r.p_fusion),
        field(r.p_fusion_sim),
        field(r.p_fusion_ci),
        field(r.slots_paper),
        field(r.slots_sim),
        field(r.slots_ci),
        field(r.energy_total),
        field(r.energy_sim),
        field(r.energy_ci),
        field(r.fairness_mu),
    ]
}

pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(row_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(&result.rows, std::io::BufWriter::new(file)).map_err(csv_err)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let header = rdr.headers().map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let num = |i: usize| -> Result<Option<f64>> {
            let s = &rec[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| bad(format!("row {}: bad number {s:?} in {}", line + 1, CSV_HEADER[i])))
        };
        rows.push(SweepRow {
            grid_param: SweptParameter::from_code(&rec[0])
                .ok_or_else(|| bad(format!("row {}: unknown grid_param {:?}", line + 1, &rec[0])))?,
            grid_value: num(1)?.ok_or_else(|| bad(format!("row {}: empty grid_value", line + 1)))?,
            strategy: Strategy::from_code(&rec[2])
                .ok_or_else(|| bad(format!("row {}: unknown strategy {:?}", line + 1, &rec[2])))?,
            p_node: num(3)?,
            p_fusion: num(4)?,
            p_fusion_sim: num(5)?,
            p_fusion_ci: num(6)?,
            slots_paper: num(7)?,
            slots_sim: num(8)?,
            slots_ci: num(9)?,
            energy_total: num(10)?,
            energy_sim: num(11)?,
            energy_ci: num(12)?,
            fairness_mu: num(13)?,
        });
    }
    Ok(rows)
}
