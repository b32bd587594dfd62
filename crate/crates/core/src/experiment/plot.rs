//! gnuplot scripts for the comparison figures.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sweep::{SweepResult, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Expected detection time.
    Fig2,
    /// Total energy.
    Fig3,
    /// Fairness degree.
    Fig4,
    /// Fusion-center detection probability.
    Fig5,
}

struct Series {
    column: &'static str,
    index: usize,
    get: fn(&SweepRow) -> Option<f64>,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Figure::Fig2 => "Average detection time",
            Figure::Fig3 => "Total energy consumption",
            Figure::Fig4 => "Fairness of energy consumption",
            Figure::Fig5 => "Probability of detection at the fusion center",
        }
    }

    fn ylabel(self) -> &'static str {
        match self {
            Figure::Fig2 => "Expected detection time (slots)",
            Figure::Fig3 => "Total energy per detection attempt (energy units)",
            Figure::Fig4 => "Fairness degree mu = E_max / E_min (ratio)",
            Figure::Fig5 => "Probability of detection",
        }
    }

    /// Required series, then the optional simulated overlay.
    fn series(self) -> (Series, Option<Series>) {
        match self {
            Figure::Fig2 => (
                Series { column: "slots_paper", index: 8, get: |r| r.slots_paper },
                Some(Series { column: "slots_sim", index: 9, get: |r| r.slots_sim }),
            ),
            Figure::Fig3 => (
                Series { column: "energy_total", index: 11, get: |r| r.energy_total },
                Some(Series { column: "energy_sim", index: 12, get: |r| r.energy_sim }),
            ),
            Figure::Fig4 => (
                Series { column: "fairness_mu", index: 14, get: |r| r.fairness_mu },
                None,
            ),
            Figure::Fig5 => (
                Series { column: "p_fusion", index: 5, get: |r| r.p_fusion },
                Some(Series { column: "p_fusion_sim", index: 6, get: |r| r.p_fusion_sim }),
            ),
        }
    }

    /// Whether `result` carries the figure's required column in every row.
    pub fn supported_by(self, result: &SweepResult) -> bool {
        let (main, _) = self.series();
        !result.rows.is_empty() && result.rows.iter().all(|r| (main.get)(r).is_some())
    }
}

/// Script text plotting `csv_name` (resolved relative to the script).
pub fn plot_script(result: &SweepResult, figure: Figure, csv_name: &str) -> Result<String> {
    let (main, overlay) = figure.series();
    if !figure.supported_by(result) {
        return Err(Error::MissingColumn {
            figure: figure.name(),
            column: main.column,
        });
    }
    let overlay = overlay.filter(|s| result.rows.iter().any(|r| (s.get)(r).is_some()));
    let x = result.grid_param;
    let mut s = String::new();
    let _ = writeln!(s, "# {}: {} vs {}", figure.name(), figure.title(), x.axis_label());
    let _ = writeln!(s, "# gnuplot {}.gp", figure.name());
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile missing ''\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    let _ = writeln!(s, "set output '{}.png'", figure.name());
    let _ = writeln!(s, "set title '{}'", figure.title());
    let _ = writeln!(s, "set xlabel '{}'", x.axis_label());
    let _ = writeln!(s, "set ylabel '{}'", figure.ylabel());
    s.push_str("set grid\nset key best\n");
    if figure == Figure::Fig2 {
        s.push_str("set logscale y\n");
    }
    let mut parts = Vec::new();
    for (k, st) in result.strategies().into_iter().enumerate() {
        let code = st.code();
        parts.push(format!(
            "'{csv_name}' every ::1 using 2:(strcol(3) eq '{code}' ? ${} : 1/0) with linespoints lt {} title '{code}'",
            main.index,
            k + 1
        ));
        if let Some(o) = &overlay {
            parts.push(format!(
                "'{csv_name}' every ::1 using 2:(strcol(3) eq '{code}' ? ${} : 1/0) with points pt 6 lt {} title '{code} (simulated)'",
                o.index,
                k + 1
            ));
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    Ok(s)
}

pub fn emit_plot_script(result: &SweepResult, figure: Figure, path: &Path, csv_name: &str) -> Result<()> {
    let text = plot_script(result, figure, csv_name)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
