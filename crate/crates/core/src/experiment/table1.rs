//! Ordinal performance summary: agility, fairness, energy, robustness and
//! the NCS-to-CS convergence with SNR.

use std::fmt;

use serde::Serialize;

use crate::coop::{check_pairing, coop_fusion};
use crate::distributed::distributed_analysis;
use crate::error::{Error, Result};
use crate::metrics::{
    agility_coop, agility_distributed, agility_noncoop, energy_coop, energy_distributed,
    energy_noncoop, Strategy,
};
use crate::model::{Snr, SystemParams};
use crate::noncoop::noncoop_fusion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Item {
    pub key: char,
    pub label: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Report {
    pub items: Vec<Table1Item>,
}

impl Table1Report {
    pub fn item(&self, key: char) -> &Table1Item {
        self.items.iter().find(|i| i.key == key).expect("known key")
    }

    /// True when no check failed; skipped checks do not count against it.
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.status != Status::Fail)
    }
}

impl fmt::Display for Table1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            let tag = match i.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            writeln!(f, "{tag} ({}) {}: {}", i.key, i.label, i.detail)?;
        }
        Ok(())
    }
}

fn verdict(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// SNR points from `low` to `high` inclusive in `step_db` steps.
pub fn snr_grid(low: Snr, high: Snr, step_db: f64) -> Vec<Snr> {
    let (lo, hi) = (low.db(), high.db());
    let n = ((hi - lo) / step_db + 1e-9).floor() as usize;
    let mut g: Vec<Snr> = (0..=n)
        .map(|k| Snr::from_db(lo + k as f64 * step_db).expect("finite"))
        .collect();
    if (g.last().expect("nonempty").db() - hi).abs() > 1e-9 {
        g.push(high);
    }
    g
}

pub fn table1_check(fixed: &SystemParams, low: Snr, high: Snr) -> Result<Table1Report> {
    table1_check_with(fixed, low, high, &Strategy::ALL, 1.0)
}

/// Checks (a)-(e) with analytic values. Checks that compare strategies not
/// in `strategies` are skipped with a notice.
pub fn table1_check_with(
    fixed: &SystemParams,
    low: Snr,
    high: Snr,
    strategies: &[Strategy],
    grid_step_db: f64,
) -> Result<Table1Report> {
    fixed.validate()?;
    check_pairing(fixed)?;
    if fixed.n_nodes < 10 {
        return Err(Error::InvalidParams(format!(
            "summary scenario needs n_nodes >= 10, got {}",
            fixed.n_nodes
        )));
    }
    if !(high.db() > low.db()) || !(grid_step_db > 0.0) {
        return Err(Error::InvalidParams("need high SNR above low SNR and a positive step".into()));
    }
    let have = |needed: &[Strategy]| needed.iter().all(|s| strategies.contains(s));
    let skipped = |key, label, needed: &[Strategy]| Table1Item {
        key,
        label,
        status: Status::Skipped,
        detail: format!(
            "needs {} but only {} requested",
            needed.iter().map(|s| s.code()).collect::<Vec<_>>().join(", "),
            strategies.iter().map(|s| s.code()).collect::<Vec<_>>().join(", ")
        ),
    };

    let p = fixed.with_snr(low);
    let ph = fixed.with_snr(high);
    let ncs = noncoop_fusion(&p, low)?;
    let cs = coop_fusion(&p, low)?;
    let ds = distributed_analysis(&p, low)?;
    let mut items = Vec::new();

    let all = [Strategy::Noncooperative, Strategy::Cooperative, Strategy::Distributed];
    let label = "agility: CS fastest";
    if have(&all) {
        let t_nc = agility_noncoop(&ncs)?.expected_slots;
        let t_c = agility_coop(&cs)?.renewal_slots.expect("CS has a renewal value");
        let t_d = agility_distributed(&ds)?.expected_slots;
        items.push(Table1Item {
            key: 'a',
            label,
            status: verdict(t_c < t_nc && t_c < t_d),
            detail: format!("T_c = {t_c:.4}, T_nc = {t_nc:.4}, T_d = {t_d:.4} slots"),
        });
    } else {
        items.push(skipped('a', label, &all));
    }

    let label = "fairness: NCS fairest";
    if have(&all) {
        let m_nc = energy_noncoop(&p).fairness_mu;
        let m_c = energy_coop(&p, low)?.fairness_mu;
        let m_d = energy_distributed(&p, ds.k_iterations)?.fairness_mu;
        items.push(Table1Item {
            key: 'b',
            label,
            status: verdict(m_nc == 1.0 && m_c > 1.0 && m_d > 1.0 && m_c <= m_d),
            detail: format!("mu_NCS = {m_nc}, mu_CS = {m_c:.6}, mu_DS = {m_d:.6}"),
        });
    } else {
        items.push(skipped('b', label, &all));
    }

    let label = "energy: DS lowest at low SNR";
    if have(&all) {
        let e_nc = energy_noncoop(&p).total_energy;
        let e_c = energy_coop(&p, low)?.total_energy;
        let e_d = energy_distributed(&p, ds.k_iterations)?.total_energy;
        items.push(Table1Item {
            key: 'c',
            label,
            status: verdict(e_d < e_nc && e_d < e_c),
            detail: format!("E_DS = {e_d:.4}, E_NCS = {e_nc:.4}, E_CS = {e_c:.4}"),
        });
    } else {
        items.push(skipped('c', label, &all));
    }

    let label = "robustness: DS least sensitive to SNR";
    if have(&all) {
        let ds_h = distributed_analysis(&ph, high)?.p_d;
        let ncs_h = noncoop_fusion(&ph, high)?.p_fusion;
        let ds_swing = (ds.p_d - ds_h).abs();
        let ncs_swing = (ncs.p_fusion - ncs_h).abs();
        let ordered = ds.p_d >= cs.p_fc_total && cs.p_fc_total >= ncs.p_fusion;
        items.push(Table1Item {
            key: 'd',
            label,
            status: verdict(ds_swing < ncs_swing && ordered),
            detail: format!(
                "swing DS = {ds_swing:.4}, NCS = {ncs_swing:.4}; at {} dB p_DS = {:.4}, p_CS = {:.4}, p_NCS = {:.4}",
                low.db(),
                ds.p_d,
                cs.p_fc_total,
                ncs.p_fusion
            ),
        });
    } else {
        items.push(skipped('d', label, &all));
    }

    let pair = [Strategy::Noncooperative, Strategy::Cooperative];
    let label = "convergence: CS-NCS gap shrinks with SNR";
    if have(&pair) {
        let grid = snr_grid(low, high, grid_step_db);
        let mut gaps = Vec::with_capacity(grid.len());
        for &s in &grid {
            let q = fixed.with_snr(s);
            gaps.push((s.db(), coop_fusion(&q, s)?.p_fc_total - noncoop_fusion(&q, s)?.p_fusion));
        }
        let rise = gaps.windows(2).find(|w| w[1].1 > w[0].1);
        let peak = gaps.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |a, g| if g.1 > a.1 { g } else { a });
        items.push(Table1Item {
            key: 'e',
            label,
            status: verdict(rise.is_none()),
            detail: match rise {
                None => format!("gap falls from {:.4} to {:.4}", gaps[0].1, gaps[gaps.len() - 1].1),
                Some(w) => format!(
                    "gap rises from {:.4} at {:.1} dB to {:.4} at {:.1} dB; peak {:.4} at {:.1} dB",
                    w[0].1, w[0].0, w[1].1, w[1].0, peak.1, peak.0
                ),
            },
        });
    } else {
        items.push(skipped('e', label, &pair));
    }
    Ok(Table1Report { items })
}
