use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};

pub const LEDGER_HEADER: [&str; 10] = [
    "time", "B2", "epsv2", "v2", "mu_gradv2", "nu_gradB2", "LB", "res_total", "res_mom", "res_ind",
];

/// One ledger row. `B2` and `epsv2` refer to the state at `time`; for rows
/// after the first, the dissipation columns hold midpoint values of the step
/// that ended at `time`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub time: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    pub epsv2: f64,
    pub v2: f64,
    pub mu_gradv2: f64,
    #[serde(rename = "nu_gradB2")]
    pub nu_grad_b2: f64,
    #[serde(rename = "LB")]
    pub lb: f64,
    pub res_total: f64,
    pub res_mom: f64,
    pub res_ind: f64,
    /// `∫ (B⊗B):∇v` over the step; kept in memory only.
    #[serde(skip)]
    pub work: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ledger {
    pub rows: Vec<LedgerRow>,
}

/// Per-step residuals of the total balance and of its two split identities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BalanceResiduals {
    pub total: Vec<f64>,
    pub momentum: Vec<f64>,
    pub induction: Vec<f64>,
}

fn residuals(prev: &LedgerRow, row: &LedgerRow, dt: f64) -> (f64, f64, f64) {
    let d_b = (row.b2 - prev.b2) / (2.0 * dt);
    let d_v = (row.epsv2 - prev.epsv2) / (2.0 * dt);
    let diss = row.v2 + row.mu_gradv2;
    let mom = d_v + diss + row.work;
    let ind = d_b + row.nu_grad_b2 - row.work;
    let total = d_b + d_v + diss + row.nu_grad_b2;
    (total, mom, ind)
}

impl Ledger {
    pub(crate) fn fill_residuals(&self, row: &mut LedgerRow, dt: f64) {
        if let Some(prev) = self.rows.last() {
            let (t, m, i) = residuals(prev, row, dt);
            row.res_total = t;
            row.res_mom = m;
            row.res_ind = i;
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(LEDGER_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let vals = [
                r.time, r.b2, r.epsv2, r.v2, r.mu_gradv2, r.nu_grad_b2, r.lb, r.res_total, r.res_mom, r.res_ind,
            ];
            wr.write_record(vals.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(LEDGER_HEADER.iter().copied()) {
            return Err(RelaxError::Format(format!("unexpected ledger header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.deserialize() {
            rows.push(rec.map_err(csv_err)?);
        }
        let mut out = Self { rows };
        out.recover_work();
        Ok(out)
    }

    /// Rebuild `work` from the stored momentum residual of each step.
    fn recover_work(&mut self) {
        for k in 1..self.rows.len() {
            let (prev, row) = (self.rows[k - 1], self.rows[k]);
            let dt = row.time - prev.time;
            let d_v = (row.epsv2 - prev.epsv2) / (2.0 * dt);
            self.rows[k].work = row.res_mom - d_v - row.v2 - row.mu_gradv2;
        }
        if let Some(first) = self.rows.first_mut() {
            first.work = 0.0;
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    /// Checks the ledger is usable by the certifiers.
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() < 2 {
            return Err(RelaxError::IncompleteTrajectory("ledger has fewer than two rows".into()));
        }
        for w in self.rows.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(RelaxError::IncompleteTrajectory(format!(
                    "ledger times not increasing at t = {}",
                    w[1].time
                )));
            }
        }
        for r in &self.rows {
            let vals = [r.time, r.b2, r.epsv2, r.v2, r.mu_gradv2, r.nu_grad_b2, r.lb];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(RelaxError::IncompleteTrajectory(format!("non-finite ledger row at t = {}", r.time)));
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> RelaxError {
    RelaxError::Format(e.to_string())
}

/// Recomputes the discrete balance of every step from the ledger:
/// `(E^{n+1} − E^n)/dt + ||v||² + μ||∇v||² + ν||∇B||²` with midpoint
/// dissipation, and the momentum and induction identities whose sum it is.
pub fn energy_balance_residual(ledger: &Ledger) -> Result<BalanceResiduals> {
    ledger.validate()?;
    let mut out = BalanceResiduals::default();
    for w in ledger.rows.windows(2) {
        let dt = w[1].time - w[0].time;
        let (t, m, i) = residuals(&w[0], &w[1], dt);
        out.total.push(t);
        out.momentum.push(m);
        out.induction.push(i);
    }
    Ok(out)
}
