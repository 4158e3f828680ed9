pub mod mtta;
pub mod pcf;
pub mod percolation;
pub mod phase;
pub mod simulate;
pub mod solve;

use serde::Serialize;

use crate::output::Failure;

/// What a command produced: the resolved config to echo and any failed units.
pub struct Report {
    pub resolved: serde_json::Value,
    pub failures: Vec<Failure>,
}

impl Report {
    pub fn new<T: Serialize>(resolved: &T, failures: Vec<Failure>) -> anyhow::Result<Self> {
        Ok(Self {
            resolved: serde_json::to_value(resolved)?,
            failures,
        })
    }
}

/// PCF CSV row shared by `simulate`, `pcf` and functional `solve`.
#[derive(Serialize)]
pub struct PcfRow {
    pub r_lo: f64,
    pub r_hi: f64,
    pub xi_psiphi: Option<f64>,
    pub xi_phiphi: Option<f64>,
    pub xi_psipsi: Option<f64>,
    pub counts: Option<u64>,
}

pub fn pcf_rows(est: &planar_sis::statistics::PcfEstimate) -> Vec<PcfRow> {
    (0..est.n_bins())
        .map(|i| {
            let (r_lo, r_hi) = est.bin(i);
            PcfRow {
                r_lo,
                r_hi,
                xi_psiphi: est.xi_psi_phi[i],
                xi_phiphi: est.xi_phi_phi[i],
                xi_psipsi: est.xi_psi_psi[i],
                counts: Some(est.counts[i].total()),
            }
        })
        .collect()
}
