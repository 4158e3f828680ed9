//! Estimators over simulation output: pair correlation functions, MTTA summaries and
//! the Little's-law consistency ratio.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};
use crate::geometry::{torus_distance, CellIndex, TorusDomain};
use crate::par;
use crate::simulator::{run_until_extinction, Absorption, RunResult, SimConfig, Snapshot};

/// Ordered-pair counts per type, summed over snapshots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    /// Susceptible at the origin, infected at distance r.
    pub psi_phi: u64,
    pub phi_phi: u64,
    pub psi_psi: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        2 * self.psi_phi + self.phi_phi + self.psi_psi
    }

    fn add(&mut self, o: &PairCounts) {
        self.psi_phi += o.psi_phi;
        self.phi_phi += o.phi_phi;
        self.psi_psi += o.psi_psi;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfEstimate {
    pub bin_edges: Vec<f64>,
    /// `None` marks bins without pairs of that type.
    pub xi_psi_phi: Vec<Option<f64>>,
    pub xi_phi_phi: Vec<Option<f64>>,
    pub xi_psi_psi: Vec<Option<f64>>,
    pub counts: Vec<PairCounts>,
    pub n_snapshots: usize,
    /// Time-and-snapshot averaged infected fraction.
    pub p: f64,
}

impl PcfEstimate {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin(&self, i: usize) -> (f64, f64) {
        (self.bin_edges[i], self.bin_edges[i + 1])
    }

    /// Approximate one-sigma errors from pair-count Poisson noise, per type.
    pub fn sigma(&self, i: usize) -> [Option<f64>; 3] {
        let c = &self.counts[i];
        let rel = |k: u64, f: f64| (k > 0).then(|| (f / k as f64).sqrt());
        [
            self.xi_psi_phi[i].zip(rel(c.psi_phi, 1.0)).map(|(x, r)| x * r),
            self.xi_phi_phi[i].zip(rel(c.phi_phi, 2.0)).map(|(x, r)| x * r),
            self.xi_psi_psi[i].zip(rel(c.psi_psi, 2.0)).map(|(x, r)| x * r),
        ]
    }
}

#[derive(Debug, Clone, Default)]
struct Accum {
    counts: Vec<PairCounts>,
    // sums over snapshots of n_A n_B / area (ordered pairs) per type
    norm: [f64; 3],
    infected_fraction: f64,
}

impl Accum {
    fn merge(mut self, o: Accum) -> Accum {
        if self.counts.is_empty() {
            return o;
        }
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            a.add(b);
        }
        for k in 0..3 {
            self.norm[k] += o.norm[k];
        }
        self.infected_fraction += o.infected_fraction;
        self
    }
}

fn accumulate(s: &Snapshot, dom: &TorusDomain, bin_width: f64, n_bins: usize) -> Accum {
    let r_max = bin_width * n_bins as f64;
    let n = s.positions.len();
    let mut counts = vec![PairCounts::default(); n_bins];
    let n_i = s.infected.iter().filter(|&&b| b).count() as f64;
    let n_s = n as f64 - n_i;
    let area = dom.area();
    if n > 1 {
        let idx = CellIndex::new(&s.positions, r_max, *dom);
        for i in 0..n {
            let pi = s.positions[i];
            idx.for_each_neighbor(pi, Some(i), |j| {
                if j <= i {
                    return;
                }
                let d = torus_distance(pi, s.positions[j], dom);
                let k = (d / bin_width) as usize;
                if k >= n_bins {
                    return;
                }
                let c = &mut counts[k];
                match (s.infected[i], s.infected[j]) {
                    (true, true) => c.phi_phi += 2,
                    (false, false) => c.psi_psi += 2,
                    _ => c.psi_phi += 1,
                }
            });
        }
    }
    Accum {
        counts,
        norm: [n_s * n_i / area, n_i * (n_i - 1.0).max(0.0) / area, n_s * (n_s - 1.0).max(0.0) / area],
        infected_fraction: if n > 0 { n_i / n as f64 } else { 0.0 },
    }
}

/// Annulus-binned PCF estimates on `[0, min(r_max, L/2))` summed over snapshots,
/// normalised by the empirical class sizes of each snapshot.
pub fn estimate_pcf(snapshots: &[Snapshot], dom: &TorusDomain, bin_width: f64, r_max: f64) -> Result<PcfEstimate> {
    if !(bin_width > 0.0) {
        return Err(invalid("bin_width", "must be positive"));
    }
    if snapshots.is_empty() {
        return Err(invalid("snapshots", "need at least one snapshot"));
    }
    let reach = r_max.min(0.5 * dom.side);
    let n_bins = ((reach / bin_width) + 1e-9).floor() as usize;
    if n_bins == 0 {
        return Err(invalid("bin_width", "wider than the estimation range"));
    }
    let acc = par::map(snapshots, |s| accumulate(s, dom, bin_width, n_bins))
        .into_iter()
        .fold(Accum::default(), Accum::merge);
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 * bin_width).collect();
    let ring = |k: usize| std::f64::consts::PI * (bin_edges[k + 1].powi(2) - bin_edges[k].powi(2));
    let est = |k: usize, count: u64, norm: f64| (count > 0 && norm > 0.0).then(|| count as f64 / (norm * ring(k)));
    Ok(PcfEstimate {
        xi_psi_phi: (0..n_bins).map(|k| est(k, acc.counts[k].psi_phi, acc.norm[0])).collect(),
        xi_phi_phi: (0..n_bins).map(|k| est(k, acc.counts[k].phi_phi, acc.norm[1])).collect(),
        xi_psi_psi: (0..n_bins).map(|k| est(k, acc.counts[k].psi_psi, acc.norm[2])).collect(),
        counts: acc.counts,
        bin_edges,
        n_snapshots: snapshots.len(),
        p: acc.infected_fraction / snapshots.len() as f64,
    })
}

/// `(1-p)^2 xi_psipsi + p^2 xi_phiphi + 2p(1-p) xi_psiphi - 1` per bin.
pub fn check_superposition(pcf: &PcfEstimate, p: f64) -> Vec<Option<f64>> {
    (0..pcf.n_bins())
        .map(|k| {
            let (a, b, c) = (pcf.xi_psi_psi[k]?, pcf.xi_phi_phi[k]?, pcf.xi_psi_phi[k]?);
            Some((1.0 - p).powi(2) * a + p * p * b + 2.0 * p * (1.0 - p) * c - 1.0)
        })
        .collect()
}

/// Count-weighted mean of one PCF over bins lying inside `(0, a)`.
fn plateau(pcf: &PcfEstimate, a: f64, values: &[Option<f64>], count: impl Fn(&PairCounts) -> u64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..pcf.n_bins() {
        if pcf.bin_edges[k + 1] > a * (1.0 + 1e-12) {
            break;
        }
        if let Some(x) = values[k] {
            let c = count(&pcf.counts[k]) as f64;
            num += c * x;
            den += c;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Near-origin plateau `w` of the cross PCF.
pub fn w_plateau(pcf: &PcfEstimate, a: f64) -> Option<f64> {
    plateau(pcf, a, &pcf.xi_psi_phi, |c| c.psi_phi)
}

/// `(w, v, z)` plateaus of the cross, infected and susceptible PCFs.
pub fn plateaus(pcf: &PcfEstimate, a: f64) -> (Option<f64>, Option<f64>, Option<f64>) {
    (
        w_plateau(pcf, a),
        plateau(pcf, a, &pcf.xi_phi_phi, |c| c.phi_phi),
        plateau(pcf, a, &pcf.xi_psi_psi, |c| c.psi_psi),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MttaRecord {
    pub param: f64,
    pub side: f64,
    /// Absorption times; censored runs enter at the cap.
    pub samples: Vec<f64>,
    pub censored_n: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Every replication hit the cap.
    pub all_censored: bool,
}

impl MttaRecord {
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// Sample mean and two-sided 95% Student-t interval.
pub fn mean_ci95(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, mean, mean);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(f64::NAN);
    let half = t * (var / n as f64).sqrt();
    (mean, mean - half, mean + half)
}

pub fn summarize_mtta(param: f64, side: f64, runs: &[Absorption]) -> MttaRecord {
    let samples: Vec<f64> = runs.iter().map(|a| a.time).collect();
    let censored_n = runs.iter().filter(|a| a.censored).count();
    let (mean, ci_lo, ci_hi) = mean_ci95(&samples);
    MttaRecord {
        param,
        side,
        samples,
        censored_n,
        mean,
        ci_lo,
        ci_hi,
        all_censored: !runs.is_empty() && censored_n == runs.len(),
    }
}

/// MTTA per `(param, config)` over `replications` independent replicas, run in parallel.
/// Replica `r` of every cell uses stream `r` of the config's seed.
pub fn mtta_curve(cells: &[(f64, SimConfig)], replications: usize) -> Result<Vec<MttaRecord>> {
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..replications as u64).map(move |r| (c, r)))
        .collect();
    let results = par::map(&jobs, |&(c, r)| {
        let mut cfg = cells[c].1.clone();
        cfg.replica = r;
        run_until_extinction(&cfg)
    });
    let mut per_cell: Vec<Vec<Absorption>> = vec![Vec::with_capacity(replications); cells.len()];
    for (&(c, _), res) in jobs.iter().zip(results) {
        per_cell[c].push(res?);
    }
    Ok(cells
        .iter()
        .zip(&per_cell)
        .map(|((param, cfg), runs)| summarize_mtta(*param, cfg.dom.side, runs))
        .collect())
}

/// Measured mean susceptible sojourn times `p beta / (1 - p)`; near 1 at stationarity.
pub fn little_check(run: &RunResult, beta: f64) -> Option<f64> {
    let nu = run.sojourns.mean()?;
    let p = run.p_mean;
    (p > 0.0 && p < 1.0 && run.sojourns.n >= 100).then(|| nu * p * beta / (1.0 - p))
}

/// Little's ratio for a single point's alternating trace of `(switch time, infected after)`
/// on `[trace[0].0, t_end]`, with `p` and `beta` estimated from the trace itself.
pub fn little_from_trace(trace: &[(f64, bool)], t_end: f64) -> Option<f64> {
    let (mut t_inf, mut t_sus) = (0.0, 0.0);
    let (mut n_rec, mut n_sus_done) = (0usize, 0usize);
    let mut sus_sum = 0.0;
    for (k, &(t, infected)) in trace.iter().enumerate() {
        let end = trace.get(k + 1).map_or(t_end, |n| n.0);
        let len = end - t;
        if infected {
            t_inf += len;
            if k + 1 < trace.len() {
                n_rec += 1;
            }
        } else {
            t_sus += len;
            if k + 1 < trace.len() {
                sus_sum += len;
                n_sus_done += 1;
            }
        }
    }
    if n_rec == 0 || n_sus_done == 0 || t_sus <= 0.0 {
        return None;
    }
    let p = t_inf / (t_inf + t_sus);
    let beta = n_rec as f64 / t_inf;
    let nu = sus_sum / n_sus_done as f64;
    Some(nu * p * beta / (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Position;

    fn brute(s: &Snapshot, dom: &TorusDomain, w: f64, n_bins: usize) -> Vec<PairCounts> {
        let mut c = vec![PairCounts::default(); n_bins];
        for i in 0..s.positions.len() {
            for j in 0..s.positions.len() {
                if i == j {
                    continue;
                }
                let k = (torus_distance(s.positions[i], s.positions[j], dom) / w) as usize;
                if k >= n_bins {
                    continue;
                }
                match (s.infected[i], s.infected[j]) {
                    (false, true) => c[k].psi_phi += 1,
                    (true, true) => c[k].phi_phi += 1,
                    (false, false) => c[k].psi_psi += 1,
                    _ => {}
                }
            }
        }
        c
    }

    #[test]
    fn counts_match_brute_force() {
        let dom = TorusDomain::new(6.0, 1.0).unwrap();
        let pos: Vec<Position> = [
            (0.1, 0.2),
            (5.9, 0.3),
            (1.0, 1.0),
            (2.5, 2.5),
            (3.0, 0.1),
            (0.5, 5.5),
            (4.4, 4.4),
            (1.7, 0.9),
            (2.2, 5.8),
            (3.3, 3.1),
        ]
        .iter()
        .map(|&(x, y)| Position::new(x, y))
        .collect();
        let inf = vec![true, false, true, false, false, true, true, false, true, false];
        let s = Snapshot {
            t: 0.0,
            positions: pos,
            infected: inf,
        };
        let est = estimate_pcf(std::slice::from_ref(&s), &dom, 0.25, 3.0).unwrap();
        assert_eq!(est.counts, brute(&s, &dom, 0.25, 12));
    }

    #[test]
    fn single_class_flags_cross() {
        let dom = TorusDomain::new(10.0, 1.0).unwrap();
        let s = Snapshot {
            t: 0.0,
            positions: vec![Position::new(1.0, 1.0), Position::new(1.2, 1.0)],
            infected: vec![true, true],
        };
        let est = estimate_pcf(&[s], &dom, 0.5, 2.0).unwrap();
        assert!(est.xi_psi_phi.iter().all(|x| x.is_none()));
        assert!(est.xi_phi_phi[0].is_some());
    }

    #[test]
    fn ci_contains_mean_and_uses_t_quantile() {
        let (m, lo, hi) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t_{0.975,2} = 4.302653
        assert!((hi - m - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
        assert!(lo <= m && m <= hi);
    }

    #[test]
    fn alternating_trace_is_exact() {
        let mut trace = Vec::new();
        let mut t = 0.0;
        for k in 0..50 {
            trace.push((t, true));
            t += 0.3 + 0.01 * (k % 7) as f64;
            trace.push((t, false));
            t += 1.1 + 0.02 * (k % 5) as f64;
        }
        trace.push((t, true));
        let r = little_from_trace(&trace, t).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }
}
