//! Exact continuous-time simulation of SIS dynamics with far-random-waypoint motion.
//!
//! Events are drawn by category (recovery, jump, infection) from aggregate rates; an
//! infection picks its target with probability proportional to the number of infected
//! neighbors through a Fenwick tree over integer weights, so the bookkeeping is exact.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{sample_poisson_with, CellIndex, ModelParams, Position, TorusDomain};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum State {
    Susceptible,
    Infected,
}

impl State {
    pub fn code(&self) -> &'static str {
        match self {
            State::Susceptible => "S",
            State::Infected => "I",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: usize,
    pub pos: Position,
    pub state: State,
    pub infected_neighbor_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    AllInfected,
    SingleInfected,
    /// Each point infected independently with this probability.
    Fraction(f64),
    /// Explicit per-point states; length must match the population.
    Explicit(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Population {
    Poisson,
    Fixed(Vec<Position>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub dom: TorusDomain,
    pub seed: u64,
    /// Replication number; selects the random streams of `seed`.
    pub replica: u64,
    pub t_max: f64,
    pub initial: InitialCondition,
    pub population: Population,
    /// Defaults to `1/beta`.
    pub snapshot_interval: Option<f64>,
    /// Defaults to `20/beta`.
    pub warmup: Option<f64>,
    pub extinction_cap: f64,
    pub keep_snapshots: bool,
}

pub const DEFAULT_EXTINCTION_CAP: f64 = 1e5;

impl SimConfig {
    pub fn new(params: ModelParams, dom: TorusDomain, seed: u64, t_max: f64) -> Self {
        Self {
            params,
            dom,
            seed,
            replica: 0,
            t_max,
            initial: InitialCondition::AllInfected,
            population: Population::Poisson,
            snapshot_interval: None,
            warmup: None,
            extinction_cap: DEFAULT_EXTINCTION_CAP,
            keep_snapshots: false,
        }
    }

    pub fn warmup(&self) -> f64 {
        self.warmup.unwrap_or_else(|| {
            if self.params.beta > 0.0 {
                (20.0 / self.params.beta).min(0.5 * self.t_max)
            } else {
                0.0
            }
        })
    }

    pub fn snapshot_interval(&self) -> f64 {
        self.snapshot_interval.unwrap_or_else(|| {
            if self.params.beta > 0.0 {
                1.0 / self.params.beta
            } else {
                (self.t_max / 100.0).max(f64::MIN_POSITIVE)
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.dom.side <= 2.0 * self.params.a {
            return Err(invalid("side", "torus side must exceed 2a"));
        }
        if !(self.t_max > self.warmup() && self.warmup() >= 0.0) {
            return Err(invalid("t_max", "need t_max > warmup >= 0"));
        }
        if !(self.snapshot_interval() > 0.0) {
            return Err(invalid("snapshot_interval", "must be positive"));
        }
        if let InitialCondition::Fraction(f) = self.initial {
            if !(0.0..=1.0).contains(&f) {
                return Err(invalid("initial", "fraction must lie in [0,1]"));
            }
        }
        Ok(())
    }

    /// Build the initial state from this configuration's random streams.
    pub fn initial_state(&self) -> Result<SimState> {
        self.validate()?;
        let mut r = rng::stream(self.seed, 2 * self.replica);
        let positions = match &self.population {
            Population::Poisson => sample_poisson_with(self.params.lambda, &self.dom, &mut r)?,
            Population::Fixed(p) => p.clone(),
        };
        let n = positions.len();
        let infected = match &self.initial {
            InitialCondition::AllInfected => vec![true; n],
            InitialCondition::SingleInfected => {
                let mut v = vec![false; n];
                if n > 0 {
                    v[r.random_range(0..n)] = true;
                }
                v
            }
            InitialCondition::Fraction(f) => (0..n).map(|_| r.random::<f64>() < *f).collect(),
            InitialCondition::Explicit(v) => {
                if v.len() != n {
                    return Err(invalid("initial", format!("{} states for {} points", v.len(), n)));
                }
                v.clone()
            }
        };
        Ok(SimState::new(self.params, self.dom, &positions, &infected))
    }

    pub fn dynamics_rng(&self) -> SimRng {
        rng::stream(self.seed, 2 * self.replica + 1)
    }
}

/// Fenwick tree over non-negative integer weights.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, i: usize, delta: i64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] = (self.tree[k] as i64 + delta) as u64;
            k += k & k.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn find(&self, mut target: u64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub recovery: u64,
    pub infection: u64,
    pub jump: u64,
}

impl EventCounts {
    pub fn total(&self) -> u64 {
        self.recovery + self.infection + self.jump
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub recovery: f64,
    pub jump: f64,
    pub infection: f64,
}

impl Rates {
    pub fn total(&self) -> f64 {
        self.recovery + self.jump + self.infection
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Recovery,
    Infection,
    Jump(Position),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub id: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event(Event),
    /// No infected points remain.
    Absorbed,
    /// Infected points remain but every rate is zero (for instance `beta = gamma = 0`).
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub ok: bool,
    pub count_mismatches: usize,
    pub weight_total_ok: bool,
    pub infected_list_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SojournStats {
    pub n: u64,
    pub sum: f64,
}

impl SojournStats {
    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    params: ModelParams,
    index: CellIndex,
    infected: Vec<bool>,
    count: Vec<u32>,
    inf_list: Vec<u32>,
    inf_slot: Vec<u32>,
    weights: Fenwick,
    weight_total: u64,
    t: f64,
    counters: EventCounts,
    last_recovery: Vec<f64>,
    sojourn_from: f64,
    sojourns: SojournStats,
}

const NO_SLOT: u32 = u32::MAX;

impl SimState {
    pub fn new(params: ModelParams, dom: TorusDomain, positions: &[Position], infected: &[bool]) -> Self {
        let n = positions.len();
        let index = CellIndex::new(positions, params.a, dom);
        let mut s = Self {
            params,
            index,
            infected: infected.to_vec(),
            count: vec![0; n],
            inf_list: Vec::new(),
            inf_slot: vec![NO_SLOT; n],
            weights: Fenwick::new(n),
            weight_total: 0,
            t: 0.0,
            counters: EventCounts::default(),
            last_recovery: vec![f64::NAN; n],
            sojourn_from: f64::INFINITY,
            sojourns: SojournStats::default(),
        };
        for i in 0..n {
            if s.infected[i] {
                s.inf_slot[i] = s.inf_list.len() as u32;
                s.inf_list.push(i as u32);
            }
        }
        s.count = s.recount();
        for i in 0..n {
            if !s.infected[i] {
                s.weights.add(i, s.count[i] as i64);
                s.weight_total += s.count[i] as u64;
            }
        }
        s
    }

    fn recount(&self) -> Vec<u32> {
        let n = self.len();
        let mut c = vec![0u32; n];
        for i in 0..n {
            let mut k = 0;
            self.index.for_each_neighbor(self.index.position(i), Some(i), |j| {
                if self.infected[j] {
                    k += 1;
                }
            });
            c[i] = k;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_infected(&self) -> usize {
        self.inf_list.len()
    }

    pub fn infected_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.n_infected() as f64 / self.len() as f64
        }
    }

    pub fn event_counts(&self) -> EventCounts {
        self.counters
    }

    pub fn positions(&self) -> &[Position] {
        self.index.positions()
    }

    pub fn infected(&self) -> &[bool] {
        &self.infected
    }

    pub fn infected_neighbor_counts(&self) -> &[u32] {
        &self.count
    }

    pub fn particles(&self) -> Vec<Particle> {
        (0..self.len())
            .map(|i| Particle {
                id: i,
                pos: self.index.position(i),
                state: if self.infected[i] { State::Infected } else { State::Susceptible },
                infected_neighbor_count: self.count[i],
            })
            .collect()
    }

    /// Integer infection weight: susceptible points' infected-neighbor counts, summed.
    pub fn infection_weight(&self) -> u64 {
        self.weight_total
    }

    pub fn rates(&self) -> Rates {
        Rates {
            recovery: self.params.beta * self.n_infected() as f64,
            jump: self.params.gamma * self.len() as f64,
            infection: self.params.alpha * self.weight_total as f64,
        }
    }

    /// Record susceptible sojourns that start at or after `from`.
    pub fn track_sojourns_from(&mut self, from: f64) {
        self.sojourn_from = from;
    }

    pub fn sojourns(&self) -> &SojournStats {
        &self.sojourns
    }

    /// Draw the next event without applying it.
    pub fn sample_next<R: Rng + ?Sized>(&self, rng: &mut R) -> StepOutcome {
        let rates = self.rates();
        let total = rates.total();
        if !(total > 0.0) {
            return if self.n_infected() == 0 { StepOutcome::Absorbed } else { StepOutcome::Stalled };
        }
        if self.n_infected() == 0 {
            // jumps alone never change the epidemic state
            return StepOutcome::Absorbed;
        }
        let e: f64 = Exp1.sample(rng);
        let t = self.t + e / total;
        let u = rng.random::<f64>() * total;
        let (kind, id) = if u < rates.recovery {
            (EventKind::Recovery, self.inf_list[rng.random_range(0..self.n_infected())] as usize)
        } else if u < rates.recovery + rates.jump || self.weight_total == 0 {
            if rates.jump > 0.0 {
                let id = rng.random_range(0..self.len());
                (EventKind::Jump(self.index.domain().uniform(rng)), id)
            } else {
                (EventKind::Recovery, self.inf_list[rng.random_range(0..self.n_infected())] as usize)
            }
        } else {
            let k = rng.random_range(0..self.weight_total);
            (EventKind::Infection, self.weights.find(k))
        };
        StepOutcome::Event(Event { kind, id, t })
    }

    pub fn apply(&mut self, ev: Event) {
        self.t = ev.t;
        match ev.kind {
            EventKind::Recovery => self.recover(ev.id),
            EventKind::Infection => self.infect(ev.id),
            EventKind::Jump(to) => self.jump(ev.id, to),
        }
    }

    /// Sample and apply one event.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        let out = self.sample_next(rng);
        if let StepOutcome::Event(ev) = out {
            self.apply(ev);
        }
        out
    }

    fn bump_neighbors(&mut self, at: Position, exclude: usize, delta: i32) {
        let index = &self.index;
        let (count, weights, infected) = (&mut self.count, &mut self.weights, &self.infected);
        let mut wdelta = 0i64;
        index.for_each_neighbor(at, Some(exclude), |j| {
            count[j] = (count[j] as i32 + delta) as u32;
            if !infected[j] {
                weights.add(j, delta as i64);
                wdelta += delta as i64;
            }
        });
        self.weight_total = (self.weight_total as i64 + wdelta) as u64;
    }

    fn recover(&mut self, id: usize) {
        debug_assert!(self.infected[id]);
        self.infected[id] = false;
        let slot = self.inf_slot[id] as usize;
        self.inf_list.swap_remove(slot);
        if slot < self.inf_list.len() {
            self.inf_slot[self.inf_list[slot] as usize] = slot as u32;
        }
        self.inf_slot[id] = NO_SLOT;
        self.weights.add(id, self.count[id] as i64);
        self.weight_total += self.count[id] as u64;
        self.bump_neighbors(self.index.position(id), id, -1);
        self.counters.recovery += 1;
        self.last_recovery[id] = self.t;
    }

    fn infect(&mut self, id: usize) {
        debug_assert!(!self.infected[id]);
        self.weights.add(id, -(self.count[id] as i64));
        self.weight_total -= self.count[id] as u64;
        self.infected[id] = true;
        self.inf_slot[id] = self.inf_list.len() as u32;
        self.inf_list.push(id as u32);
        self.bump_neighbors(self.index.position(id), id, 1);
        self.counters.infection += 1;
        let since = self.last_recovery[id];
        if since >= self.sojourn_from {
            self.sojourns.n += 1;
            self.sojourns.sum += self.t - since;
        }
    }

    fn jump(&mut self, id: usize, to: Position) {
        let from = self.index.position(id);
        if self.infected[id] {
            self.bump_neighbors(from, id, -1);
        }
        self.index.relocate(id, to);
        let to = self.index.position(id);
        let mut k = 0u32;
        {
            let infected = &self.infected;
            self.index.for_each_neighbor(to, Some(id), |j| {
                if infected[j] {
                    k += 1;
                }
            });
        }
        if !self.infected[id] {
            self.weights.add(id, k as i64 - self.count[id] as i64);
            self.weight_total = self.weight_total + k as u64 - self.count[id] as u64;
        }
        self.count[id] = k;
        if self.infected[id] {
            self.bump_neighbors(to, id, 1);
        }
        self.counters.jump += 1;
    }

    /// Compare the incremental bookkeeping with a from-scratch recomputation.
    pub fn audit(&self) -> AuditReport {
        let fresh = self.recount();
        let count_mismatches = fresh.iter().zip(&self.count).filter(|(a, b)| a != b).count();
        let w: u64 = (0..self.len()).filter(|&i| !self.infected[i]).map(|i| fresh[i] as u64).sum();
        let tree_total = prefix(&self.weights, self.len());
        let weight_total_ok = w == self.weight_total && tree_total == self.weight_total;
        let infected_list_ok = self.inf_list.len() == self.infected.iter().filter(|&&b| b).count()
            && self
                .inf_list
                .iter()
                .enumerate()
                .all(|(slot, &i)| self.infected[i as usize] && self.inf_slot[i as usize] as usize == slot);
        AuditReport {
            ok: count_mismatches == 0 && weight_total_ok && infected_list_ok,
            count_mismatches,
            weight_total_ok,
            infected_list_ok,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            positions: self.positions().to_vec(),
            infected: self.infected.clone(),
        }
    }
}

fn prefix(f: &Fenwick, n: usize) -> u64 {
    let mut k = n;
    let mut s = 0;
    while k > 0 {
        s += f.tree[k];
        k -= k & k.wrapping_neg();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<Position>,
    pub infected: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub n_points: usize,
    /// `(t, infected fraction)` on the snapshot grid, starting at 0.
    pub series: Vec<(f64, f64)>,
    pub snapshots: Vec<Snapshot>,
    /// Time-weighted infected fraction over `[warmup, t_max]`.
    pub p_mean: f64,
    /// Batch-means standard error of `p_mean`.
    pub p_stderr: f64,
    pub t_absorb: Option<f64>,
    pub censored: bool,
    pub event_counts: EventCounts,
    /// Susceptible sojourns (recovery to next infection) started after warmup.
    pub sojourns: SojournStats,
    pub warmup: f64,
    pub t_max: f64,
}

const BATCHES: usize = 20;

/// Run to `t_max` (or absorption), averaging the infected fraction after warmup.
pub fn run(config: &SimConfig) -> Result<RunResult> {
    let mut state = config.initial_state()?;
    let mut rng = config.dynamics_rng();
    let warmup = config.warmup();
    let dt_snap = config.snapshot_interval();
    let t_max = config.t_max;
    state.track_sojourns_from(warmup);

    let batch_len = (t_max - warmup) / BATCHES as f64;
    let mut batch = [0.0f64; BATCHES];
    // integrate the piecewise-constant fraction over [t0, t1)
    let mut integrate = |t0: f64, t1: f64, f: f64| {
        let (a, b) = (t0.max(warmup), t1.min(t_max));
        if b <= a {
            return;
        }
        let mut s = a;
        while s < b {
            let k = (((s - warmup) / batch_len) as usize).min(BATCHES - 1);
            let end = (warmup + (k + 1) as f64 * batch_len).min(b);
            let end = if end <= s { b } else { end };
            batch[k] += (end - s) * f;
            s = end;
        }
    };

    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    let mut next_grid = 0.0;
    let mut t_absorb = None;
    let record = |t: f64, st: &SimState, series: &mut Vec<(f64, f64)>, snaps: &mut Vec<Snapshot>| {
        series.push((t, st.infected_fraction()));
        if config.keep_snapshots && t >= warmup {
            let mut s = st.snapshot();
            s.t = t;
            snaps.push(s);
        }
    };

    loop {
        let t0 = state.time();
        let out = state.sample_next(&mut rng);
        let t1 = match out {
            StepOutcome::Event(ev) => ev.t.min(t_max),
            _ => t_max,
        };
        while next_grid < t1 || (next_grid <= t_max && t1 >= t_max && next_grid <= t1) {
            record(next_grid, &state, &mut series, &mut snapshots);
            next_grid += dt_snap;
            if next_grid > t_max + 1e-12 {
                break;
            }
        }
        integrate(t0, t1, state.infected_fraction());
        match out {
            StepOutcome::Event(ev) if ev.t < t_max => state.apply(ev),
            StepOutcome::Absorbed => {
                t_absorb = Some(t0);
                break;
            }
            _ => break,
        }
    }

    let means: Vec<f64> = batch.iter().map(|b| b / batch_len).collect();
    let p_mean = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - p_mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(RunResult {
        n_points: state.len(),
        series,
        snapshots,
        p_mean,
        p_stderr: (var / BATCHES as f64).sqrt(),
        t_absorb,
        censored: false,
        event_counts: state.event_counts(),
        sojourns: state.sojourns().clone(),
        warmup,
        t_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    pub time: f64,
    pub censored: bool,
}

/// Time of the first state with no infected points, censored at `extinction_cap`.
pub fn run_until_extinction(config: &SimConfig) -> Result<Absorption> {
    config.params.validate()?;
    if !(config.extinction_cap > 0.0) {
        return Err(invalid("extinction_cap", "must be positive"));
    }
    let mut cfg = config.clone();
    // the horizon does not apply here; keep validation happy
    cfg.t_max = cfg.t_max.max(cfg.warmup() + 1.0);
    let mut state = cfg.initial_state()?;
    let mut rng = cfg.dynamics_rng();
    let cap = config.extinction_cap;
    if config.params.beta == 0.0 && state.n_infected() > 0 {
        // nothing ever recovers
        return Ok(Absorption {
            time: cap,
            censored: true,
        });
    }
    loop {
        if state.n_infected() == 0 {
            return Ok(Absorption {
                time: state.time(),
                censored: false,
            });
        }
        match state.sample_next(&mut rng) {
            StepOutcome::Event(ev) if ev.t < cap => state.apply(ev),
            StepOutcome::Absorbed => {
                return Ok(Absorption {
                    time: state.time(),
                    censored: false,
                })
            }
            _ => {
                return Ok(Absorption {
                    time: cap,
                    censored: true,
                })
            }
        }
    }
}

/// Several epidemics on one shared point configuration, driven by a single event stream
/// (graphical construction): recovery marks hit points at rate `beta`, infection marks
/// hit ordered neighbor pairs at rate `alpha`, jumps move points at rate `gamma`.
/// Returns, for each sample time, the infected sets of every copy.
pub fn run_coupled(
    params: ModelParams,
    dom: TorusDomain,
    positions: &[Position],
    initial_sets: &[Vec<bool>],
    seed: u64,
    sample_times: &[f64],
) -> Vec<Vec<Vec<bool>>> {
    let n = positions.len();
    let mut index = CellIndex::new(positions, params.a, dom);
    let mut sets: Vec<Vec<bool>> = initial_sets.to_vec();
    let mut deg: Vec<usize> = (0..n).map(|i| index.neighbors_of(i).len()).collect();
    let mut deg_total: usize = deg.iter().sum();
    let mut rng = rng::stream(seed, 0);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    let mut next = 0;
    if n == 0 {
        return sample_times.iter().map(|_| sets.clone()).collect();
    }
    loop {
        let r_rec = params.beta * n as f64;
        let r_jump = params.gamma * n as f64;
        let r_inf = params.alpha * deg_total as f64;
        let total = r_rec + r_jump + r_inf;
        let e: f64 = Exp1.sample(&mut rng);
        let t_next = if total > 0.0 { t + e / total } else { f64::INFINITY };
        while next < sample_times.len() && sample_times[next] < t_next {
            out.push(sets.clone());
            next += 1;
        }
        if next == sample_times.len() {
            return out;
        }
        t = t_next;
        let u = rng.random::<f64>() * total;
        if u < r_rec {
            let i = rng.random_range(0..n);
            for s in sets.iter_mut() {
                s[i] = false;
            }
        } else if u < r_rec + r_jump || deg_total == 0 {
            let i = rng.random_range(0..n);
            let to = dom.uniform(&mut rng);
            for j in index.neighbors_of(i) {
                deg[j] -= 1;
            }
            deg_total -= 2 * deg[i];
            index.relocate(i, to);
            let nb = index.neighbors_of(i);
            for &j in &nb {
                deg[j] += 1;
            }
            deg[i] = nb.len();
            deg_total += 2 * deg[i];
        } else {
            // target weighted by degree, then a uniform neighbor as source
            let mut k = rng.random_range(0..deg_total);
            let mut target = 0;
            for (i, &d) in deg.iter().enumerate() {
                if k < d {
                    target = i;
                    break;
                }
                k -= d;
            }
            let nb = index.neighbors_of(target);
            let source = nb[rng.random_range(0..nb.len())];
            for s in sets.iter_mut() {
                if s[source] {
                    s[target] = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, beta: f64, gamma: f64, a: f64) -> ModelParams {
        ModelParams::new(alpha, beta, gamma, 1.0, a).unwrap()
    }

    #[test]
    fn fenwick_find_matches_linear_scan() {
        let w = [3u64, 0, 2, 5, 0, 1];
        let mut f = Fenwick::new(w.len());
        for (i, &x) in w.iter().enumerate() {
            f.add(i, x as i64);
        }
        let mut expect = Vec::new();
        for (i, &x) in w.iter().enumerate() {
            expect.extend(std::iter::repeat_n(i, x as usize));
        }
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(f.find(k as u64), e);
        }
    }

    #[test]
    fn lone_infected_point_recovers() {
        let dom = TorusDomain::new(10.0, 1.0).unwrap();
        let mut s = SimState::new(params(1.0, 1.0, 0.0, 1.0), dom, &[Position::new(1.0, 1.0)], &[true]);
        let mut r = rng::stream(1, 0);
        match s.step(&mut r) {
            StepOutcome::Event(ev) => assert_eq!(ev.kind, EventKind::Recovery),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.n_infected(), 0);
        assert_eq!(s.step(&mut r), StepOutcome::Absorbed);
    }

    #[test]
    fn pair_without_recovery_infects() {
        let dom = TorusDomain::new(10.0, 1.0).unwrap();
        let pts = [Position::new(1.0, 1.0), Position::new(1.5, 1.0)];
        let mut s = SimState::new(params(1.0, 0.0, 0.0, 1.0), dom, &pts, &[false, true]);
        let mut r = rng::stream(2, 0);
        match s.step(&mut r) {
            StepOutcome::Event(ev) => {
                assert_eq!(ev.kind, EventKind::Infection);
                assert_eq!(ev.id, 0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.step(&mut r), StepOutcome::Stalled);
    }

    #[test]
    fn audit_every_step_small_instance() {
        let dom = TorusDomain::new(8.0, 1.0).unwrap();
        let cfg = SimConfig {
            initial: InitialCondition::Fraction(0.5),
            ..SimConfig::new(params(1.0, 1.0, 2.0, 1.0), dom, 3, 10.0)
        };
        let mut s = cfg.initial_state().unwrap();
        let mut r = cfg.dynamics_rng();
        for _ in 0..20_000 {
            if !matches!(s.step(&mut r), StepOutcome::Event(_)) {
                break;
            }
            assert!(s.audit().ok);
            let n_s = s.infected().iter().filter(|&&b| !b).count();
            assert_eq!(n_s + s.n_infected(), s.len());
        }
    }

    #[test]
    fn no_recovery_keeps_everyone_infected() {
        let p = params(1.0, 0.0, 0.0, 1.0);
        let cfg = SimConfig {
            warmup: Some(0.0),
            snapshot_interval: Some(1.0),
            ..SimConfig::new(p, TorusDomain::new(10.0, 1.0).unwrap(), 1, 5.0)
        };
        let res = run(&cfg).unwrap();
        assert_eq!(res.p_mean, 1.0);
        assert!(res.series.iter().all(|&(_, f)| f == 1.0));
        assert_eq!(res.series.len(), 6);
    }

    #[test]
    fn zero_initial_infected_absorbs_at_zero() {
        let cfg = SimConfig {
            initial: InitialCondition::Fraction(0.0),
            ..SimConfig::new(params(1.0, 1.0, 1.0, 1.0), TorusDomain::new(10.0, 1.0).unwrap(), 1, 5.0)
        };
        let a = run_until_extinction(&cfg).unwrap();
        assert_eq!(a.time, 0.0);
        assert!(!a.censored);
    }

    #[test]
    fn no_recovery_is_censored() {
        let cfg = SimConfig::new(params(1.0, 0.0, 1.0, 1.0), TorusDomain::new(10.0, 1.0).unwrap(), 1, 5.0);
        let a = run_until_extinction(&cfg).unwrap();
        assert!(a.censored);
        assert_eq!(a.time, DEFAULT_EXTINCTION_CAP);
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = SimConfig::new(params(1.0, 2.0, 1.0, 1.0), TorusDomain::new(10.0, 1.0).unwrap(), 9, 20.0);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
