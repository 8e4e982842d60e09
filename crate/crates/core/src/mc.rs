//! Gillespie simulation of the lattice processes, their absorbing duals, the
//! windowed SIR dynamics and the SIR bilayer walk.
//!
//! Event rates are grouped per site and per bond in a Fenwick tree, so an
//! event costs O(log N) and only touches the slots next to it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{sir_dual_transitions, DualConfiguration, LatticeModel, LatticeRates, SirDualState};
use crate::lattice::{Configuration, SirParams};
use crate::math::{ln, sqrt};
use crate::sir::{SirConfiguration, SirState};

/// Independent stream for replica `replica` under `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -ln(1.0 - u) / rate
}

/// Binary indexed tree over nonnegative slot rates.
#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
    vals: Vec<f64>,
    updates: usize,
}

const REBUILD_EVERY: usize = 1 << 14;

impl Fenwick {
    pub fn from_values(vals: &[f64]) -> Self {
        let mut f = Self { tree: vec![0.0; vals.len() + 1], vals: vals.to_vec(), updates: 0 };
        f.rebuild();
        f
    }

    fn rebuild(&mut self) {
        let n = self.vals.len();
        self.tree.iter_mut().for_each(|t| *t = 0.0);
        for i in 1..=n {
            self.tree[i] += self.vals[i - 1];
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                let v = self.tree[i];
                self.tree[j] += v;
            }
        }
        self.updates = 0;
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.vals[i]
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let d = v - self.vals[i];
        if d == 0.0 {
            return;
        }
        self.vals[i] = v;
        self.updates += 1;
        if self.updates >= REBUILD_EVERY {
            self.rebuild();
            return;
        }
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += d;
            k += k & k.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        let mut k = self.vals.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s.max(0.0)
    }

    /// Slot `i` with prefix(i) ≤ u < prefix(i+1); never a zero-rate slot.
    pub fn find(&self, u: f64) -> usize {
        let n = self.vals.len();
        let mut pos = 0;
        let mut rem = u;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let nxt = pos + step;
            if nxt <= n && self.tree[nxt] <= rem {
                pos = nxt;
                rem -= self.tree[nxt];
            }
            step >>= 1;
        }
        if pos < n && self.vals[pos] > 0.0 {
            return pos;
        }
        (0..n).rev().find(|&i| self.vals[i] > 0.0).unwrap_or(0)
    }
}

/// One move of a lattice trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeEvent {
    /// Birth or death at a site (1-based).
    Flip(usize),
    /// Absorption from an end site into the left (`true`) or right sink.
    Absorb { site: usize, left: bool },
    /// Exchange across bond (x, x+1).
    Swap(usize),
}

/// Result of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome<S> {
    pub state: S,
    pub events: u64,
    pub time: f64,
    /// Extinction time of a dual run.
    pub extinction_time: Option<f64>,
    /// (left, right) sink counts of a dual run.
    pub absorbed: Option<(u32, u32)>,
    pub extinct: bool,
    pub stream: u64,
}

/// Gillespie simulator for contact-plus-stirring dynamics on Λ_N, with
/// reservoirs or counting sinks at the ends.
#[derive(Debug, Clone)]
pub struct LatticeSim {
    rates: LatticeRates,
    occ: Vec<bool>,
    left_sink: u32,
    right_sink: u32,
    time: f64,
    events: u64,
    tree: Fenwick,
    rng: ChaCha8Rng,
    stream: u64,
    dual: bool,
}

impl LatticeSim {
    pub fn new(rates: LatticeRates, init: &Configuration, seed: u64, stream: u64) -> Result<Self> {
        let n = init.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty lattice".into()));
        }
        let occ: Vec<bool> = init.sites().iter().map(|&s| s == 1).collect();
        let dual = matches!(rates.left, crate::generator::Boundary::Sink { .. })
            || matches!(rates.right, crate::generator::Boundary::Sink { .. });
        let mut sim = Self {
            rates,
            occ,
            left_sink: 0,
            right_sink: 0,
            time: 0.0,
            events: 0,
            tree: Fenwick::from_values(&vec![0.0; 2 * n - 1]),
            rng: replica_rng(seed, stream),
            stream,
            dual,
        };
        let vals: Vec<f64> = (0..2 * n - 1).map(|s| sim.slot_rate(s)).collect();
        sim.tree = Fenwick::from_values(&vals);
        Ok(sim)
    }

    pub fn from_dual(rates: LatticeRates, init: &DualConfiguration, seed: u64, stream: u64) -> Result<Self> {
        let mut sim = Self::new(rates, &init.sites, seed, stream)?;
        sim.dual = true;
        sim.left_sink = init.left_sink;
        sim.right_sink = init.right_sink;
        Ok(sim)
    }

    pub fn n(&self) -> usize {
        self.occ.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occ
    }

    pub fn particle_count(&self) -> usize {
        self.occ.iter().filter(|&&o| o).count()
    }

    pub fn sinks(&self) -> (u32, u32) {
        (self.left_sink, self.right_sink)
    }

    pub fn configuration(&self) -> Result<Configuration> {
        let s: Vec<u8> = self.occ.iter().map(|&o| o as u8).collect();
        Configuration::from_sites(&s)
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    fn neighbours(&self, x: usize) -> (Option<bool>, Option<bool>) {
        let n = self.n();
        (if x > 1 { Some(self.occ[x - 2]) } else { None }, if x < n { Some(self.occ[x]) } else { None })
    }

    fn slot_rate(&self, slot: usize) -> f64 {
        let n = self.n();
        if slot < n {
            let x = slot + 1;
            let (lo, ro) = self.neighbours(x);
            if self.occ[slot] {
                let (al, ar) = self.rates.absorb_rates(n, x);
                self.rates.death_rate(n, x, lo, ro) + al + ar
            } else {
                self.rates.birth_rate(n, x, lo, ro)
            }
        } else {
            let x = slot - n + 1;
            if self.occ[x - 1] != self.occ[x] {
                self.rates.diffusion
            } else {
                0.0
            }
        }
    }

    fn refresh(&mut self, x: usize) {
        let n = self.n();
        let lo = x.saturating_sub(1).max(1);
        let hi = (x + 1).min(n);
        for y in lo..=hi {
            let v = self.slot_rate(y - 1);
            self.tree.set(y - 1, v);
        }
        for b in lo.max(x.saturating_sub(1))..=x.min(n - 1) {
            if b >= 1 {
                let v = self.slot_rate(n + b - 1);
                self.tree.set(n + b - 1, v);
            }
        }
    }

    /// Draws the next event without applying it.
    pub fn choose_event(&mut self) -> Option<LatticeEvent> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        let u = self.rng.random::<f64>() * total;
        let slot = self.tree.find(u);
        let n = self.n();
        if slot >= n {
            return Some(LatticeEvent::Swap(slot - n + 1));
        }
        let x = slot + 1;
        if !self.occ[slot] {
            return Some(LatticeEvent::Flip(x));
        }
        let (lo, ro) = self.neighbours(x);
        let d = self.rates.death_rate(n, x, lo, ro);
        let (al, ar) = self.rates.absorb_rates(n, x);
        let v = self.rng.random::<f64>() * (d + al + ar);
        Some(if v < d {
            LatticeEvent::Flip(x)
        } else if v < d + al || ar == 0.0 {
            LatticeEvent::Absorb { site: x, left: true }
        } else {
            LatticeEvent::Absorb { site: x, left: false }
        })
    }

    pub fn apply(&mut self, ev: LatticeEvent) {
        match ev {
            LatticeEvent::Flip(x) => {
                self.occ[x - 1] = !self.occ[x - 1];
                self.refresh(x);
            }
            LatticeEvent::Absorb { site, left } => {
                self.occ[site - 1] = false;
                if left {
                    self.left_sink += 1;
                } else {
                    self.right_sink += 1;
                }
                self.refresh(site);
            }
            LatticeEvent::Swap(x) => {
                self.occ.swap(x - 1, x);
                self.refresh(x);
                self.refresh(x + 1);
            }
        }
        self.events += 1;
    }

    /// Word and sink increments after `ev`, without applying it.
    pub fn target(&self, ev: LatticeEvent) -> (u64, u32, u32) {
        let n = self.n();
        let w = self.word();
        match ev {
            LatticeEvent::Flip(x) => (w ^ (1 << (n - x)), 0, 0),
            LatticeEvent::Absorb { site, left } => (w ^ (1 << (n - site)), left as u32, (!left) as u32),
            LatticeEvent::Swap(x) => (w ^ ((1 << (n - x)) | (1 << (n - x - 1))), 0, 0),
        }
    }

    /// Occupation word, site k at bit N−k (N ≤ 63).
    pub fn word(&self) -> u64 {
        self.occ.iter().fold(0u64, |w, &o| (w << 1) | o as u64)
    }

    /// Samples a holding time and applies one event; `None` once frozen.
    pub fn step(&mut self) -> Option<LatticeEvent> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        self.time += exp_sample(&mut self.rng, total);
        let ev = self.choose_event()?;
        self.apply(ev);
        Some(ev)
    }

    /// Advances to `t_end`; a frozen state just waits.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        self.advance(t_end, |_, _, _| {})
    }

    fn advance(&mut self, t_end: f64, mut on_hold: impl FnMut(&[bool], f64, f64)) -> Result<()> {
        if !(t_end >= self.time) {
            return Err(Error::NegativeTime(t_end - self.time));
        }
        loop {
            let total = self.tree.total();
            let dt = if total > 0.0 { exp_sample(&mut self.rng, total) } else { f64::INFINITY };
            if self.time + dt >= t_end {
                on_hold(&self.occ, self.time, t_end);
                self.time = t_end;
                return Ok(());
            }
            on_hold(&self.occ, self.time, self.time + dt);
            self.time += dt;
            let ev = self.choose_event().expect("positive total rate");
            self.apply(ev);
        }
    }

    /// Time-averaged occupation of every site over [t_burn, t_end].
    pub fn time_average(&mut self, t_burn: f64, t_end: f64) -> Result<Vec<f64>> {
        if !(t_end > t_burn) {
            return Err(Error::InvalidParameter("averaging window is empty".into()));
        }
        self.run_until(t_burn)?;
        let mut acc = vec![0.0; self.n()];
        self.advance(t_end, |occ, a, b| {
            for (s, &o) in acc.iter_mut().zip(occ) {
                if o {
                    *s += b - a;
                }
            }
        })?;
        let span = t_end - t_burn;
        Ok(acc.into_iter().map(|s| s / span).collect())
    }

    /// Runs until no particle is left or `max_steps` events have occurred.
    pub fn run_until_extinct(&mut self, max_steps: u64) -> bool {
        let start = self.events;
        while self.particle_count() > 0 {
            if self.events - start >= max_steps {
                return false;
            }
            let total = self.tree.total();
            if total <= 0.0 {
                return false;
            }
            self.time += exp_sample(&mut self.rng, total);
            let ev = self.choose_event().expect("positive total rate");
            self.apply(ev);
        }
        true
    }

    pub fn outcome(&self) -> SimOutcome<Vec<bool>> {
        let extinct = self.dual && self.particle_count() == 0;
        SimOutcome {
            state: self.occ.clone(),
            events: self.events,
            time: self.time,
            extinction_time: extinct.then_some(self.time),
            absorbed: self.dual.then_some((self.left_sink, self.right_sink)),
            extinct,
            stream: self.stream,
        }
    }
}

/// Trajectory of a DCP or GDCP up to `t_end`.
pub fn simulate(model: &LatticeModel, init: &Configuration, t_end: f64, seed: u64, stream: u64) -> Result<SimOutcome<Vec<bool>>> {
    let mut sim = LatticeSim::new(model.primal_rates()?, init, seed, stream)?;
    sim.run_until(t_end)?;
    Ok(sim.outcome())
}

/// Absorbing dual run to extinction; fails with `StepBudget` past `max_steps`.
pub fn simulate_dual_until_extinct(
    model: &LatticeModel,
    init: &DualConfiguration,
    seed: u64,
    stream: u64,
    max_steps: u64,
) -> Result<SimOutcome<Vec<bool>>> {
    let mut sim = LatticeSim::from_dual(model.dual_rates()?, init, seed, stream)?;
    if !sim.run_until_extinct(max_steps) {
        return Err(Error::StepBudget(sim.events()));
    }
    Ok(sim.outcome())
}

/// SIR dynamics on a finite window with frozen exterior.
#[derive(Debug, Clone)]
pub struct SirSim {
    params: SirParams,
    eta: SirConfiguration,
    time: f64,
    events: u64,
    tree: Fenwick,
    rng: ChaCha8Rng,
    stream: u64,
    edge_touched: bool,
}

impl SirSim {
    pub fn new(params: SirParams, init: SirConfiguration, seed: u64, stream: u64) -> Result<Self> {
        params.validate()?;
        let len = init.states().len();
        let mut sim = Self {
            params,
            eta: init,
            time: 0.0,
            events: 0,
            tree: Fenwick::from_values(&vec![0.0; len]),
            rng: replica_rng(seed, stream),
            stream,
            edge_touched: false,
        };
        let vals: Vec<f64> = (0..len).map(|i| sim.slot_rate(i)).collect();
        sim.tree = Fenwick::from_values(&vals);
        Ok(sim)
    }

    pub fn state(&self) -> &SirConfiguration {
        &self.eta
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Whether an infection ever reached a window edge.
    pub fn edge_touched(&self) -> bool {
        self.edge_touched
    }

    fn slot_rate(&self, i: usize) -> f64 {
        let x = self.eta.lo() + i as i64;
        match self.eta.get(x) {
            SirState::I => self.params.gamma_rec,
            SirState::S => {
                let k = [x - 1, x + 1]
                    .iter()
                    .filter(|&&y| self.eta.contains(y) && self.eta.get(y) == SirState::I)
                    .count();
                self.params.beta_inf * k as f64
            }
            SirState::R => 0.0,
        }
    }

    /// Draws the site whose state changes next.
    pub fn choose_site(&mut self) -> Option<i64> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        let u = self.rng.random::<f64>() * total;
        Some(self.eta.lo() + self.tree.find(u) as i64)
    }

    /// State after the site `x` changes.
    pub fn target(&self, x: i64) -> SirConfiguration {
        let mut e = self.eta.clone();
        let next = if self.eta.get(x) == SirState::I { SirState::R } else { SirState::I };
        e.set(x, next).expect("site in window");
        e
    }

    pub fn apply(&mut self, x: i64) {
        let became_infected = self.eta.get(x) == SirState::S;
        self.eta = self.target(x);
        if became_infected && (x == self.eta.lo() || x == self.eta.hi()) {
            self.edge_touched = true;
        }
        for y in [x - 1, x, x + 1] {
            if self.eta.contains(y) {
                let i = (y - self.eta.lo()) as usize;
                let v = self.slot_rate(i);
                self.tree.set(i, v);
            }
        }
        self.events += 1;
    }

    /// Samples a holding time and changes one site; `None` once frozen.
    pub fn step(&mut self) -> Option<i64> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        self.time += exp_sample(&mut self.rng, total);
        let x = self.choose_site()?;
        self.apply(x);
        Some(x)
    }

    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        if !(t_end >= self.time) {
            return Err(Error::NegativeTime(t_end - self.time));
        }
        loop {
            let total = self.tree.total();
            let dt = if total > 0.0 { exp_sample(&mut self.rng, total) } else { f64::INFINITY };
            if self.time + dt >= t_end {
                self.time = t_end;
                return Ok(());
            }
            self.time += dt;
            let x = self.choose_site().expect("positive total rate");
            self.apply(x);
        }
    }

    pub fn outcome(&self) -> SimOutcome<SirConfiguration> {
        SimOutcome {
            state: self.eta.clone(),
            events: self.events,
            time: self.time,
            extinction_time: None,
            absorbed: None,
            extinct: false,
            stream: self.stream,
        }
    }
}

pub fn simulate_sir(params: &SirParams, init: &SirConfiguration, t_end: f64, seed: u64, stream: u64) -> Result<SimOutcome<SirConfiguration>> {
    let mut sim = SirSim::new(*params, init.clone(), seed, stream)?;
    sim.run_until(t_end)?;
    Ok(sim.outcome())
}

/// Simulator of the SIR bilayer walk.
#[derive(Debug, Clone)]
pub struct SirDualSim {
    params: SirParams,
    state: SirDualState,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
}

impl SirDualSim {
    pub fn new(params: SirParams, init: SirDualState, seed: u64, stream: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, state: init, time: 0.0, events: 0, rng: replica_rng(seed, stream) })
    }

    pub fn state(&self) -> SirDualState {
        self.state
    }

    pub fn choose(&mut self) -> Option<SirDualState> {
        let moves = sir_dual_transitions(&self.params, &self.state);
        let total: f64 = moves.iter().map(|m| m.1).sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = self.rng.random::<f64>() * total;
        for (s, r) in &moves {
            if u < *r {
                return Some(*s);
            }
            u -= r;
        }
        moves.last().map(|m| m.0)
    }

    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        if !(t_end >= self.time) {
            return Err(Error::NegativeTime(t_end - self.time));
        }
        loop {
            let total: f64 = sir_dual_transitions(&self.params, &self.state).iter().map(|m| m.1).sum();
            let dt = if total > 0.0 { exp_sample(&mut self.rng, total) } else { f64::INFINITY };
            if self.time + dt >= t_end {
                self.time = t_end;
                return Ok(());
            }
            self.time += dt;
            self.state = self.choose().expect("positive total rate");
            self.events += 1;
        }
    }
}

/// Replica mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub seed: u64,
}

impl Estimate {
    /// Summation runs in replica order, so equal samples give equal bits.
    pub fn from_samples(samples: &[f64], seed: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("{n} replicas; need at least 2")));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let constant = samples.iter().all(|&x| x == samples[0]);
        let std_error = if constant {
            0.0
        } else {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            sqrt(var / n as f64)
        };
        Ok(Self { mean: if constant { samples[0] } else { mean }, std_error, replicas: n as u64, seed })
    }

    /// Distance to `x` in standard errors, taking `slack` as absolute floor.
    pub fn z_score(&self, x: f64, slack: f64) -> f64 {
        let d = (self.mean - x).abs();
        if d <= slack {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            (d - slack) / self.std_error
        }
    }

    pub fn within(&self, x: f64, sigmas: f64) -> bool {
        self.z_score(x, 1e-12) <= sigmas
    }

    /// z of a mean of 0/1 samples against success probability `p`, with the
    /// binomial standard error under `p`; stays finite when every sample agrees.
    pub fn proportion_z_score(&self, p: f64) -> f64 {
        let d = (self.mean - p).abs();
        let var = p * (1.0 - p);
        if d <= 1e-12 {
            0.0
        } else if var <= 0.0 {
            f64::INFINITY
        } else {
            d / sqrt(var / self.replicas as f64)
        }
    }
}

/// Sequential replica loop; replica r draws from `replica_rng(seed, r)`.
pub fn estimate(replicas: u64, seed: u64, mut f: impl FnMut(u64) -> Result<f64>) -> Result<Estimate> {
    let samples = (0..replicas).map(&mut f).collect::<Result<Vec<_>>>()?;
    Estimate::from_samples(&samples, seed)
}

/// Burn-in time 10 / gap.
pub fn burn_in_from_gap(gap: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::Degenerate(format!("spectral gap {gap}")));
    }
    Ok(10.0 / gap)
}

/// Pearson statistic of observed counts against expected probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// (X² − dof) / sqrt(2 dof); 0 when there is a single outcome.
    pub z: f64,
    /// Observed outcomes with zero expected probability.
    pub impossible: u64,
}

impl ChiSquare {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.impossible == 0 && self.z.abs() < sigmas
    }
}

pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch(format!("{} counts, {} probabilities", counts.len(), probs.len())));
    }
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut impossible = 0;
    let mut bins = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            impossible += c;
            continue;
        }
        bins += 1;
        let e = p * total as f64;
        stat += (c as f64 - e) * (c as f64 - e) / e;
    }
    let dof = bins.saturating_sub(1);
    let z = if dof == 0 { 0.0 } else { (stat - dof as f64) / sqrt(2.0 * dof as f64) };
    Ok(ChiSquare { statistic: stat, dof, z, impossible })
}

/// Groups `draws` sampled targets by key and tests them against `(key, rate)`
/// pairs; unknown keys count as impossible outcomes.
pub fn transition_gate<K: PartialEq + Clone>(
    expected: &[(K, f64)],
    draws: u64,
    mut sample: impl FnMut() -> Option<K>,
) -> Result<ChiSquare> {
    let mut keys: Vec<K> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let total: f64 = expected.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("no transition out of the state".into()));
    }
    for (k, r) in expected {
        match keys.iter().position(|q| q == k) {
            Some(i) => probs[i] += r / total,
            None => {
                keys.push(k.clone());
                probs.push(r / total);
            }
        }
    }
    let mut counts = vec![0u64; keys.len()];
    let mut stray = 0u64;
    for _ in 0..draws {
        match sample().and_then(|k| keys.iter().position(|q| *q == k)) {
            Some(i) => counts[i] += 1,
            None => stray += 1,
        }
    }
    let mut c = chi_square(&counts, &probs)?;
    c.impossible += stray;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_dual, Boundary};
    use crate::lattice::{DcpParams, GdcpParams};
    use proptest::prelude::*;

    fn dcp() -> LatticeModel {
        LatticeModel::Dcp(DcpParams::new(0.8, 0.5, 0.6, 0.3, 1.4, 0.9).unwrap())
    }

    proptest! {
        #[test]
        fn fenwick_matches_prefix_sums(vals in proptest::collection::vec(0.0f64..5.0, 1..40), u in 0.0f64..1.0, upd in proptest::collection::vec((0usize..40, 0.0f64..5.0), 0..30)) {
            let mut f = Fenwick::from_values(&vals);
            let mut v = vals.clone();
            for (i, x) in upd {
                let i = i % v.len();
                v[i] = x;
                f.set(i, x);
            }
            let total: f64 = v.iter().sum();
            prop_assert!((f.total() - total).abs() < 1e-9);
            if total > 0.0 {
                let target = u * total;
                let i = f.find(target);
                prop_assert!(v[i] > 0.0);
                let before: f64 = v[..i].iter().sum();
                prop_assert!(before <= target + 1e-9 && target < before + v[i] + 1e-9);
            }
        }
    }

    #[test]
    fn zero_rates_freeze() {
        let rates = LatticeRates {
            birth: 0.0,
            death_lone: 0.0,
            death_paired: 0.0,
            end_death: 0.0,
            diffusion: 0.0,
            left: Boundary::Reservoir { insert: 0.0, remove: 0.0 },
            right: Boundary::Reservoir { insert: 0.0, remove: 0.0 },
        };
        let init = Configuration::from_sites(&[1, 0, 1]).unwrap();
        let mut sim = LatticeSim::new(rates, &init, 1, 0).unwrap();
        sim.run_until(100.0).unwrap();
        assert_eq!(sim.events(), 0);
        assert_eq!(sim.configuration().unwrap(), init);
    }

    #[test]
    fn closed_dcp_keeps_empty() {
        let m = LatticeModel::Dcp(DcpParams::new(0.0, 1.0, 1.0, 0.0, 2.0, 1.0).unwrap());
        let out = simulate(&m, &Configuration::empty(5).unwrap(), 50.0, 3, 0).unwrap();
        assert_eq!(out.events, 0);
        assert!(out.state.iter().all(|&o| !o));
        assert!(out.absorbed.is_none());
    }

    #[test]
    fn empty_dual_is_extinct_at_zero() {
        let init = DualConfiguration::new(0, Configuration::empty(3).unwrap(), 0);
        let out = simulate_dual_until_extinct(&dcp(), &init, 1, 0, 10).unwrap();
        assert_eq!(out.extinction_time, Some(0.0));
        assert_eq!(out.absorbed, Some((0, 0)));
    }

    #[test]
    fn step_budget_reported() {
        let init = DualConfiguration::new(0, Configuration::full(6).unwrap(), 0);
        let m = LatticeModel::Dcp(DcpParams::new(0.1, 0.1, 0.1, 0.1, 50.0, 1.0).unwrap());
        assert!(matches!(simulate_dual_until_extinct(&m, &init, 1, 0, 5), Err(Error::StepBudget(5))));
    }

    #[test]
    fn lattice_transition_frequencies() {
        let m = dcp();
        let n = 4;
        let l = m.build_primal(n).unwrap();
        let init = Configuration::from_sites(&[1, 0, 1, 1]).unwrap();
        let mut sim = LatticeSim::new(m.primal_rates().unwrap(), &init, 11, 0).unwrap();
        let row: Vec<_> = l.row(init.word() as usize).map(|(j, r)| (j as u64, r)).collect();
        let c = transition_gate(&row, 100_000, || sim.choose_event().map(|e| sim.target(e).0)).unwrap();
        assert!(c.passes(4.0), "{c:?}");
    }

    #[test]
    fn dual_transition_frequencies() {
        let m = LatticeModel::Gdcp(GdcpParams::annihilating(0.7, 0.4, 0.5, 0.2, 1.3, 0.8, 0.6).unwrap());
        let n = 3;
        let dual = build_dual(&m, n, 4).unwrap();
        let z = DualConfiguration::new(1, Configuration::from_sites(&[1, 1, 0]).unwrap(), 0);
        let i = dual.space.index_of(&z).unwrap();
        let expected: Vec<_> = dual.generator.row(i).map(|(j, r)| (j, r)).collect();
        let mut sim = LatticeSim::from_dual(m.dual_rates().unwrap(), &z, 5, 2).unwrap();
        let space = dual.space.clone();
        let c = transition_gate(&expected, 100_000, || {
            let (w, dl, dr) = sim.choose_event().map(|e| sim.target(e))?;
            let z2 = DualConfiguration::new(1 + dl, Configuration::from_word(n, w).ok()?, dr);
            space.index_of(&z2)
        })
        .unwrap();
        assert!(c.passes(4.0), "{c:?}");
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = estimate(10, 0, |_| Ok(0.1)).unwrap();
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.mean, 0.1);
        assert!(estimate(1, 0, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn proportion_z_is_finite_for_unanimous_samples() {
        let e = Estimate::from_samples(&[1.0; 200], 0).unwrap();
        let z = e.proportion_z_score(0.99);
        assert!((z - 0.01 / (0.99f64 * 0.01 / 200.0).sqrt()).abs() < 1e-12);
        assert_eq!(e.proportion_z_score(1.0), 0.0);
        assert_eq!(e.proportion_z_score(0.0), f64::INFINITY);
    }

    #[test]
    fn one_site_dual_absorption() {
        // α+γ = 1.5, death 1: P[absorbed] = 1.5 / 2.5
        let m = LatticeModel::Dcp(DcpParams::new(0.9, 0.0, 0.6, 0.0, 1.0, 0.0).unwrap());
        let init = DualConfiguration::new(0, Configuration::full(1).unwrap(), 0);
        let e = estimate(20_000, 9, |r| {
            let o = simulate_dual_until_extinct(&m, &init, 9, r, 1_000)?;
            Ok((o.absorbed.unwrap().0 > 0) as u8 as f64)
        })
        .unwrap();
        assert!(e.within(0.6, 4.0), "{e:?}");
    }

    #[test]
    fn sir_transition_frequencies() {
        let p = SirParams::new(0.8, 0.5).unwrap();
        let eta = SirConfiguration::parse(0, "RISSIRI", SirState::R).unwrap();
        let expected = crate::sir::sir_window_transitions(&p, &eta);
        let mut sim = SirSim::new(p, eta, 4, 1).unwrap();
        let c = transition_gate(&expected, 100_000, || sim.choose_site().map(|x| sim.target(x))).unwrap();
        assert!(c.passes(4.0), "{c:?}");
    }

    #[test]
    fn sir_dual_walk_frequencies() {
        let p = SirParams::new(0.8, 0.5).unwrap();
        for layer in [crate::generator::Layer::G, crate::generator::Layer::J] {
            let s = SirDualState::Walker { r: 0, n: 2, layer };
            let expected = sir_dual_transitions(&p, &s);
            let mut sim = SirDualSim::new(p, s, 4, 1).unwrap();
            let c = transition_gate(&expected, 100_000, || sim.choose()).unwrap();
            assert!(c.passes(4.0), "{c:?}");
        }
    }

    #[test]
    fn replicas_are_reproducible() {
        let m = dcp();
        let init = Configuration::from_sites(&[0, 1, 0]).unwrap();
        let a = simulate(&m, &init, 3.0, 42, 7).unwrap();
        let b = simulate(&m, &init, 3.0, 42, 7).unwrap();
        let c = simulate(&m, &init, 3.0, 42, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!((a.events, a.state), (c.events, c.state));
    }
}
