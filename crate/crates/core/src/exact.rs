//! Exact finite-state routes: stationary laws, transients, absorption laws of
//! the dual, and correlation functions computed directly or through duality.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::duality::duality_value;
use crate::error::{Error, Result};
use crate::generator::{build_dual, for_each_transition, DualConfiguration, LatticeModel, LatticeRates};
use crate::lattice::{check_exact_size, Configuration};
use crate::math::{poisson_weights, powi};
use crate::sparse::SparseGenerator;

/// Largest dimension accepted by the dense null-space solve.
pub const MAX_DENSE_DIM: usize = 1 << 12;

/// Stationary probability vector indexed by 0-based state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMeasure {
    pub probabilities: Vec<f64>,
    /// The generator was reducible; the law lives on its unique closed class.
    pub reducible: bool,
}

impl StationaryMeasure {
    /// ν(η) for a lattice configuration.
    pub fn probability(&self, eta: &Configuration) -> f64 {
        self.probabilities[eta.word() as usize]
    }

    /// max |ν L| entry.
    pub fn residual(&self, l: &SparseGenerator) -> f64 {
        let mut out = vec![0.0; l.dim()];
        l.vec_mul(&self.probabilities, &mut out);
        out.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Strongly connected components with no exit.
fn closed_classes(l: &SparseGenerator) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(l.dim(), l.nnz_offdiagonal());
    let nodes: Vec<_> = (0..l.dim()).map(|_| g.add_node(())).collect();
    for i in 0..l.dim() {
        for (j, _) in l.row(i) {
            g.add_edge(nodes[i], nodes[j], ());
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; l.dim()];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    sccs.into_iter()
        .enumerate()
        .filter(|(c, members)| members.iter().all(|v| l.row(v.index()).all(|(j, _)| comp[j] == *c)))
        .map(|(_, members)| {
            let mut m: Vec<usize> = members.iter().map(|v| v.index()).collect();
            m.sort_unstable();
            m
        })
        .collect()
}

/// Unique stationary law of `l`.
///
/// A single closed class is required. When it is a proper subset the result
/// is flagged reducible (for closed boundaries: the Dirac mass on the empty
/// configuration).
pub fn stationary(l: &SparseGenerator) -> Result<StationaryMeasure> {
    let dim = l.dim();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty generator".into()));
    }
    let classes = closed_classes(l);
    if classes.len() != 1 {
        return Err(Error::MultipleClosedClasses(classes.len()));
    }
    let class = &classes[0];
    let reducible = class.len() != dim;
    let mut probabilities = vec![0.0; dim];
    if class.len() == 1 {
        probabilities[class[0]] = 1.0;
        return Ok(StationaryMeasure { probabilities, reducible });
    }
    let c = class.len();
    if c > MAX_DENSE_DIM {
        return Err(Error::InvalidParameter(format!("closed class of {c} states exceeds {MAX_DENSE_DIM}")));
    }
    let mut pos = vec![usize::MAX; dim];
    for (k, &s) in class.iter().enumerate() {
        pos[s] = k;
    }
    // Lᵀ restricted to the class, last row replaced by the normalization
    let mut a = DMatrix::<f64>::zeros(c, c);
    for (k, &s) in class.iter().enumerate() {
        a[(k, k)] = l.diagonal(s);
        for (j, r) in l.row(s) {
            a[(pos[j], k)] += r;
        }
    }
    for k in 0..c {
        a[(c - 1, k)] = 1.0;
    }
    let mut b = DVector::zeros(c);
    b[c - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or_else(|| Error::Singular("stationary system".into()))?;
    for (k, &s) in class.iter().enumerate() {
        probabilities[s] = if x[k] < 0.0 && x[k] > -1e-13 { 0.0 } else { x[k] };
    }
    Ok(StationaryMeasure { probabilities, reducible })
}

/// Stationary law of a DCP/GDCP on `n` sites.
pub fn stationary_lattice(model: &LatticeModel, n: usize) -> Result<StationaryMeasure> {
    stationary(&model.build_primal(n)?)
}

/// Largest rate-time product handled in one uniformization step.
const UNIF_STEP: f64 = 30.0;

/// p e^{tL} by uniformization, split so each step has q Δt ≤ 30.
pub fn transient(l: &SparseGenerator, init: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if init.len() != l.dim() {
        return Err(Error::DimensionMismatch(format!("initial law has {} entries, L has {}", init.len(), l.dim())));
    }
    let q = l.max_exit_rate();
    if t == 0.0 || q == 0.0 {
        return Ok(init.to_vec());
    }
    let steps = crate::math::ceil(q * t / UNIF_STEP).max(1.0) as usize;
    let dt = t / steps as f64;
    let mut p = init.to_vec();
    let mut work = Uniformizer::new(l, q);
    for _ in 0..steps {
        p = work.step(&p, dt);
    }
    Ok(p)
}

struct Uniformizer<'a> {
    l: &'a SparseGenerator,
    q: f64,
    v: Vec<f64>,
    lv: Vec<f64>,
}

impl<'a> Uniformizer<'a> {
    fn new(l: &'a SparseGenerator, q: f64) -> Self {
        let d = l.dim();
        Self { l, q, v: vec![0.0; d], lv: vec![0.0; d] }
    }

    /// p e^{dt L} with q dt ≤ UNIF_STEP.
    fn step(&mut self, p: &[f64], dt: f64) -> Vec<f64> {
        let (w, _) = poisson_weights(self.q * dt, 1e-17);
        let mut out: Vec<f64> = p.iter().map(|x| x * w[0]).collect();
        self.v.copy_from_slice(p);
        for &wk in &w[1..] {
            // v ← v (I + L/q)
            self.l.vec_mul(&self.v, &mut self.lv);
            for (vi, li) in self.v.iter_mut().zip(self.lv.iter()) {
                *vi += li / self.q;
            }
            for (o, vi) in out.iter_mut().zip(self.v.iter()) {
                *o += wk * vi;
            }
        }
        out
    }
}

/// Law of (ξ_0(∞), ξ_{N+1}(∞)) from one initial dual configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionLaw {
    pub initial: Configuration,
    pub k_max: usize,
    /// `joint[m * (k_max + 1) + n]` = P[ξ_0(∞) = m, ξ_{N+1}(∞) = n].
    pub joint: Vec<f64>,
    /// Probability that a sink count exceeds `k_max`.
    pub tail: f64,
}

impl AbsorptionLaw {
    pub fn prob(&self, m: usize, n: usize) -> f64 {
        if m > self.k_max || n > self.k_max {
            return 0.0;
        }
        self.joint[m * (self.k_max + 1) + n]
    }

    /// P[ξ_0(∞) = m, ξ_{N+1}(∞) ≤ k_max].
    pub fn left_marginal(&self, m: usize) -> f64 {
        (0..=self.k_max).map(|n| self.prob(m, n)).sum()
    }

    /// P[ξ_{N+1}(∞) = n, ξ_0(∞) ≤ k_max].
    pub fn right_marginal(&self, n: usize) -> f64 {
        (0..=self.k_max).map(|m| self.prob(m, n)).sum()
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().sum()
    }

    /// Σ P(m, n) c_−^m c_+^n over the table.
    pub fn generating_value(&self, c_minus: f64, c_plus: f64) -> f64 {
        let k = self.k_max + 1;
        let mut s = 0.0;
        for m in 0..k {
            for n in 0..k {
                s += self.joint[m * k + n] * powi(c_minus, m as i64) * powi(c_plus, n as i64);
            }
        }
        s
    }

    /// Total-variation distance between two laws over the common table and tails.
    pub fn tv_distance(&self, other: &AbsorptionLaw) -> f64 {
        let k = self.k_max.max(other.k_max);
        let mut s = 0.0;
        for m in 0..=k {
            for n in 0..=k {
                s += (self.prob(m, n) - other.prob(m, n)).abs();
            }
        }
        0.5 * (s + (self.tail - other.tail).abs())
    }
}

/// Nonempty configurations ordered so that the first 2^{N−1} have site 1
/// occupied, recursively on the remaining sites.
pub fn nested_order(n: usize) -> Result<Vec<Configuration>> {
    check_exact_size(n)?;
    fn rec(n: usize, first: usize) -> Vec<u64> {
        // words over sites first..=n, as bit masks of the full lattice
        let bit = |x: usize| 1u64 << (n - x);
        if first == n {
            return vec![bit(n)];
        }
        let rest = rec(n, first + 1);
        let mut out = vec![bit(first)];
        out.extend(rest.iter().map(|w| w | bit(first)));
        out.extend(rest);
        out
    }
    rec(n, 1).into_iter().map(|w| Configuration::from_word(n, w)).collect()
}

/// Long-run behaviour of a nonempty dual configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// Leaves its class; the dual either dies out or settles later.
    Transient,
    /// In a closed class without absorptions: the sink counts are final.
    Settled,
    /// In a closed class that keeps feeding a sink: a count diverges.
    Divergent,
}

/// Fate of every dual configuration word under `rates` (index = word; the
/// empty word is reported as settled).
fn dual_fates(rates: &LatticeRates, n: usize) -> Vec<Fate> {
    let dim = 1usize << n;
    let mut g = DiGraph::<(), ()>::with_capacity(dim, dim * n);
    let nodes: Vec<_> = (0..dim).map(|_| g.add_node(())).collect();
    let mut feeds = vec![false; dim];
    for w in 0..dim {
        for_each_transition(rates, n, w as u64, |w2, dl, dr, r| {
            if r > 0.0 {
                g.add_edge(nodes[w], nodes[w2 as usize], ());
                feeds[w] |= dl + dr > 0;
            }
        });
    }
    let mut fate = vec![Fate::Transient; dim];
    for members in tarjan_scc(&g) {
        let inside = |v: petgraph::graph::NodeIndex| members.contains(&v);
        let closed = members.iter().all(|&v| g.neighbors(v).all(inside));
        if closed {
            let f = if members.iter().any(|v| feeds[v.index()]) { Fate::Divergent } else { Fate::Settled };
            for v in &members {
                fate[v.index()] = f;
            }
        }
    }
    fate
}

/// Joint absorption laws from every nonempty initial configuration.
#[derive(Debug, Clone)]
pub struct AbsorptionTable {
    pub n: usize,
    pub k_max: usize,
    /// Initial configurations in nested order.
    pub order: Vec<Configuration>,
    /// `position[word]` = row of that configuration in `order` (unused for 0).
    position: Vec<usize>,
    /// `values[row][m * (k_max + 1) + n]`.
    values: Vec<Vec<f64>>,
}

impl AbsorptionTable {
    pub fn law(&self, initial: &Configuration) -> Result<AbsorptionLaw> {
        if initial.len() != self.n {
            return Err(Error::DimensionMismatch(format!("configuration on {} sites, table on {}", initial.len(), self.n)));
        }
        let k = self.k_max + 1;
        let joint = if initial.is_empty() {
            let mut j = vec![0.0; k * k];
            j[0] = 1.0;
            j
        } else {
            self.values[self.position[initial.word() as usize]].clone()
        };
        let tail = (1.0 - joint.iter().sum::<f64>()).max(0.0);
        Ok(AbsorptionLaw { initial: *initial, k_max: self.k_max, joint, tail })
    }
}

/// Solves the first-jump systems (I − P_bulk) X^{(m,n)} = R^{(m,n)} of the
/// embedded jump chain for all (m, n) ≤ k_max, factoring I − P_bulk once.
/// A closed class without absorptions keeps the counts it was entered with;
/// a closed class that keeps absorbing sends its mass to the tail.
pub fn absorption_table(model: &LatticeModel, n: usize, k_max: usize) -> Result<AbsorptionTable> {
    let rates = model.dual_rates()?;
    check_exact_size(n)?;
    let order = nested_order(n)?;
    let dim = order.len();
    if dim > MAX_DENSE_DIM {
        return Err(Error::InvalidParameter(format!("{dim} dual configurations exceed {MAX_DENSE_DIM}")));
    }
    let mut position = vec![usize::MAX; dim + 1];
    for (k, c) in order.iter().enumerate() {
        position[c.word() as usize] = k;
    }
    let fates = dual_fates(&rates, n);
    let mut m = DMatrix::<f64>::identity(dim, dim);
    // probability of stopping with no further absorption
    let mut stop = vec![0.0; dim];
    let mut left: Vec<Vec<(u64, f64)>> = vec![Vec::new(); dim];
    let mut right: Vec<Vec<(u64, f64)>> = vec![Vec::new(); dim];
    for (i, c) in order.iter().enumerate() {
        match fates[c.word() as usize] {
            Fate::Settled => {
                stop[i] = 1.0;
                continue;
            }
            Fate::Divergent => continue,
            Fate::Transient => {}
        }
        let mut moves = Vec::new();
        for_each_transition(&rates, n, c.word(), |w2, dl, dr, r| moves.push((w2, dl, dr, r)));
        let total: f64 = moves.iter().map(|x| x.3).sum();
        for (w2, dl, dr, r) in moves {
            let p = r / total;
            match (dl, dr) {
                (0, 0) if w2 == 0 => stop[i] += p,
                (0, 0) => m[(i, position[w2 as usize])] -= p,
                (1, 0) => left[i].push((w2, p)),
                _ => right[i].push((w2, p)),
            }
        }
    }
    let lu = m.lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("jump-chain system".into()));
    }
    let k = k_max + 1;
    let mut sol: Vec<Vec<f64>> = vec![vec![0.0; k * k]; dim];
    let lookup = |sol: &Vec<Vec<f64>>, w: u64, a: usize, b: usize| -> f64 {
        if w == 0 {
            (a == 0 && b == 0) as u8 as f64
        } else {
            sol[position[w as usize]][a * k + b]
        }
    };
    for a in 0..k {
        for b in 0..k {
            let mut rhs = DVector::zeros(dim);
            for i in 0..dim {
                let mut s = if a == 0 && b == 0 { stop[i] } else { 0.0 };
                if a > 0 {
                    s += left[i].iter().map(|&(w, p)| p * lookup(&sol, w, a - 1, b)).sum::<f64>();
                }
                if b > 0 {
                    s += right[i].iter().map(|&(w, p)| p * lookup(&sol, w, a, b - 1)).sum::<f64>();
                }
                rhs[i] = s;
            }
            let x = lu.solve(&rhs).ok_or_else(|| Error::Singular("jump-chain solve".into()))?;
            for i in 0..dim {
                sol[i][a * k + b] = x[i].max(0.0);
            }
        }
    }
    Ok(AbsorptionTable { n, k_max, order, position, values: sol })
}

/// Absorption law from `initial` by the jump-chain systems.
pub fn absorption_law(model: &LatticeModel, initial: &Configuration, k_max: usize) -> Result<AbsorptionLaw> {
    absorption_table(model, initial.len(), k_max)?.law(initial)
}

/// Absorption law from `initial` by running the truncated dual generator to
/// extinction with uniformization.
pub fn absorption_law_transient(model: &LatticeModel, initial: &Configuration, k_max: usize) -> Result<AbsorptionLaw> {
    let n = initial.len();
    let dual = build_dual(model, n, k_max.max(1))?;
    let space = dual.space;
    let l = &dual.generator;
    let mut p = vec![0.0; space.dim()];
    p[space.index_of(&DualConfiguration::new(0, *initial, 0)).unwrap()] = 1.0;
    let q = l.max_exit_rate();
    let fates = dual_fates(&model.dual_rates()?, n);
    let word_of = |i: usize| space.config_at(i).map(|z| z.sites.word() as usize);
    let alive = |p: &[f64]| -> f64 {
        (0..space.overflow_index())
            .filter(|&i| word_of(i).is_some_and(|w| fates[w] != Fate::Settled))
            .map(|i| p[i])
            .sum()
    };
    let mut work = Uniformizer::new(l, q.max(1e-300));
    let dt = UNIF_STEP / q.max(1e-300);
    let mut steps = 0usize;
    while q > 0.0 && alive(&p) > 1e-15 {
        p = work.step(&p, dt);
        steps += 1;
        if steps > 1_000_000 {
            return Err(Error::StepBudget(steps as u64));
        }
    }
    let k = k_max + 1;
    let mut joint = vec![0.0; k * k];
    for i in 0..space.overflow_index() {
        let z = space.config_at(i).unwrap();
        let (a, b) = (z.left_sink as usize, z.right_sink as usize);
        if a < k && b < k && fates[z.sites.word() as usize] == Fate::Settled {
            joint[a * k + b] += p[i];
        }
    }
    let tail = (1.0 - joint.iter().sum::<f64>()).max(0.0);
    Ok(AbsorptionLaw { initial: *initial, k_max, joint, tail })
}

/// Route that produced a correlation value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Duality,
    MonteCarlo,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::Duality => "duality",
            Route::MonteCarlo => "monte-carlo",
        }
    }
}

/// ρ_ℓ(x_1, …, x_ℓ) with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationValue {
    pub sites: Vec<usize>,
    pub value: f64,
    pub route: Route,
    pub error_bound: f64,
}

fn check_sites(n: usize, sites: &[usize]) -> Result<()> {
    for (k, &x) in sites.iter().enumerate() {
        if x == 0 || x > n {
            return Err(Error::SiteOutOfRange { site: x, n });
        }
        if k > 0 && sites[k - 1] >= x {
            return Err(Error::InvalidParameter(format!("sites {sites:?} must be strictly increasing")));
        }
    }
    Ok(())
}

/// E_ν[Π η_{x_j}] from a stationary law on `n` sites.
pub fn correlation_direct(measure: &StationaryMeasure, n: usize, sites: &[usize]) -> Result<CorrelationValue> {
    if measure.probabilities.len() != 1usize << n {
        return Err(Error::DimensionMismatch(format!("measure does not live on {n} sites")));
    }
    check_sites(n, sites)?;
    let mask = Configuration::from_occupied(n, sites)?.word();
    let value = measure
        .probabilities
        .iter()
        .enumerate()
        .filter(|(w, _)| *w as u64 & mask == mask)
        .map(|(_, p)| p)
        .sum::<f64>();
    Ok(CorrelationValue { sites: sites.to_vec(), value, route: Route::Direct, error_bound: 0.0 })
}

/// Möbius inversion on subsets: `out = Σ_{S ⊆ X} (−1)^{|S|} f(S)`.
///
/// Maps ℓ-point correlations to E[Π(1−η)] and back.
pub fn alternating_subset_sum(sites: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> f64 {
    let l = sites.len();
    let mut s = 0.0;
    let mut sub = Vec::with_capacity(l);
    for mask in 0u32..(1u32 << l) {
        sub.clear();
        sub.extend((0..l).filter(|b| mask & (1 << b) != 0).map(|b| sites[b]));
        let sign = if sub.len() % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * f(&sub);
    }
    s
}

/// Default tolerance for the duality-route series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;
/// Initial sink cap of the duality route.
pub const DEFAULT_SINK_CAP: usize = 8;
/// Default limit of sink-cap auto-doubling.
pub const MAX_SINK_CAP: usize = 32;

/// Truncation control of the duality-route series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series {
    /// Bound on the truncated tail of Σ P[m, n] c_−^m c_+^n.
    pub tol: f64,
    /// The cap doubles from [`DEFAULT_SINK_CAP`] up to this value.
    pub max_cap: usize,
}

impl Series {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_cap: MAX_SINK_CAP }
    }

    pub fn max_cap(self, max_cap: usize) -> Self {
        Self { max_cap, ..self }
    }
}

impl Default for Series {
    fn default() -> Self {
        Self::new(DEFAULT_SERIES_TOL)
    }
}

fn effective_constants(model: &LatticeModel) -> Result<(f64, f64, f64)> {
    let (cm, cp) = model.duality_constants();
    if cm.is_none() && cp.is_none() {
        return Err(Error::InvalidParameter("both boundaries inactive: duality route undefined".into()));
    }
    let worst = [cm, cp].iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    Ok((cm.unwrap_or(1.0), cp.unwrap_or(1.0), worst))
}

/// Absorption table with the cap doubled until every needed law's truncated
/// series is within `tol`; returns the table and the summed error bound.
fn converged_table(model: &LatticeModel, n: usize, inits: &[Configuration], series: Series) -> Result<(AbsorptionTable, f64)> {
    let (_, _, worst) = effective_constants(model)?;
    if !(series.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("series tolerance {} must be positive", series.tol)));
    }
    let mut cap = DEFAULT_SINK_CAP.min(series.max_cap.max(1));
    loop {
        let table = absorption_table(model, n, cap)?;
        let mut bound = 0.0;
        let mut tail = 0.0f64;
        for c in inits {
            let law = table.law(c)?;
            bound += law.tail * powi(worst, cap as i64 + 1);
            tail = tail.max(law.tail);
        }
        if bound <= series.tol {
            return Ok((table, bound));
        }
        if cap >= series.max_cap {
            return Err(Error::TailTooLarge { tail, tol: series.tol, cap });
        }
        cap = (cap * 2).min(series.max_cap);
    }
}

/// E_ν[Π(1 − η_{x_j})] = Σ P[ξ_0(∞)=m, ξ_{N+1}(∞)=n] c_−^m c_+^n from δ_X.
pub fn vacancy_via_duality(model: &LatticeModel, n: usize, sites: &[usize], series: Series) -> Result<(f64, f64)> {
    check_sites(n, sites)?;
    let init = Configuration::from_occupied(n, sites)?;
    let (cm, cp, _) = effective_constants(model)?;
    let (table, bound) = converged_table(model, n, &[init], series)?;
    Ok((table.law(&init)?.generating_value(cm, cp), bound))
}

/// ρ_ℓ through the absorption laws of the dual and inclusion–exclusion.
pub fn correlation_via_duality(model: &LatticeModel, n: usize, sites: &[usize], series: Series) -> Result<CorrelationValue> {
    check_sites(n, sites)?;
    let (cm, cp, _) = effective_constants(model)?;
    let mut inits = Vec::new();
    alternating_subset_sum(sites, |s| {
        inits.push(Configuration::from_occupied(n, s).unwrap());
        0.0
    });
    let (table, bound) = converged_table(model, n, &inits, series)?;
    let value = alternating_subset_sum(sites, |s| {
        let c = Configuration::from_occupied(n, s).unwrap();
        table.law(&c).map(|l| l.generating_value(cm, cp)).unwrap_or(f64::NAN)
    });
    Ok(CorrelationValue { sites: sites.to_vec(), value, route: Route::Duality, error_bound: bound })
}

/// ρ_1(y) together with the absorption bound P[A_y(∞)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaBound {
    pub rho1: f64,
    pub bound: f64,
    pub holds: bool,
}

/// ρ_1(y) ≤ P_{δ_y}[c_−^{ξ_0(∞)} c_+^{ξ_{N+1}(∞)} < 1].
pub fn lemma_bound_check(model: &LatticeModel, n: usize, y: usize, series: Series) -> Result<LemmaBound> {
    check_sites(n, &[y])?;
    let (cm, cp, _) = effective_constants(model)?;
    let init = Configuration::from_occupied(n, &[y])?;
    let (table, err) = converged_table(model, n, &[init], series)?;
    let law = table.law(&init)?;
    let mut unit = 0.0;
    for m in 0..=law.k_max {
        for k in 0..=law.k_max {
            if powi(cm, m as i64) * powi(cp, k as i64) == 1.0 {
                unit += law.prob(m, k);
            }
        }
    }
    let bound = 1.0 - unit;
    let rho1 = 1.0 - law.generating_value(cm, cp);
    Ok(LemmaBound { rho1, bound, holds: rho1 <= bound + err + 1e-12 })
}

/// Smallest nonzero |Re λ| among the eigenvalues of a dense generator.
pub fn spectral_gap(l: &SparseGenerator) -> Result<f64> {
    if l.dim() > 1 << 10 {
        return Err(Error::InvalidParameter("spectral gap limited to 1024 states".into()));
    }
    let scale = l.max_exit_rate().max(1e-300);
    let ev = l.to_dense().complex_eigenvalues();
    ev.iter()
        .map(|z| -z.re)
        .filter(|&g| g > 1e-9 * scale)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))))
        .ok_or_else(|| Error::Degenerate("no nonzero eigenvalue".into()))
}

/// max over η and dual ζ with empty sinks of
/// |E_η[D(η_t, ζ)] − E_ζ[D(η, ζ_t)]|, both sides by transients.
/// Returns the residual and the overflow mass reached by the dual.
pub fn process_duality_residual(model: &LatticeModel, n: usize, cap: usize, t: f64) -> Result<(f64, f64)> {
    let l = model.build_primal(n)?;
    let dual = build_dual(model, n, cap)?;
    let d = crate::duality::duality_matrix(model, n, cap)?;
    let rows = 1usize << n;
    let mut fwd = Vec::with_capacity(rows);
    for w in 0..rows {
        let mut p0 = vec![0.0; rows];
        p0[w] = 1.0;
        fwd.push(transient(&l, &p0, t)?);
    }
    let mut worst = 0.0f64;
    let mut cap_mass = 0.0f64;
    for xi in 0..rows as u64 {
        let z = DualConfiguration::new(0, Configuration::from_word(n, xi)?, 0);
        let j = dual.space.index_of(&z).unwrap();
        let mut q0 = vec![0.0; dual.space.dim()];
        q0[j] = 1.0;
        let q = transient(&dual.generator, &q0, t)?;
        cap_mass = cap_mass.max(q[dual.space.overflow_index()]);
        for (w, pw) in fwd.iter().enumerate() {
            let lhs: f64 = pw.iter().enumerate().map(|(w2, p)| p * d.values[(w2, j)]).sum();
            let eta = Configuration::from_word(n, w as u64)?;
            let rhs: f64 = (0..dual.space.overflow_index())
                .map(|k| q[k] * duality_value(d.c_minus, d.c_plus, &eta, &dual.space.config_at(k).unwrap()))
                .sum();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok((worst, cap_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_dcp;
    use crate::lattice::{DcpParams, GdcpParams};
    use proptest::prelude::*;

    #[test]
    fn closed_walker_keeps_its_counts() {
        // both reservoirs closed and μ_2 = 0: a lone walker neither dies nor
        // reaches a sink, and on one site it cannot move at all
        let m = LatticeModel::Gdcp(GdcpParams::annihilating(0.0, 0.0, 0.0, 0.0, 1.0, 0.7, 0.0).unwrap());
        for n in [1, 3] {
            let init = Configuration::from_occupied(n, &[1]).unwrap();
            for law in [absorption_law(&m, &init, 2).unwrap(), absorption_law_transient(&m, &init, 2).unwrap()] {
                assert_eq!(law.prob(0, 0), 1.0, "n={n}");
                assert_eq!(law.tail, 0.0);
            }
        }
        let fates = dual_fates(&m.dual_rates().unwrap(), 3);
        assert_eq!(fates[0b010], Fate::Settled);
        assert_eq!(fates[0b110], Fate::Transient);
    }

    fn dcp(a: f64, b: f64, g: f64, d: f64, l: f64, dd: f64) -> LatticeModel {
        LatticeModel::Dcp(DcpParams::new(a, b, g, d, l, dd).unwrap())
    }

    #[test]
    fn one_site_stationary() {
        let nu = stationary_lattice(&dcp(1.0, 0.0, 0.0, 1.0, 1.0, 1.0), 1).unwrap();
        assert!((nu.probabilities[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(!nu.reducible);
    }

    #[test]
    fn closed_boundaries_give_dirac_at_empty() {
        let m = dcp(0.0, 0.5, 0.5, 0.0, 2.0, 1.0);
        let nu = stationary_lattice(&m, 4).unwrap();
        assert!(nu.reducible);
        assert_eq!(nu.probabilities[0], 1.0);
        let c = correlation_direct(&nu, 4, &[1, 2, 3, 4]).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn two_absorbing_states_are_rejected() {
        // μ2 = 0 with closed boundaries: empty and full configurations both absorb
        let p = GdcpParams::new(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(stationary_lattice(&LatticeModel::Gdcp(p), 3), Err(Error::MultipleClosedClasses(2))));
    }

    #[test]
    fn stationary_invariants() {
        let m = dcp(0.3, 0.9, 1.4, 0.2, 1.6, 0.8);
        let l = m.build_primal(5).unwrap();
        let nu = stationary(&l).unwrap();
        assert!((nu.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(nu.probabilities.iter().all(|&p| p >= 0.0));
        assert!(nu.residual(&l) < 1e-10);
    }

    #[test]
    fn transient_basics() {
        let l = build_dcp(&DcpParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 3).unwrap();
        let mut p0 = vec![0.0; 8];
        p0[5] = 1.0;
        assert_eq!(transient(&l, &p0, 0.0).unwrap(), p0);
        assert!(matches!(transient(&l, &p0, -1.0), Err(Error::NegativeTime(_))));
        let p = transient(&l, &p0, 3.7).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let nu = stationary(&l).unwrap();
        let p = transient(&l, &p0, 200.0).unwrap();
        for (a, b) in p.iter().zip(nu.probabilities.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_site_dual_transient_closed_form() {
        let (a, g) = (0.7, 0.6);
        let m = dcp(a, 0.0, g, 0.0, 1.0, 1.0);
        let dual = build_dual(&m, 1, 2).unwrap();
        let s = dual.space;
        let mut p0 = vec![0.0; s.dim()];
        p0[s.index_of(&DualConfiguration::new(0, Configuration::full(1).unwrap(), 0)).unwrap()] = 1.0;
        let e = a + g + 1.0;
        for &t in &[0.1, 1.0, 4.0] {
            let p = transient(&dual.generator, &p0, t).unwrap();
            let absorbed = p[s.index_of(&DualConfiguration::new(1, Configuration::empty(1).unwrap(), 0)).unwrap()];
            assert!((absorbed - (a + g) / e * (1.0 - libm::exp(-e * t))).abs() < 1e-13);
        }
        let p = transient(&dual.generator, &p0, 60.0).unwrap();
        let alive: f64 = (0..s.overflow_index()).filter(|i| i % 2 == 1).map(|i| p[i]).sum();
        assert!(alive < 1e-14);
    }

    #[test]
    fn nested_order_three_sites() {
        let o: Vec<Vec<usize>> = nested_order(3).unwrap().iter().map(|c| c.occupied()).collect();
        let expect: Vec<Vec<usize>> =
            vec![vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 3], vec![2], vec![2, 3], vec![3]];
        assert_eq!(o, expect);
        for n in 1..=6 {
            let o = nested_order(n).unwrap();
            assert_eq!(o.len(), (1 << n) - 1);
            assert!(o[..1 << (n - 1)].iter().all(|c| c.occ(1)));
        }
    }

    #[test]
    fn one_site_absorption() {
        let (a, g) = (0.4, 1.3);
        let law = absorption_law(&dcp(a, 0.0, g, 0.0, 1.0, 1.0), &Configuration::full(1).unwrap(), 4).unwrap();
        assert!((law.prob(0, 0) - 1.0 / (a + g + 1.0)).abs() < 1e-15);
        assert!((law.prob(1, 0) - (a + g) / (a + g + 1.0)).abs() < 1e-15);
        assert!(law.tail < 1e-15);
    }

    #[test]
    fn two_site_spot_values() {
        let m = dcp(1.0, 0.0, 1.0, 0.0, 1.0, 1.0);
        let t = absorption_table(&m, 2, 0).unwrap();
        let x: Vec<f64> = t.order.iter().map(|c| t.law(c).unwrap().prob(0, 0)).collect();
        for (a, b) in x.iter().zip([8.0 / 23.0, 5.0 / 23.0, 12.0 / 23.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn marginals_sum_to_one() {
        let m = dcp(0.8, 0.0, 0.5, 0.0, 1.2, 0.7);
        let t = absorption_table(&m, 3, 30).unwrap();
        for c in &t.order {
            let law = t.law(c).unwrap();
            let s: f64 = (0..=30).map(|k| law.left_marginal(k)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!((law.total() + law.tail - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        let (a, g) = (0.9, 0.4);
        let m = dcp(a, 0.0, g, 0.0, 1.0, 1.0);
        let nu = stationary_lattice(&m, 1).unwrap();
        assert!((correlation_direct(&nu, 1, &[1]).unwrap().value - a / (a + g + 1.0)).abs() < 1e-15);
        let c = correlation_via_duality(&m, 1, &[1], Series::new(1e-10)).unwrap();
        assert!((c.value - a / (a + g + 1.0)).abs() < 1e-15);
        assert!(correlation_direct(&nu, 1, &[2]).is_err());
        let nu2 = stationary_lattice(&m, 3).unwrap();
        assert!(correlation_direct(&nu2, 3, &[2, 2]).is_err());
        // no source: c_− = c_+ = 1
        let m = dcp(0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        let (v, err) = vacancy_via_duality(&m, 3, &[1, 2, 3], Series::new(1e-10)).unwrap();
        assert!((v - 1.0).abs() <= err + 1e-14, "{v} {err}");
    }

    #[test]
    fn annihilating_series_is_finite() {
        let p = GdcpParams::annihilating(0.7, 0.3, 0.2, 0.9, 1.0, 0.5, 0.4).unwrap();
        let t = absorption_table(&LatticeModel::Gdcp(p), 3, 3).unwrap();
        let law = t.law(&Configuration::from_occupied(3, &[2]).unwrap()).unwrap();
        for m in 0..=3 {
            for k in 0..=3 {
                if m + k > 1 {
                    assert!(law.prob(m, k) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn lemma_examples() {
        let (a, g) = (0.6, 0.9);
        let lb = lemma_bound_check(&dcp(a, 0.0, g, 0.0, 1.0, 1.0), 1, 1, Series::default()).unwrap();
        assert!((lb.rho1 - a / (a + g + 1.0)).abs() < 1e-14);
        assert!((lb.bound - (a + g) / (a + g + 1.0)).abs() < 1e-14);
        assert!(lb.holds);
        let lb = lemma_bound_check(&dcp(0.5, 0.0, 0.5, 0.0, 1e-3, 0.0), 9, 5, Series::default()).unwrap();
        assert!(lb.bound < 1e-3 && lb.holds);
        let lb = lemma_bound_check(&dcp(0.0, 0.0, 0.8, 0.0, 1.0, 1.0), 3, 2, Series::default()).unwrap();
        assert!(lb.rho1.abs() < 1e-14 && lb.holds);
    }

    #[test]
    fn process_level_duality() {
        let m = dcp(0.7, 0.4, 0.9, 0.3, 0.8, 0.6);
        for &t in &[0.1, 1.0, 5.0] {
            let (res, cap_mass) = process_duality_residual(&m, 2, 40, t).unwrap();
            assert!(cap_mass < 1e-12, "cap mass {cap_mass}");
            assert!(res < 1e-10, "t={t} residual {res}");
        }
    }

    #[test]
    fn gap_of_two_state_chain() {
        let l = SparseGenerator::from_triplets(2, vec![(0, 1, 0.3), (1, 0, 0.9)]).unwrap();
        assert!((spectral_gap(&l).unwrap() - 1.2).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn inclusion_exclusion_roundtrip(vals in proptest::collection::vec(0.0..1.0f64, 8)) {
            let sites = [1usize, 2, 3];
            let key = |s: &[usize]| s.iter().fold(0usize, |a, &x| a | 1 << (x - 1));
            let rho = |s: &[usize]| if s.is_empty() { 1.0 } else { vals[key(s)] };
            let vac = |s: &[usize]| alternating_subset_sum(s, rho);
            for mask in 0..8usize {
                let s: Vec<usize> = sites.iter().copied().filter(|x| mask & (1 << (x - 1)) != 0).collect();
                let back = alternating_subset_sum(&s, vac);
                prop_assert!((back - rho(&s)).abs() < 1e-12);
            }
        }

        #[test]
        fn jump_chain_equals_transient(a in 0.2..2.0, g in 0.2..2.0, b in 0.0..1.5, d in 0.0..1.5,
                                       l in 0.1..1.5, dd in 0.0..2.0, n in 1usize..=3, pick in 0usize..7) {
            let m = dcp(a, b, g, d, l, dd);
            let order = nested_order(n).unwrap();
            let init = order[pick % order.len()];
            let x = absorption_law(&m, &init, 6).unwrap();
            let y = absorption_law_transient(&m, &init, 6).unwrap();
            prop_assert!(x.tv_distance(&y) < 1e-9);
        }
    }
}
