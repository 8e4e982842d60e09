//! Intensity-matrix builders: DCP/GDCP by Kronecker placement of local blocks,
//! their absorbing duals over a truncated sink space, the SIR bilayer walk on a
//! finite box, and the fast-stirring birth–death chain.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::lattice::{check_exact_size, Configuration, DcpParams, GdcpParams, SirParams};
use crate::sparse::{kron_place, SparseGenerator};

/// Boundary mechanism attached to site 1 or site N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Creates particles on an empty end site and removes them from an occupied one.
    Reservoir { insert: f64, remove: f64 },
    /// Absorbs a particle from the end site into a counting sink.
    Sink { rate: f64 },
}

impl Boundary {
    fn insert(&self) -> f64 {
        match *self {
            Boundary::Reservoir { insert, .. } => insert,
            Boundary::Sink { .. } => 0.0,
        }
    }
    fn remove(&self) -> f64 {
        match *self {
            Boundary::Reservoir { remove, .. } => remove,
            Boundary::Sink { .. } => 0.0,
        }
    }
    fn absorb(&self) -> f64 {
        match *self {
            Boundary::Sink { rate } => rate,
            Boundary::Reservoir { .. } => 0.0,
        }
    }
}

/// Local rates of a contact-plus-stirring process on Λ_N.
///
/// An occupied site dies at rate `death_lone` per bond whose other end is
/// empty and `death_paired` per bond whose other end is occupied, plus
/// `end_death` when it is an end site. An empty site is infected at rate
/// `birth` per occupied neighbour. Each bond holding one particle swaps at
/// rate `diffusion`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeRates {
    pub birth: f64,
    pub death_lone: f64,
    pub death_paired: f64,
    pub end_death: f64,
    pub diffusion: f64,
    pub left: Boundary,
    pub right: Boundary,
}

impl LatticeRates {
    /// Death rate of an occupied site `x`, boundary removal included.
    #[inline]
    pub fn death_rate(&self, n: usize, x: usize, left_occ: Option<bool>, right_occ: Option<bool>) -> f64 {
        let mut r = 0.0;
        for o in [left_occ, right_occ].into_iter().flatten() {
            r += if o { self.death_paired } else { self.death_lone };
        }
        if x == 1 {
            r += self.end_death + self.left.remove();
        }
        if x == n {
            r += self.end_death + self.right.remove();
        }
        r
    }

    /// Creation rate at an empty site `x`, reservoir insertion included.
    #[inline]
    pub fn birth_rate(&self, n: usize, x: usize, left_occ: Option<bool>, right_occ: Option<bool>) -> f64 {
        let k = left_occ.unwrap_or(false) as u8 + right_occ.unwrap_or(false) as u8;
        let mut r = self.birth * k as f64;
        if x == 1 {
            r += self.left.insert();
        }
        if x == n {
            r += self.right.insert();
        }
        r
    }

    /// Absorption rates (left sink, right sink) from an occupied site `x`.
    #[inline]
    pub fn absorb_rates(&self, n: usize, x: usize) -> (f64, f64) {
        (
            if x == 1 { self.left.absorb() } else { 0.0 },
            if x == n { self.right.absorb() } else { 0.0 },
        )
    }

    fn is_reservoir(&self) -> bool {
        matches!(self.left, Boundary::Reservoir { .. }) && matches!(self.right, Boundary::Reservoir { .. })
    }

    fn validate(&self) -> Result<()> {
        let vals = [
            self.birth,
            self.death_lone,
            self.death_paired,
            self.end_death,
            self.diffusion,
            self.left.insert(),
            self.left.remove(),
            self.left.absorb(),
            self.right.insert(),
            self.right.remove(),
            self.right.absorb(),
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("rates must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }
}

/// Enumerates every transition out of configuration word `w` on `n` sites,
/// calling `f(target_word, left_increment, right_increment, rate)`.
pub(crate) fn for_each_transition(
    rates: &LatticeRates,
    n: usize,
    w: u64,
    mut f: impl FnMut(u64, u32, u32, f64),
) {
    let occ = |x: usize| (w >> (n - x)) & 1 == 1;
    for x in 1..=n {
        let bit = 1u64 << (n - x);
        let lo = if x > 1 { Some(occ(x - 1)) } else { None };
        let ro = if x < n { Some(occ(x + 1)) } else { None };
        if occ(x) {
            let d = rates.death_rate(n, x, lo, ro);
            if d > 0.0 {
                f(w ^ bit, 0, 0, d);
            }
            let (al, ar) = rates.absorb_rates(n, x);
            if al > 0.0 {
                f(w ^ bit, 1, 0, al);
            }
            if ar > 0.0 {
                f(w ^ bit, 0, 1, ar);
            }
        } else {
            let b = rates.birth_rate(n, x, lo, ro);
            if b > 0.0 {
                f(w ^ bit, 0, 0, b);
            }
        }
    }
    if rates.diffusion > 0.0 {
        for x in 1..n {
            if occ(x) != occ(x + 1) {
                let m = (1u64 << (n - x)) | (1u64 << (n - x - 1));
                f(w ^ m, 0, 0, rates.diffusion);
            }
        }
    }
}

/// DCP or GDCP parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeModel {
    Dcp(DcpParams),
    Gdcp(GdcpParams),
}

impl LatticeModel {
    pub fn name(&self) -> &'static str {
        match self {
            LatticeModel::Dcp(_) => "dcp",
            LatticeModel::Gdcp(_) => "gdcp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatticeModel::Dcp(p) => p.validate(),
            LatticeModel::Gdcp(p) => p.validate(),
        }
    }

    /// Local rates of the process itself.
    pub fn primal_rates(&self) -> Result<LatticeRates> {
        self.validate()?;
        Ok(match *self {
            LatticeModel::Dcp(p) => LatticeRates {
                birth: p.lambda,
                death_lone: 0.5,
                death_paired: 0.5,
                end_death: 0.5,
                diffusion: p.diffusion,
                left: Boundary::Reservoir { insert: p.alpha, remove: p.gamma },
                right: Boundary::Reservoir { insert: p.delta, remove: p.beta },
            },
            LatticeModel::Gdcp(p) => LatticeRates {
                birth: p.lambda,
                death_lone: p.mu1,
                death_paired: p.mu2,
                end_death: 0.0,
                diffusion: p.diffusion,
                left: Boundary::Reservoir { insert: p.alpha, remove: p.gamma },
                right: Boundary::Reservoir { insert: p.delta, remove: p.beta },
            },
        })
    }

    /// Local rates of the absorbing dual.
    pub fn dual_rates(&self) -> Result<LatticeRates> {
        let prim = self.primal_rates()?;
        let (left, right) = match *self {
            LatticeModel::Dcp(p) => (p.alpha + p.gamma, p.beta + p.delta),
            LatticeModel::Gdcp(p) => (p.alpha + p.gamma, p.beta + p.delta),
        };
        let mut r = LatticeRates {
            left: Boundary::Sink { rate: left },
            right: Boundary::Sink { rate: right },
            ..prim
        };
        if let LatticeModel::Gdcp(p) = *self {
            let birth = p.lambda + p.mu2 - p.mu1;
            let diffusion = p.diffusion + p.mu1 - p.mu2;
            let tol = 1e-14 * (1.0 + p.lambda + p.mu1 + p.mu2 + p.diffusion);
            if birth < -tol {
                return Err(Error::HypothesisViolated(format!("lambda + mu2 - mu1 = {birth} < 0")));
            }
            if diffusion < -tol {
                return Err(Error::HypothesisViolated(format!("diffusion + mu1 - mu2 = {diffusion} < 0")));
            }
            r.birth = birth.max(0.0);
            r.diffusion = diffusion.max(0.0);
            r.death_lone = p.mu2;
            r.death_paired = p.mu1;
        }
        Ok(r)
    }

    /// Duality constants (c_−, c_+); `None` marks an inactive boundary.
    pub fn duality_constants(&self) -> (Option<f64>, Option<f64>) {
        match self {
            LatticeModel::Dcp(p) => (p.c_minus(), p.c_plus()),
            LatticeModel::Gdcp(p) => (p.c_minus(), p.c_plus()),
        }
    }

    pub fn build_primal(&self, n: usize) -> Result<SparseGenerator> {
        build_kronecker(&self.primal_rates()?, n)
    }
}

/// Generator of the open DCP over 2^N states.
pub fn build_dcp(params: &DcpParams, n: usize) -> Result<SparseGenerator> {
    LatticeModel::Dcp(*params).build_primal(n)
}

/// Generator of the GDCP over 2^N states.
pub fn build_gdcp(params: &GdcpParams, n: usize) -> Result<SparseGenerator> {
    LatticeModel::Gdcp(*params).build_primal(n)
}

/// Σ_x ℓ_x + ℓ̃_1 + ℓ̃_N + ℓ_1^− + ℓ_N^+ with each block placed as I ⊗ ℓ ⊗ I.
pub fn build_kronecker(rates: &LatticeRates, n: usize) -> Result<SparseGenerator> {
    check_exact_size(n)?;
    rates.validate()?;
    if !rates.is_reservoir() {
        return Err(Error::InvalidParameter("Kronecker assembly needs reservoir boundaries".into()));
    }
    let (lam, m1, m2, d) = (rates.birth, rates.death_lone, rates.death_paired, rates.diffusion);
    // order 00, 01, 10, 11 with the left site most significant
    #[rustfmt::skip]
    let bond = [
        0.0, 0.0, 0.0, 0.0,
        m1,  0.0, d,   lam,
        m1,  d,   0.0, lam,
        0.0, m2,  m2,  0.0,
    ];
    let end = [0.0, 0.0, rates.end_death, 0.0];
    let left = [0.0, rates.left.insert(), rates.left.remove(), 0.0];
    let right = [0.0, rates.right.insert(), rates.right.remove(), 0.0];
    let pow = |k: usize| 1usize << k;
    let mut t = Vec::new();
    for x in 1..n {
        kron_place(&bond, 4, pow(x - 1), pow(n - x - 1), &mut t);
    }
    kron_place(&end, 2, 1, pow(n - 1), &mut t);
    kron_place(&end, 2, pow(n - 1), 1, &mut t);
    kron_place(&left, 2, 1, pow(n - 1), &mut t);
    kron_place(&right, 2, pow(n - 1), 1, &mut t);
    SparseGenerator::from_triplets(pow(n), t)
}

/// Same generator assembled by enumerating the transition rules state by state.
pub fn build_enumerated(rates: &LatticeRates, n: usize) -> Result<SparseGenerator> {
    check_exact_size(n)?;
    rates.validate()?;
    if !rates.is_reservoir() {
        return Err(Error::InvalidParameter("primal enumeration needs reservoir boundaries".into()));
    }
    let dim = 1usize << n;
    let mut t = Vec::new();
    for w in 0..dim as u64 {
        for_each_transition(rates, n, w, |w2, _, _, r| t.push((w as usize, w2 as usize, r)));
    }
    SparseGenerator::from_triplets(dim, t)
}

/// Dual state (m, ξ, n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DualConfiguration {
    pub left_sink: u32,
    pub sites: Configuration,
    pub right_sink: u32,
}

impl DualConfiguration {
    pub fn new(left_sink: u32, sites: Configuration, right_sink: u32) -> Self {
        Self { left_sink, sites, right_sink }
    }

    /// No particles on Λ_N.
    pub fn is_extinct(&self) -> bool {
        self.sites.is_empty()
    }
}

/// Indexing of the truncated dual space `{0..=K} × {0,1}^N × {0..=K}` plus one
/// overflow state collecting every transition that would exceed the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualSpace {
    pub n: usize,
    pub cap: usize,
}

impl DualSpace {
    pub fn new(n: usize, cap: usize) -> Result<Self> {
        check_exact_size(n)?;
        Ok(Self { n, cap })
    }

    fn block(&self) -> usize {
        1usize << self.n
    }

    pub fn dim(&self) -> usize {
        (self.cap + 1) * (self.cap + 1) * self.block() + 1
    }

    pub fn overflow_index(&self) -> usize {
        self.dim() - 1
    }

    /// 0-based index; `None` when a sink count exceeds the cap.
    pub fn index_of(&self, z: &DualConfiguration) -> Option<usize> {
        let (m, k) = (z.left_sink as usize, z.right_sink as usize);
        if m > self.cap || k > self.cap || z.sites.len() != self.n {
            return None;
        }
        Some((m * (self.cap + 1) + k) * self.block() + z.sites.word() as usize)
    }

    /// Inverse of [`Self::index_of`]; `None` for the overflow state.
    pub fn config_at(&self, i: usize) -> Option<DualConfiguration> {
        if i >= self.overflow_index() {
            return None;
        }
        let w = (i % self.block()) as u64;
        let mk = i / self.block();
        Some(DualConfiguration {
            left_sink: (mk / (self.cap + 1)) as u32,
            sites: Configuration::from_word(self.n, w).ok()?,
            right_sink: (mk % (self.cap + 1)) as u32,
        })
    }

    /// States where the duality identity is exact on the truncated space:
    /// no absorption transition from them can leave it. Overflow excluded.
    pub fn restricted(&self) -> Vec<usize> {
        (0..self.overflow_index())
            .filter(|&i| {
                let z = self.config_at(i).unwrap();
                let at_left = z.left_sink as usize == self.cap && z.sites.occ(1);
                let at_right = z.right_sink as usize == self.cap && z.sites.occ(self.n);
                !(at_left || at_right)
            })
            .collect()
    }
}

/// Dual generator together with its state indexing.
#[derive(Debug, Clone)]
pub struct DualGenerator {
    pub space: DualSpace,
    pub generator: SparseGenerator,
    /// Rates used to build it.
    pub rates: LatticeRates,
    /// Whether any transition was routed to the overflow state.
    pub overflow_reachable: bool,
}

/// Absorbing dual of a DCP or GDCP with sink counts capped at `cap`.
pub fn build_dual(model: &LatticeModel, n: usize, cap: usize) -> Result<DualGenerator> {
    if cap < 1 {
        return Err(Error::InvalidParameter("sink cap must be at least 1".into()));
    }
    let rates = model.dual_rates()?;
    build_dual_from_rates(&rates, n, cap)
}

/// Dual generator for arbitrary sink-type rates.
pub fn build_dual_from_rates(rates: &LatticeRates, n: usize, cap: usize) -> Result<DualGenerator> {
    rates.validate()?;
    let space = DualSpace::new(n, cap)?;
    let of = space.overflow_index();
    let mut t = Vec::new();
    let mut overflow_reachable = false;
    for i in 0..of {
        let z = space.config_at(i).unwrap();
        let w = z.sites.word();
        for_each_transition(rates, n, w, |w2, dl, dr, r| {
            let m = z.left_sink + dl;
            let k = z.right_sink + dr;
            let j = if m as usize > cap || k as usize > cap {
                overflow_reachable = true;
                of
            } else {
                (m as usize * (cap + 1) + k as usize) * (1usize << n) + w2 as usize
            };
            t.push((i, j, r));
        });
    }
    Ok(DualGenerator { space, generator: SparseGenerator::from_triplets(space.dim(), t)?, rates: *rates, overflow_reachable })
}

/// Layer of the SIR dual walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    G,
    J,
}

/// State of the SIR bilayer walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SirDualState {
    Walker { r: i64, n: u32, layer: Layer },
    Trap,
}

/// Finite box `r ∈ [r_lo, r_hi]`, `1 ≤ n ≤ n_max`, both layers, plus the trap
/// and an overflow state for walks leaving the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SirDualBox {
    pub r_lo: i64,
    pub r_hi: i64,
    pub n_max: u32,
}

impl SirDualBox {
    fn width(&self) -> usize {
        (self.r_hi - self.r_lo + 1) as usize
    }

    pub fn dim(&self) -> usize {
        self.width() * self.n_max as usize * 2 + 2
    }

    pub fn trap_index(&self) -> usize {
        self.dim() - 2
    }

    pub fn overflow_index(&self) -> usize {
        self.dim() - 1
    }

    pub fn index_of(&self, s: &SirDualState) -> Option<usize> {
        match *s {
            SirDualState::Trap => Some(self.trap_index()),
            SirDualState::Walker { r, n, layer } => {
                if r < self.r_lo || r > self.r_hi || n < 1 || n > self.n_max {
                    return None;
                }
                let l = match layer {
                    Layer::G => 0,
                    Layer::J => 1,
                };
                Some((((r - self.r_lo) as usize) * self.n_max as usize + (n as usize - 1)) * 2 + l)
            }
        }
    }

    /// `None` for the overflow state.
    pub fn state_at(&self, i: usize) -> Option<SirDualState> {
        if i == self.trap_index() {
            return Some(SirDualState::Trap);
        }
        if i >= self.overflow_index() {
            return None;
        }
        let layer = if i % 2 == 0 { Layer::G } else { Layer::J };
        let q = i / 2;
        Some(SirDualState::Walker {
            r: self.r_lo + (q / self.n_max as usize) as i64,
            n: (q % self.n_max as usize) as u32 + 1,
            layer,
        })
    }
}

/// Outgoing transitions of one SIR dual state.
pub fn sir_dual_transitions(params: &SirParams, s: &SirDualState) -> Vec<(SirDualState, f64)> {
    let (b, g) = (params.beta_inf, params.gamma_rec);
    let mut out = Vec::new();
    if let SirDualState::Walker { r, n, layer } = *s {
        out.push((SirDualState::Walker { r, n: n + 1, layer }, b));
        match layer {
            Layer::G => {
                out.push((SirDualState::Walker { r: r - 1, n: n + 1, layer }, b));
                out.push((SirDualState::Trap, 2.0 * g));
            }
            Layer::J => out.push((SirDualState::Walker { r, n, layer: Layer::G }, g)),
        }
    }
    out.retain(|&(_, r)| r > 0.0);
    out
}

/// SIR dual walk generator on a finite box.
#[derive(Debug, Clone)]
pub struct SirDualGenerator {
    pub space: SirDualBox,
    pub generator: SparseGenerator,
}

pub fn build_sir_dual(params: &SirParams, r_range: RangeInclusive<i64>, n_max: u32) -> Result<SirDualGenerator> {
    params.validate()?;
    let (r_lo, r_hi) = (*r_range.start(), *r_range.end());
    if r_lo > r_hi || n_max < 1 {
        return Err(Error::InvalidParameter("empty dual box".into()));
    }
    let space = SirDualBox { r_lo, r_hi, n_max };
    let mut t = Vec::new();
    for i in 0..space.trap_index() {
        let s = space.state_at(i).unwrap();
        for (s2, rate) in sir_dual_transitions(params, &s) {
            let j = space.index_of(&s2).unwrap_or(space.overflow_index());
            t.push((i, j, rate));
        }
    }
    Ok(SirDualGenerator { space, generator: SparseGenerator::from_triplets(space.dim(), t)? })
}

/// Birth-factor convention for the fast-stirring chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StirringConvention {
    /// Bulk infection λ n (1 − n/N).
    Printed,
    /// Bulk infection 2 λ n (1 − n/N).
    Corrected,
}

impl StirringConvention {
    fn factor(self) -> f64 {
        match self {
            StirringConvention::Printed => 1.0,
            StirringConvention::Corrected => 2.0,
        }
    }
}

/// Birth–death chain on {0..N}.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChain {
    /// `up[k]`: rate k → k+1 (last entry 0).
    pub up: Vec<f64>,
    /// `down[k]`: rate k → k−1 (first entry 0).
    pub down: Vec<f64>,
}

impl BirthDeathChain {
    pub fn generator(&self) -> Result<SparseGenerator> {
        let n = self.up.len();
        let mut t = Vec::new();
        for k in 0..n {
            if k + 1 < n {
                t.push((k, k + 1, self.up[k]));
            }
            if k > 0 {
                t.push((k, k - 1, self.down[k]));
            }
        }
        SparseGenerator::from_triplets(n, t)
    }

    /// Stationary law by detailed balance from the lowest recurrent state.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.up.len();
        // the chain restricted to states reachable from 0 that can return
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        for k in 1..n {
            if self.down[k] > 0.0 {
                w[k] = w[k - 1] * self.up[k - 1] / self.down[k];
            } else {
                w[k] = if self.up[k - 1] > 0.0 { f64::INFINITY } else { 0.0 };
            }
        }
        if w.iter().any(|v| v.is_infinite()) {
            // an absorbing state above 0 is reached; mass sits on the first one
            let k = w.iter().position(|v| v.is_infinite()).unwrap();
            let mut out = vec![0.0; n];
            out[k] = 1.0;
            return out;
        }
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    }
}

/// Particle-count chain of the DCP in the limit of infinite stirring.
pub fn fast_stirring_chain(params: &DcpParams, n: usize, convention: StirringConvention) -> Result<BirthDeathChain> {
    params.validate()?;
    if n < 1 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let nf = n as f64;
    let f = convention.factor();
    let up = (0..=n)
        .map(|k| {
            let k = k as f64;
            (f * params.lambda * k + params.alpha + params.delta) * (1.0 - k / nf)
        })
        .collect();
    let down = (0..=n).map(|k| k as f64 * (1.0 + (params.beta + params.gamma) / nf)).collect();
    Ok(BirthDeathChain { up, down })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dcp(a: f64, b: f64, g: f64, d: f64, l: f64, dd: f64) -> DcpParams {
        DcpParams::new(a, b, g, d, l, dd).unwrap()
    }

    fn assert_dense(l: &SparseGenerator, expect: &[&[f64]]) {
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((l.get(i, j) - v).abs() < 1e-15, "({i},{j}) {} vs {v}", l.get(i, j));
            }
        }
    }

    #[test]
    fn dcp_one_site() {
        let p = dcp(0.3, 0.7, 1.1, 0.2, 2.0, 5.0);
        let l = build_dcp(&p, 1).unwrap();
        let (ad, gb1) = (0.3 + 0.2, 1.1 + 0.7 + 1.0);
        assert_dense(&l, &[&[-ad, ad], &[gb1, -gb1]]);
    }

    #[test]
    fn dcp_two_sites_matches_displayed_matrix() {
        let (a, b, g, d, l, dd) = (1.0, 0.0, 0.0, 1.0, 1.0, 1.0);
        let m = build_dcp(&dcp(a, b, g, d, l, dd), 2).unwrap();
        assert_dense(
            &m,
            &[
                &[-(a + d), d, a, 0.0],
                &[1.0 + b, -(1.0 + b + dd + l + a), dd, l + a],
                &[1.0 + g, dd, -(1.0 + g + dd + l + d), l + d],
                &[0.0, 1.0 + g, 1.0 + b, -(2.0 + b + g)],
            ],
        );
    }

    #[test]
    fn gdcp_pair_death_uses_mu2() {
        let p = GdcpParams::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, 0.7).unwrap();
        let l = build_gdcp(&p, 2).unwrap();
        // 11 -> 01 and 11 -> 10
        assert_eq!(l.get(3, 1), 0.7);
        assert_eq!(l.get(3, 2), 0.7);
        assert_eq!(l.get(1, 0), 0.3);
    }

    #[test]
    fn stirred_voter_rows_sum_to_zero() {
        let p = GdcpParams::new(0.4, 0.2, 0.1, 0.3, 1.3, 0.5, 1.3, 0.0).unwrap();
        let l = build_gdcp(&p, 2).unwrap();
        assert_eq!(l.max_abs_row_sum(), 0.0);
    }

    #[test]
    fn lambda_only_rows_sum_to_zero() {
        for n in 1..=8 {
            let l = build_dcp(&dcp(0.0, 0.0, 0.0, 0.0, 1.7, 0.0), n).unwrap();
            assert!(l.max_abs_row_sum() < 1e-14);
        }
    }

    #[test]
    fn size_cap_enforced() {
        assert!(matches!(build_dcp(&dcp(1.0, 1.0, 1.0, 1.0, 1.0, 1.0), 21), Err(Error::TooManySites { .. })));
    }

    #[test]
    fn dual_boundary_rate() {
        let p = dcp(0.4, 0.3, 0.9, 0.2, 1.0, 1.0);
        let dg = build_dual(&LatticeModel::Dcp(p), 3, 4).unwrap();
        let s = dg.space;
        let from = s.index_of(&DualConfiguration::new(0, Configuration::from_occupied(3, &[1]).unwrap(), 0)).unwrap();
        let to = s.index_of(&DualConfiguration::new(1, Configuration::empty(3).unwrap(), 0)).unwrap();
        assert!((dg.generator.get(from, to) - 1.3).abs() < 1e-15);
        for i in 0..s.overflow_index() {
            if s.config_at(i).unwrap().is_extinct() {
                assert!(dg.generator.is_absorbing(i));
            }
        }
        assert!(dg.generator.is_absorbing(s.overflow_index()));
        assert!(dg.generator.max_abs_row_sum() < 1e-14);
    }

    #[test]
    fn annihilating_dual_has_no_births() {
        let p = GdcpParams::annihilating(0.5, 0.6, 0.7, 0.8, 1.2, 0.3, 0.4).unwrap();
        let r = LatticeModel::Gdcp(p).dual_rates().unwrap();
        assert_eq!(r.birth, 0.0);
        assert!((r.diffusion - 1.5).abs() < 1e-15);
        assert_eq!(r.death_lone, 0.4);
        let dg = build_dual(&LatticeModel::Gdcp(p), 3, 2).unwrap();
        for i in 0..dg.space.overflow_index() {
            let z = dg.space.config_at(i).unwrap();
            for (j, _) in dg.generator.row(i) {
                if let Some(z2) = dg.space.config_at(j) {
                    assert!(z2.sites.particle_count() <= z.sites.particle_count());
                }
            }
        }
    }

    #[test]
    fn dual_rejects_violated_hypotheses() {
        let p = GdcpParams::new(1.0, 1.0, 1.0, 1.0, 0.1, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(LatticeModel::Gdcp(p).dual_rates(), Err(Error::HypothesisViolated(_))));
        let p = GdcpParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 0.0, 1.0).unwrap();
        assert!(matches!(LatticeModel::Gdcp(p).dual_rates(), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn dual_space_roundtrip() {
        let s = DualSpace::new(3, 2).unwrap();
        for i in 0..s.overflow_index() {
            assert_eq!(s.index_of(&s.config_at(i).unwrap()), Some(i));
        }
        assert_eq!(s.config_at(s.overflow_index()), None);
    }

    #[test]
    fn sir_dual_examples() {
        let p = SirParams::new(0.7, 0.3).unwrap();
        let g = build_sir_dual(&p, -5..=5, 6).unwrap();
        let sp = g.space;
        let j = sp.index_of(&SirDualState::Walker { r: 0, n: 1, layer: Layer::J }).unwrap();
        let row: Vec<_> = g.generator.row(j).collect();
        assert_eq!(row.len(), 2);
        assert!((g.generator.get(j, sp.index_of(&SirDualState::Walker { r: 0, n: 2, layer: Layer::J }).unwrap()) - 0.7).abs() < 1e-15);
        assert!((g.generator.get(j, sp.index_of(&SirDualState::Walker { r: 0, n: 1, layer: Layer::G }).unwrap()) - 0.3).abs() < 1e-15);
        assert!(g.generator.is_absorbing(sp.trap_index()));
        for i in 0..sp.trap_index() {
            if let Some(SirDualState::Walker { layer: Layer::G, .. }) = sp.state_at(i) {
                assert!((g.generator.exit_rate(i) - 2.0 * (0.7 + 0.3)).abs() < 1e-14);
            }
        }
        assert!(build_sir_dual(&p, 1..=0, 3).is_err());
    }

    #[test]
    fn fast_stirring_examples() {
        let p = dcp(1.0, 0.0, 0.0, 1.0, 1.0, 0.0);
        let c = fast_stirring_chain(&p, 2, StirringConvention::Corrected).unwrap();
        assert_eq!(c.up[0], 2.0);
        assert_eq!(c.down[0], 0.0);
        let pi = c.stationary();
        for (a, b) in pi.iter().zip([0.2, 0.4, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        let closed = dcp(0.0, 0.3, 0.3, 0.0, 1.0, 0.0);
        let c = fast_stirring_chain(&closed, 4, StirringConvention::Printed).unwrap();
        assert_eq!(c.up[0], 0.0);
        assert_eq!(c.stationary()[0], 1.0);
        assert_eq!(c.generator().unwrap().max_abs_row_sum(), 0.0);
    }

    fn arb_dcp() -> impl Strategy<Value = DcpParams> {
        (0.0..2.0, 0.0..2.0, 0.0..2.0, 0.0..2.0, 0.05..2.0, 0.0..3.0)
            .prop_map(|(a, b, g, d, l, dd)| DcpParams::new(a, b, g, d, l, dd).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dcp_equals_gdcp_under_mapping(p in arb_dcp(), n in 1usize..=6) {
            let a = build_dcp(&p, n).unwrap();
            let b = build_gdcp(&GdcpParams::from_dcp(&p), n).unwrap();
            for (x, y) in a.entries().iter().zip(b.entries().iter()) {
                prop_assert_eq!((x.0, x.1), (y.0, y.1));
                prop_assert!((x.2 - y.2).abs() < 1e-13);
            }
        }

        #[test]
        fn kronecker_equals_enumeration(p in arb_dcp(), n in 1usize..=6) {
            let r = LatticeModel::Dcp(p).primal_rates().unwrap();
            let a = build_kronecker(&r, n).unwrap();
            let b = build_enumerated(&r, n).unwrap();
            prop_assert!(a.max_abs_row_sum() < 1e-14);
            prop_assert_eq!(a.nnz_offdiagonal(), b.nnz_offdiagonal());
            for (x, y) in a.entries().iter().zip(b.entries().iter()) {
                prop_assert_eq!((x.0, x.1), (y.0, y.1));
                prop_assert!((x.2 - y.2).abs() < 1e-13);
            }
        }

        #[test]
        fn dual_truncation_consistent(p in arb_dcp(), n in 1usize..=4, k in 1usize..4) {
            let m = LatticeModel::Dcp(p);
            let a = build_dual(&m, n, k).unwrap();
            let b = build_dual(&m, n, k + 1).unwrap();
            prop_assert!(a.generator.max_abs_row_sum() < 1e-14);
            for i in 0..a.space.overflow_index() {
                let z = a.space.config_at(i).unwrap();
                if (z.left_sink as usize) < k && (z.right_sink as usize) < k {
                    let ib = b.space.index_of(&z).unwrap();
                    let ra: Vec<_> = a.generator.row(i).map(|(j, r)| (a.space.config_at(j).unwrap(), r)).collect();
                    let rb: Vec<_> = b.generator.row(ib).map(|(j, r)| (b.space.config_at(j).unwrap(), r)).collect();
                    prop_assert_eq!(ra.len(), rb.len());
                    for (x, y) in ra.iter().zip(rb.iter()) {
                        prop_assert!(rb.contains(x) && ra.contains(y));
                    }
                }
            }
        }
    }
}
