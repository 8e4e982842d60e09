//! Cluster functions G, J, H at positive times, as Poisson series over the
//! initial clusters, and the law of the bilayer dual walk.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{cluster_indicator_unchecked, ClusterKind, SirConfiguration};
use crate::error::{Error, Result};
use crate::generator::{Layer, SirDualState};
use crate::lattice::SirParams;
use crate::math::{exp, half_binomial_row, poisson_weights, powi};
use crate::quadrature::integrate;

/// Default tolerance of the series and of the time integrals.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-10;

/// Initial cluster values G(r,n,0), J(r,n,0), H(r,n,0).
pub trait InitialClusters {
    fn g(&self, r: i64, n: u64) -> f64;
    fn j(&self, r: i64, n: u64) -> f64;
    fn h(&self, r: i64, n: u64) -> f64;
    /// A length beyond which every initial H cluster vanishes; `None` if unbounded.
    fn run_tail_bound(&self) -> Option<u64>;
}

impl InitialClusters for SirConfiguration {
    fn g(&self, r: i64, n: u64) -> f64 {
        cluster_indicator_unchecked(self, r, n as u32, ClusterKind::G) as u8 as f64
    }
    fn j(&self, r: i64, n: u64) -> f64 {
        cluster_indicator_unchecked(self, r, n as u32, ClusterKind::J) as u8 as f64
    }
    fn h(&self, r: i64, n: u64) -> f64 {
        cluster_indicator_unchecked(self, r, n as u32, ClusterKind::H) as u8 as f64
    }
    fn run_tail_bound(&self) -> Option<u64> {
        self.longest_s_run_before_infected()
    }
}

/// Bernoulli product measure with site marginals (s, i, r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMeasure {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl ProductMeasure {
    pub fn new(s: f64, i: f64, r: f64) -> Result<Self> {
        if [s, i, r].iter().any(|p| !(*p >= 0.0)) || (s + i + r - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("({s}, {i}, {r}) is not a distribution")));
        }
        Ok(Self { s, i, r })
    }
}

impl InitialClusters for ProductMeasure {
    fn g(&self, _: i64, n: u64) -> f64 {
        self.i * self.i * powi(self.s, n as i64)
    }
    fn j(&self, _: i64, n: u64) -> f64 {
        self.r * self.i * powi(self.s, n as i64)
    }
    fn h(&self, _: i64, n: u64) -> f64 {
        self.i * powi(self.s, n as i64)
    }
    fn run_tail_bound(&self) -> Option<u64> {
        if self.s == 0.0 || self.i == 0.0 {
            Some(0)
        } else {
            None
        }
    }
}

/// A cluster value at time t with its truncation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterValues {
    pub kind: ClusterKind,
    pub r: i64,
    pub n: u64,
    pub t: f64,
    pub value: f64,
    pub error: f64,
}

fn check_args(params: &SirParams, n: u64, t: f64) -> Result<()> {
    params.validate()?;
    if n < 1 {
        return Err(Error::InvalidParameter("cluster length must be at least 1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// `rows[b][m] = Σ_a C(b,a)/2^b G_0(r − a, m)` for b ≤ b_max and n ≤ m ≤ m_max.
struct SmearedG {
    n: u64,
    rows: Vec<Vec<f64>>,
}

impl SmearedG {
    fn new(init: &dyn InitialClusters, r: i64, n: u64, b_max: usize, m_max: u64) -> Self {
        let width = (m_max - n + 1) as usize;
        let mut base = vec![vec![0.0; width]; b_max + 1];
        for (a, row) in base.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = init.g(r - a as i64, n + k as u64);
            }
        }
        let rows = (0..=b_max)
            .map(|b| {
                let w = half_binomial_row(b);
                (0..width).map(|k| w.iter().enumerate().map(|(a, wa)| wa * base[a][k]).sum()).collect()
            })
            .collect();
        Self { n, rows }
    }

    fn get(&self, b: usize, m: u64) -> f64 {
        self.rows[b][(m - self.n) as usize]
    }
}

/// G^η(r,n,t) = e^{−2(γ+β)t} Σ_{a≤b} C(b,a)/2^b (2βt)^b/b! G^η(r−a, n+b, 0).
pub fn g_cluster(init: &dyn InitialClusters, params: &SirParams, r: i64, n: u64, t: f64, tol: f64) -> Result<ClusterValues> {
    check_args(params, n, t)?;
    let (w, tail) = poisson_weights(2.0 * params.beta_inf * t, tol);
    let b_max = w.len() - 1;
    let sm = SmearedG::new(init, r, n, b_max, n + b_max as u64);
    let decay = exp(-2.0 * params.gamma_rec * t);
    let value = decay * w.iter().enumerate().map(|(b, wb)| wb * sm.get(b, n + b as u64)).sum::<f64>();
    Ok(ClusterValues { kind: ClusterKind::G, r, n, t, value, error: decay * tail })
}

/// J^η(r,n,t): the J-layer term plus the γ-weighted time integral over the
/// layer flip of G-propagated initial clusters.
pub fn j_cluster(init: &dyn InitialClusters, params: &SirParams, r: i64, n: u64, t: f64, tol: f64) -> Result<ClusterValues> {
    check_args(params, n, t)?;
    let (b, g) = (params.beta_inf, params.gamma_rec);
    let (wk, tail_k) = poisson_weights(b * t, tol);
    let direct: f64 = wk.iter().enumerate().map(|(k, p)| p * init.j(r, n + k as u64)).sum();
    let mut value = exp(-g * t) * direct;
    let mut error = tail_k;
    if g > 0.0 && t > 0.0 {
        // upper limits cover every s ∈ [0, t]
        let k_max = poisson_weights(b * t, tol).0.len() - 1;
        let b_max = poisson_weights(2.0 * b * t, tol).0.len() - 1;
        let sm = SmearedG::new(init, r, n, b_max, n + (k_max + b_max) as u64);
        let integrand = |s: f64| -> f64 {
            let (pk, _) = poisson_weights(b * s, tol);
            let (pb, _) = poisson_weights(2.0 * b * (t - s), tol);
            let mut acc = 0.0;
            for (k, wk) in pk.iter().enumerate().take(k_max + 1) {
                for (bb, wb) in pb.iter().enumerate().take(b_max + 1) {
                    acc += wk * wb * sm.get(bb, n + (k + bb) as u64);
                }
            }
            g * exp(-g * (2.0 * t - s)) * acc
        };
        let (v, qerr) = integrate(integrand, 0.0, t, tol)?;
        value += v;
        error += qerr + 2.0 * g * t * tol;
    }
    Ok(ClusterValues { kind: ClusterKind::J, r, n, t, value, error })
}

/// H^η(r,n,t) = Σ_{k≥0} [G + J](r−k, n+k, t), which terminates once n+k
/// exceeds the longest initial S-run ending in I.
pub fn h_cluster(
    init: &dyn InitialClusters,
    params: &SirParams,
    r: i64,
    n: u64,
    t: f64,
    tol: f64,
    n_max: Option<u64>,
) -> Result<ClusterValues> {
    check_args(params, n, t)?;
    let bound = init
        .run_tail_bound()
        .ok_or_else(|| Error::HypothesisViolated("an S-run ending in I is unbounded".into()))?;
    let n_max = match n_max {
        Some(m) if m < bound => {
            return Err(Error::InvalidParameter(format!("n_max = {m} below the longest S-run {bound}")))
        }
        Some(m) => m,
        None => bound,
    };
    let mut value = 0.0;
    let mut error = 0.0;
    for m in n..=n_max {
        let k = (m - n) as i64;
        let gv = g_cluster(init, params, r - k, m, t, tol)?;
        let jv = j_cluster(init, params, r - k, m, t, tol)?;
        value += gv.value + jv.value;
        error += gv.error + jv.error;
    }
    Ok(ClusterValues { kind: ClusterKind::H, r, n, t, value, error })
}

/// Translation-invariant G(n,t) = e^{−2(γ+β)t} Σ_ℓ (2βt)^ℓ/ℓ! G(n+ℓ, 0).
pub fn g_translation_invariant(init: &dyn InitialClusters, params: &SirParams, n: u64, t: f64, tol: f64) -> Result<f64> {
    check_args(params, n, t)?;
    let (w, _) = poisson_weights(2.0 * params.beta_inf * t, tol);
    let s: f64 = w.iter().enumerate().map(|(l, p)| p * init.g(0, n + l as u64)).sum();
    Ok(exp(-2.0 * params.gamma_rec * t) * s)
}

/// ∫_0^t e^{−γ(t−s)} Σ_ℓ Pois(β(t−s); ℓ) G(n+ℓ, s) ds.
fn smoothed_g_integral(init: &dyn InitialClusters, params: &SirParams, n: u64, t: f64, tol: f64) -> Result<f64> {
    let (b, g) = (params.beta_inf, params.gamma_rec);
    let f = |s: f64| -> f64 {
        let (w, _) = poisson_weights(b * (t - s), tol);
        let sum: f64 = w
            .iter()
            .enumerate()
            .map(|(l, p)| p * g_translation_invariant(init, params, n + l as u64, s, tol).unwrap_or(f64::NAN))
            .sum();
        exp(-g * (t - s)) * sum
    };
    Ok(integrate(f, 0.0, t, tol)?.0)
}

/// Translation-invariant J(n,t) from the closed ODE system.
pub fn j_translation_invariant(init: &dyn InitialClusters, params: &SirParams, n: u64, t: f64, tol: f64) -> Result<f64> {
    check_args(params, n, t)?;
    let (w, _) = poisson_weights(params.beta_inf * t, tol);
    let first: f64 = w.iter().enumerate().map(|(l, p)| p * init.j(0, n + l as u64)).sum();
    let second = if params.gamma_rec > 0.0 && t > 0.0 { smoothed_g_integral(init, params, n, t, tol)? } else { 0.0 };
    Ok(exp(-params.gamma_rec * t) * first + params.gamma_rec * second)
}

/// Translation-invariant H(n,t) from its own ODE solution.
pub fn h_translation_invariant(init: &dyn InitialClusters, params: &SirParams, n: u64, t: f64, tol: f64) -> Result<f64> {
    check_args(params, n, t)?;
    let (w, _) = poisson_weights(params.beta_inf * t, tol);
    let first: f64 = w.iter().enumerate().map(|(l, p)| p * init.h(0, n + l as u64)).sum();
    let second = if params.beta_inf > 0.0 && t > 0.0 { smoothed_g_integral(init, params, n, t, tol)? } else { 0.0 };
    Ok(exp(-params.gamma_rec * t) * first - params.beta_inf * second)
}

/// Law at time t of the bilayer walk, restricted to the mass above `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWalkLaw {
    pub walkers: Vec<(SirDualState, f64)>,
    pub trap: f64,
    /// Walker mass discarded by the truncation.
    pub truncated: f64,
}

impl DualWalkLaw {
    pub fn prob(&self, s: &SirDualState) -> f64 {
        if *s == SirDualState::Trap {
            return self.trap;
        }
        self.walkers.iter().find(|(q, _)| q == s).map_or(0.0, |x| x.1)
    }

    pub fn total(&self) -> f64 {
        self.trap + self.walkers.iter().map(|x| x.1).sum::<f64>()
    }
}

/// Closed-form law of the dual walk started at (r, n, layer).
pub fn dual_walk_transient(params: &SirParams, r: i64, n: u32, layer: Layer, t: f64, tol: f64) -> Result<DualWalkLaw> {
    check_args(params, n as u64, t)?;
    let (b, g) = (params.beta_inf, params.gamma_rec);
    let walker = |r: i64, n: u64, layer| SirDualState::Walker { r, n: n as u32, layer };
    let mut walkers = Vec::new();
    match layer {
        Layer::G => {
            let survive = exp(-2.0 * g * t);
            let (w, tail) = poisson_weights(2.0 * b * t, tol);
            for (bb, wb) in w.iter().enumerate() {
                for (a, wa) in half_binomial_row(bb).iter().enumerate() {
                    walkers.push((walker(r - a as i64, n as u64 + bb as u64, Layer::G), survive * wb * wa));
                }
            }
            Ok(DualWalkLaw { walkers, trap: 1.0 - survive, truncated: survive * tail })
        }
        Layer::J => {
            let stay = exp(-g * t);
            let (w, tail_j) = poisson_weights(b * t, tol);
            for (k, wk) in w.iter().enumerate() {
                walkers.push((walker(r, n as u64 + k as u64, Layer::J), stay * wk));
            }
            let k_max = w.len() - 1;
            let b_max = poisson_weights(2.0 * b * t, tol).0.len() - 1;
            let mut mixed = vec![vec![0.0; b_max + 1]; k_max + 1];
            if g > 0.0 && t > 0.0 {
                for (k, row) in mixed.iter_mut().enumerate() {
                    for (bb, cell) in row.iter_mut().enumerate() {
                        let f = |s: f64| {
                            let pk = exp(-b * s + k as f64 * libm::log(b * s).max(-745.0) - libm::lgamma(k as f64 + 1.0));
                            let u = 2.0 * b * (t - s);
                            let pb = exp(-u + bb as f64 * libm::log(u).max(-745.0) - libm::lgamma(bb as f64 + 1.0));
                            let pk = if k == 0 { exp(-b * s) } else { pk };
                            let pb = if bb == 0 { exp(-u) } else { pb };
                            g * exp(-g * s) * exp(-2.0 * g * (t - s)) * pk * pb
                        };
                        *cell = integrate(f, 0.0, t, tol * 1e-2)?.0;
                    }
                }
            }
            let mut by_site: Vec<((i64, u64), f64)> = Vec::new();
            for (k, row) in mixed.iter().enumerate() {
                for (bb, &p) in row.iter().enumerate() {
                    for (a, wa) in half_binomial_row(bb).iter().enumerate() {
                        let key = (r - a as i64, n as u64 + (k + bb) as u64);
                        match by_site.iter_mut().find(|(q, _)| *q == key) {
                            Some(e) => e.1 += p * wa,
                            None => by_site.push((key, p * wa)),
                        }
                    }
                }
            }
            let trap = (1.0 - stay) * (1.0 - stay);
            let walker_mass: f64 = by_site.iter().map(|x| x.1).sum::<f64>() + stay * (1.0 - tail_j);
            walkers.extend(by_site.into_iter().map(|((r, m), p)| (walker(r, m, Layer::G), p)));
            Ok(DualWalkLaw { walkers, trap, truncated: (1.0 - trap - walker_mass).max(0.0) })
        }
    }
}
