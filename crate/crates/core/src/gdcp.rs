//! One-point function of the generalized process when its dual is
//! annihilating (μ_1 = λ + μ_2): closed form, boundary recurrence, bulk limit
//! and time evolution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::GdcpParams;
use crate::math::{exp, powi, sqrt};

/// Below this value of 1 − A the roots r_± are treated as colliding at 1.
pub const LINEAR_BRANCH_THRESHOLD: f64 = 1e-12;

fn require_annihilating(p: &GdcpParams) -> Result<()> {
    p.validate()?;
    if !p.is_annihilating() {
        return Err(Error::HypothesisViolated(format!(
            "mu1 = {} differs from lambda + mu2 = {}",
            p.mu1,
            p.lambda + p.mu2
        )));
    }
    Ok(())
}

/// Boundary and bulk constants of the single-particle recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceConstants {
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub d_t: f64,
    /// (𝒟+λ)/(𝒟+λ+μ_2).
    pub a: f64,
    pub r_minus: f64,
    pub r_plus: f64,
}

impl RecurrenceConstants {
    pub fn new(p: &GdcpParams) -> Self {
        let hop = p.diffusion + p.lambda;
        let sl = p.alpha + p.gamma;
        let sr = p.beta + p.delta;
        let a = hop / (hop + p.mu2);
        let root = sqrt((1.0 - a * a).max(0.0));
        Self {
            a_t: sl / (sl + hop + p.mu2),
            b_t: hop / (sl + hop + p.mu2),
            c_t: sr / (sr + hop + p.mu2),
            d_t: hop / (sr + hop + p.mu2),
            a,
            r_minus: (1.0 - root) / a,
            r_plus: (1.0 + root) / a,
        }
    }

    /// Whether the exponential branch is numerically usable.
    pub fn exponential(&self) -> bool {
        1.0 - self.a >= LINEAR_BRANCH_THRESHOLD
    }

    pub fn b_n(&self, n: usize) -> f64 {
        let (rm, rp, b, d) = (self.r_minus, self.r_plus, self.b_t, self.d_t);
        let n = n as i64;
        rm * (1.0 - b * rm) * (1.0 - d / rp) + powi(rm, n) * powi(rp, 1 - n) * (b * rp - 1.0) * (1.0 - d / rm)
    }

    pub fn b_n_prime(&self, n: usize) -> f64 {
        let (a, c) = (self.a_t, self.c_t);
        a * (c * n as f64 + 1.0 - c) + (1.0 - 2.0 * a) * c
    }
}

/// Which formula produced the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormBranch {
    SingleSite,
    Exponential,
    BothClosed,
    LeftClosed,
    RightClosed,
    Linear,
}

/// u_x, v_x and ρ_1(x) on Λ_N together with the constants used.
#[derive(Debug, Clone, PartialEq)]
pub struct GdcpClosedForm {
    pub constants: RecurrenceConstants,
    pub branch: ClosedFormBranch,
    pub b_n: Option<f64>,
    pub b_n_prime: Option<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Profile ρ_1(x) = u_x(1 − c̃_−) + v_x(1 − c̃_+) from the explicit formulas.
pub fn one_point_closed_form(p: &GdcpParams, n: usize) -> Result<GdcpClosedForm> {
    require_annihilating(p)?;
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let k = RecurrenceConstants::new(p);
    let sl = p.alpha + p.gamma;
    let sr = p.beta + p.delta;
    let mut b_n = None;
    let mut b_n_prime = None;
    let (branch, u, v): (_, Vec<f64>, Vec<f64>) = if n == 1 {
        if sl + sr == 0.0 {
            (ClosedFormBranch::BothClosed, vec![0.0], vec![0.0])
        } else {
            (ClosedFormBranch::SingleSite, vec![sl / (sl + sr)], vec![sr / (sl + sr)])
        }
    } else if k.exponential() {
        let bn = k.b_n(n);
        if bn == 0.0 || !bn.is_finite() {
            return Err(Error::Degenerate(format!("B_N = {bn}")));
        }
        b_n = Some(bn);
        let (rm, rp, b, d) = (k.r_minus, k.r_plus, k.b_t, k.d_t);
        let ni = n as i64;
        let u = (1..=ni)
            .map(|x| k.a_t / bn * ((1.0 - d / rp) * powi(rm, x) + (d / rm - 1.0) * powi(rm, ni) * powi(rp, x - ni)))
            .collect();
        let v = (1..=ni)
            .map(|x| k.c_t / bn * ((b * rp - 1.0) * powi(rp, 1 - ni) * powi(rm, x) + rm * (1.0 - b * rm) * powi(rp, x - ni)))
            .collect();
        (ClosedFormBranch::Exponential, u, v)
    } else {
        match (sl == 0.0, sr == 0.0) {
            (true, true) => (ClosedFormBranch::BothClosed, vec![0.0; n], vec![0.0; n]),
            (true, false) => (ClosedFormBranch::LeftClosed, vec![0.0; n], vec![1.0; n]),
            (false, true) => (ClosedFormBranch::RightClosed, vec![1.0; n], vec![0.0; n]),
            (false, false) => {
                let bp = k.b_n_prime(n);
                if bp == 0.0 {
                    return Err(Error::Degenerate("B'_N = 0".into()));
                }
                b_n_prime = Some(bp);
                let (a, c) = (k.a_t, k.c_t);
                let u = (1..=n).map(|x| a / bp * (1.0 - c + c * (n - x) as f64)).collect();
                let v = (1..=n).map(|x| c / bp * (1.0 - a + a * (x - 1) as f64)).collect();
                (ClosedFormBranch::Linear, u, v)
            }
        }
    };
    let lm = 1.0 - p.c_minus().unwrap_or(1.0);
    let rp = 1.0 - p.c_plus().unwrap_or(1.0);
    let rho = u.iter().zip(v.iter()).map(|(u, v)| u * lm + v * rp).collect();
    Ok(GdcpClosedForm { constants: k, branch, b_n, b_n_prime, u, v, rho })
}

/// Solves w_1 = a + b̃ w_2, w_x = A/2 (w_{x−1} + w_{x+1}), w_N = c + d̃ w_{N−1}
/// through the coefficients (p, q) or (p', q') of its general solution.
pub fn solve_boundary_recurrence(a: f64, c: f64, params: &GdcpParams, n: usize) -> Result<Vec<f64>> {
    require_annihilating(params)?;
    if n < 2 {
        return Err(Error::InvalidParameter("recurrence needs N ≥ 2".into()));
    }
    let k = RecurrenceConstants::new(params);
    let (b, d) = (k.b_t, k.d_t);
    let ni = n as i64;
    if k.exponential() {
        let (rm, rp) = (k.r_minus, k.r_plus);
        let bn = k.b_n(n);
        if bn == 0.0 {
            return Err(Error::Degenerate("B_N = 0".into()));
        }
        let q = (c * rm * (1.0 - b * rm) + a * powi(rm, ni) * (d / rm - 1.0)) / bn;
        let p = (a * (1.0 - d / rp) + c * powi(rp, 1 - ni) * (b * rp - 1.0)) / bn;
        // q carries the factor r_+^{−N}
        Ok((1..=ni).map(|x| p * powi(rm, x) + q * powi(rp, x - ni)).collect())
    } else {
        let closed_left = (1.0 - b).abs() < 1e-15;
        let closed_right = (1.0 - d).abs() < 1e-15;
        let (pp, qq) = match (closed_left, closed_right) {
            (true, true) => {
                if a != 0.0 || c != 0.0 {
                    return Err(Error::Degenerate("closed boundaries with a source term".into()));
                }
                (0.0, 0.0)
            }
            (true, false) => (c / (1.0 - d), 0.0),
            (false, true) => (a / (1.0 - b), 0.0),
            (false, false) => {
                let bp = k.b_n_prime(n);
                if bp == 0.0 {
                    return Err(Error::Degenerate("B'_N = 0".into()));
                }
                let q = (c * (1.0 - b) - a * (1.0 - d)) / bp;
                let p = (a * ((1.0 - d) * n as f64 + d) + c * (2.0 * b - 1.0)) / bp;
                (p, q)
            }
        };
        Ok((1..=n).map(|x| pp + qq * x as f64).collect())
    }
}

/// max |residual| of the three-part recurrence for a candidate `w`.
pub fn recurrence_residual(a: f64, c: f64, params: &GdcpParams, w: &[f64]) -> f64 {
    let k = RecurrenceConstants::new(params);
    let n = w.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut r = (w[0] - a - k.b_t * w[1]).abs();
    r = r.max((w[n - 1] - c - k.d_t * w[n - 2]).abs());
    for x in 1..n - 1 {
        r = r.max((w[x] - 0.5 * k.a * (w[x - 1] + w[x + 1])).abs());
    }
    r
}

/// lim_{N→∞} ρ_1([sN]): zero when μ_2 > 0, otherwise the line joining the
/// reservoir densities α̃/(α̃+γ̃) and δ̃/(β̃+δ̃).
pub fn bulk_density(p: &GdcpParams, s: f64) -> Result<f64> {
    require_annihilating(p)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s = {s} not in (0,1)")));
    }
    if p.mu2 > 0.0 {
        return Ok(0.0);
    }
    let left = if p.alpha + p.gamma > 0.0 { p.alpha / (p.alpha + p.gamma) } else { 0.0 };
    let right = if p.beta + p.delta > 0.0 { p.delta / (p.beta + p.delta) } else { 0.0 };
    Ok(left * (1.0 - s) + right * s)
}

/// Open symmetric exclusion whose centered one-point equations coincide with
/// those of the generalized process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsepMapping {
    pub diffusion: f64,
    /// α̂ + γ̂.
    pub left_sum: f64,
    /// β̂ + δ̂.
    pub right_sum: f64,
}

impl SsepMapping {
    pub fn new(p: &GdcpParams) -> Self {
        Self {
            diffusion: p.diffusion + p.lambda,
            left_sum: p.alpha + p.gamma - p.mu2,
            right_sum: p.beta + p.delta - p.mu2,
        }
    }

    /// Some boundary sum is negative, so no exclusion process realizes it.
    pub fn has_negative_rate(&self) -> bool {
        self.left_sum < 0.0 || self.right_sum < 0.0
    }
}

/// Boundary sum at one of the two values admitting a reflected-wave solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialBoundary {
    /// Sum equal to μ_2 (reflecting exclusion boundary).
    Reflecting,
    /// Sum equal to μ_2 + 𝒟 + λ.
    Matched,
}

fn special_boundary(sum: f64, p: &GdcpParams) -> Option<SpecialBoundary> {
    let scale = 1.0 + p.mu2 + p.diffusion + p.lambda;
    if (sum - p.mu2).abs() <= 1e-12 * scale {
        Some(SpecialBoundary::Reflecting)
    } else if (sum - p.mu2 - p.diffusion - p.lambda).abs() <= 1e-12 * scale {
        Some(SpecialBoundary::Matched)
    } else {
        None
    }
}

/// Detects the four boundary combinations with known Fourier solutions.
pub fn special_case(p: &GdcpParams) -> Option<(SpecialBoundary, SpecialBoundary)> {
    Some((special_boundary(p.alpha + p.gamma, p)?, special_boundary(p.beta + p.delta, p)?))
}

/// Operator K of d g/dt = K g for g = e^{2μ_2 t}(⟨η⟩ − ρ_1); symmetric.
pub fn centered_operator(p: &GdcpParams, n: usize) -> DMatrix<f64> {
    let hop = p.diffusion + p.lambda;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for x in 0..n.saturating_sub(1) {
        k[(x, x + 1)] += hop;
        k[(x + 1, x)] += hop;
        k[(x, x)] -= hop + p.mu2;
        k[(x + 1, x + 1)] -= hop + p.mu2;
    }
    k[(0, 0)] -= p.alpha + p.gamma;
    k[(n - 1, n - 1)] -= p.beta + p.delta;
    for x in 0..n {
        k[(x, x)] += 2.0 * p.mu2;
    }
    k
}

/// Inhomogeneous right-hand side M⟨η⟩ + b of the uncentered equations.
pub fn one_point_drift(p: &GdcpParams, eta: &[f64]) -> Vec<f64> {
    let n = eta.len();
    let k = centered_operator(p, n);
    let v = DVector::from_column_slice(eta);
    let mut out: Vec<f64> = (&k * v).iter().map(|x| *x).collect();
    for (o, e) in out.iter_mut().zip(eta.iter()) {
        *o -= 2.0 * p.mu2 * e;
    }
    out[0] += p.alpha;
    out[n - 1] += p.delta;
    out
}

/// Sampled trajectory of ⟨η_x(t)⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct GdcpEvolution {
    pub times: Vec<f64>,
    pub profiles: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub mapping: SsepMapping,
    pub special_case: Option<(SpecialBoundary, SpecialBoundary)>,
}

impl GdcpEvolution {
    pub fn final_profile(&self) -> &[f64] {
        self.profiles.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Evolves ⟨η_x⟩ from `init` to time `t`, sampled every `dt` and at `t`.
/// The centered variable is propagated with the symmetric eigendecomposition
/// of [`centered_operator`].
pub fn evolve_one_point(p: &GdcpParams, init: &[f64], t: f64, dt: f64) -> Result<GdcpEvolution> {
    require_annihilating(p)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let n = init.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty profile".into()));
    }
    let rho = one_point_closed_form(p, n)?.rho;
    let eig = centered_operator(p, n).symmetric_eigen();
    let g0 = DVector::from_iterator(n, init.iter().zip(rho.iter()).map(|(a, b)| a - b));
    let coeff = eig.eigenvectors.transpose() * g0;
    let mut times = Vec::new();
    let steps = libm::floor(t / dt + 1e-9) as usize;
    for s in 0..=steps {
        times.push(s as f64 * dt);
    }
    if times.last().map_or(true, |&l| t - l > 1e-12 * t.max(1.0)) {
        times.push(t);
    }
    let profiles = times
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return init.to_vec();
            }
            let decay = exp(-2.0 * p.mu2 * s);
            let scaled = DVector::from_iterator(n, (0..n).map(|i| coeff[i] * exp(eig.eigenvalues[i] * s)));
            let g = &eig.eigenvectors * scaled;
            (0..n).map(|x| rho[x] + decay * g[x]).collect()
        })
        .collect();
    Ok(GdcpEvolution {
        times,
        profiles,
        stationary: rho,
        mapping: SsepMapping::new(p),
        special_case: special_case(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(a: f64, b: f64, g: f64, d: f64, l: f64, dd: f64, mu2: f64) -> GdcpParams {
        GdcpParams::annihilating(a, b, g, d, l, dd, mu2).unwrap()
    }

    #[test]
    fn roots_identities() {
        let k = RecurrenceConstants::new(&ann(0.5, 0.3, 0.7, 0.2, 1.1, 0.6, 0.4));
        assert!(k.a > 0.0 && k.a < 1.0);
        assert!(k.r_minus < 1.0 && k.r_plus > 1.0);
        assert!((k.r_minus * k.r_plus - 1.0).abs() < 1e-14);
        assert!((k.r_minus + k.r_plus - 2.0 / k.a).abs() < 1e-13);
    }

    #[test]
    fn mu2_zero_cases() {
        let p = ann(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0);
        let f = one_point_closed_form(&p, 5).unwrap();
        assert_eq!(f.branch, ClosedFormBranch::BothClosed);
        assert!(f.rho.iter().all(|&r| r == 0.0));
        let p = ann(0.0, 0.7, 0.0, 0.4, 1.0, 1.0, 0.0);
        let f = one_point_closed_form(&p, 5).unwrap();
        assert_eq!((f.u.clone(), f.v.clone()), (vec![0.0; 5], vec![1.0; 5]));
        let p = ann(0.3, 0.0, 0.9, 0.0, 1.0, 1.0, 0.0);
        let f = one_point_closed_form(&p, 4).unwrap();
        assert_eq!((f.u, f.v), (vec![1.0; 4], vec![0.0; 4]));
    }

    #[test]
    fn rejects_non_annihilating() {
        let p = GdcpParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert!(matches!(one_point_closed_form(&p, 3), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn recurrence_solutions_satisfy_system() {
        for &mu2 in &[0.0, 0.3, 2.0] {
            let p = ann(0.4, 0.8, 0.6, 0.3, 0.9, 1.4, mu2);
            let k = RecurrenceConstants::new(&p);
            for &n in &[2usize, 3, 10, 1000, 10_000] {
                let u = solve_boundary_recurrence(k.a_t, 0.0, &p, n).unwrap();
                let v = solve_boundary_recurrence(0.0, k.c_t, &p, n).unwrap();
                assert!(recurrence_residual(k.a_t, 0.0, &p, &u) < 1e-12, "mu2={mu2} n={n}");
                assert!(recurrence_residual(0.0, k.c_t, &p, &v) < 1e-12);
                if n <= 1000 {
                    let f = one_point_closed_form(&p, n).unwrap();
                    for x in 0..n {
                        assert!((f.u[x] - u[x]).abs() < 1e-12 && (f.v[x] - v[x]).abs() < 1e-12);
                    }
                }
            }
            let zero = solve_boundary_recurrence(0.0, 0.0, &p, 7).unwrap();
            assert!(zero.iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn stationary_profile_is_a_fixed_point() {
        for &mu2 in &[0.0, 0.6] {
            let p = ann(0.4, 0.8, 0.6, 0.3, 0.9, 1.4, mu2);
            for n in 1..=6 {
                let rho = one_point_closed_form(&p, n).unwrap().rho;
                let drift = one_point_drift(&p, &rho);
                assert!(drift.iter().all(|d| d.abs() < 1e-13), "{drift:?}");
            }
        }
    }

    #[test]
    fn bulk_limits() {
        let p = ann(0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 0.0);
        assert!((bulk_density(&p, 0.3).unwrap() - 0.5).abs() < 1e-15);
        assert!(bulk_density(&p, 1.0).is_err());
        let p = ann(0.9, 0.6, 0.3, 0.2, 1.0, 1.0, 0.0);
        // right end carries the injection share δ̃/(β̃+δ̃)
        assert!((bulk_density(&p, 1.0 - 1e-12).unwrap() - 0.25).abs() < 1e-9);
        let mut last = f64::INFINITY;
        for &n in &[10usize, 100, 1000] {
            let rho = one_point_closed_form(&p, n).unwrap().rho;
            let err = (1..=n)
                .map(|x| (rho[x - 1] - bulk_density(&p, (x as f64 - 0.5) / n as f64).unwrap()).abs())
                .fold(0.0f64, f64::max);
            assert!(err < last && err * (n as f64) < 5.0, "n={n} err={err}");
            last = err;
        }
        let p = ann(0.9, 0.2, 0.3, 0.6, 1.0, 1.0, 0.2);
        for &n in &[10usize, 100, 1000] {
            let rho = one_point_closed_form(&p, n).unwrap().rho;
            assert!(rho[n / 2] < powi(0.9, n as i64 / 4));
        }
    }

    #[test]
    fn evolution_fixed_point_and_linearity() {
        let p = ann(0.4, 0.8, 0.6, 0.3, 0.9, 1.4, 0.5);
        let rho = one_point_closed_form(&p, 4).unwrap().rho;
        let e = evolve_one_point(&p, &rho, 3.0, 0.5).unwrap();
        assert_eq!(e.times.len(), 7);
        for prof in &e.profiles {
            for x in 0..4 {
                assert!((prof[x] - rho[x]).abs() < 1e-12);
            }
        }
        let a = [0.1, 0.9, 0.3, 0.7];
        let b = [0.5, 0.2, 0.8, 0.0];
        let mix: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| 0.3 * x + 0.7 * y).collect();
        let ea = evolve_one_point(&p, &a, 1.3, 1.3).unwrap();
        let eb = evolve_one_point(&p, &b, 1.3, 1.3).unwrap();
        let em = evolve_one_point(&p, &mix, 1.3, 1.3).unwrap();
        for x in 0..4 {
            let lin = 0.3 * ea.final_profile()[x] + 0.7 * eb.final_profile()[x];
            assert!((lin - em.final_profile()[x]).abs() < 1e-12);
        }
        assert_eq!(evolve_one_point(&p, &a, 0.0, 0.1).unwrap().final_profile(), &a);
        assert!(evolve_one_point(&p, &a, 1.0, 0.0).is_err());
    }

    #[test]
    fn special_cases_detected() {
        let p = ann(0.2, 0.1, 0.3, 0.4, 1.0, 1.0, 0.5);
        assert_eq!(special_case(&p), Some((SpecialBoundary::Reflecting, SpecialBoundary::Reflecting)));
        let p = ann(1.0, 0.1, 1.5, 0.4, 1.0, 1.0, 0.5);
        assert_eq!(special_case(&p), Some((SpecialBoundary::Matched, SpecialBoundary::Reflecting)));
        assert!(SsepMapping::new(&ann(0.1, 0.1, 0.1, 0.1, 1.0, 1.0, 0.5)).has_negative_rate());
    }
}
