//! Closed forms on one and two sites: stationary laws of the DCP, their fast
//! stirring limits, and left-absorption probabilities of the dual with
//! β = δ = 0.
//!
//! Two-site arrays indexed by configuration use the word order of
//! [`crate::lattice::Configuration`]: index 1 is site 2 alone, index 2 is
//! site 1 alone.

use crate::lattice::DcpParams;
use crate::math::powi;

/// [ν(0), ν(1)] on one site.
pub fn one_site_stationary(p: &DcpParams) -> [f64; 2] {
    let z = 1.0 + p.alpha + p.beta + p.gamma + p.delta;
    [(p.gamma + p.beta + 1.0) / z, (p.alpha + p.delta) / z]
}

/// P_{δ_1}[ξ_0(∞) = 0] on one site with β = δ = 0.
pub fn one_site_no_absorption(alpha: f64, gamma: f64) -> f64 {
    1.0 / (alpha + gamma + 1.0)
}

/// Two-site stationary law in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSiteStationary {
    /// Normalization c(𝒟).
    pub c: f64,
    /// Unnormalized weights in the printed labelling (0,0), (1,0), (0,1), (1,1).
    pub printed: [f64; 4],
}

impl TwoSiteStationary {
    pub fn new(p: &DcpParams) -> Self {
        let (a, b, g, d, l, dd) = (p.alpha, p.beta, p.gamma, p.delta, p.lambda, p.diffusion);
        let s = a + b + g + d;
        let ad = a + d;
        let c = dd * ((s + 2.0) * (s + 2.0) + 2.0 * l * ad)
            + (s + 1.0 + (a + g) * (b + d)) * (s + 2.0)
            + l * ad * (ad + l)
            + l * ((ad + 1.0) * (b + g + 2.0) + (a + g) * (b + 1.0) + (b + d) * (g + 1.0));
        let n00 = dd * (b + g + 2.0) * (b + g + 2.0) + (s + 2.0 + 2.0 * l) * (1.0 + b + g + b * g);
        let n10 = dd * (2.0 + b + g) * ad + (g + 1.0) * (l * ad + d * (s + 2.0));
        let n01 = dd * (2.0 + b + g) * ad + (b + 1.0) * (l * ad + a * (s + 2.0));
        let n11 = dd * ad * (ad + 2.0 * l) + a * d * (2.0 + s) + l * ad * (ad + l + 1.0) + l * (a * b + g * d);
        Self { c, printed: [n00, n10, n01, n11] }
    }

    /// ν by configuration word. The printed (1,0) weight carries the right
    /// injection rate δ, so it belongs to site 2 alone.
    pub fn by_word(&self) -> [f64; 4] {
        let [n00, n10, n01, n11] = self.printed;
        [n00 / self.c, n10 / self.c, n01 / self.c, n11 / self.c]
    }

    /// Sum of the unnormalized weights; equals `c` when the form is consistent.
    pub fn weight_sum(&self) -> f64 {
        self.printed.iter().sum()
    }

    /// Printed moments (x, y, z) = ((1,0)+(1,1), (0,1)+(1,1), (1,1)) / c.
    pub fn printed_moments(&self) -> (f64, f64, f64) {
        let [_, n10, n01, n11] = self.printed;
        ((n10 + n11) / self.c, (n01 + n11) / self.c, n11 / self.c)
    }

    /// (ρ_1(1), ρ_1(2), ρ_2(1,2)) from the weights assigned by word.
    pub fn moments(&self) -> (f64, f64, f64) {
        let nu = self.by_word();
        (nu[2] + nu[3], nu[1] + nu[3], nu[3])
    }
}

/// Printed expanded moments (x, y, z), written out independently of the weights.
pub fn printed_three_points(p: &DcpParams) -> (f64, f64, f64) {
    let (a, b, g, d, l, dd) = (p.alpha, p.beta, p.gamma, p.delta, p.lambda, p.diffusion);
    let ad = a + d;
    let c = TwoSiteStationary::new(p).c;
    let common = dd * ad * (2.0 + b + g + ad + 2.0 * l) + (a * b + d * g) * l;
    let x = common + ad * (l + 2.0 + ad + g) * l + (b + g + ad + 2.0) * d * (g + a + 1.0);
    let y = common + ad * (l + 2.0 + ad + b) * l + (b + 1.0 + d) * a * (2.0 + d + g + b + a);
    let z = dd * ad * (ad + 2.0 * l) + a * d * (2.0 + a + b + g + d) + l * ad * (ad + l + 1.0) + l * (a * b + g * d);
    (x / c, y / c, z / c)
}

/// 𝒟 → ∞ limit of the two-site stationary law, by word, with c(∞).
pub fn two_site_stationary_infinite(p: &DcpParams) -> ([f64; 4], f64) {
    let (a, b, g, d, l) = (p.alpha, p.beta, p.gamma, p.delta, p.lambda);
    let s = a + b + g + d;
    let ad = a + d;
    let c = (s + 2.0) * (s + 2.0) + 2.0 * l * ad;
    let mixed = (2.0 + b + g) * ad / c;
    ([(b + g + 2.0) * (b + g + 2.0) / c, mixed, mixed, ad * (ad + 2.0 * l) / c], c)
}

/// Law of the particle count {0, 1, 2} in the fast stirring limit.
pub fn two_site_count_law_infinite(p: &DcpParams) -> [f64; 3] {
    let (nu, _) = two_site_stationary_infinite(p);
    [nu[0], nu[1] + nu[2], nu[3]]
}

/// Constants of the two-site left-absorption closed forms (β = δ = 0),
/// with s = α + γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionClosedFormN2 {
    pub s: f64,
    pub lambda: f64,
    pub diffusion: f64,
    pub a: f64,
    pub b: f64,
    pub d_tilde: f64,
    pub phi: f64,
    pub psi: f64,
    /// 2𝒟 + s + λ + 1.
    pub e: f64,
    /// 2𝒟 + λ + 1.
    pub f: f64,
}

impl AbsorptionClosedFormN2 {
    pub fn new(alpha: f64, gamma: f64, lambda: f64, diffusion: f64) -> Self {
        let s = alpha + gamma;
        let (l, dd) = (lambda, diffusion);
        let a = (s + 2.0) * (s + 2.0) + 2.0 * l * s;
        let d_tilde = dd * a + s * ((s + l + 2.0) * (l + 1.0) + 1.0) + 2.0 * (l + 1.0);
        let b = s + 2.0 * l + 2.0;
        let phi = dd * b + l * l + l * (s + 2.0) + s + 1.0;
        let e = 2.0 * dd + s + l + 1.0;
        let f = 2.0 * dd + l + 1.0;
        let psi = dd * (s + 2.0) + l + l * (s + 2.0) * e * e / d_tilde;
        Self { s, lambda, diffusion, a, b, d_tilde, phi, psi, e, f }
    }

    /// Determinant of the first-jump matrix M_2.
    pub fn det_m2(&self) -> f64 {
        let (s, l, dd) = (self.s, self.lambda, self.diffusion);
        self.d_tilde / ((dd + l + 1.0) * (s + 2.0) * (dd + s + l + 1.0))
    }

    fn k0(&self) -> [f64; 3] {
        let (s, l, dd, dt) = (self.s, self.lambda, self.diffusion, self.d_tilde);
        [self.f * (s + 2.0) / dt, (4.0 * dd + s + 2.0 * l + 2.0) / dt, self.e * (s + 2.0) / dt]
    }

    fn k1(&self) -> [f64; 3] {
        let (s, l, dd, dt) = (self.s, self.lambda, self.diffusion, self.d_tilde);
        let pre = s * (s + 2.0) / dt;
        [
            pre * (dd + 1.0 + l * (s + 1.0) / (s + 2.0) + l * self.f * self.e / dt),
            pre * (self.f / (s + 2.0) + self.phi * self.e / dt),
            pre * (dd + l / (s + 2.0) + l * self.e * self.e / dt),
        ]
    }

    /// [x_1^k, x_2^k, x_3^k] for initial {1}, {1,2}, {2}; k ≥ 2 uses the
    /// recursion-consistent form s^k ψ λ^{k−2} E^{k−2} [λF, φ, λE] / d̃^k.
    pub fn x(&self, k: usize) -> [f64; 3] {
        match k {
            0 => self.k0(),
            1 => self.k1(),
            _ => {
                let (s, l, e, dt) = (self.s, self.lambda, self.e, self.d_tilde);
                let pre = powi(s / dt, k as i64) * self.psi * powi(l * e, k as i64 - 2);
                [pre * l * self.f, pre * self.phi, pre * l * e]
            }
        }
    }

    /// As printed: the k = 2, 3 displays, then the general display for k > 3.
    pub fn x_quoted(&self, k: usize) -> [f64; 3] {
        let (s, l, e, f, dt, phi, psi) = (self.s, self.lambda, self.e, self.f, self.d_tilde, self.phi, self.psi);
        match k {
            0 | 1 => self.x(k),
            2 => [l * s * s * f * psi / (dt * dt), s * s * phi * psi / (dt * dt), l * s * s * e * psi / (dt * dt)],
            3 => {
                let pre = powi(s, 3) / powi(dt, 3);
                [pre * l * l * f * e * psi, pre * l * e * phi * psi, pre * l * l * e * e * psi]
            }
            _ => {
                let k = k as i64;
                let pre = powi(s, k) / powi(dt, k);
                [
                    pre * powi(l, k - 2) * f * powi(e, k - 3) * phi * psi,
                    pre * powi(l, k - 3) * powi(e, k - 3) * phi * phi * psi,
                    pre * powi(l, k - 2) * powi(e, k - 2) * phi * psi,
                ]
            }
        }
    }

    /// 𝒟 → ∞ limits; k ≥ 2 uses (2λ)^{k−1} s^k (s+2)/A^k (1 + 4λ/A).
    pub fn x_infinite(&self, k: usize) -> [f64; 3] {
        let (s, l, a, b) = (self.s, self.lambda, self.a, self.b);
        match k {
            0 => [2.0 * (s + 2.0) / a, 4.0 / a, 2.0 * (s + 2.0) / a],
            1 => {
                let x1 = s * (s + 2.0) / a * (1.0 + 4.0 * l / a);
                [x1, 2.0 * s / a * (1.0 + b * (s + 2.0) / a), x1]
            }
            _ => {
                let x1 = powi(2.0 * l, k as i64 - 1) * powi(s / a, k as i64) * (s + 2.0) * (1.0 + 4.0 * l / a);
                [x1, b / (2.0 * l) * x1, x1]
            }
        }
    }

    /// Printed limits: the general display for k > 3 has (2λ)^{k−2} B.
    pub fn x_infinite_quoted(&self, k: usize) -> [f64; 3] {
        if k <= 3 {
            return self.x_infinite(k);
        }
        let (s, l, a, b) = (self.s, self.lambda, self.a, self.b);
        let x1 = powi(2.0 * l, k as i64 - 2) * b * powi(s / a, k as i64) * (s + 2.0) * (1.0 + 4.0 * l / a);
        [x1, b / (2.0 * l) * x1, x1]
    }
}
