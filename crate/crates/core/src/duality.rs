//! Duality functions and numerical checks of the duality identities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generator::{
    build_dual, sir_dual_transitions, DualConfiguration, DualSpace, Layer, LatticeModel, SirDualState,
};
use crate::lattice::{check_exact_size, Configuration, SirParams};
use crate::math::powi;
use crate::sir::{cluster_indicator_unchecked, sir_window_transitions, ClusterKind, SirConfiguration};
use crate::sparse::SparseGenerator;

/// D(η, (m, ξ, n)) = c_−^m Π_x (1 − η_x)^{ξ_x} c_+^n.
#[inline]
pub fn duality_value(c_minus: f64, c_plus: f64, eta: &Configuration, z: &DualConfiguration) -> f64 {
    if eta.word() & z.sites.word() != 0 {
        return 0.0;
    }
    powi(c_minus, z.left_sink as i64) * powi(c_plus, z.right_sink as i64)
}

/// Dense duality matrix; the overflow column is zero.
#[derive(Debug, Clone)]
pub struct DualityMatrix {
    pub space: DualSpace,
    pub c_minus: f64,
    pub c_plus: f64,
    pub values: DMatrix<f64>,
}

pub fn duality_matrix(model: &LatticeModel, n: usize, cap: usize) -> Result<DualityMatrix> {
    model.validate()?;
    let (cm, cp) = model.duality_constants();
    let c_minus = cm.ok_or_else(|| Error::InvalidParameter("alpha + gamma = 0: c_minus undefined".into()))?;
    let c_plus = cp.ok_or_else(|| Error::InvalidParameter("beta + delta = 0: c_plus undefined".into()))?;
    let space = DualSpace::new(n, cap)?;
    let rows = 1usize << n;
    let mut values = DMatrix::zeros(rows, space.dim());
    for j in 0..space.overflow_index() {
        let z = space.config_at(j).unwrap();
        for w in 0..rows as u64 {
            let eta = Configuration::from_word(n, w)?;
            values[(w as usize, j)] = duality_value(c_minus, c_plus, &eta, &z);
        }
    }
    Ok(DualityMatrix { space, c_minus, c_plus, values })
}

/// max over η and ζ ∈ `restriction` of |(L D)(η, ζ) − (D L_dualᵀ)(η, ζ)|.
pub fn check_matrix_duality(
    l: &SparseGenerator,
    ldual: &SparseGenerator,
    d: &DMatrix<f64>,
    restriction: &[usize],
) -> Result<f64> {
    if d.nrows() != l.dim() || d.ncols() != ldual.dim() {
        return Err(Error::DimensionMismatch(format!(
            "L is {0}x{0}, L_dual is {1}x{1}, D is {2}x{3}",
            l.dim(),
            ldual.dim(),
            d.nrows(),
            d.ncols()
        )));
    }
    if let Some(&j) = restriction.iter().find(|&&j| j >= ldual.dim()) {
        return Err(Error::DimensionMismatch(format!("restricted column {j} outside dual space")));
    }
    let rows = l.dim();
    let mut lhs = vec![0.0; rows];
    let mut rhs = vec![0.0; rows];
    let mut worst = 0.0f64;
    for &z in restriction {
        let col = d.column(z);
        l.mul_vec(col.as_slice(), &mut lhs);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = ldual.diagonal(z) * d[(i, z)];
        }
        for (z2, rate) in ldual.row(z) {
            for (i, r) in rhs.iter_mut().enumerate() {
                *r += rate * d[(i, z2)];
            }
        }
        for i in 0..rows {
            worst = worst.max((lhs[i] - rhs[i]).abs());
        }
    }
    Ok(worst)
}

/// Outcome of a DCP/GDCP matrix-duality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeDualityReport {
    pub residual: f64,
    /// Number of dual columns compared.
    pub columns: usize,
}

/// Builds L, L_dual and D for `model` on `n` sites and checks L D = D L_dualᵀ
/// on the columns unaffected by the sink cap.
pub fn check_lattice_duality(model: &LatticeModel, n: usize, cap: usize) -> Result<LatticeDualityReport> {
    let l = model.build_primal(n)?;
    let dual = build_dual(model, n, cap)?;
    let d = duality_matrix(model, n, cap)?;
    let restriction = dual.space.restricted();
    let residual = check_matrix_duality(&l, &dual.generator, &d.values, &restriction)?;
    Ok(LatticeDualityReport { residual, columns: restriction.len() })
}

/// max |L H − H Lᵀ| for a square self-duality matrix H.
pub fn check_self_duality(l: &SparseGenerator, h: &DMatrix<f64>) -> Result<f64> {
    let all: Vec<usize> = (0..l.dim()).collect();
    check_matrix_duality(l, l, h, &all)
}

/// H(η, ξ) = Π_x (1 − η_x)^{ξ_x} over {0,1}^N × {0,1}^N.
pub fn bulk_duality_matrix(n: usize) -> Result<DMatrix<f64>> {
    check_exact_size(n)?;
    let dim = 1usize << n;
    Ok(DMatrix::from_fn(dim, dim, |i, j| if i & j == 0 { 1.0 } else { 0.0 }))
}

/// Boundary of the SSEP used for the parametric self-duality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsepBoundary {
    Closed,
    Periodic,
}

/// SSEP with stirring rate `diffusion` on every bond.
pub fn build_ssep(n: usize, diffusion: f64, boundary: SsepBoundary) -> Result<SparseGenerator> {
    check_exact_size(n)?;
    if !diffusion.is_finite() || diffusion < 0.0 {
        return Err(Error::InvalidParameter(format!("diffusion = {diffusion}")));
    }
    let mut bonds: Vec<(usize, usize)> = (1..n).map(|x| (x, x + 1)).collect();
    if boundary == SsepBoundary::Periodic && n > 2 {
        bonds.push((n, 1));
    }
    let dim = 1usize << n;
    let mut t = Vec::new();
    for w in 0..dim {
        let c = Configuration::from_word(n, w as u64)?;
        for &(x, y) in &bonds {
            if c.occ(x) != c.occ(y) {
                let c2 = c.flip(x)?.flip(y)?;
                t.push((w, c2.word() as usize, diffusion));
            }
        }
    }
    SparseGenerator::from_triplets(dim, t)
}

/// Two-parameter-pair family H̃(η, ξ) = Π_x (a1 + a2 η_x)^{a3 + a4 ξ_x}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricDualityMatrix {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl ParametricDualityMatrix {
    /// Local 2×2 factor G(η_x, ξ_x).
    pub fn local(&self) -> [[f64; 2]; 2] {
        let g = |e: f64, x: f64| libm::pow(self.a1 + self.a2 * e, self.a3 + self.a4 * x);
        [[g(0.0, 0.0), g(0.0, 1.0)], [g(1.0, 0.0), g(1.0, 1.0)]]
    }

    pub fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        check_exact_size(n)?;
        let g = self.local();
        let dim = 1usize << n;
        Ok(DMatrix::from_fn(dim, dim, |i, j| {
            (0..n).map(|b| g[(i >> b) & 1][(j >> b) & 1]).product()
        }))
    }
}

/// Residual of L H̃ = H̃ Lᵀ for the SSEP on `n` sites with unit stirring.
pub fn check_ssep_parametric_duality(p: &ParametricDualityMatrix, n: usize, boundary: SsepBoundary) -> Result<f64> {
    let l = build_ssep(n, 1.0, boundary)?;
    check_self_duality(&l, &p.matrix(n)?)
}

/// d(η, (r, n, layer)); d(η, ∂) = 0.
#[inline]
pub fn sir_duality_value(eta: &SirConfiguration, q: &SirDualState) -> f64 {
    match *q {
        SirDualState::Trap => 0.0,
        SirDualState::Walker { r, n, layer } => {
            let kind = match layer {
                Layer::G => ClusterKind::G,
                Layer::J => ClusterKind::J,
            };
            cluster_indicator_unchecked(eta, r, n, kind) as u8 as f64
        }
    }
}

/// Generator-level check of the SIR duality at `(r, n, layer)`: max over all
/// 3^|window| window configurations of |L^SIR d(·, q)(η) − L^dual d(η, ·)(q)|.
pub fn check_sir_duality(
    window: RangeInclusive<i64>,
    r: i64,
    n: u32,
    layer: Layer,
    params: &SirParams,
) -> Result<f64> {
    params.validate()?;
    if n < 1 {
        return Err(Error::InvalidParameter("cluster length must be at least 1".into()));
    }
    let (lo, hi) = (*window.start(), *window.end());
    if lo > r - 2 || hi < r + n as i64 + 1 {
        return Err(Error::WindowTooSmall(format!(
            "window [{lo}, {hi}] must contain [{}, {}]",
            r - 2,
            r + n as i64 + 1
        )));
    }
    let len = (hi - lo + 1) as usize;
    if len > 16 {
        return Err(Error::InvalidParameter(format!("window of {len} sites is too large to enumerate")));
    }
    let q = SirDualState::Walker { r, n, layer };
    let dual_moves = sir_dual_transitions(params, &q);
    let total = 3u64.pow(len as u32);
    let mut worst = 0.0f64;
    for idx in 0..total {
        let eta = SirConfiguration::from_window_index(lo, len, idx, crate::sir::SirState::R)?;
        let d0 = sir_duality_value(&eta, &q);
        let lhs: f64 = sir_window_transitions(params, &eta)
            .iter()
            .map(|(e2, rate)| rate * (sir_duality_value(e2, &q) - d0))
            .sum();
        let rhs: f64 = dual_moves.iter().map(|(q2, rate)| rate * (sir_duality_value(&eta, q2) - d0)).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::build_dcp;
    use crate::lattice::{DcpParams, GdcpParams};
    use proptest::prelude::*;

    #[test]
    fn duality_value_examples() {
        let p = DcpParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let d = duality_matrix(&LatticeModel::Dcp(p), 2, 2).unwrap();
        let eta = Configuration::from_sites(&[1, 0]).unwrap();
        let z = DualConfiguration::new(1, Configuration::from_sites(&[0, 1]).unwrap(), 0);
        assert_eq!(d.values[(eta.word() as usize, d.space.index_of(&z).unwrap())], 0.5);
        let zero = DualConfiguration::new(0, Configuration::empty(2).unwrap(), 0);
        for w in 0..4 {
            assert_eq!(d.values[(w, d.space.index_of(&zero).unwrap())], 1.0);
        }
        for y in 1..=2 {
            let dy = DualConfiguration::new(0, Configuration::from_occupied(2, &[y]).unwrap(), 0);
            for w in 0..4u64 {
                let e = Configuration::from_word(2, w).unwrap();
                assert_eq!(duality_value(0.5, 0.5, &e, &dy), 1.0 - e.occ(y) as u8 as f64);
            }
        }
        assert!(d.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn duality_matrix_rejects_closed_boundary() {
        let p = DcpParams::new(0.0, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(duality_matrix(&LatticeModel::Dcp(p), 2, 2).is_err());
    }

    #[test]
    fn dcp_two_sites_duality() {
        let p = DcpParams::new(0.3, 1.2, 0.8, 0.4, 1.7, 0.6).unwrap();
        assert!(check_lattice_duality(&LatticeModel::Dcp(p), 2, 6).unwrap().residual < 1e-12);
    }

    #[test]
    fn gdcp_three_sites_duality() {
        let p = GdcpParams::new(0.3, 1.2, 0.8, 0.4, 1.1, 0.6, 0.9, 0.5).unwrap();
        assert!(check_lattice_duality(&LatticeModel::Gdcp(p), 3, 6).unwrap().residual < 1e-12);
    }

    #[test]
    fn closed_bulk_self_duality() {
        for n in 1..=6 {
            let p = DcpParams::new(0.0, 0.0, 0.0, 0.0, 1.3, 0.7).unwrap();
            let l = build_dcp(&p, n).unwrap();
            assert!(check_self_duality(&l, &bulk_duality_matrix(n).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn parametric_family_examples() {
        let cp = ParametricDualityMatrix { a1: 1.0, a2: -1.0, a3: 0.0, a4: 1.0 };
        assert_eq!(cp.matrix(3).unwrap(), bulk_duality_matrix(3).unwrap());
        let c = ParametricDualityMatrix { a1: 1.0, a2: 0.0, a3: 0.0, a4: 0.0 };
        assert_eq!(check_ssep_parametric_duality(&c, 4, SsepBoundary::Closed).unwrap(), 0.0);
        let r = ParametricDualityMatrix { a1: 0.7, a2: 0.9, a3: -0.4, a4: 1.3 };
        assert!(check_ssep_parametric_duality(&r, 4, SsepBoundary::Closed).unwrap() < 1e-10);
        assert!(check_ssep_parametric_duality(&r, 4, SsepBoundary::Periodic).unwrap() < 1e-10);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let l = build_ssep(2, 1.0, SsepBoundary::Closed).unwrap();
        let d = DMatrix::zeros(3, 4);
        assert!(matches!(check_matrix_duality(&l, &l, &d, &[0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sir_examples() {
        let p = SirParams::new(1.0, 1.0).unwrap();
        for r in -1..=1 {
            assert_eq!(check_sir_duality(r - 2..=r + 2, r, 1, Layer::G, &p).unwrap(), 0.0);
        }
        let p = SirParams::new(2.0, 0.5).unwrap();
        assert!(check_sir_duality(-2..=4, 0, 2, Layer::J, &p).unwrap() < 1e-13);
        assert!(matches!(check_sir_duality(-1..=3, 0, 2, Layer::J, &p), Err(Error::WindowTooSmall(_))));
        let all_s = SirConfiguration::parse(-3, "SSSSSSS", crate::sir::SirState::S).unwrap();
        let q = SirDualState::Walker { r: 0, n: 1, layer: Layer::G };
        assert_eq!(sir_duality_value(&all_s, &q), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn raising_cap_never_increases_residual(a in 0.1..2.0, b in 0.1..2.0, g in 0.1..2.0, d in 0.1..2.0, l in 0.1..2.0, dd in 0.0..2.0, n in 1usize..=3) {
            let m = LatticeModel::Dcp(DcpParams::new(a, b, g, d, l, dd).unwrap());
            let r2 = check_lattice_duality(&m, n, 2).unwrap().residual;
            let r3 = check_lattice_duality(&m, n, 3).unwrap().residual;
            prop_assert!(r2 < 1e-12 && r3 < 1e-12);
        }
    }
}
