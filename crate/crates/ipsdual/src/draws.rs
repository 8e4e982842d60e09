//! Reproducible random parameter points.

use ipsdual_core::lattice::{DcpParams, GdcpParams, SirParams};
use ipsdual_core::mc::replica_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Stream used for draw `i` under `seed`; disjoint from simulation streams.
pub fn draw_rng(seed: u64, i: u64) -> ChaCha8Rng {
    replica_rng(seed ^ 0x5eed_d4a3_0000_0000, i)
}

fn rate(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.1..2.0)
}

/// All six rates uniform in [0.1, 2).
pub fn dcp(rng: &mut ChaCha8Rng) -> DcpParams {
    DcpParams::new(rate(rng), rate(rng), rate(rng), rate(rng), rate(rng), rate(rng)).expect("positive rates")
}

/// DCP with the right reservoir closed (β = δ = 0).
pub fn dcp_left_open(rng: &mut ChaCha8Rng) -> DcpParams {
    DcpParams::new(rate(rng), 0.0, rate(rng), 0.0, rate(rng), rate(rng)).expect("positive rates")
}

/// Positive GDCP rates with 𝒟 + μ_1 − μ_2 ≥ 0 and λ + μ_2 − μ_1 ≥ 0.
pub fn gdcp(rng: &mut ChaCha8Rng) -> GdcpParams {
    let (a, b, g, d, l, dd) = (rate(rng), rate(rng), rate(rng), rate(rng), rate(rng), rate(rng));
    let mu2 = rate(rng);
    let lo = (mu2 - dd).max(0.05);
    let mu1 = rng.random_range(lo..(l + mu2));
    GdcpParams::new(a, b, g, d, l, dd, mu1, mu2).expect("positive rates")
}

/// Which boundary rates of an annihilating GDCP draw are switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    Open,
    LeftClosed,
    RightClosed,
    BothClosed,
}

impl BoundaryCase {
    pub const ALL: [BoundaryCase; 4] =
        [BoundaryCase::Open, BoundaryCase::LeftClosed, BoundaryCase::RightClosed, BoundaryCase::BothClosed];
}

/// Annihilating GDCP (μ_1 = λ + μ_2); `mu2_zero` selects the linear branch.
pub fn gdcp_annihilating(rng: &mut ChaCha8Rng, mu2_zero: bool, case: BoundaryCase) -> GdcpParams {
    let (mut a, mut b, mut g, mut d) = (rate(rng), rate(rng), rate(rng), rate(rng));
    let (l, dd) = (rate(rng), rate(rng));
    let mu2 = if mu2_zero { 0.0 } else { rate(rng) };
    if matches!(case, BoundaryCase::LeftClosed | BoundaryCase::BothClosed) {
        a = 0.0;
        g = 0.0;
    }
    if matches!(case, BoundaryCase::RightClosed | BoundaryCase::BothClosed) {
        b = 0.0;
        d = 0.0;
    }
    GdcpParams::annihilating(a, b, g, d, l, dd, mu2).expect("positive rates")
}

pub fn sir(rng: &mut ChaCha8Rng) -> SirParams {
    SirParams::new(rate(rng), rate(rng)).expect("positive rates")
}
