//! Configurations on Λ_N = {1..N}, parameter records and 1-based state indexing.
//!
//! Site `k` of an `N`-site configuration lives at bit `N - k` of the word, so the
//! 1-based index of a configuration is `1 + word`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest lattice handled by the exact (2^N-state) routes.
pub const MAX_EXACT_SITES: usize = 20;
/// Largest lattice representable by [`Configuration`].
pub const MAX_WORD_SITES: usize = 63;

/// Occupation word η = (η_1, …, η_N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    n: usize,
    word: u64,
}

impl Configuration {
    /// All sites empty.
    pub fn empty(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self { n, word: 0 })
    }

    /// All sites occupied.
    pub fn full(n: usize) -> Result<Self> {
        check_size(n)?;
        Ok(Self { n, word: (1u64 << n) - 1 })
    }

    /// Builds η from a sequence of 0/1 entries (η_1 first).
    pub fn from_sites(sites: &[u8]) -> Result<Self> {
        let n = sites.len();
        check_size(n)?;
        let mut word = 0u64;
        for (k, &s) in sites.iter().enumerate() {
            match s {
                0 => {}
                1 => word |= 1 << (n - 1 - k),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "site {} holds {s}, expected 0 or 1",
                        k + 1
                    )))
                }
            }
        }
        Ok(Self { n, word })
    }

    /// Configuration with exactly the listed sites occupied.
    pub fn from_occupied(n: usize, sites: &[usize]) -> Result<Self> {
        let mut c = Self::empty(n)?;
        for &x in sites {
            c.check_site(x)?;
            c.word |= c.mask(x);
        }
        Ok(c)
    }

    /// Raw word constructor; bits above `n` must be clear.
    pub fn from_word(n: usize, word: u64) -> Result<Self> {
        check_size(n)?;
        if n < 64 && word >> n != 0 {
            return Err(Error::InvalidParameter(format!("word {word:#x} has bits beyond {n} sites")));
        }
        Ok(Self { n, word })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.word == 0
    }

    pub fn word(&self) -> u64 {
        self.word
    }

    /// η_x for x ∈ 1..=N.
    pub fn get(&self, x: usize) -> Result<bool> {
        self.check_site(x)?;
        Ok(self.word & self.mask(x) != 0)
    }

    /// η_x without bounds checking beyond a debug assertion.
    #[inline]
    pub(crate) fn occ(&self, x: usize) -> bool {
        debug_assert!(x >= 1 && x <= self.n);
        self.word & self.mask(x) != 0
    }

    pub fn sites(&self) -> Vec<u8> {
        (1..=self.n).map(|x| self.occ(x) as u8).collect()
    }

    /// Occupied sites in increasing order (the set A(η)).
    pub fn occupied(&self) -> Vec<usize> {
        (1..=self.n).filter(|&x| self.occ(x)).collect()
    }

    pub fn particle_count(&self) -> u32 {
        self.word.count_ones()
    }

    /// 1-based index `1 + Σ 2^{N-k} η_k`.
    pub fn index(&self) -> u64 {
        self.word + 1
    }

    pub fn flip(&self, x: usize) -> Result<Self> {
        self.check_site(x)?;
        Ok(Self { n: self.n, word: self.word ^ self.mask(x) })
    }

    /// η^{x,y}: moves the particle at x to y when η_x(1-η_y) = 1, else unchanged.
    pub fn jump(&self, x: usize, y: usize) -> Result<Self> {
        self.check_site(x)?;
        self.check_site(y)?;
        if self.occ(x) && !self.occ(y) {
            Ok(Self { n: self.n, word: self.word ^ self.mask(x) ^ self.mask(y) })
        } else {
            Ok(*self)
        }
    }

    #[inline]
    fn mask(&self, x: usize) -> u64 {
        1u64 << (self.n - x)
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x == 0 || x > self.n {
            Err(Error::SiteOutOfRange { site: x, n: self.n })
        } else {
            Ok(())
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_WORD_SITES {
        Err(Error::InvalidParameter(format!("lattice size {n} outside 1..={MAX_WORD_SITES}")))
    } else {
        Ok(())
    }
}

/// Rejects sizes beyond [`MAX_EXACT_SITES`].
pub fn check_exact_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("lattice size must be at least 1".into()));
    }
    if n > MAX_EXACT_SITES {
        return Err(Error::TooManySites { n, cap: MAX_EXACT_SITES });
    }
    Ok(())
}

/// 1-based index of a configuration.
pub fn index_of(config: &Configuration) -> u64 {
    config.index()
}

/// Inverse of [`index_of`].
pub fn config_of(index: u64, n: usize) -> Result<Configuration> {
    check_size(n)?;
    let max = 1u64 << n;
    if index == 0 || index > max {
        return Err(Error::IndexOutOfRange { index, max });
    }
    Ok(Configuration { n, word: index - 1 })
}

pub fn flip(config: &Configuration, x: usize) -> Result<Configuration> {
    config.flip(x)
}

pub fn jump(config: &Configuration, x: usize, y: usize) -> Result<Configuration> {
    config.jump(x, y)
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        Err(Error::InvalidParameter(format!("{name} = {v} must be finite and nonnegative")))
    } else {
        Ok(())
    }
}

/// Left density γ/(α+γ) style ratio; `None` when both rates vanish.
fn reservoir_ratio(remove: f64, insert: f64) -> Option<f64> {
    let s = remove + insert;
    if s > 0.0 {
        Some(remove / s)
    } else {
        None
    }
}

/// Open diffusive contact process rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcpParams {
    /// Left insertion.
    pub alpha: f64,
    /// Right removal.
    pub beta: f64,
    /// Left removal.
    pub gamma: f64,
    /// Right insertion.
    pub delta: f64,
    /// Infection rate per occupied neighbour.
    pub lambda: f64,
    /// Stirring rate.
    pub diffusion: f64,
}

impl DcpParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64, lambda: f64, diffusion: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma, delta, lambda, diffusion };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("alpha", self.alpha)?;
        check_rate("beta", self.beta)?;
        check_rate("gamma", self.gamma)?;
        check_rate("delta", self.delta)?;
        check_rate("lambda", self.lambda)?;
        check_rate("diffusion", self.diffusion)?;
        if self.lambda <= 0.0 {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        Ok(())
    }

    /// c_− = γ/(α+γ).
    pub fn c_minus(&self) -> Option<f64> {
        reservoir_ratio(self.gamma, self.alpha)
    }

    /// c_+ = β/(β+δ).
    pub fn c_plus(&self) -> Option<f64> {
        reservoir_ratio(self.beta, self.delta)
    }
}

/// Generalized diffusive contact process rates; boundary fields carry the
/// tilde rates α̃, β̃, γ̃, δ̃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdcpParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub diffusion: f64,
    /// Death rate contributed by a bond whose other end is empty.
    pub mu1: f64,
    /// Death rate contributed by a bond whose other end is occupied.
    pub mu2: f64,
}

impl GdcpParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        lambda: f64,
        diffusion: f64,
        mu1: f64,
        mu2: f64,
    ) -> Result<Self> {
        let p = Self { alpha, beta, gamma, delta, lambda, diffusion, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with μ_1 = λ + μ_2 (annihilating dual).
    pub fn annihilating(
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        lambda: f64,
        diffusion: f64,
        mu2: f64,
    ) -> Result<Self> {
        Self::new(alpha, beta, gamma, delta, lambda, diffusion, lambda + mu2, mu2)
    }

    /// DCP embedded as a GDCP: μ_1 = μ_2 = 1/2, γ̃ = γ + 1/2, β̃ = β + 1/2.
    pub fn from_dcp(p: &DcpParams) -> Self {
        Self {
            alpha: p.alpha,
            beta: p.beta + 0.5,
            gamma: p.gamma + 0.5,
            delta: p.delta,
            lambda: p.lambda,
            diffusion: p.diffusion,
            mu1: 0.5,
            mu2: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("alpha", self.alpha)?;
        check_rate("beta", self.beta)?;
        check_rate("gamma", self.gamma)?;
        check_rate("delta", self.delta)?;
        check_rate("lambda", self.lambda)?;
        check_rate("diffusion", self.diffusion)?;
        check_rate("mu1", self.mu1)?;
        check_rate("mu2", self.mu2)
    }

    /// Exact test μ_1 = λ + μ_2.
    pub fn is_annihilating(&self) -> bool {
        self.mu1 == self.lambda + self.mu2
    }

    /// c̃_− = γ̃/(α̃+γ̃).
    pub fn c_minus(&self) -> Option<f64> {
        reservoir_ratio(self.gamma, self.alpha)
    }

    /// c̃_+ = β̃/(β̃+δ̃).
    pub fn c_plus(&self) -> Option<f64> {
        reservoir_ratio(self.beta, self.delta)
    }
}

/// Lattice SIR rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams {
    /// Infection rate across an I–S bond.
    pub beta_inf: f64,
    /// Recovery rate.
    pub gamma_rec: f64,
}

impl SirParams {
    pub fn new(beta_inf: f64, gamma_rec: f64) -> Result<Self> {
        let p = Self { beta_inf, gamma_rec };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("beta_inf", self.beta_inf)?;
        check_rate("gamma_rec", self.gamma_rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_examples() {
        assert_eq!(index_of(&Configuration::from_sites(&[0, 1]).unwrap()), 2);
        assert_eq!(index_of(&Configuration::from_sites(&[0, 0, 0]).unwrap()), 1);
        assert_eq!(index_of(&Configuration::from_sites(&[1, 0, 1]).unwrap()), 6);
    }

    #[test]
    fn config_examples() {
        assert_eq!(config_of(4, 2).unwrap().sites(), [1, 1]);
        assert_eq!(config_of(1, 5).unwrap().sites(), [0, 0, 0, 0, 0]);
        assert_eq!(config_of(6, 3).unwrap().sites(), [1, 0, 1]);
        assert!(matches!(config_of(0, 3), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(config_of(9, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn move_examples() {
        let c = Configuration::from_sites(&[0, 1]).unwrap();
        assert_eq!(flip(&c, 1).unwrap().sites(), [1, 1]);
        let c = Configuration::from_sites(&[1, 0]).unwrap();
        assert_eq!(jump(&c, 1, 2).unwrap().sites(), [0, 1]);
        let c = Configuration::from_sites(&[1, 1]).unwrap();
        assert_eq!(jump(&c, 1, 2).unwrap().sites(), [1, 1]);
        assert!(matches!(flip(&c, 3), Err(Error::SiteOutOfRange { site: 3, n: 2 })));
        assert!(matches!(jump(&c, 0, 1), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn index_roundtrip_exhaustive() {
        for n in 1..=12 {
            for i in 1..=(1u64 << n) {
                let c = config_of(i, n).unwrap();
                assert_eq!(index_of(&c), i);
                assert_eq!(Configuration::from_sites(&c.sites()).unwrap(), c);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(DcpParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(DcpParams::new(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(DcpParams::new(f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let p = DcpParams::new(1.0, 3.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.c_minus(), Some(0.5));
        assert_eq!(p.c_plus(), Some(0.75));
        let g = GdcpParams::annihilating(1.0, 1.0, 1.0, 1.0, 0.7, 1.0, 0.3).unwrap();
        assert!(g.is_annihilating());
        assert!(SirParams::new(0.0, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn flip_is_involution(n in 1usize..16, w in any::<u64>(), x in 1usize..16) {
            let c = Configuration::from_word(n, w & ((1 << n) - 1)).unwrap();
            let x = 1 + (x - 1) % n;
            let f = c.flip(x).unwrap();
            prop_assert_eq!(f.flip(x).unwrap(), c);
            let d = f.particle_count() as i64 - c.particle_count() as i64;
            prop_assert_eq!(d.abs(), 1);
        }

        #[test]
        fn jump_conserves_particles(n in 2usize..16, w in any::<u64>(), x in 1usize..16, y in 1usize..16) {
            let c = Configuration::from_word(n, w & ((1 << n) - 1)).unwrap();
            let (x, y) = (1 + (x - 1) % n, 1 + (y - 1) % n);
            prop_assert_eq!(c.jump(x, y).unwrap().particle_count(), c.particle_count());
        }
    }
}
