use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::lattice::SirParams;

/// Single-site SIR state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SirState {
    S,
    I,
    R,
}

impl SirState {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'S' | 's' => Ok(SirState::S),
            'I' | 'i' => Ok(SirState::I),
            'R' | 'r' => Ok(SirState::R),
            _ => Err(Error::InvalidParameter(format!("unknown SIR state '{c}'"))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            SirState::S => 'S',
            SirState::I => 'I',
            SirState::R => 'R',
        }
    }
}

/// SIR configuration on ℤ: explicit states on a window, a frozen state outside.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SirConfiguration {
    lo: i64,
    states: Vec<SirState>,
    outside: SirState,
}

impl SirConfiguration {
    /// `states[k]` is the state of site `lo + k`; `outside` must be S or R.
    pub fn new(lo: i64, states: Vec<SirState>, outside: SirState) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::WindowTooSmall("empty window".into()));
        }
        if outside == SirState::I {
            return Err(Error::InvalidParameter("exterior cannot be infected".into()));
        }
        Ok(Self { lo, states, outside })
    }

    /// Parses a string such as `"RSI"` placed at `lo`.
    pub fn parse(lo: i64, s: &str, outside: SirState) -> Result<Self> {
        let states = s.chars().map(SirState::from_char).collect::<Result<Vec<_>>>()?;
        Self::new(lo, states, outside)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.states.len() as i64 - 1
    }

    pub fn window(&self) -> RangeInclusive<i64> {
        self.lo..=self.hi()
    }

    pub fn outside(&self) -> SirState {
        self.outside
    }

    pub fn states(&self) -> &[SirState] {
        &self.states
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.lo && x <= self.hi()
    }

    /// State at site `x`, the exterior state outside the window.
    #[inline]
    pub fn get(&self, x: i64) -> SirState {
        if self.contains(x) {
            self.states[(x - self.lo) as usize]
        } else {
            self.outside
        }
    }

    pub fn set(&mut self, x: i64, s: SirState) -> Result<()> {
        if !self.contains(x) {
            return Err(Error::WindowTooSmall(format!("site {x} outside {:?}", self.window())));
        }
        self.states[(x - self.lo) as usize] = s;
        Ok(())
    }

    /// Indicator η^a_x.
    pub fn indicator(&self, x: i64, a: SirState) -> bool {
        self.get(x) == a
    }

    /// Infected sites in the window.
    pub fn infected(&self) -> Vec<i64> {
        self.window().filter(|&x| self.get(x) == SirState::I).collect()
    }

    /// Base-3 index of the window states (S=0, I=1, R=2), first site least significant.
    pub fn window_index(&self) -> u64 {
        self.states.iter().rev().fold(0u64, |acc, s| acc * 3 + *s as u64)
    }

    /// Inverse of [`Self::window_index`].
    pub fn from_window_index(lo: i64, len: usize, mut idx: u64, outside: SirState) -> Result<Self> {
        let mut states = Vec::with_capacity(len);
        for _ in 0..len {
            states.push(match idx % 3 {
                0 => SirState::S,
                1 => SirState::I,
                _ => SirState::R,
            });
            idx /= 3;
        }
        Self::new(lo, states, outside)
    }

    /// Length of the longest maximal S-run whose right neighbour is I;
    /// `None` when such a run is unbounded.
    pub fn longest_s_run_before_infected(&self) -> Option<u64> {
        let mut best = 0u64;
        let mut run = 0u64;
        let mut run_unbounded = self.outside == SirState::S;
        for &s in &self.states {
            match s {
                SirState::S => run += 1,
                SirState::I => {
                    if run_unbounded {
                        return None;
                    }
                    best = best.max(run);
                    run = 0;
                }
                SirState::R => {
                    run = 0;
                    run_unbounded = false;
                }
            }
            if s != SirState::S {
                run_unbounded = false;
            }
        }
        Some(best)
    }
}

/// Every transition of the SIR dynamics whose source and target both lie in
/// the window: recovery I→R at γ, infection of an S neighbour at β.
pub fn sir_window_transitions(params: &SirParams, eta: &SirConfiguration) -> Vec<(SirConfiguration, f64)> {
    let mut out = Vec::new();
    for x in eta.window() {
        if eta.get(x) != SirState::I {
            continue;
        }
        if params.gamma_rec > 0.0 {
            let mut e = eta.clone();
            e.states[(x - e.lo) as usize] = SirState::R;
            out.push((e, params.gamma_rec));
        }
        if params.beta_inf > 0.0 {
            for y in [x - 1, x + 1] {
                if eta.contains(y) && eta.get(y) == SirState::S {
                    let mut e = eta.clone();
                    e.states[(y - e.lo) as usize] = SirState::I;
                    out.push((e, params.beta_inf));
                }
            }
        }
    }
    out
}

/// Cluster family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClusterKind {
    /// I at r−1, S on [r, r+n−1], I at r+n.
    G,
    /// R at r−1, S on [r, r+n−1], I at r+n.
    J,
    /// S on [r, r+n−1], I at r+n.
    H,
}

/// Cluster indicator of `eta` at `(r, n)`.
pub fn cluster_indicator(eta: &SirConfiguration, r: i64, n: u32, kind: ClusterKind) -> Result<bool> {
    if n < 1 {
        return Err(Error::InvalidParameter("cluster length must be at least 1".into()));
    }
    Ok(cluster_indicator_unchecked(eta, r, n, kind))
}

#[inline]
pub(crate) fn cluster_indicator_unchecked(eta: &SirConfiguration, r: i64, n: u32, kind: ClusterKind) -> bool {
    let n = n as i64;
    if eta.get(r + n) != SirState::I {
        return false;
    }
    if !(r..r + n).all(|x| eta.get(x) == SirState::S) {
        return false;
    }
    match kind {
        ClusterKind::G => eta.get(r - 1) == SirState::I,
        ClusterKind::J => eta.get(r - 1) == SirState::R,
        ClusterKind::H => true,
    }
}
