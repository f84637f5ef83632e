use crate::error::{Error, Result};

/// Basis states of an `n_sites` register with a fixed number of up spins.
#[derive(Clone, Debug)]
pub struct Sector {
    n_sites: usize,
    n_up: usize,
    states: Vec<usize>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Sector {
    pub fn new(n_sites: usize, n_up: usize) -> Self {
        assert!(n_sites <= 24, "sector lookup limited to 24 sites");
        assert!(n_up <= n_sites);
        let dim = 1usize << n_sites;
        let mut lookup = vec![ABSENT; dim];
        let mut states = Vec::new();
        for s in 0..dim {
            if s.count_ones() as usize == n_up {
                lookup[s] = states.len() as u32;
                states.push(s);
            }
        }
        Self {
            n_sites,
            n_up,
            states,
            lookup,
        }
    }

    /// Sector labelled by the σ^z sum M = 2·n_up − N.
    pub fn from_magnetization(n_sites: usize, magnetization: i64) -> Result<Self> {
        let twice_up = magnetization + n_sites as i64;
        if twice_up < 0 || twice_up % 2 != 0 || twice_up / 2 > n_sites as i64 {
            return Err(Error::InvalidParameter(format!(
                "magnetization {magnetization} unattainable on {n_sites} sites"
            )));
        }
        Ok(Self::new(n_sites, (twice_up / 2) as usize))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    /// σ^z sum of every state in the sector.
    pub fn magnetization(&self) -> i64 {
        2 * self.n_up as i64 - self.n_sites as i64
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    #[inline]
    pub fn position(&self, state: usize) -> Option<usize> {
        match self.lookup[state] {
            ABSENT => None,
            p => Some(p as usize),
        }
    }
}
