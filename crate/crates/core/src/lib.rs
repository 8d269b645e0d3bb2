//! Large deviations of empirical averages for quantum spin systems at high
//! temperature: exact finite-volume computations, a polymer/cluster
//! expansion of the generating function with Kotecký–Preiss certificates,
//! level-1 and level-2 rate functions, and Golden–Thompson comparisons.

pub mod error;
pub mod exact;
pub mod ldp;
pub mod level2;
pub mod model;
pub mod opalg;
pub mod polymer;
pub mod random;

pub use error::{Error, Result};
pub use model::{BaseInteraction, Certificate, LatticeBox, Model, Potential, Site};
pub use opalg::{DiscreteMeasure, Operator, PolarParts, SpectralDecomposition, C64};
pub use polymer::{ClusterExpansion, DegreeCaps, TruncatedSeries};

/// Resource limits shared by the exact and expansion engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Largest Hilbert-space dimension handled by exact diagonalization.
    pub max_dim: usize,
    /// Largest number of polymers in one cluster.
    pub max_ursell: usize,
    /// Largest number of clusters (and polymer sequences) kept in memory.
    pub max_clusters: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_dim: 4096,
            max_ursell: 8,
            max_clusters: 2_000_000,
        }
    }
}

impl Caps {
    /// Returns site_dim^n_sites or a cap error.
    pub fn check_dim(&self, site_dim: usize, n_sites: usize) -> Result<usize> {
        let mut dim: usize = 1;
        for _ in 0..n_sites {
            dim = dim.saturating_mul(site_dim);
            if dim > self.max_dim {
                return Err(Error::CapExceeded(format!(
                    "dimension {}^{} exceeds {}",
                    site_dim, n_sites, self.max_dim
                )));
            }
        }
        Ok(dim)
    }
}
