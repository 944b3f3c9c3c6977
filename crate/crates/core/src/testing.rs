//! Seeded random fields for tests and property checks.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::ops::{dealias_inplace, leray_p};

/// Real random field with i.i.d. Gaussian samples, optionally truncated to
/// the 2/3-rule band.
pub fn random_field(grid: &Arc<TorusGrid>, ncomp: usize, seed: u64, band_limited: bool) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..ncomp)
        .map(|_| (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut f = SpectralField::from_physical(grid, &samples).expect("sizes match");
    if band_limited {
        dealias_inplace(&mut f);
    }
    f
}

/// Band-limited, mean-free, divergence-free random vector field.
pub fn random_solenoidal(grid: &Arc<TorusGrid>, seed: u64) -> SpectralField {
    let v = random_field(grid, grid.dim(), seed, true).mean_free();
    leray_p(&v).expect("vector field")
}
