//! Initial velocity fields.

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::norms::l2_norm_sq;
use crate::ops::{dealias_inplace, leray_p};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitSpec {
    TaylorGreen,
    /// Fluid at rest.
    Zero,
    /// Arnold-Beltrami-Childress flow with `A = B = C = 1`; 3D only.
    Abc,
    RandomSeeded {
        #[serde(default)]
        seed: u64,
        /// Spectral peak wavenumber.
        #[serde(default = "default_peak")]
        peak: f64,
    },
    /// JSON sidecar of a velocity snapshot.
    File { path: PathBuf },
}

fn default_peak() -> f64 {
    2.0
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::TaylorGreen
    }
}

impl InitSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InitSpec::TaylorGreen => "taylor-green",
            InitSpec::Zero => "zero",
            InitSpec::Abc => "abc",
            InitSpec::RandomSeeded { .. } => "random-seeded",
            InitSpec::File { .. } => "file",
        }
    }
}

pub fn initial_velocity(spec: &InitSpec, grid: &Arc<TorusGrid>) -> Result<SpectralField> {
    match spec {
        InitSpec::TaylorGreen => Ok(crate::ns::taylor_green(0.0, 0.0, grid).0),
        InitSpec::Zero => Ok(SpectralField::vector_zeros(grid)),
        InitSpec::Abc => {
            if grid.dim() != 3 {
                return Err(Error::InvalidParameter("abc initial data needs a 3D grid".into()));
            }
            Ok(SpectralField::from_fn(grid, 3, |x, c| match c {
                0 => x[2].sin() + x[1].cos(),
                1 => x[0].sin() + x[2].cos(),
                _ => x[1].sin() + x[0].cos(),
            }))
        }
        InitSpec::RandomSeeded { seed, peak } => Ok(random_velocity(grid, *seed, *peak)),
        InitSpec::File { path } => {
            let (u, _) = crate::snapshot::read_field(path, Some(grid))?;
            if u.ncomp() != grid.dim() {
                return Err(Error::ShapeMismatch(format!("{} holds {} components", path.display(), u.ncomp())));
            }
            Ok(u)
        }
    }
}

/// Reproducible random solenoidal velocity.
///
/// Recipe: i.i.d. standard normal samples per component from ChaCha8 seeded
/// with `seed`; forward transform; multiply mode `k` by `exp(−|k|²/(2·peak²))`;
/// 2/3-rule truncation; drop the mean; Leray projection; rescale so that the
/// mean kinetic energy `‖u‖²/(2|𝕋^d|)` equals `1/4` (that of Taylor-Green).
pub fn random_velocity(grid: &Arc<TorusGrid>, seed: u64, peak: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..grid.dim())
        .map(|_| (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let noise = SpectralField::from_physical(grid, &samples).expect("sizes match");
    let g = grid.clone();
    let mut f = noise.map_modes(|i| (-g.k2(i) / (2.0 * peak * peak)).exp());
    dealias_inplace(&mut f);
    let u = leray_p(&f.mean_free()).expect("vector field");
    let e = l2_norm_sq(&u) / (2.0 * grid.volume());
    if e == 0.0 {
        return u;
    }
    u.scaled((0.25 / e).sqrt())
}
