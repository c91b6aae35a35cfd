//! A discretization together with its operator cache.

use std::path::Path;

use nalgebra::DVector;

use crate::discretization::Discretization;
use crate::error::Result;
use crate::field::{random_field, FieldSpec, SpectralField};
use crate::operators::{OpKind, OperatorCache};
use crate::rng;

#[derive(Debug, Clone)]
pub struct Truncation {
    pub disc: Discretization,
    pub cache: OperatorCache,
}

impl Truncation {
    /// Builds the cache; `n_quad = None` uses `⌈3n/2⌉`.
    pub fn build(n_modes: usize, n_quad: Option<usize>) -> Result<Self> {
        let disc = match n_quad {
            Some(q) => Discretization::new(n_modes, q)?,
            None => Discretization::with_default_quad(n_modes)?,
        };
        let cache = OperatorCache::build(&disc)?;
        Ok(Truncation { disc, cache })
    }

    /// Loads the cache from `path` if it exists, otherwise builds and saves it.
    pub fn load_or_build(n_modes: usize, n_quad: Option<usize>, path: &Path) -> Result<Self> {
        let disc = match n_quad {
            Some(q) => Discretization::new(n_modes, q)?,
            None => Discretization::with_default_quad(n_modes)?,
        };
        if path.exists() {
            let cache = OperatorCache::load(path, &disc)?;
            return Ok(Truncation { disc, cache });
        }
        let cache = OperatorCache::build(&disc)?;
        cache.save(path, &[])?;
        Ok(Truncation { disc, cache })
    }

    pub fn n_modes(&self) -> usize {
        self.disc.n_modes()
    }

    /// `‖op^s u‖_H` for a divergence-free field.
    pub fn norm_pow(&self, op: OpKind, s: f64, u: &SpectralField) -> Result<f64> {
        let y = self.cache.to_sub(u)?;
        Ok(self.cache.frac_sub(op, s, &y)?.norm())
    }

    /// Sample `index` of a seeded ensemble of random divergence-free fields.
    pub fn sample(&self, seed: u64, index: u64, spec: FieldSpec) -> Result<SpectralField> {
        random_field(rng::child_seed(seed, rng::purpose::SAMPLE, index), spec, &self.disc)
    }

    /// Uniformly distributed unit vector on the sphere of the divergence-free
    /// subspace (normalised Gaussian in subspace coordinates).
    pub fn unit_direction(&self, seed: u64, purpose: u64, index: u64) -> SpectralField {
        let mut r = rng::stream_rng(seed, rng::stream_id(purpose, index));
        let y = DVector::from_fn(self.cache.d_df(), |_, _| rng::normal(&mut r));
        self.cache.from_sub(&(&y / y.norm()))
    }

    /// Unit field in the lowest eigenspace of `B`, fixed as the normalised
    /// projection of `random_field(0, default)` onto that eigenspace.
    pub fn lowest_b_field(&self) -> Result<SpectralField> {
        let seed_dir = self.cache.to_sub(&random_field(0, FieldSpec::default(), &self.disc)?)?;
        Ok(self.cache.from_sub(&self.cache.lowest_b_direction(&seed_dir)))
    }
}
