//! Deterministic test phantoms: point-target grids and speckle fields with
//! anechoic spherical inclusions.
//!
//! Random phantoms draw from a counter-based generator (ChaCha8) seeded by
//! the spec: stream 0 drives the scatterer count and positions, stream 1 the
//! amplitudes. The same spec therefore reproduces the same field byte for
//! byte, and editing the sphere list never disturbs the underlying speckle.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sim::ScattererField;

/// Tolerance when deciding whether `extent / spacing` hit an integer: ratios
/// this close to the next integer count as exact, so lattices keep their
/// intended point counts despite decimal-to-binary rounding.
const LATTICE_RATIO_SLACK: f64 = 1e-9;

/// Hard ceiling on generated scatterers, guarding against runaway densities.
const MAX_SCATTERERS: f64 = 5e7;

// ---------------------------------------------------------------------------
// Point grids
// ---------------------------------------------------------------------------

/// A rectangular lattice of unit-amplitude point targets, centered on the
/// array axis at `depth_center`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPhantomSpec<S> {
    /// Total span along x, y, z in meters; 0 collapses that axis to one layer.
    pub extent: [S; 3],
    /// Lattice step along x, y, z in meters (positive even when unused).
    pub spacing: [S; 3],
    /// Depth of the lattice center in meters.
    pub depth_center: S,
    /// Amplitude given to every point.
    pub amplitude: S,
}

impl<S: Real> GridPhantomSpec<S> {
    fn counts(&self) -> Result<[usize; 3]> {
        let mut n = [0usize; 3];
        for a in 0..3 {
            if !(self.spacing[a] > S::zero()) || !self.spacing[a].is_finite() {
                return Err(Error::InvalidSpec("grid spacing must be positive".into()));
            }
            if !(self.extent[a] >= S::zero()) || !self.extent[a].is_finite() {
                return Err(Error::InvalidSpec("grid extent must be nonnegative".into()));
            }
            let ratio = (self.extent[a] / self.spacing[a]).to_f64().unwrap_or(0.0);
            n[a] = (ratio + LATTICE_RATIO_SLACK).floor() as usize + 1;
        }
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        let _ = self.counts()?;
        if !self.depth_center.is_finite() || !(self.depth_center > S::zero()) {
            return Err(Error::InvalidSpec("depth_center must be positive".into()));
        }
        if self.amplitude == S::zero() || !self.amplitude.is_finite() {
            return Err(Error::InvalidSpec(
                "grid amplitude must be finite and nonzero".into(),
            ));
        }
        let z_lo = self.depth_center - self.extent[2] * S::of(0.5);
        if !(z_lo > S::zero()) {
            return Err(Error::InvalidSpec(
                "grid must sit strictly below the aperture plane (z > 0)".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the lattice: `floor(extent / spacing) + 1` points per axis, spaced
/// evenly and centered at `(0, 0, depth_center)`. Points are emitted z-major,
/// then y, with x fastest.
pub fn make_grid<S: Real>(spec: &GridPhantomSpec<S>) -> Result<ScattererField<S>> {
    spec.validate()?;
    let n = spec.counts()?;
    let center = [S::zero(), S::zero(), spec.depth_center];
    let mut field = ScattererField::with_capacity(n[0] * n[1] * n[2]);
    let coord = |a: usize, i: usize| {
        center[a] + (S::of(i as f64) - S::of((n[a] - 1) as f64) * S::of(0.5)) * spec.spacing[a]
    };
    for k in 0..n[2] {
        let z = coord(2, k);
        for j in 0..n[1] {
            let y = coord(1, j);
            for i in 0..n[0] {
                field.push([coord(0, i), y, z], spec.amplitude);
            }
        }
    }
    field.validate()?;
    Ok(field)
}

// ---------------------------------------------------------------------------
// Speckle fields with anechoic spheres
// ---------------------------------------------------------------------------

/// A spherical region, used both for scatterer removal and for metric ROIs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere<S> {
    pub center: [S; 3],
    pub radius: S,
}

impl<S: Real> Sphere<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > S::zero()) || !self.radius.is_finite() {
            return Err(Error::InvalidSpec("sphere radius must be positive".into()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("sphere center must be finite".into()));
        }
        Ok(())
    }

    /// True when `p` lies strictly inside the sphere.
    #[inline]
    pub fn contains_strictly(&self, p: [S; 3]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let dz = p[2] - self.center[2];
        dx * dx + dy * dy + dz * dz < self.radius * self.radius
    }
}

/// A box of uniformly distributed scatterers with standard-normal amplitudes
/// and zero or more anechoic spheres carved out.
#[derive(Debug, Clone, PartialEq)]
pub struct CystPhantomSpec<S> {
    /// Expected scatterers per cubic meter before sphere removal.
    pub density: S,
    /// Total span of the scatterer box along x, y, z in meters.
    pub extent: [S; 3],
    /// Depth of the box center in meters.
    pub depth_center: S,
    /// Anechoic regions; scatterers strictly inside any of them are removed.
    pub spheres: Vec<Sphere<S>>,
    /// Seed for the counter-based generator.
    pub seed: u64,
}

impl<S: Real> CystPhantomSpec<S> {
    fn bounds(&self) -> ([S; 3], [S; 3]) {
        let center = [S::zero(), S::zero(), self.depth_center];
        let mut lo = [S::zero(); 3];
        let mut hi = [S::zero(); 3];
        for a in 0..3 {
            let h = self.extent[a] * S::of(0.5);
            lo[a] = center[a] - h;
            hi[a] = center[a] + h;
        }
        (lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > S::zero()) || !self.density.is_finite() {
            return Err(Error::InvalidSpec("density must be positive".into()));
        }
        for a in 0..3 {
            if !(self.extent[a] > S::zero()) || !self.extent[a].is_finite() {
                return Err(Error::InvalidSpec(
                    "speckle box needs positive extent on every axis".into(),
                ));
            }
        }
        if !self.depth_center.is_finite() {
            return Err(Error::InvalidSpec("depth_center must be finite".into()));
        }
        let (lo, hi) = self.bounds();
        if !(lo[2] > S::zero()) {
            return Err(Error::InvalidSpec(
                "speckle box must sit strictly below the aperture plane (z > 0)".into(),
            ));
        }
        for (i, s) in self.spheres.iter().enumerate() {
            s.validate()?;
            for a in 0..3 {
                if s.center[a] < lo[a] || s.center[a] > hi[a] {
                    return Err(Error::InvalidSpec(format!(
                        "sphere {i} center lies outside the speckle box"
                    )));
                }
            }
        }
        let volume = (self.extent[0] * self.extent[1] * self.extent[2])
            .to_f64()
            .unwrap_or(f64::INFINITY);
        let lambda = self.density.to_f64().unwrap_or(f64::INFINITY) * volume;
        if !(lambda.is_finite()) || lambda > MAX_SCATTERERS {
            return Err(Error::InvalidSpec(format!(
                "expected scatterer count {lambda:.3e} exceeds the {MAX_SCATTERERS:.0e} budget"
            )));
        }
        Ok(())
    }
}

/// A generated speckle phantom with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CystPhantom<S: Real> {
    pub field: ScattererField<S>,
    /// Scatterers drawn before sphere removal.
    pub raw_count: usize,
    /// Scatterers removed as strictly inside a sphere.
    pub removed: usize,
    pub warnings: Vec<String>,
}

/// Fewest scatterers in the one-radius shell around a sphere before the
/// phantom warns that background statistics will be unreliable there.
const MIN_SHELL_SAMPLES: usize = 100;

/// Draws the speckle field for `spec`.
///
/// Stream 0 of the seeded generator yields the Poisson scatterer count (mean
/// `density × box volume`) and the uniform positions; stream 1 yields the
/// standard-normal amplitudes, one per raw scatterer. Scatterers strictly
/// inside any sphere are then removed — points exactly on a boundary stay.
/// The output is fully determined by the spec.
pub fn make_cyst<S: Real>(spec: &CystPhantomSpec<S>) -> Result<CystPhantom<S>> {
    spec.validate()?;
    let (lo, hi) = spec.bounds();
    let lo_f: Vec<f64> = lo.iter().map(|v| v.to_f64().unwrap()).collect();
    let hi_f: Vec<f64> = hi.iter().map(|v| v.to_f64().unwrap()).collect();
    let volume: f64 = (0..3).map(|a| hi_f[a] - lo_f[a]).product();
    let lambda = spec.density.to_f64().unwrap() * volume;

    let mut geometry_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    geometry_rng.set_stream(0);
    let poisson = Poisson::new(lambda)
        .map_err(|e| Error::InvalidSpec(format!("invalid scatterer count distribution: {e}")))?;
    let raw_count = geometry_rng.sample::<f64, _>(poisson) as usize;

    let mut amplitude_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    amplitude_rng.set_stream(1);

    let mut field = ScattererField::with_capacity(raw_count);
    let mut removed = 0usize;
    let mut shell_counts = vec![0usize; spec.spheres.len()];
    for _ in 0..raw_count {
        let mut p = [S::zero(); 3];
        for a in 0..3 {
            let u: f64 = geometry_rng.random();
            p[a] = S::of(lo_f[a] + u * (hi_f[a] - lo_f[a]));
        }
        let amp: f64 = amplitude_rng.sample(StandardNormal);
        if spec.spheres.iter().any(|s| s.contains_strictly(p)) {
            removed += 1;
            continue;
        }
        for (i, s) in spec.spheres.iter().enumerate() {
            let dx = p[0] - s.center[0];
            let dy = p[1] - s.center[1];
            let dz = p[2] - s.center[2];
            let d2 = dx * dx + dy * dy + dz * dz;
            let two_r = s.radius * S::of(2.0);
            if d2 < two_r * two_r {
                shell_counts[i] += 1;
            }
        }
        field.push(p, S::of(amp));
    }
    field.validate()?;

    let mut warnings = Vec::new();
    for (i, &n) in shell_counts.iter().enumerate() {
        if n < MIN_SHELL_SAMPLES {
            warnings.push(format!(
                "sphere {i}: only {n} scatterers in its one-radius background shell \
                 (< {MIN_SHELL_SAMPLES}); background statistics will be noisy"
            ));
        }
    }
    if field.is_empty() {
        warnings.push("phantom is empty: every scatterer was removed or none were drawn".into());
    }
    Ok(CystPhantom {
        field,
        raw_count,
        removed,
        warnings,
    })
}
