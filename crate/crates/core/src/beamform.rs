//! Volumetric delay-and-sum reconstruction from baseband receive data.
//!
//! One *dataset* is the receive data of one transmit (a plane-wave angle or a
//! virtual line source) together with its transmit-delay model: either a
//! decoded per-crossing aperture (2D receive focusing) or one event of
//! per-column traces (1D cylindrical receive focusing). Datasets are
//! compounded coherently:
//!
//! ```text
//! voxel(v) = Σ_datasets Σ_elements w(v, element) · data(t_tx(v) + t_rx(v, element))
//! ```
//!
//! with linear interpolation on the IQ samples and carrier phase restoration
//! `e^{+i·2π·f0·(t_tx + t_rx)}`. Transmit models carry the minimum raw delay
//! their sequence subtracted, so `t_tx` here is absolute from the trigger.
//!
//! Work is parallel over voxels; each voxel reduces its (element, dataset)
//! contributions in a fixed order, so volumes are bit-identical for any
//! worker-thread count.

use num_complex::Complex;
use rayon::prelude::*;

use crate::encoding::{DecodedAperture, EventChannelData};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, MediumSpec};
use crate::num::Real;

// ---------------------------------------------------------------------------
// Grids, volumes and images
// ---------------------------------------------------------------------------

/// Coordinate axis of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Regular voxel lattice: voxel `(i, j, k)` is centered at
/// `origin + spacing ⊙ (i, j, k)`, with x fastest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid<S> {
    pub origin: [S; 3],
    pub spacing: [S; 3],
    pub counts: [usize; 3],
}

impl<S: Real> VolumeGrid<S> {
    pub fn validate(&self) -> Result<()> {
        if self.counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec("grid counts must be positive".into()));
        }
        if self
            .spacing
            .iter()
            .any(|s| !(*s > S::zero()) || !s.is_finite())
        {
            return Err(Error::InvalidSpec(
                "grid spacing must be positive and finite".into(),
            ));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidSpec("grid origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of voxel `(i, j, k)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.counts[1] + j) * self.counts[0] + i
    }

    /// Center of voxel `(i, j, k)` in meters.
    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> [S; 3] {
        [
            self.origin[0] + self.spacing[0] * S::of(i as f64),
            self.origin[1] + self.spacing[1] * S::of(j as f64),
            self.origin[2] + self.spacing[2] * S::of(k as f64),
        ]
    }

    /// Voxel whose center is nearest to `p`, or `None` if `p` falls outside
    /// the lattice by more than half a voxel.
    pub fn nearest_index(&self, p: [S; 3]) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let u = ((p[a] - self.origin[a]) / self.spacing[a]).round();
            let n = u.to_isize()?;
            if n < 0 || n as usize >= self.counts[a] {
                return None;
            }
            idx[a] = n as usize;
        }
        Some(idx)
    }
}

/// Coherently summed reconstruction on a [`VolumeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<S: Real> {
    pub grid: VolumeGrid<S>,
    /// Complex voxel values, x fastest.
    pub voxels: Vec<Complex<S>>,
}

impl<S: Real> Volume<S> {
    pub fn zeroed(grid: VolumeGrid<S>) -> Self {
        let n = grid.len();
        Volume {
            grid,
            voxels: vec![Complex::new(S::zero(), S::zero()); n],
        }
    }

    /// Envelope (magnitude) of every voxel.
    pub fn envelope(&self) -> Vec<S> {
        self.voxels.iter().map(|v| v.norm()).collect()
    }

    #[inline]
    pub fn envelope_at(&self, i: usize, j: usize, k: usize) -> S {
        self.voxels[self.grid.index(i, j, k)].norm()
    }

    /// Log-compressed view in dB relative to the volume maximum, clamped at
    /// `floor_db` (a negative number); all values are ≤ 0.
    pub fn log_db(&self, floor_db: S) -> Vec<S> {
        let peak = self
            .voxels
            .iter()
            .map(|v| v.norm())
            .fold(S::zero(), |a, b| if b > a { b } else { a });
        let twenty = S::of(20.0);
        self.voxels
            .iter()
            .map(|v| {
                let e = v.norm();
                if peak > S::zero() && e > S::zero() {
                    let db = twenty * (e / peak).log10();
                    if db < floor_db {
                        floor_db
                    } else {
                        db
                    }
                } else {
                    floor_db
                }
            })
            .collect()
    }

    /// Index and envelope of the strongest voxel; `None` for an empty grid.
    pub fn peak_voxel(&self) -> Option<([usize; 3], S)> {
        let (mut best, mut best_idx) = (S::neg_infinity(), 0usize);
        for (i, v) in self.voxels.iter().enumerate() {
            let e = v.norm();
            if e > best {
                best = e;
                best_idx = i;
            }
        }
        if self.voxels.is_empty() {
            return None;
        }
        let nx = self.grid.counts[0];
        let ny = self.grid.counts[1];
        let i = best_idx % nx;
        let j = (best_idx / nx) % ny;
        let k = best_idx / (nx * ny);
        Some(([i, j, k], best))
    }
}

/// A 2D scalar image extracted from a volume (projection or slice).
///
/// `pixels[j * dims[0] + i]` maps to coordinate
/// `(origin[0] + i·spacing[0], origin[1] + j·spacing[1])` along `axes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2<S> {
    pub axes: [Axis; 2],
    pub dims: [usize; 2],
    pub spacing: [S; 2],
    pub origin: [S; 2],
    pub pixels: Vec<S>,
}

/// Maximum-intensity projection of the envelope over a slab of voxel layers
/// perpendicular to `axis`, spanning `slab_center ± slab_thickness / 2`.
pub fn mip<S: Real>(
    volume: &Volume<S>,
    axis: Axis,
    slab_center: S,
    slab_thickness: S,
) -> Result<Image2<S>> {
    let grid = &volume.grid;
    let a = axis.index();
    let half = slab_thickness * S::of(0.5);
    let mut layers = Vec::new();
    for n in 0..grid.counts[a] {
        let coord = grid.origin[a] + grid.spacing[a] * S::of(n as f64);
        if (coord - slab_center).abs() <= half {
            layers.push(n);
        }
    }
    if layers.is_empty() {
        return Err(Error::EmptyInput(format!(
            "slab {} ± {} along {} intersects no voxel layer",
            slab_center.to_f64().unwrap_or(f64::NAN),
            (half).to_f64().unwrap_or(f64::NAN),
            axis.label()
        )));
    }
    let (u, v) = match axis {
        Axis::X => (Axis::Y, Axis::Z),
        Axis::Y => (Axis::X, Axis::Z),
        Axis::Z => (Axis::X, Axis::Y),
    };
    let (ui, vi) = (u.index(), v.index());
    let dims = [grid.counts[ui], grid.counts[vi]];
    let mut pixels = vec![S::zero(); dims[0] * dims[1]];
    for (jj, pj) in pixels.chunks_mut(dims[0]).enumerate() {
        for (ii, px) in pj.iter_mut().enumerate() {
            let mut best = S::zero();
            for &n in &layers {
                let mut idx3 = [0usize; 3];
                idx3[a] = n;
                idx3[ui] = ii;
                idx3[vi] = jj;
                let e = volume.envelope_at(idx3[0], idx3[1], idx3[2]);
                if e > best {
                    best = e;
                }
            }
            *px = best;
        }
    }
    Ok(Image2 {
        axes: [u, v],
        dims,
        spacing: [grid.spacing[ui], grid.spacing[vi]],
        origin: [grid.origin[ui], grid.origin[vi]],
        pixels,
    })
}

// ---------------------------------------------------------------------------
// Configuration and transmit models
// ---------------------------------------------------------------------------

/// Receive apodization window across the gated aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Apodization {
    None,
    /// Raised cosine over the f-number gate radius; requires `f_number > 0`.
    Hann,
}

/// How datasets are combined (coherent complex summation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compounding {
    Coherent,
}

/// How fractional-delay samples are read from the traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Linear interpolation of the IQ samples plus carrier phase rotation.
    LinearIq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformConfig<S> {
    /// Receive f-number; elements farther than `depth / (2·f_number)` from
    /// the voxel's lateral position are gated out. 0 disables the gate.
    pub f_number: S,
    pub rx_apodization: Apodization,
    pub compounding: Compounding,
    pub interpolation: Interpolation,
    /// Upper bound on voxel count, guarding against runaway grids.
    pub voxel_budget: usize,
}

impl<S: Real> Default for BeamformConfig<S> {
    fn default() -> Self {
        BeamformConfig {
            f_number: S::one(),
            rx_apodization: Apodization::Hann,
            compounding: Compounding::Coherent,
            interpolation: Interpolation::LinearIq,
            voxel_budget: 1 << 26,
        }
    }
}

/// Transmit wavefront timing of one dataset. `min_delay` is the raw minimum
/// the sequence subtracted when it normalized its per-row delays to start at
/// zero; adding it back makes `t_tx` absolute from the trigger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxDelayModel<S> {
    /// Plane wave steered by `angle` about the x axis (delays vary along y).
    PlaneWave { angle: S, min_delay: S },
    /// Cylindrical wave diverging from a virtual line parallel to x at
    /// `(y, z)`, z typically negative (behind the aperture).
    VirtualLine { y: S, z: S, min_delay: S },
}

impl<S: Real> TxDelayModel<S> {
    /// Absolute time at which the transmit wavefront reaches `p`.
    #[inline]
    pub fn tx_time(&self, p: [S; 3], speed_of_sound: S) -> S {
        match *self {
            TxDelayModel::PlaneWave { angle, min_delay } => {
                let (sin, cos) = angle.sin_cos();
                (p[1] * sin + p[2] * cos) / speed_of_sound - min_delay
            }
            TxDelayModel::VirtualLine { y, z, min_delay } => {
                let dy = p[1] - y;
                let dz = p[2] - z;
                (dy * dy + dz * dz).sqrt() / speed_of_sound - min_delay
            }
        }
    }
}

/// Receive data of one dataset.
#[derive(Debug, Clone, Copy)]
pub enum RxData<'a, S: Real> {
    /// Decoded per-crossing traces: full 2D receive aperture.
    Crossings(&'a DecodedAperture<Complex<S>>),
    /// One event of per-column traces: 1D aperture, cylindrical focusing
    /// that ignores the y extent of the column electrodes.
    Columns {
        data: &'a EventChannelData<Complex<S>>,
        event: usize,
    },
}

/// One transmit's receive data paired with its transmit timing model.
#[derive(Debug, Clone, Copy)]
pub struct BeamformInput<'a, S: Real> {
    pub rx: RxData<'a, S>,
    pub tx: TxDelayModel<S>,
}

// ---------------------------------------------------------------------------
// Delay-and-sum
// ---------------------------------------------------------------------------

/// True when an element at lateral distance `lateral` may contribute to a
/// voxel at `depth` under f-number `f_number` (0 = no gate).
#[inline]
pub fn f_number_gate<S: Real>(lateral: S, depth: S, f_number: S) -> bool {
    if f_number <= S::zero() {
        return true;
    }
    lateral * (S::of(2.0) * f_number) <= depth
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RxKind {
    Crossings,
    Columns,
}

struct DatasetView<'a, S: Real> {
    data: &'a [Complex<S>],
    /// Offset of element 0's trace within `data`.
    base: usize,
    samples: usize,
    sample_rate: S,
    t0: S,
    tx: TxDelayModel<S>,
}

/// Reconstructs a volume from one or more datasets sharing a receive model.
///
/// All inputs must carry the same carrier (set by demodulation) and the same
/// receive-aperture kind and shape; mixing decoded apertures with column
/// data in one call is rejected. Out-of-range delay lookups contribute zero.
pub fn das_volume<S: Real>(
    inputs: &[BeamformInput<'_, S>],
    geom: &ArrayGeometry<S>,
    grid: &VolumeGrid<S>,
    cfg: &BeamformConfig<S>,
    medium: &MediumSpec<S>,
) -> Result<Volume<S>> {
    geom.validate()?;
    medium.validate()?;
    grid.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput("no datasets to beamform".into()));
    }
    if grid.len() > cfg.voxel_budget {
        return Err(Error::InvalidSpec(format!(
            "grid holds {} voxels, over the budget of {}",
            grid.len(),
            cfg.voxel_budget
        )));
    }
    if !(cfg.f_number >= S::zero()) || !cfg.f_number.is_finite() {
        return Err(Error::InvalidSpec("f_number must be finite and ≥ 0".into()));
    }
    if cfg.rx_apodization == Apodization::Hann && cfg.f_number <= S::zero() {
        return Err(Error::InvalidSpec(
            "hann apodization needs a positive f_number to define its support".into(),
        ));
    }

    // Validate shapes, collect carrier, and build per-dataset views.
    let mut kind: Option<RxKind> = None;
    let mut carrier: Option<S> = None;
    let mut views: Vec<DatasetView<'_, S>> = Vec::with_capacity(inputs.len());
    for input in inputs {
        let (this_kind, this_carrier) = match input.rx {
            RxData::Crossings(d) => {
                d.validate()?;
                if d.rows != geom.rows || d.cols != geom.cols {
                    return Err(Error::DimensionMismatch(format!(
                        "decoded aperture {}×{} vs array {}×{}",
                        d.rows, d.cols, geom.rows, geom.cols
                    )));
                }
                views.push(DatasetView {
                    data: &d.data,
                    base: 0,
                    samples: d.samples,
                    sample_rate: d.sample_rate,
                    t0: d.t0,
                    tx: input.tx,
                });
                (RxKind::Crossings, d.carrier)
            }
            RxData::Columns { data, event } => {
                data.validate()?;
                if data.channels != geom.cols {
                    return Err(Error::DimensionMismatch(format!(
                        "{} channels vs {} columns",
                        data.channels, geom.cols
                    )));
                }
                if event >= data.events {
                    return Err(Error::IndexOutOfRange(format!(
                        "event {} of {}",
                        event, data.events
                    )));
                }
                views.push(DatasetView {
                    data: &data.data,
                    base: event * data.channels * data.samples,
                    samples: data.samples,
                    sample_rate: data.sample_rate,
                    t0: data.t0,
                    tx: input.tx,
                });
                (RxKind::Columns, data.carrier)
            }
        };
        match kind {
            None => kind = Some(this_kind),
            Some(k) if k == this_kind => {}
            _ => {
                return Err(Error::InvalidSpec(
                    "all datasets in one call must share a receive-aperture kind".into(),
                ))
            }
        }
        let f0 = this_carrier.ok_or_else(|| {
            Error::InvalidSpec("receive data has no carrier; demodulate before beamforming".into())
        })?;
        match carrier {
            None => carrier = Some(f0),
            Some(c0) if c0 == f0 => {}
            Some(c0) => {
                return Err(Error::SampleRateMismatch(format!(
                    "datasets mix carriers {} and {}",
                    c0, f0
                )))
            }
        }
    }
    let kind = kind.expect("nonempty inputs");
    let f0 = carrier.expect("nonempty inputs");

    // Element lateral positions: (x, y) per crossing, or x per column.
    let elements: Vec<[S; 2]> = match kind {
        RxKind::Crossings => {
            let mut v = Vec::with_capacity(geom.rows * geom.cols);
            for r in 0..geom.rows {
                let y = geom.row_y(r)?;
                for c in 0..geom.cols {
                    v.push([geom.column_x(c)?, y]);
                }
            }
            v
        }
        RxKind::Columns => (0..geom.cols)
            .map(|c| Ok([geom.column_x(c)?, S::zero()]))
            .collect::<Result<_>>()?,
    };
    // Trace slices laid out [element][dataset] for the hot loop.
    let n_ds = views.len();
    let mut traces: Vec<&[Complex<S>]> = Vec::with_capacity(elements.len() * n_ds);
    for e in 0..elements.len() {
        for view in &views {
            let o = view.base + e * view.samples;
            traces.push(&view.data[o..o + view.samples]);
        }
    }

    let c_sound = medium.speed_of_sound;
    let two_pi_f0 = S::of(2.0) * S::PI() * f0;
    let inv_c = S::one() / c_sound;
    let nx = grid.counts[0];
    let ny = grid.counts[1];
    let mut volume = Volume::zeroed(grid.clone());

    // Parallel over z slices; every voxel's reduction order over
    // (element, dataset) is fixed, so the result is thread-count invariant.
    volume
        .voxels
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(k, slice)| {
            let mut tx_time: Vec<S> = vec![S::zero(); n_ds];
            let mut tx_rot: Vec<Complex<S>> = vec![Complex::new(S::zero(), S::zero()); n_ds];
            for j in 0..ny {
                for i in 0..nx {
                    let p = grid.position(i, j, k);
                    let gate_radius = if cfg.f_number > S::zero() {
                        p[2] / (S::of(2.0) * cfg.f_number)
                    } else {
                        S::infinity()
                    };
                    for (d, view) in views.iter().enumerate() {
                        let t = view.tx.tx_time(p, c_sound);
                        tx_time[d] = t;
                        let (sin, cos) = (two_pi_f0 * t).sin_cos();
                        tx_rot[d] = Complex::new(cos, sin);
                    }
                    let mut acc = Complex::new(S::zero(), S::zero());
                    for (e, el) in elements.iter().enumerate() {
                        let dx = p[0] - el[0];
                        let (lateral, d_rx) = match kind {
                            RxKind::Crossings => {
                                let dy = p[1] - el[1];
                                let l2 = dx * dx + dy * dy;
                                (l2.sqrt(), (l2 + p[2] * p[2]).sqrt())
                            }
                            RxKind::Columns => {
                                (dx.abs(), (dx * dx + p[2] * p[2]).sqrt())
                            }
                        };
                        if lateral > gate_radius {
                            continue;
                        }
                        let w = match cfg.rx_apodization {
                            Apodization::None => S::one(),
                            Apodization::Hann => {
                                let u = lateral / gate_radius;
                                S::of(0.5) * (S::one() + (S::PI() * u).cos())
                            }
                        };
                        let t_rx = d_rx * inv_c;
                        let (sin, cos) = (two_pi_f0 * t_rx).sin_cos();
                        let rx_rot = Complex::new(cos, sin);
                        let base = e * n_ds;
                        for d in 0..n_ds {
                            let view = &views[d];
                            let u = (tx_time[d] + t_rx - view.t0) * view.sample_rate;
                            let i0 = u.floor();
                            let Some(i0u) = i0.to_usize() else { continue };
                            if i0u + 1 >= view.samples || i0 < S::zero() {
                                continue;
                            }
                            let f = u - i0;
                            let tr = traces[base + d];
                            let z = tr[i0u].scale(S::one() - f) + tr[i0u + 1].scale(f);
                            acc = acc + (z * rx_rot * tx_rot[d]).scale(w);
                        }
                    }
                    slice[j * nx + i] = acc;
                }
            }
        });
    Ok(volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Production loop vs the plainest possible reference implementation.
    const NAIVE_DAS_REL_TOL: f64 = 1e-12;
    /// Additivity across separately beamformed datasets.
    const ADDITIVITY_REL_TOL: f64 = 1e-12;

    const FS: f64 = 25e6;
    const F0: f64 = 6.25e6;
    const C: f64 = 1540.0;

    fn geom(rows: usize, cols: usize) -> ArrayGeometry<f64> {
        ArrayGeometry {
            rows,
            cols,
            pitch: 250e-6,
            kerf: 25e-6,
            center_frequency: F0,
        }
    }

    fn medium() -> MediumSpec<f64> {
        MediumSpec {
            speed_of_sound: C,
            sampling_frequency: FS,
        }
    }

    fn small_grid() -> VolumeGrid<f64> {
        VolumeGrid {
            origin: [-0.4e-3, -0.4e-3, 4.6e-3],
            spacing: [0.1e-3, 0.1e-3, 0.1e-3],
            counts: [9, 9, 9],
        }
    }

    fn random_crossings(rows: usize, cols: usize, samples: usize, seed: u64) -> DecodedAperture<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = DecodedAperture::zeroed(rows, cols, samples, FS);
        d.carrier = Some(F0);
        for x in d.data.iter_mut() {
            *x = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        d
    }

    fn plane0() -> TxDelayModel<f64> {
        TxDelayModel::PlaneWave {
            angle: 0.0,
            min_delay: 0.0,
        }
    }

    /// Straight-from-the-definition DAS for crossings data: no loop
    /// restructuring, one phase rotation on the summed delay.
    fn naive_das(
        d: &DecodedAperture<Complex<f64>>,
        tx: &TxDelayModel<f64>,
        g: &ArrayGeometry<f64>,
        grid: &VolumeGrid<f64>,
        cfg: &BeamformConfig<f64>,
        m: &MediumSpec<f64>,
    ) -> Volume<f64> {
        let f0 = d.carrier.unwrap();
        let mut vol = Volume::zeroed(grid.clone());
        for k in 0..grid.counts[2] {
            for j in 0..grid.counts[1] {
                for i in 0..grid.counts[0] {
                    let p = grid.position(i, j, k);
                    let t_tx = tx.tx_time(p, m.speed_of_sound);
                    let mut acc = Complex::new(0.0, 0.0);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            let e = g.crossing_position(r, c).unwrap();
                            let dx = p[0] - e[0];
                            let dy = p[1] - e[1];
                            let lateral = (dx * dx + dy * dy).sqrt();
                            if !f_number_gate(lateral, p[2], cfg.f_number) {
                                continue;
                            }
                            let w = match cfg.rx_apodization {
                                Apodization::None => 1.0,
                                Apodization::Hann => {
                                    let radius = p[2] / (2.0 * cfg.f_number);
                                    0.5 * (1.0 + (std::f64::consts::PI * lateral / radius).cos())
                                }
                            };
                            let t_rx =
                                (dx * dx + dy * dy + p[2] * p[2]).sqrt() / m.speed_of_sound;
                            let t = t_tx + t_rx;
                            let u = (t - d.t0) * d.sample_rate;
                            let i0 = u.floor();
                            if i0 < 0.0 || i0 as usize + 1 >= d.samples {
                                continue;
                            }
                            let f = u - i0;
                            let tr = d.trace(r, c);
                            let z = tr[i0 as usize] * (1.0 - f) + tr[i0 as usize + 1] * f;
                            let ph = 2.0 * std::f64::consts::PI * f0 * t;
                            acc += z * Complex::new(ph.cos(), ph.sin()) * w;
                        }
                    }
                    vol.voxels[grid.index(i, j, k)] = acc;
                }
            }
        }
        vol
    }

    fn rel_rms_c(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn zero_data_gives_a_zero_volume() {
        let g = geom(4, 4);
        let mut d = DecodedAperture::<Complex<f64>>::zeroed(4, 4, 64, FS);
        d.carrier = Some(F0);
        let inputs = [BeamformInput {
            rx: RxData::Crossings(&d),
            tx: plane0(),
        }];
        let v = das_volume(&inputs, &g, &small_grid(), &BeamformConfig::default(), &medium())
            .unwrap();
        assert!(v.voxels.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn restructured_loop_matches_the_naive_definition() {
        let g = geom(4, 5);
        let d = random_crossings(4, 5, 96, 31);
        let tx = TxDelayModel::PlaneWave {
            angle: 0.08,
            min_delay: -2e-7,
        };
        for (f_number, apod) in [
            (0.0, Apodization::None),
            (1.0, Apodization::None),
            (1.0, Apodization::Hann),
            (0.7, Apodization::Hann),
        ] {
            let cfg = BeamformConfig {
                f_number,
                rx_apodization: apod,
                ..BeamformConfig::default()
            };
            let inputs = [BeamformInput {
                rx: RxData::Crossings(&d),
                tx,
            }];
            let fast = das_volume(&inputs, &g, &small_grid(), &cfg, &medium()).unwrap();
            let slow = naive_das(&d, &tx, &g, &small_grid(), &cfg, &medium());
            let err = rel_rms_c(&fast.voxels, &slow.voxels);
            assert!(
                err < NAIVE_DAS_REL_TOL,
                "f#{f_number} {apod:?}: rel RMS {err}"
            );
        }
    }

    #[test]
    fn beamforming_is_additive_over_datasets() {
        let g = geom(4, 4);
        let a = random_crossings(4, 4, 80, 32);
        let b = random_crossings(4, 4, 80, 33);
        let mut sum = a.clone();
        for (s, x) in sum.data.iter_mut().zip(b.data.iter()) {
            *s += x;
        }
        let cfg = BeamformConfig::default();
        let m = medium();
        let run = |d: &DecodedAperture<Complex<f64>>| {
            das_volume(
                &[BeamformInput {
                    rx: RxData::Crossings(d),
                    tx: plane0(),
                }],
                &g,
                &small_grid(),
                &cfg,
                &m,
            )
            .unwrap()
        };
        let va = run(&a);
        let vb = run(&b);
        let vs = run(&sum);
        let manual: Vec<Complex<f64>> = va
            .voxels
            .iter()
            .zip(vb.voxels.iter())
            .map(|(x, y)| x + y)
            .collect();
        assert!(rel_rms_c(&vs.voxels, &manual) < ADDITIVITY_REL_TOL);
    }

    #[test]
    fn power_of_two_input_scaling_is_exact() {
        let g = geom(4, 4);
        let a = random_crossings(4, 4, 80, 34);
        let mut a4 = a.clone();
        for x in a4.data.iter_mut() {
            *x *= 4.0;
        }
        let cfg = BeamformConfig::default();
        let m = medium();
        let run = |d: &DecodedAperture<Complex<f64>>| {
            das_volume(
                &[BeamformInput {
                    rx: RxData::Crossings(d),
                    tx: plane0(),
                }],
                &g,
                &small_grid(),
                &cfg,
                &m,
            )
            .unwrap()
        };
        let v1 = run(&a);
        let v4 = run(&a4);
        for (x, y) in v1.voxels.iter().zip(v4.voxels.iter()) {
            assert_eq!(*x * 4.0, *y);
        }
    }

    #[test]
    fn f_number_gate_is_monotone_in_f_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..1000 {
            let lateral = rng.random_range(0.0..10e-3);
            let depth = rng.random_range(1e-3..30e-3);
            let f1 = rng.random_range(0.1..3.0);
            let f2 = f1 + rng.random_range(0.0..3.0);
            // A tighter (larger) f-number never re-admits an element.
            if f_number_gate(lateral, depth, f2) {
                assert!(f_number_gate(lateral, depth, f1));
            }
            // f# = 0 admits everything.
            assert!(f_number_gate(lateral, depth, 0.0));
        }
    }

    #[test]
    fn missing_carrier_and_mixed_kinds_are_rejected() {
        let g = geom(4, 4);
        let d = DecodedAperture::<Complex<f64>>::zeroed(4, 4, 64, FS); // no carrier
        let r = das_volume(
            &[BeamformInput {
                rx: RxData::Crossings(&d),
                tx: plane0(),
            }],
            &g,
            &small_grid(),
            &BeamformConfig::default(),
            &medium(),
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));

        let c = random_crossings(4, 4, 64, 36);
        let mut ev = EventChannelData::<Complex<f64>>::zeroed(1, 4, 64, FS);
        ev.carrier = Some(F0);
        let r = das_volume(
            &[
                BeamformInput {
                    rx: RxData::Crossings(&c),
                    tx: plane0(),
                },
                BeamformInput {
                    rx: RxData::Columns {
                        data: &ev,
                        event: 0,
                    },
                    tx: plane0(),
                },
            ],
            &g,
            &small_grid(),
            &BeamformConfig::default(),
            &medium(),
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn grid_budget_and_shape_errors() {
        let g = geom(4, 4);
        let d = random_crossings(4, 4, 64, 37);
        let cfg = BeamformConfig {
            voxel_budget: 100,
            ..BeamformConfig::default()
        };
        let r = das_volume(
            &[BeamformInput {
                rx: RxData::Crossings(&d),
                tx: plane0(),
            }],
            &g,
            &small_grid(), // 729 voxels > 100
            &cfg,
            &medium(),
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));

        let wrong = random_crossings(8, 8, 64, 38);
        let r = das_volume(
            &[BeamformInput {
                rx: RxData::Crossings(&wrong),
                tx: plane0(),
            }],
            &g,
            &small_grid(),
            &BeamformConfig::default(),
            &medium(),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));

        let hann_no_gate = BeamformConfig {
            f_number: 0.0,
            rx_apodization: Apodization::Hann,
            ..BeamformConfig::default()
        };
        let r = das_volume(
            &[BeamformInput {
                rx: RxData::Crossings(&d),
                tx: plane0(),
            }],
            &g,
            &small_grid(),
            &hann_no_gate,
            &medium(),
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn mip_of_a_single_layer_slab_is_that_slice() {
        let grid = small_grid();
        let mut v = Volume::zeroed(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        for z in v.voxels.iter_mut() {
            *z = Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        // Slab of half a voxel around layer k = 3.
        let zc = grid.origin[2] + 3.0 * grid.spacing[2];
        let img = mip(&v, Axis::Z, zc, grid.spacing[2] * 0.5).unwrap();
        assert_eq!(img.axes, [Axis::X, Axis::Y]);
        assert_eq!(img.dims, [9, 9]);
        for j in 0..9 {
            for i in 0..9 {
                assert_eq!(img.pixels[j * 9 + i], v.envelope_at(i, j, 3));
            }
        }
    }

    #[test]
    fn mip_takes_the_maximum_over_the_slab() {
        let grid = small_grid();
        let mut v = Volume::zeroed(grid.clone());
        // Distinct magnitudes per layer; layer 7 dominates inside the slab.
        for k in 0..9 {
            for j in 0..9 {
                for i in 0..9 {
                    let idx = grid.index(i, j, k);
                    v.voxels[idx] = Complex::new(k as f64, 0.0);
                }
            }
        }
        let zc = grid.origin[2] + 5.0 * grid.spacing[2];
        let img = mip(&v, Axis::Z, zc, 4.0 * grid.spacing[2] + 1e-9).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 7.0));
        // Empty slab errors.
        assert!(mip(&v, Axis::Z, 1.0, 1e-6).is_err());
    }

    #[test]
    fn mip_axis_selection_maps_dimensions_correctly() {
        let grid = VolumeGrid {
            origin: [0.0, 0.0, 0.0],
            spacing: [1e-3, 1e-3, 1e-3],
            counts: [3, 4, 5],
        };
        let v = Volume::zeroed(grid);
        let ix = mip(&v, Axis::X, 1e-3, 10e-3).unwrap();
        assert_eq!(ix.axes, [Axis::Y, Axis::Z]);
        assert_eq!(ix.dims, [4, 5]);
        let iy = mip(&v, Axis::Y, 1e-3, 10e-3).unwrap();
        assert_eq!(iy.axes, [Axis::X, Axis::Z]);
        assert_eq!(iy.dims, [3, 5]);
    }

    #[test]
    fn log_view_is_nonpositive_and_floored() {
        let grid = small_grid();
        let mut v = Volume::zeroed(grid);
        v.voxels[0] = Complex::new(1.0, 0.0);
        v.voxels[1] = Complex::new(0.5, 0.0);
        let db = v.log_db(-40.0);
        assert_eq!(db[0], 0.0);
        assert!((db[1] + 6.0206).abs() < 1e-3);
        assert!(db[2..].iter().all(|&x| x == -40.0));
        assert!(db.iter().all(|&x| x <= 0.0));
    }

    #[test]
    fn plane_wave_and_virtual_line_timing() {
        // Broadside plane wave reaches depth z at z/c.
        let pw = plane0();
        let t = pw.tx_time([0.0, 1e-3, 10e-3], C);
        assert!((t - 10e-3 / C).abs() < 1e-15);
        // Stored minimum delay shifts the clock.
        let pw = TxDelayModel::PlaneWave {
            angle: 0.0,
            min_delay: -1e-6,
        };
        let t2 = pw.tx_time([0.0, 1e-3, 10e-3], C);
        assert!((t2 - (10e-3 / C + 1e-6)).abs() < 1e-15);
        // Virtual line at (0, -8 mm), min_delay = 8 mm / c: the wavefront
        // passes the aperture center (distance 8 mm) at t = 0 and depth z
        // at z/c, like the broadside plane wave.
        let vls = TxDelayModel::VirtualLine {
            y: 0.0,
            z: -8e-3,
            min_delay: 8e-3 / C,
        };
        let t3 = vls.tx_time([0.0, 0.0, 10e-3], C);
        assert!((t3 - 10e-3 / C).abs() < 1e-15);
    }

    #[test]
    fn nearest_index_round_trips_voxel_centers() {
        let grid = small_grid();
        assert_eq!(grid.nearest_index(grid.position(2, 7, 4)), Some([2, 7, 4]));
        assert_eq!(grid.nearest_index([0.0, 0.0, -5e-3]), None);
        let p = grid.position(0, 0, 0);
        // Quarter-voxel perturbation still snaps home.
        let q = [
            p[0] + grid.spacing[0] * 0.25,
            p[1],
            p[2] - grid.spacing[2] * 0.25,
        ];
        assert_eq!(grid.nearest_index(q), Some([0, 0, 0]));
    }
}
