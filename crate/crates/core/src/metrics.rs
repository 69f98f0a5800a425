//! Image-quality metrics: point-spread widths and lesion detectability.
//!
//! Resolution is measured as the full width at half maximum (FWHM) of the
//! envelope along each grid axis, with half maximum taken on envelope
//! amplitude. Widths are also reported normalized by `wavelength × f-number`
//! so they can be compared across depths; the axial axis is normalized with
//! the mean of the two lateral f-numbers.
//!
//! Lesion detectability uses the generalized contrast-to-noise ratio (gCNR):
//! one minus the overlap of the amplitude histograms inside and outside the
//! lesion, a bounded `[0, 1]` measure that is invariant to any monotonic
//! brightness mapping.

use crate::beamform::{Axis, Volume, VolumeGrid};
use crate::error::{Error, Result};
use crate::num::Real;

// ---------------------------------------------------------------------------
// Width measurement
// ---------------------------------------------------------------------------

/// Fractional-index crossings of `threshold` on both sides of `peak`,
/// walking outward from the peak and linearly interpolating between samples.
/// `None` if the profile never falls below the threshold on either side.
fn crossings_from<S: Real>(profile: &[S], peak: usize, threshold: S) -> Option<(S, S)> {
    let left = {
        let mut found = None;
        for m in (0..peak).rev() {
            if profile[m] < threshold {
                let lo = profile[m];
                let hi = profile[m + 1];
                let f = (threshold - lo) / (hi - lo);
                found = Some(S::of(m as f64) + f);
                break;
            }
        }
        found?
    };
    let right = {
        let mut found = None;
        for m in (peak + 1)..profile.len() {
            if profile[m] < threshold {
                let hi = profile[m - 1];
                let lo = profile[m];
                let f = (hi - threshold) / (hi - lo);
                found = Some(S::of((m - 1) as f64) + f);
                break;
            }
        }
        found?
    };
    Some((left, right))
}

/// Width of the lobe around the profile's global maximum at
/// `fraction × peak`, in the units of `spacing`. The first crossing on each
/// side bounds the lobe, so sidelobes that rise back above the threshold do
/// not widen the result.
pub fn width_at_fraction<S: Real>(profile: &[S], spacing: S, fraction: S) -> Result<S> {
    if profile.is_empty() {
        return Err(Error::EmptyInput("empty profile".into()));
    }
    if !(fraction > S::zero() && fraction < S::one()) {
        return Err(Error::InvalidSpec("fraction must lie in (0, 1)".into()));
    }
    let mut peak = 0usize;
    for (i, v) in profile.iter().enumerate() {
        if *v > profile[peak] {
            peak = i;
        }
    }
    if !(profile[peak] > S::zero()) {
        return Err(Error::EmptyInput("profile has no positive peak".into()));
    }
    let (l, r) = crossings_from(profile, peak, profile[peak] * fraction).ok_or_else(|| {
        Error::Unbounded("profile never falls below the requested fraction".into())
    })?;
    Ok((r - l) * spacing)
}

/// Climbs the envelope from `idx` to the nearest strict local maximum over
/// 26-connected neighbors. Deterministic: the first strictly-better neighbor
/// in scan order is taken each step.
fn ascend_to_peak<S: Real>(volume: &Volume<S>, mut idx: [usize; 3]) -> [usize; 3] {
    let counts = volume.grid.counts;
    loop {
        let mut best = volume.envelope_at(idx[0], idx[1], idx[2]);
        let mut best_idx = idx;
        for dk in -1isize..=1 {
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let i = idx[0] as isize + di;
                    let j = idx[1] as isize + dj;
                    let k = idx[2] as isize + dk;
                    if i < 0
                        || j < 0
                        || k < 0
                        || i as usize >= counts[0]
                        || j as usize >= counts[1]
                        || k as usize >= counts[2]
                    {
                        continue;
                    }
                    let e = volume.envelope_at(i as usize, j as usize, k as usize);
                    if e > best {
                        best = e;
                        best_idx = [i as usize, j as usize, k as usize];
                    }
                }
            }
        }
        if best_idx == idx {
            return idx;
        }
        idx = best_idx;
    }
}

/// Envelope profile along `axis` through voxel `idx`.
fn profile_through<S: Real>(volume: &Volume<S>, idx: [usize; 3], axis: Axis) -> Vec<S> {
    let a = axis.index();
    let mut at = idx;
    (0..volume.grid.counts[a])
        .map(|t| {
            at[a] = t;
            volume.envelope_at(at[0], at[1], at[2])
        })
        .collect()
}

/// Full width at half maximum of the envelope along `axis`, anchored at the
/// local maximum nearest to `peak` (meters). The seed position is snapped to
/// its voxel and climbed to the local envelope maximum first, so a slightly
/// misplaced seed still measures the intended lobe. Errors with
/// [`Error::Unbounded`] when the profile never falls below half maximum
/// inside the volume.
pub fn fwhm<S: Real>(volume: &Volume<S>, peak: [S; 3], axis: Axis) -> Result<S> {
    let seed = volume
        .grid
        .nearest_index(peak)
        .ok_or_else(|| Error::InvalidSpec("peak position lies outside the volume".into()))?;
    let idx = ascend_to_peak(volume, seed);
    let profile = profile_through(volume, idx, axis);
    let a = axis.index();
    let center = profile[idx[a]];
    if !(center > S::zero()) {
        return Err(Error::EmptyInput("zero envelope at the peak".into()));
    }
    let half = center * S::of(0.5);
    let (l, r) = crossings_from(&profile, idx[a], half).ok_or_else(|| {
        Error::Unbounded("envelope never falls below half maximum inside the volume".into())
    })?;
    Ok((r - l) * volume.grid.spacing[a])
}

// ---------------------------------------------------------------------------
// Resolution reports
// ---------------------------------------------------------------------------

/// Aperture quantities used to express widths as multiples of λ·f-number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionContext<S> {
    pub wavelength: S,
    pub aperture_x: S,
    pub aperture_y: S,
}

impl<S: Real> ResolutionContext<S> {
    /// Per-axis f-numbers at `depth`: lateral-x, lateral-y, and axial (mean
    /// of the two lateral values).
    pub fn f_numbers(&self, depth: S) -> [S; 3] {
        let fx = depth / self.aperture_x;
        let fy = depth / self.aperture_y;
        [fx, fy, (fx + fy) * S::of(0.5)]
    }
}

/// Measured widths of one point target.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResolution<S> {
    pub target: [S; 3],
    pub peak_index: [usize; 3],
    pub peak_position: [S; 3],
    /// FWHM along x, y, z in meters.
    pub fwhm: [S; 3],
    /// FWHM / (wavelength × f-number) per axis, dimensionless.
    pub normalized: [S; 3],
}

/// A phantom point that could not be measured, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedPoint<S> {
    pub target: [S; 3],
    pub reason: String,
}

/// Per-point widths plus aggregate statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport<S> {
    pub entries: Vec<PointResolution<S>>,
    pub excluded: Vec<ExcludedPoint<S>>,
    pub mean_fwhm: [S; 3],
    pub std_fwhm: [S; 3],
    pub mean_normalized: [S; 3],
    pub std_normalized: [S; 3],
}

impl<S: Real> ResolutionReport<S> {
    /// Aggregates entries into a report. Statistics are means and population
    /// standard deviations per axis; both are zero when `entries` is empty.
    pub fn from_entries(
        entries: Vec<PointResolution<S>>,
        excluded: Vec<ExcludedPoint<S>>,
    ) -> Self {
        let n = entries.len();
        let mut mean_fwhm = [S::zero(); 3];
        let mut std_fwhm = [S::zero(); 3];
        let mut mean_norm = [S::zero(); 3];
        let mut std_norm = [S::zero(); 3];
        if n > 0 {
            let inv = S::one() / S::of(n as f64);
            for a in 0..3 {
                for e in &entries {
                    mean_fwhm[a] += e.fwhm[a];
                    mean_norm[a] += e.normalized[a];
                }
                mean_fwhm[a] *= inv;
                mean_norm[a] *= inv;
                for e in &entries {
                    let d = e.fwhm[a] - mean_fwhm[a];
                    std_fwhm[a] += d * d;
                    let d = e.normalized[a] - mean_norm[a];
                    std_norm[a] += d * d;
                }
                std_fwhm[a] = (std_fwhm[a] * inv).sqrt();
                std_norm[a] = (std_norm[a] * inv).sqrt();
            }
        }
        ResolutionReport {
            entries,
            excluded,
            mean_fwhm,
            std_fwhm,
            mean_normalized: mean_norm,
            std_normalized: std_norm,
        }
    }

    /// Renders the report as CSV: one `point` row per entry, one `excluded`
    /// row per skipped target, then trailing `mean` and `std` aggregate rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "kind,index,target_x_m,target_y_m,target_z_m,peak_x_m,peak_y_m,peak_z_m,\
             fwhm_x_m,fwhm_y_m,fwhm_z_m,norm_x,norm_y,norm_z,note\n",
        );
        let f = |v: S| format!("{:.6e}", v.to_f64().unwrap_or(f64::NAN));
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "point,{},{},{},{},{},{},{},{},{},{},{},{},{},\n",
                i,
                f(e.target[0]),
                f(e.target[1]),
                f(e.target[2]),
                f(e.peak_position[0]),
                f(e.peak_position[1]),
                f(e.peak_position[2]),
                f(e.fwhm[0]),
                f(e.fwhm[1]),
                f(e.fwhm[2]),
                f(e.normalized[0]),
                f(e.normalized[1]),
                f(e.normalized[2]),
            ));
        }
        for (i, x) in self.excluded.iter().enumerate() {
            out.push_str(&format!(
                "excluded,{},{},{},{},,,,,,,,,,{}\n",
                i,
                f(x.target[0]),
                f(x.target[1]),
                f(x.target[2]),
                x.reason.replace(',', ";"),
            ));
        }
        for (kind, fw, no) in [
            ("mean", &self.mean_fwhm, &self.mean_normalized),
            ("std", &self.std_fwhm, &self.std_normalized),
        ] {
            out.push_str(&format!(
                "{},,,,,,,,{},{},{},{},{},{},\n",
                kind,
                f(fw[0]),
                f(fw[1]),
                f(fw[2]),
                f(no[0]),
                f(no[1]),
                f(no[2]),
            ));
        }
        out
    }
}

/// Measures every target in `targets` against `volume`.
///
/// Each target is associated with the envelope local maximum reached by
/// hill-climbing from its position. Targets whose climbs merge onto the same
/// maximum are unresolved: only the target nearest that maximum is measured,
/// the rest are excluded with a reason. Targets outside the volume or whose
/// profiles never fall below half maximum are excluded likewise.
pub fn resolution_report<S: Real>(
    volume: &Volume<S>,
    targets: &[[S; 3]],
    ctx: &ResolutionContext<S>,
) -> Result<ResolutionReport<S>> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("no targets to measure".into()));
    }
    if !(ctx.wavelength > S::zero() && ctx.aperture_x > S::zero() && ctx.aperture_y > S::zero()) {
        return Err(Error::InvalidSpec(
            "wavelength and apertures must be positive".into(),
        ));
    }
    // Climb from every target; group targets by the peak voxel they reach.
    let mut peaks: Vec<Option<[usize; 3]>> = Vec::with_capacity(targets.len());
    let mut excluded: Vec<ExcludedPoint<S>> = Vec::new();
    for t in targets {
        match volume.grid.nearest_index(*t) {
            Some(seed) => peaks.push(Some(ascend_to_peak(volume, seed))),
            None => {
                peaks.push(None);
                excluded.push(ExcludedPoint {
                    target: *t,
                    reason: "target lies outside the volume".into(),
                });
            }
        }
    }
    let dist2 = |a: [S; 3], b: [S; 3]| {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dz = a[2] - b[2];
        dx * dx + dy * dy + dz * dz
    };
    let mut entries = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        let Some(peak_idx) = peaks[ti] else { continue };
        let peak_pos = volume.grid.position(peak_idx[0], peak_idx[1], peak_idx[2]);
        // If another target climbed to the same maximum and sits closer to
        // it, this target is unresolved.
        let mine = dist2(*t, peak_pos);
        let usurped = peaks.iter().enumerate().any(|(oi, opk)| {
            oi != ti
                && *opk == Some(peak_idx)
                && {
                    let theirs = dist2(targets[oi], peak_pos);
                    theirs < mine || (theirs == mine && oi < ti)
                }
        });
        if usurped {
            excluded.push(ExcludedPoint {
                target: *t,
                reason: "unresolved: merged with a neighboring target's peak".into(),
            });
            continue;
        }
        let mut fwhm3 = [S::zero(); 3];
        let mut failed = None;
        for axis in Axis::ALL {
            match fwhm(volume, peak_pos, axis) {
                Ok(w) => fwhm3[axis.index()] = w,
                Err(Error::Unbounded(_)) => {
                    failed = Some(format!(
                        "profile along {} never falls below half maximum",
                        axis.label()
                    ));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(reason) = failed {
            excluded.push(ExcludedPoint { target: *t, reason });
            continue;
        }
        let fns = ctx.f_numbers(peak_pos[2]);
        let mut normalized = [S::zero(); 3];
        for a in 0..3 {
            normalized[a] = fwhm3[a] / (ctx.wavelength * fns[a]);
        }
        entries.push(PointResolution {
            target: *t,
            peak_index: peak_idx,
            peak_position: peak_pos,
            fwhm: fwhm3,
            normalized,
        });
    }
    Ok(ResolutionReport::from_entries(entries, excluded))
}

// ---------------------------------------------------------------------------
// Generalized contrast-to-noise ratio
// ---------------------------------------------------------------------------

/// gCNR between two sample sets: `1 − Σ_b min(h_in[b], h_out[b])` over a
/// shared histogram whose `bins` equal-width bins span the combined range of
/// both sets. 0 means identical distributions, 1 means fully separable.
pub fn gcnr<S: Real>(inside: &[S], outside: &[S], bins: usize) -> Result<S> {
    if inside.is_empty() || outside.is_empty() {
        return Err(Error::EmptyInput("gcnr needs samples in both regions".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidSpec("gcnr needs at least 2 bins".into()));
    }
    let mut lo = S::infinity();
    let mut hi = S::neg_infinity();
    for v in inside.iter().chain(outside.iter()) {
        if !v.is_finite() {
            return Err(Error::InvalidSpec("gcnr samples must be finite".into()));
        }
        if *v < lo {
            lo = *v;
        }
        if *v > hi {
            hi = *v;
        }
    }
    if !(hi > lo) {
        // Every sample shares one value: the distributions are identical.
        return Ok(S::zero());
    }
    let scale = S::of(bins as f64) / (hi - lo);
    let histogram = |samples: &[S]| -> Vec<S> {
        let mut h = vec![S::zero(); bins];
        for v in samples {
            let mut b = ((*v - lo) * scale).to_usize().unwrap_or(0);
            if b >= bins {
                b = bins - 1;
            }
            h[b] += S::one();
        }
        let inv = S::one() / S::of(samples.len() as f64);
        for x in h.iter_mut() {
            *x *= inv;
        }
        h
    };
    let h_in = histogram(inside);
    let h_out = histogram(outside);
    let mut overlap = S::zero();
    for (a, b) in h_in.iter().zip(h_out.iter()) {
        overlap += if a < b { *a } else { *b };
    }
    let g = S::one() - overlap;
    Ok(g.max(S::zero()).min(S::one()))
}

/// Voxel index sets for lesion contrast measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct CystRois {
    /// Voxels strictly inside the lesion, eroded by `margin`.
    pub inside: Vec<usize>,
    /// Background voxels drawn from the lesion's own depth band, exactly as
    /// many as `inside` when available.
    pub outside: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Builds matched inside/outside voxel sets for a spherical lesion.
///
/// The interior is the sphere eroded by `margin` (typically one to two beam
/// widths) to keep partial-volume voxels out. The background is sampled at
/// the lesion's own depths — the band `|z − z_c| ≤ radius − margin` — as a
/// concentric ring starting `margin` outside the sphere laterally and grown
/// outward until it matches the interior count. Holding depth fixed keeps
/// axial gain and clutter gradients out of the contrast comparison. If no
/// ring voxel fits the grid (a lesion spanning the whole lateral extent),
/// the background falls back to the nearest voxels at 3D distance
/// ≥ radius + margin, with a warning. Selection is deterministic:
/// candidates sort by (distance, index).
pub fn cyst_rois<S: Real>(
    grid: &VolumeGrid<S>,
    center: [S; 3],
    radius: S,
    margin: S,
) -> Result<CystRois> {
    grid.validate()?;
    if !(radius > S::zero()) || !(margin >= S::zero()) || margin >= radius {
        return Err(Error::InvalidSpec(
            "need 0 ≤ margin < radius and radius > 0".into(),
        ));
    }
    let r_in = radius - margin;
    let r_out = radius + margin;
    let mut inside = Vec::new();
    let mut ring: Vec<(S, usize)> = Vec::new();
    let mut shell: Vec<(S, usize)> = Vec::new();
    for k in 0..grid.counts[2] {
        for j in 0..grid.counts[1] {
            for i in 0..grid.counts[0] {
                let p = grid.position(i, j, k);
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let dz = p[2] - center[2];
                let lateral = (dx * dx + dy * dy).sqrt();
                let d = (lateral * lateral + dz * dz).sqrt();
                let idx = grid.index(i, j, k);
                if d <= r_in {
                    inside.push(idx);
                } else if dz.abs() <= r_in && lateral >= r_out {
                    ring.push((lateral, idx));
                } else if d >= r_out {
                    shell.push((d, idx));
                }
            }
        }
    }
    if inside.is_empty() {
        return Err(Error::EmptyInput(
            "eroded lesion interior contains no voxels".into(),
        ));
    }
    let mut warnings = Vec::new();
    let mut candidates = if ring.is_empty() {
        warnings.push(
            "no same-depth background ring fits the grid; \
             falling back to the nearest enclosing shell"
                .into(),
        );
        shell
    } else {
        ring
    };
    candidates.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let take = inside.len().min(candidates.len());
    if take < inside.len() {
        warnings.push(format!(
            "background ring truncated: {} voxels available for {} interior voxels",
            take,
            inside.len()
        ));
    }
    let outside: Vec<usize> = candidates[..take].iter().map(|c| c.1).collect();
    for (name, n) in [("interior", inside.len()), ("background ring", outside.len())] {
        if n < 100 {
            warnings.push(format!(
                "{name} region holds only {n} samples; statistics will be noisy"
            ));
        }
    }
    Ok(CystRois {
        inside,
        outside,
        warnings,
    })
}

/// Convenience: gCNR of a reconstructed volume across a spherical lesion,
/// using [`cyst_rois`] regions and envelope amplitudes with `bins` shared
/// histogram bins.
pub fn cyst_gcnr<S: Real>(
    volume: &Volume<S>,
    center: [S; 3],
    radius: S,
    margin: S,
    bins: usize,
) -> Result<(S, CystRois)> {
    let rois = cyst_rois(&volume.grid, center, radius, margin)?;
    let env_at = |idx: &usize| volume.voxels[*idx].norm();
    let inside: Vec<S> = rois.inside.iter().map(env_at).collect();
    let outside: Vec<S> = rois.outside.iter().map(env_at).collect();
    let g = gcnr(&inside, &outside, bins)?;
    Ok((g, rois))
}
