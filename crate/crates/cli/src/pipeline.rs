//! Pipeline stages over persisted artifacts.
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! config.txt                 canonical serialized config
//! phantom.txt                generated scatterer field (x y z amplitude)
//! <scheme>/events_NNN.rcab   conditioned IQ event traces, one per dataset group
//! <scheme>/decoded_NNN.rcab  decoded per-crossing traces; for unencoded
//!                            schemes a byte-identical copy of the events
//! <scheme>/volume.rcab       reconstructed volume
//! resolution.csv | gcnr.csv  metrics, depending on the phantom kind
//! manifest.txt               content hash of every artifact, rewritten per stage
//! ```
//!
//! Stages run standalone on the persisted artifacts; `run_pipeline` simply
//! chains them, so the chained and one-shot outputs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use rcaus::beamform::{das_volume, BeamformInput, RxData};
use rcaus::encoding::{hero_decode, DecodedAperture, EventChannelData};
use rcaus::metrics::{
    cyst_gcnr, resolution_report, ExcludedPoint, ResolutionContext, ResolutionReport,
};
use rcaus::phantoms::{make_cyst, make_grid, Sphere};
use rcaus::pulse::{process_events, synthesize};
use rcaus::schemes::{build_sequence, Sequence};
use rcaus::sim::{auto_t_span, run_acquisition, ScattererField};

use crate::config::{serialize_config, PhantomConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::format::{
    load_iq_aperture, load_iq_events, load_volume, save_iq_aperture, save_iq_events, save_volume,
};
use crate::manifest::write_manifest;

/// Shared histogram bin count for all gCNR scores.
pub const GCNR_BINS: usize = 256;
/// Lesion ROI erosion in beam widths: `margin = EROSION_BEAM_WIDTHS · λ · F#`
/// keeps partial-volume voxels out of both regions.
pub const EROSION_BEAM_WIDTHS: f64 = 1.4;
/// Most point targets a file phantom may contribute to a resolution report.
pub const MAX_FILE_TARGETS: usize = 64;

// ---------------------------------------------------------------------------
// Artifact paths
// ---------------------------------------------------------------------------

pub fn scheme_dir(cfg: &RunConfig, out: &Path) -> PathBuf {
    out.join(cfg.scheme.name())
}

pub fn events_path(dir: &Path, group: usize) -> PathBuf {
    dir.join(format!("events_{group:03}.rcab"))
}

pub fn decoded_path(dir: &Path, group: usize) -> PathBuf {
    dir.join(format!("decoded_{group:03}.rcab"))
}

pub fn volume_path(dir: &Path) -> PathBuf {
    dir.join("volume.rcab")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn sequence_of(cfg: &RunConfig, stage: &'static str) -> Result<Sequence<f64>> {
    build_sequence(&cfg.scheme, &cfg.geometry, &cfg.medium, &cfg.pulse)
        .map_err(|e| CliError::Stage { stage, source: e })
}

// ---------------------------------------------------------------------------
// Phantom realization
// ---------------------------------------------------------------------------

/// Builds the scatterer field described by the config, with any generator
/// warnings (sparse shells, empty fields).
pub fn realize_phantom(cfg: &RunConfig) -> rcaus::Result<(ScattererField<f64>, Vec<String>)> {
    match &cfg.phantom {
        PhantomConfig::Grid(spec) => Ok((make_grid(spec)?, Vec::new())),
        PhantomConfig::Cyst(spec) => {
            let phantom = make_cyst(spec)?;
            Ok((phantom.field, phantom.warnings))
        }
        PhantomConfig::File(path) => Ok((ScattererField::load_text(path)?, Vec::new())),
    }
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Simulates the acquisition and writes conditioned IQ event traces per
/// dataset group, plus `config.txt` and `phantom.txt`.
pub fn stage_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    const STAGE: &str = "simulate";
    let fail = |e: rcaus::Error| CliError::Stage {
        stage: STAGE,
        source: e,
    };
    let start = Instant::now();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_text(&out.join("config.txt"), &serialize_config(cfg))?;

    let (field, mut warnings) = realize_phantom(cfg).map_err(fail)?;
    if field.is_empty() {
        warnings.push("phantom produced no scatterers; traces and volume will be zero".into());
    }
    field.save_text(&out.join("phantom.txt")).map_err(fail)?;

    let seq = sequence_of(cfg, STAGE)?;
    let t_span = auto_t_span(&cfg.geometry, &seq.events, &field, &cfg.medium).map_err(fail)?;
    let acq = run_acquisition(
        &cfg.geometry,
        &seq.events,
        &field,
        &cfg.medium,
        t_span,
        cfg.directivity,
    )
    .map_err(fail)?;

    let wave = synthesize(&cfg.pulse, cfg.medium.sampling_frequency).map_err(fail)?;
    let iq = process_events(&acq.data, &wave, cfg.carrier(), cfg.processing).map_err(fail)?;

    let dir = scheme_dir(cfg, out);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for (i, g) in seq.groups.iter().enumerate() {
        let part = iq.slice_events(g.events.clone()).map_err(fail)?;
        save_iq_events(&events_path(&dir, i), &part)?;
    }
    eprintln!(
        "[simulate] {} scatterers, {} events ({} wavefield simulations) in {:.2} s",
        field.len(),
        seq.event_count(),
        acq.patch_sim_count,
        start.elapsed().as_secs_f64()
    );
    write_manifest(out)?;
    Ok(warnings)
}

/// Inverts the receive encoding per dataset group. Unencoded schemes carry
/// no mixing, so their "decode" is a byte-identical copy.
pub fn stage_decode(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    const STAGE: &str = "decode";
    let start = Instant::now();
    write_text(&out.join("config.txt"), &serialize_config(cfg))?;
    let seq = sequence_of(cfg, STAGE)?;
    let dir = scheme_dir(cfg, out);
    for i in 0..seq.groups.len() {
        let src = events_path(&dir, i);
        let dst = decoded_path(&dir, i);
        match &seq.encoding {
            Some(h) => {
                let events = load_iq_events(&src)?;
                let decoded = hero_decode(&events, h).map_err(|e| CliError::Stage {
                    stage: STAGE,
                    source: e,
                })?;
                save_iq_aperture(&dst, &decoded)?;
            }
            None => {
                fs::copy(&src, &dst).map_err(|e| CliError::io(&src, e))?;
            }
        }
    }
    eprintln!(
        "[decode] {} dataset groups ({}) in {:.2} s",
        seq.groups.len(),
        if seq.encoding.is_some() {
            "hadamard inverted"
        } else {
            "unencoded, copied"
        },
        start.elapsed().as_secs_f64()
    );
    write_manifest(out)?;
    Ok(Vec::new())
}

/// Delay-and-sum reconstruction of all dataset groups into one volume.
pub fn stage_beamform(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    const STAGE: &str = "beamform";
    let fail = |e: rcaus::Error| CliError::Stage {
        stage: STAGE,
        source: e,
    };
    let start = Instant::now();
    write_text(&out.join("config.txt"), &serialize_config(cfg))?;
    let seq = sequence_of(cfg, STAGE)?;
    let dir = scheme_dir(cfg, out);

    let encoded = seq.encoding.is_some();
    let mut crossings: Vec<DecodedAperture<Complex<f64>>> = Vec::new();
    let mut columns: Vec<EventChannelData<Complex<f64>>> = Vec::new();
    for i in 0..seq.groups.len() {
        let path = decoded_path(&dir, i);
        if encoded {
            crossings.push(load_iq_aperture(&path)?);
        } else {
            columns.push(load_iq_events(&path)?);
        }
    }
    let inputs: Vec<BeamformInput<'_, f64>> = seq
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| BeamformInput {
            rx: if encoded {
                RxData::Crossings(&crossings[i])
            } else {
                RxData::Columns {
                    data: &columns[i],
                    event: 0,
                }
            },
            tx: g.model,
        })
        .collect();

    let volume = das_volume(&inputs, &cfg.geometry, &cfg.grid, &cfg.beamform, &cfg.medium)
        .map_err(fail)?;
    save_volume(&volume_path(&dir), &volume)?;

    let secs = start.elapsed().as_secs_f64();
    let voxels = cfg.grid.len();
    eprintln!(
        "[beamform] {} voxels from {} datasets in {:.2} s ({:.0} voxels/second)",
        voxels,
        inputs.len(),
        secs,
        voxels as f64 / secs.max(1e-9)
    );
    write_manifest(out)?;
    Ok(Vec::new())
}

/// ROI erosion for a lesion at `depth`: beam widths times λ·F#, clamped to
/// stay below the lesion radius.
fn erosion_margin(cfg: &RunConfig, sphere: &Sphere<f64>, warnings: &mut Vec<String>) -> f64 {
    let aperture =
        0.5 * (cfg.geometry.aperture_x() + cfg.geometry.aperture_y());
    let f_number = sphere.center[2] / aperture;
    let margin = EROSION_BEAM_WIDTHS * cfg.wavelength() * f_number;
    if margin < sphere.radius {
        margin
    } else {
        warnings.push(format!(
            "erosion margin {margin:.2e} m exceeds the {:.2e} m lesion radius; \
             clamped to 45% of the radius",
            sphere.radius
        ));
        0.45 * sphere.radius
    }
}

/// Scores the reconstructed volume: FWHM resolution for point phantoms,
/// gCNR for cyst phantoms.
pub fn stage_metrics(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    const STAGE: &str = "metrics";
    let fail = |e: rcaus::Error| CliError::Stage {
        stage: STAGE,
        source: e,
    };
    let start = Instant::now();
    write_text(&out.join("config.txt"), &serialize_config(cfg))?;
    let volume = load_volume(&volume_path(&scheme_dir(cfg, out)))?;
    let mut warnings = Vec::new();

    let peak = volume.peak_voxel().map(|(_, e)| e).unwrap_or(0.0);
    if peak <= 0.0 {
        warnings.push("volume is identically zero; no peaks to measure".into());
    }
    let ctx = ResolutionContext {
        wavelength: cfg.wavelength(),
        aperture_x: cfg.geometry.aperture_x(),
        aperture_y: cfg.geometry.aperture_y(),
    };
    let resolution_csv = |targets: &[[f64; 3]]| -> rcaus::Result<String> {
        if targets.is_empty() || peak <= 0.0 {
            let excluded = targets
                .iter()
                .map(|t| ExcludedPoint {
                    target: *t,
                    reason: "no peaks in an all-zero volume".into(),
                })
                .collect();
            return Ok(ResolutionReport::from_entries(Vec::new(), excluded).to_csv());
        }
        Ok(resolution_report(&volume, targets, &ctx)?.to_csv())
    };

    match &cfg.phantom {
        PhantomConfig::Grid(spec) => {
            let targets = make_grid(spec).map_err(fail)?.positions;
            let csv = resolution_csv(&targets).map_err(fail)?;
            if !csv.contains("\npoint,") {
                warnings.push("no point targets could be measured".into());
            }
            write_text(&out.join("resolution.csv"), &csv)?;
        }
        PhantomConfig::File(path) => {
            let field = ScattererField::load_text(path).map_err(fail)?;
            let mut targets = field.positions;
            if targets.len() > MAX_FILE_TARGETS {
                warnings.push(format!(
                    "file phantom has {} scatterers; measuring the first {MAX_FILE_TARGETS} only",
                    targets.len()
                ));
                targets.truncate(MAX_FILE_TARGETS);
            }
            if targets.is_empty() {
                warnings.push("file phantom is empty; nothing to measure".into());
            }
            let csv = resolution_csv(&targets).map_err(fail)?;
            write_text(&out.join("resolution.csv"), &csv)?;
        }
        PhantomConfig::Cyst(spec) => {
            let mut csv = String::from(
                "sphere,center_x_m,center_y_m,center_z_m,radius_m,margin_m,\
                 inside_voxels,outside_voxels,gcnr\n",
            );
            if spec.spheres.is_empty() {
                warnings.push("cyst phantom defines no spheres; nothing to score".into());
            }
            for (i, sphere) in spec.spheres.iter().enumerate() {
                let margin = erosion_margin(cfg, sphere, &mut warnings);
                let (g, rois) =
                    cyst_gcnr(&volume, sphere.center, sphere.radius, margin, GCNR_BINS)
                        .map_err(fail)?;
                warnings.extend(rois.warnings.iter().map(|w| format!("sphere {i}: {w}")));
                csv.push_str(&format!(
                    "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{:.6}\n",
                    i,
                    sphere.center[0],
                    sphere.center[1],
                    sphere.center[2],
                    sphere.radius,
                    margin,
                    rois.inside.len(),
                    rois.outside.len(),
                    g
                ));
            }
            write_text(&out.join("gcnr.csv"), &csv)?;
        }
    }
    eprintln!(
        "[metrics] scored {} phantom in {:.2} s",
        cfg.phantom.kind(),
        start.elapsed().as_secs_f64()
    );
    write_manifest(out)?;
    Ok(warnings)
}

/// Runs simulate → decode → beamform → metrics. Artifacts of completed
/// stages survive a later failure.
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let mut warnings = stage_simulate(cfg, out)?;
    warnings.extend(stage_decode(cfg, out)?);
    warnings.extend(stage_beamform(cfg, out)?);
    warnings.extend(stage_metrics(cfg, out)?);
    Ok(warnings)
}

// ---------------------------------------------------------------------------
// Describe
// ---------------------------------------------------------------------------

/// Human-readable sequence summary for a config, without simulating.
pub fn describe(cfg: &RunConfig) -> Result<String> {
    let seq = sequence_of(cfg, "describe")?;
    let rate = seq
        .acquisition_rate(cfg.prf)
        .map_err(|e| CliError::Stage {
            stage: "describe",
            source: e,
        })?;
    let mut s = String::new();
    s.push_str(&format!("scheme: {}\n", seq.scheme));
    s.push_str(&format!("events: {}\n", seq.event_count()));
    s.push_str(&format!("datasets: {}\n", seq.groups.len()));
    s.push_str(&format!(
        "events per dataset: {}\n",
        seq.event_count() / seq.groups.len().max(1)
    ));
    match &seq.encoding {
        Some(h) => s.push_str(&format!("encoding: hadamard, order {}\n", h.order())),
        None => s.push_str("encoding: none\n"),
    }
    s.push_str(&format!("prf: {} Hz\n", cfg.prf));
    s.push_str(&format!("acquisition rate: {rate:.2} Hz\n"));
    s.push_str(&format!(
        "volume grid: {} x {} x {} voxels\n",
        cfg.grid.counts[0], cfg.grid.counts[1], cfg.grid.counts[2]
    ));
    s.push_str(&format!("phantom: {}\n", cfg.phantom.kind()));
    Ok(s)
}
