//! Run configuration: a strict, line-oriented `section.key = value` text
//! format covering the whole pipeline.
//!
//! Rules:
//!
//! * one assignment per line; blank lines and lines starting with `#` are
//!   ignored,
//! * every value is in SI base units — plain numbers only, no unit suffixes
//!   (`pitch = 250e-6`, never `250 um`),
//! * unknown or duplicate keys are errors, never silently ignored,
//! * a parsed config serializes back to a canonical text that parses to an
//!   identical value.
//!
//! See `docs/config.md` for the full key table.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rcaus::beamform::{Apodization, BeamformConfig, Compounding, Interpolation, VolumeGrid};
use rcaus::geometry::{ArrayGeometry, MediumSpec};
use rcaus::phantoms::{CystPhantomSpec, GridPhantomSpec, Sphere};
use rcaus::pulse::{BurstWindow, ChirpWindow, ProcessingOptions, PulseSpec};
use rcaus::schemes::SchemeSpec;
use rcaus::sim::Directivity;

use crate::error::{CliError, Result};

/// Pulse repetition frequency assumed when the config does not set one.
pub const DEFAULT_PRF_HZ: f64 = 10e3;

/// Scatterer source for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum PhantomConfig {
    /// Lattice of unit point targets.
    Grid(GridPhantomSpec<f64>),
    /// Seeded speckle box with anechoic spheres.
    Cyst(CystPhantomSpec<f64>),
    /// Scatterers loaded from a text file (`x y z amplitude` per line).
    File(PathBuf),
}

impl PhantomConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            PhantomConfig::Grid(_) => "grid",
            PhantomConfig::Cyst(_) => "cyst",
            PhantomConfig::File(_) => "file",
        }
    }
}

/// Everything a pipeline run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: ArrayGeometry<f64>,
    pub medium: MediumSpec<f64>,
    pub pulse: PulseSpec<f64>,
    pub scheme: SchemeSpec<f64>,
    pub phantom: PhantomConfig,
    /// Voxel lattice of the reconstruction.
    pub grid: VolumeGrid<f64>,
    pub beamform: BeamformConfig<f64>,
    pub processing: ProcessingOptions,
    pub directivity: Directivity,
    pub output_dir: PathBuf,
    /// Pulse repetition frequency in hertz, for acquisition-rate reporting.
    pub prf: f64,
}

impl RunConfig {
    /// Demodulation carrier: the spectral center of the excitation.
    pub fn carrier(&self) -> f64 {
        self.pulse.center_frequency()
    }

    /// Wavelength at the carrier, in meters.
    pub fn wavelength(&self) -> f64 {
        self.medium.speed_of_sound / self.carrier()
    }
}

// ---------------------------------------------------------------------------
// Key-value scanning
// ---------------------------------------------------------------------------

struct KeyTable {
    /// `(section, key)` → `(value, line number)`.
    values: HashMap<(String, String), (String, usize)>,
    /// Keys actually consumed, for unknown-key detection.
    used: std::cell::RefCell<Vec<(String, String)>>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl KeyTable {
    fn scan(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, value) = line.split_once('=').ok_or_else(|| {
                config_err(format!("line {line_no}: expected `section.key = value`"))
            })?;
            let (section, key) = lhs.trim().split_once('.').ok_or_else(|| {
                config_err(format!(
                    "line {line_no}: key `{}` is missing its section prefix",
                    lhs.trim()
                ))
            })?;
            let section = section.trim().to_string();
            let key = key.trim().to_string();
            if section.is_empty() || key.is_empty() {
                return Err(config_err(format!("line {line_no}: empty section or key")));
            }
            let value = value.trim().to_string();
            if let Some((_, prev)) =
                values.insert((section.clone(), key.clone()), (value, line_no))
            {
                return Err(config_err(format!(
                    "line {line_no}: `{section}.{key}` already set on line {prev}"
                )));
            }
        }
        Ok(KeyTable {
            values,
            used: std::cell::RefCell::new(Vec::new()),
        })
    }

    fn get(&self, section: &str, key: &str) -> Option<(&str, usize)> {
        let k = (section.to_string(), key.to_string());
        let hit = self.values.get(&k).map(|(v, l)| (v.as_str(), *l));
        if hit.is_some() {
            self.used.borrow_mut().push(k);
        }
        hit
    }

    fn require(&self, section: &str, key: &str) -> Result<(&str, usize)> {
        self.get(section, key)
            .ok_or_else(|| config_err(format!("missing required key `{section}.{key}`")))
    }

    fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        let mut unknown: Vec<_> = self
            .values
            .iter()
            .filter(|(k, _)| !used.contains(k))
            .map(|((s, k), (_, line))| format!("line {line}: unknown key `{s}.{k}`"))
            .collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort();
        Err(config_err(unknown.join("; ")))
    }
}

fn parse_f64(section: &str, key: &str, value: &str, line: usize) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        let hint = if value.split_whitespace().count() > 1
            || value.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        {
            " (values are SI base units as plain numbers; write `250e-6`, not `250 um`)"
        } else {
            ""
        };
        config_err(format!(
            "line {line}: `{section}.{key} = {value}` is not a number{hint}"
        ))
    })
}

fn parse_int<T: std::str::FromStr>(section: &str, key: &str, value: &str, line: usize) -> Result<T> {
    value.parse::<T>().map_err(|_| {
        config_err(format!(
            "line {line}: `{section}.{key} = {value}` is not a valid integer"
        ))
    })
}

fn parse_bool(section: &str, key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_err(format!(
            "line {line}: `{section}.{key} = {value}` must be `true` or `false`"
        ))),
    }
}

macro_rules! req_f64 {
    ($t:expr, $s:literal, $k:literal) => {{
        let (v, l) = $t.require($s, $k)?;
        parse_f64($s, $k, v, l)?
    }};
}

macro_rules! req_int {
    ($t:expr, $s:literal, $k:literal, $ty:ty) => {{
        let (v, l) = $t.require($s, $k)?;
        parse_int::<$ty>($s, $k, v, l)?
    }};
}

fn triple(t: &KeyTable, section: &'static str, stem: &str) -> Result<Option<[f64; 3]>> {
    let mut out = [0.0; 3];
    let mut seen = 0;
    for (a, axis) in ["x", "y", "z"].iter().enumerate() {
        if let Some((v, l)) = t.get(section, &format!("{stem}_{axis}")) {
            out[a] = parse_f64(section, &format!("{stem}_{axis}"), v, l)?;
            seen += 1;
        }
    }
    match seen {
        0 => Ok(None),
        3 => Ok(Some(out)),
        _ => Err(config_err(format!(
            "`{section}.{stem}_x/_y/_z` must be given together"
        ))),
    }
}

fn require_triple(t: &KeyTable, section: &'static str, stem: &str) -> Result<[f64; 3]> {
    triple(t, section, stem)?
        .ok_or_else(|| config_err(format!("missing required keys `{section}.{stem}_x/_y/_z`")))
}

// ---------------------------------------------------------------------------
// Section builders
// ---------------------------------------------------------------------------

fn build_pulse(t: &KeyTable) -> Result<PulseSpec<f64>> {
    let (kind, line) = t.require("pulse", "kind")?;
    match kind {
        "tone_burst" => {
            let frequency = req_f64!(t, "pulse", "frequency");
            let cycles = req_int!(t, "pulse", "cycles", u32);
            let window = match t.get("pulse", "window") {
                None => BurstWindow::Hann,
                Some(("hann", _)) => BurstWindow::Hann,
                Some(("rectangular", _)) => BurstWindow::Rectangular,
                Some((other, l)) => {
                    return Err(config_err(format!(
                        "line {l}: burst window `{other}` is not `hann` or `rectangular`"
                    )))
                }
            };
            Ok(PulseSpec::ToneBurst {
                frequency,
                cycles,
                window,
            })
        }
        "chirp" => {
            let f_low = req_f64!(t, "pulse", "f_low");
            let f_high = req_f64!(t, "pulse", "f_high");
            let duration = req_f64!(t, "pulse", "duration");
            let window = match t.get("pulse", "window") {
                None | Some(("rectangular", _)) => ChirpWindow::Rectangular,
                Some(("tukey", _)) => {
                    let alpha = req_f64!(t, "pulse", "tukey_alpha");
                    ChirpWindow::Tukey { alpha }
                }
                Some((other, l)) => {
                    return Err(config_err(format!(
                        "line {l}: chirp window `{other}` is not `rectangular` or `tukey`"
                    )))
                }
            };
            Ok(PulseSpec::Chirp {
                f_low,
                f_high,
                duration,
                window,
            })
        }
        other => Err(config_err(format!(
            "line {line}: pulse kind `{other}` is not `tone_burst` or `chirp`"
        ))),
    }
}

fn build_scheme(t: &KeyTable) -> Result<SchemeSpec<f64>> {
    let (kind, line) = t.require("scheme", "kind")?;
    match kind {
        "optimus" => Ok(SchemeSpec::Optimus {
            angle_count: req_int!(t, "scheme", "angle_count", usize),
            max_angle: req_f64!(t, "scheme", "max_angle"),
        }),
        "hercules" => Ok(SchemeSpec::Hercules),
        "vls" => Ok(SchemeSpec::Vls {
            source_count: req_int!(t, "scheme", "source_count", usize),
            source_depth: req_f64!(t, "scheme", "source_depth"),
        }),
        "tpw" => Ok(SchemeSpec::Tpw {
            angle_count: req_int!(t, "scheme", "angle_count", usize),
            max_angle: req_f64!(t, "scheme", "max_angle"),
        }),
        other => Err(config_err(format!(
            "line {line}: scheme kind `{other}` is not one of optimus, hercules, vls, tpw"
        ))),
    }
}

fn parse_spheres(value: &str, line: usize) -> Result<Vec<Sphere<f64>>> {
    let mut spheres = Vec::new();
    for part in value.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let nums: Vec<f64> = part
            .split_whitespace()
            .map(|w| {
                w.parse::<f64>().map_err(|_| {
                    config_err(format!(
                        "line {line}: sphere component `{w}` is not a number"
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() != 4 {
            return Err(config_err(format!(
                "line {line}: each sphere needs 4 numbers `x y z radius`, got {}",
                nums.len()
            )));
        }
        spheres.push(Sphere {
            center: [nums[0], nums[1], nums[2]],
            radius: nums[3],
        });
    }
    Ok(spheres)
}

fn build_phantom(t: &KeyTable) -> Result<PhantomConfig> {
    let (kind, line) = t.require("phantom", "kind")?;
    match kind {
        "grid" => Ok(PhantomConfig::Grid(GridPhantomSpec {
            extent: require_triple(t, "phantom", "extent")?,
            spacing: require_triple(t, "phantom", "spacing")?,
            depth_center: req_f64!(t, "phantom", "depth_center"),
            amplitude: match t.get("phantom", "amplitude") {
                Some((v, l)) => parse_f64("phantom", "amplitude", v, l)?,
                None => 1.0,
            },
        })),
        "cyst" => {
            let spheres = match t.get("phantom", "spheres") {
                Some((v, l)) => parse_spheres(v, l)?,
                None => Vec::new(),
            };
            Ok(PhantomConfig::Cyst(CystPhantomSpec {
                density: req_f64!(t, "phantom", "density"),
                extent: require_triple(t, "phantom", "extent")?,
                depth_center: req_f64!(t, "phantom", "depth_center"),
                spheres,
                seed: req_int!(t, "phantom", "seed", u64),
            }))
        }
        "file" => {
            let (path, _) = t.require("phantom", "path")?;
            Ok(PhantomConfig::File(PathBuf::from(path)))
        }
        other => Err(config_err(format!(
            "line {line}: phantom kind `{other}` is not one of grid, cyst, file"
        ))),
    }
}

fn build_beamform(t: &KeyTable) -> Result<BeamformConfig<f64>> {
    let mut cfg = BeamformConfig::default();
    if let Some((v, l)) = t.get("beamform", "f_number") {
        cfg.f_number = parse_f64("beamform", "f_number", v, l)?;
    }
    match t.get("beamform", "apodization") {
        None => {}
        Some(("hann", _)) => cfg.rx_apodization = Apodization::Hann,
        Some(("none", _)) => cfg.rx_apodization = Apodization::None,
        Some((other, l)) => {
            return Err(config_err(format!(
                "line {l}: apodization `{other}` is not `hann` or `none`"
            )))
        }
    }
    if let Some((v, l)) = t.get("beamform", "voxel_budget") {
        cfg.voxel_budget = parse_int::<usize>("beamform", "voxel_budget", v, l)?;
    }
    // Compounding and interpolation have a single supported mode each; they
    // stay fixed rather than being configurable no-ops.
    cfg.compounding = Compounding::Coherent;
    cfg.interpolation = Interpolation::LinearIq;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Parse and serialize
// ---------------------------------------------------------------------------

/// Parses and fully validates a run config.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let t = KeyTable::scan(text)?;

    let geometry = ArrayGeometry {
        rows: req_int!(t, "geometry", "rows", usize),
        cols: req_int!(t, "geometry", "cols", usize),
        pitch: req_f64!(t, "geometry", "pitch"),
        kerf: req_f64!(t, "geometry", "kerf"),
        center_frequency: req_f64!(t, "geometry", "center_frequency"),
    };
    let medium = MediumSpec {
        speed_of_sound: req_f64!(t, "medium", "speed_of_sound"),
        sampling_frequency: req_f64!(t, "medium", "sampling_frequency"),
    };
    let pulse = build_pulse(&t)?;
    let scheme = build_scheme(&t)?;
    let phantom = build_phantom(&t)?;
    let grid = VolumeGrid {
        origin: require_triple(&t, "grid", "origin")?,
        spacing: require_triple(&t, "grid", "spacing")?,
        counts: {
            let c = [
                req_int!(t, "grid", "counts_x", usize),
                req_int!(t, "grid", "counts_y", usize),
                req_int!(t, "grid", "counts_z", usize),
            ];
            c
        },
    };
    let beamform = build_beamform(&t)?;
    let processing = ProcessingOptions {
        matched_filter: match t.get("processing", "matched_filter") {
            Some((v, l)) => parse_bool("processing", "matched_filter", v, l)?,
            None => true,
        },
        decimation: match t.get("processing", "decimation") {
            Some((v, l)) => parse_int::<usize>("processing", "decimation", v, l)?,
            None => 1,
        },
    };
    let directivity = match t.get("sim", "directivity") {
        None | Some(("baffled_rect", _)) => Directivity::BaffledRect,
        Some(("omni", _)) => Directivity::Omni,
        Some((other, l)) => {
            return Err(config_err(format!(
                "line {l}: directivity `{other}` is not `baffled_rect` or `omni`"
            )))
        }
    };
    let output_dir = PathBuf::from(t.require("run", "output_dir")?.0);
    let prf = match t.get("run", "prf") {
        Some((v, l)) => parse_f64("run", "prf", v, l)?,
        None => DEFAULT_PRF_HZ,
    };

    t.finish()?;

    let cfg = RunConfig {
        geometry,
        medium,
        pulse,
        scheme,
        phantom,
        grid,
        beamform,
        processing,
        directivity,
        output_dir,
        prf,
    };
    validate_config(&cfg)?;
    Ok(cfg)
}

/// Cross-field validation beyond per-key syntax. Building the transmit
/// sequence exercises geometry, medium, pulse and scheme constraints in one
/// go, so bad steering parameters and non-power-of-two encoded row counts
/// surface here as config errors rather than mid-pipeline.
fn validate_config(cfg: &RunConfig) -> Result<()> {
    let as_config_err = |e: rcaus::Error| config_err(e.to_string());
    cfg.geometry.validate().map_err(as_config_err)?;
    cfg.medium.validate().map_err(as_config_err)?;
    cfg.pulse.validate().map_err(as_config_err)?;
    cfg.grid.validate().map_err(as_config_err)?;
    match &cfg.phantom {
        PhantomConfig::Grid(spec) => spec.validate().map_err(as_config_err)?,
        PhantomConfig::Cyst(spec) => spec.validate().map_err(as_config_err)?,
        PhantomConfig::File(path) => {
            if !path.exists() {
                return Err(config_err(format!(
                    "phantom file `{}` does not exist",
                    path.display()
                )));
            }
        }
    }
    if !(cfg.prf > 0.0) || !cfg.prf.is_finite() {
        return Err(config_err("run.prf must be positive and finite"));
    }
    if cfg.processing.decimation == 0 {
        return Err(config_err("processing.decimation must be at least 1"));
    }
    if !(cfg.beamform.f_number >= 0.0) || !cfg.beamform.f_number.is_finite() {
        return Err(config_err("beamform.f_number must be finite and ≥ 0"));
    }
    rcaus::schemes::build_sequence(&cfg.scheme, &cfg.geometry, &cfg.medium, &cfg.pulse)
        .map_err(as_config_err)?;
    Ok(())
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_config(&text)
}

/// Serializes to the canonical text form; `parse_config` of the result
/// reproduces the value exactly.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let kv = |s: &mut String, sec: &str, key: &str, val: &str| {
        writeln!(s, "{sec}.{key} = {val}").unwrap();
    };
    let num = |v: f64| format!("{v}");

    kv(&mut s, "geometry", "rows", &cfg.geometry.rows.to_string());
    kv(&mut s, "geometry", "cols", &cfg.geometry.cols.to_string());
    kv(&mut s, "geometry", "pitch", &num(cfg.geometry.pitch));
    kv(&mut s, "geometry", "kerf", &num(cfg.geometry.kerf));
    kv(
        &mut s,
        "geometry",
        "center_frequency",
        &num(cfg.geometry.center_frequency),
    );
    s.push('\n');

    kv(
        &mut s,
        "medium",
        "speed_of_sound",
        &num(cfg.medium.speed_of_sound),
    );
    kv(
        &mut s,
        "medium",
        "sampling_frequency",
        &num(cfg.medium.sampling_frequency),
    );
    s.push('\n');

    match cfg.pulse {
        PulseSpec::ToneBurst {
            frequency,
            cycles,
            window,
        } => {
            kv(&mut s, "pulse", "kind", "tone_burst");
            kv(&mut s, "pulse", "frequency", &num(frequency));
            kv(&mut s, "pulse", "cycles", &cycles.to_string());
            kv(
                &mut s,
                "pulse",
                "window",
                match window {
                    BurstWindow::Hann => "hann",
                    BurstWindow::Rectangular => "rectangular",
                },
            );
        }
        PulseSpec::Chirp {
            f_low,
            f_high,
            duration,
            window,
        } => {
            kv(&mut s, "pulse", "kind", "chirp");
            kv(&mut s, "pulse", "f_low", &num(f_low));
            kv(&mut s, "pulse", "f_high", &num(f_high));
            kv(&mut s, "pulse", "duration", &num(duration));
            match window {
                ChirpWindow::Rectangular => kv(&mut s, "pulse", "window", "rectangular"),
                ChirpWindow::Tukey { alpha } => {
                    kv(&mut s, "pulse", "window", "tukey");
                    kv(&mut s, "pulse", "tukey_alpha", &num(alpha));
                }
            }
        }
    }
    s.push('\n');

    match cfg.scheme {
        SchemeSpec::Optimus {
            angle_count,
            max_angle,
        } => {
            kv(&mut s, "scheme", "kind", "optimus");
            kv(&mut s, "scheme", "angle_count", &angle_count.to_string());
            kv(&mut s, "scheme", "max_angle", &num(max_angle));
        }
        SchemeSpec::Hercules => kv(&mut s, "scheme", "kind", "hercules"),
        SchemeSpec::Vls {
            source_count,
            source_depth,
        } => {
            kv(&mut s, "scheme", "kind", "vls");
            kv(&mut s, "scheme", "source_count", &source_count.to_string());
            kv(&mut s, "scheme", "source_depth", &num(source_depth));
        }
        SchemeSpec::Tpw {
            angle_count,
            max_angle,
        } => {
            kv(&mut s, "scheme", "kind", "tpw");
            kv(&mut s, "scheme", "angle_count", &angle_count.to_string());
            kv(&mut s, "scheme", "max_angle", &num(max_angle));
        }
    }
    s.push('\n');

    let axes = ["x", "y", "z"];
    match &cfg.phantom {
        PhantomConfig::Grid(spec) => {
            kv(&mut s, "phantom", "kind", "grid");
            for a in 0..3 {
                kv(
                    &mut s,
                    "phantom",
                    &format!("extent_{}", axes[a]),
                    &num(spec.extent[a]),
                );
            }
            for a in 0..3 {
                kv(
                    &mut s,
                    "phantom",
                    &format!("spacing_{}", axes[a]),
                    &num(spec.spacing[a]),
                );
            }
            kv(&mut s, "phantom", "depth_center", &num(spec.depth_center));
            kv(&mut s, "phantom", "amplitude", &num(spec.amplitude));
        }
        PhantomConfig::Cyst(spec) => {
            kv(&mut s, "phantom", "kind", "cyst");
            kv(&mut s, "phantom", "density", &num(spec.density));
            for a in 0..3 {
                kv(
                    &mut s,
                    "phantom",
                    &format!("extent_{}", axes[a]),
                    &num(spec.extent[a]),
                );
            }
            kv(&mut s, "phantom", "depth_center", &num(spec.depth_center));
            kv(&mut s, "phantom", "seed", &spec.seed.to_string());
            if !spec.spheres.is_empty() {
                let list = spec
                    .spheres
                    .iter()
                    .map(|sp| {
                        format!(
                            "{} {} {} {}",
                            num(sp.center[0]),
                            num(sp.center[1]),
                            num(sp.center[2]),
                            num(sp.radius)
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(" ; ");
                kv(&mut s, "phantom", "spheres", &list);
            }
        }
        PhantomConfig::File(path) => {
            kv(&mut s, "phantom", "kind", "file");
            kv(&mut s, "phantom", "path", &path.display().to_string());
        }
    }
    s.push('\n');

    for a in 0..3 {
        kv(
            &mut s,
            "grid",
            &format!("origin_{}", axes[a]),
            &num(cfg.grid.origin[a]),
        );
    }
    for a in 0..3 {
        kv(
            &mut s,
            "grid",
            &format!("spacing_{}", axes[a]),
            &num(cfg.grid.spacing[a]),
        );
    }
    for a in 0..3 {
        kv(
            &mut s,
            "grid",
            &format!("counts_{}", axes[a]),
            &cfg.grid.counts[a].to_string(),
        );
    }
    s.push('\n');

    kv(&mut s, "beamform", "f_number", &num(cfg.beamform.f_number));
    kv(
        &mut s,
        "beamform",
        "apodization",
        match cfg.beamform.rx_apodization {
            Apodization::Hann => "hann",
            Apodization::None => "none",
        },
    );
    kv(
        &mut s,
        "beamform",
        "voxel_budget",
        &cfg.beamform.voxel_budget.to_string(),
    );
    s.push('\n');

    kv(
        &mut s,
        "processing",
        "matched_filter",
        if cfg.processing.matched_filter {
            "true"
        } else {
            "false"
        },
    );
    kv(
        &mut s,
        "processing",
        "decimation",
        &cfg.processing.decimation.to_string(),
    );
    s.push('\n');

    kv(
        &mut s,
        "sim",
        "directivity",
        match cfg.directivity {
            Directivity::BaffledRect => "baffled_rect",
            Directivity::Omni => "omni",
        },
    );
    s.push('\n');

    kv(
        &mut s,
        "run",
        "output_dir",
        &cfg.output_dir.display().to_string(),
    );
    kv(&mut s, "run", "prf", &num(cfg.prf));
    s
}
