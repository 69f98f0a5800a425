//! End-to-end tests of the pipeline stages and the `rcaus` binary: stage
//! composability, artifact determinism, exit codes, and rendering.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::tempdir;

use rcaus_cli::format::{load_iq_aperture, load_volume, read_header, save_volume, DataKind};
use rcaus_cli::manifest::MANIFEST_NAME;
use rcaus_cli::pipeline::{
    decoded_path, events_path, run_pipeline, scheme_dir, stage_beamform, stage_decode,
    stage_metrics, stage_simulate, volume_path,
};
use rcaus_cli::{parse_config, RunConfig};

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// A deliberately tiny 4x4-element run that a debug build finishes in well
/// under a second per stage.
fn tiny_text(scheme_lines: &str, phantom_lines: &str, grid_lines: &str) -> String {
    format!(
        "\
geometry.rows = 4
geometry.cols = 4
geometry.pitch = 250e-6
geometry.kerf = 30e-6
geometry.center_frequency = 6.25e6
medium.speed_of_sound = 1540
medium.sampling_frequency = 25e6
pulse.kind = tone_burst
pulse.frequency = 6.25e6
pulse.cycles = 1
{scheme_lines}
{phantom_lines}
{grid_lines}
processing.decimation = 2
run.output_dir = out
"
    )
}

fn point_phantom() -> &'static str {
    "phantom.kind = grid
phantom.extent_x = 0
phantom.extent_y = 0
phantom.extent_z = 0
phantom.spacing_x = 1e-3
phantom.spacing_y = 1e-3
phantom.spacing_z = 1e-3
phantom.depth_center = 6e-3"
}

fn point_grid() -> &'static str {
    "grid.origin_x = -0.3e-3
grid.origin_y = -0.25e-3
grid.origin_z = 5.8e-3
grid.spacing_x = 1e-4
grid.spacing_y = 1e-4
grid.spacing_z = 1e-4
grid.counts_x = 7
grid.counts_y = 6
grid.counts_z = 5"
}

fn hercules_config() -> RunConfig {
    parse_config(&tiny_text("scheme.kind = hercules", point_phantom(), point_grid())).unwrap()
}

fn tpw_config() -> RunConfig {
    parse_config(&tiny_text(
        "scheme.kind = tpw\nscheme.angle_count = 3\nscheme.max_angle = 0.1",
        point_phantom(),
        point_grid(),
    ))
    .unwrap()
}

/// Cyst run whose single sphere swallows the whole scatterer box: the field
/// comes out empty and every downstream artifact must still be written.
fn covered_cyst_text() -> String {
    tiny_text(
        "scheme.kind = hercules",
        "phantom.kind = cyst
phantom.density = 5e9
phantom.seed = 11
phantom.extent_x = 2e-3
phantom.extent_y = 2e-3
phantom.extent_z = 2e-3
phantom.depth_center = 6e-3
phantom.spheres = 0 0 6e-3 2e-3",
        "grid.origin_x = -2e-3
grid.origin_y = -2e-3
grid.origin_z = 3e-3
grid.spacing_x = 2.5e-4
grid.spacing_y = 2.5e-4
grid.spacing_z = 2.5e-4
grid.counts_x = 17
grid.counts_y = 17
grid.counts_z = 25",
    )
}

fn manifest_bytes(dir: &Path) -> Vec<u8> {
    fs::read(dir.join(MANIFEST_NAME)).unwrap()
}

fn tree_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn rcaus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcaus"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

// ---------------------------------------------------------------------------
// Stage composability and determinism
// ---------------------------------------------------------------------------

#[test]
fn chained_stages_match_run_byte_for_byte_and_reruns_reproduce() {
    let cfg = hercules_config();
    let tmp = tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));

    run_pipeline(&cfg, &a).unwrap();
    stage_simulate(&cfg, &b).unwrap();
    stage_decode(&cfg, &b).unwrap();
    stage_beamform(&cfg, &b).unwrap();
    stage_metrics(&cfg, &b).unwrap();
    run_pipeline(&cfg, &c).unwrap();

    assert_eq!(manifest_bytes(&a), manifest_bytes(&b));
    assert_eq!(manifest_bytes(&a), manifest_bytes(&c));
    // The manifest speaks for the content: verify it also lists every file.
    let files = tree_files(&a);
    let listed = String::from_utf8(manifest_bytes(&a)).unwrap();
    for f in &files {
        let rel = f.strip_prefix(&a).unwrap().to_string_lossy().replace('\\', "/");
        if rel != MANIFEST_NAME {
            assert!(listed.contains(&rel), "manifest should list {rel}");
        }
    }
    // And byte-compare the trees directly, not only through the hash.
    for f in tree_files(&a) {
        let rel = f.strip_prefix(&a).unwrap();
        assert_eq!(
            fs::read(&f).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{} differs between run and chained stages",
            rel.display()
        );
    }

    // The point target sits mid-grid; the reconstruction must peak there.
    let vol = load_volume(&volume_path(&scheme_dir(&cfg, &a))).unwrap();
    let ([i, j, k], peak) = vol.peak_voxel().unwrap();
    assert!(peak > 0.0);
    assert_eq!((i, j, k), (3, 2, 2));
}

#[test]
fn decode_copies_unencoded_events_and_inverts_encoded_ones() {
    let tmp = tempdir().unwrap();

    // Unencoded: decoded files are byte-identical copies, still event-kind.
    let cfg = tpw_config();
    let out = tmp.path().join("tpw");
    stage_simulate(&cfg, &out).unwrap();
    stage_decode(&cfg, &out).unwrap();
    let dir = scheme_dir(&cfg, &out);
    for i in 0..3 {
        let src = fs::read(events_path(&dir, i)).unwrap();
        let dst = fs::read(decoded_path(&dir, i)).unwrap();
        assert_eq!(src, dst, "group {i} should be copied verbatim");
        let header = read_header(&decoded_path(&dir, i)).unwrap();
        assert_eq!(header.kind, DataKind::EventChannel);
    }

    // Encoded: decoded files hold per-crossing apertures.
    let cfg = hercules_config();
    let out = tmp.path().join("hercules");
    stage_simulate(&cfg, &out).unwrap();
    stage_decode(&cfg, &out).unwrap();
    let dir = scheme_dir(&cfg, &out);
    let decoded = load_iq_aperture(&decoded_path(&dir, 0)).unwrap();
    assert_eq!((decoded.rows, decoded.cols), (4, 4));
    assert!(decoded.carrier.is_some());
}

// ---------------------------------------------------------------------------
// Degenerate inputs
// ---------------------------------------------------------------------------

#[test]
fn empty_phantom_completes_with_warnings_and_a_zero_volume() {
    let tmp = tempdir().unwrap();
    let cfg_path = tmp.path().join("covered.cfg");
    fs::write(&cfg_path, covered_cyst_text()).unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");

    let run_a = rcaus(&[
        "run",
        cfg_path.to_str().unwrap(),
        "--output",
        out_a.to_str().unwrap(),
    ]);
    assert!(
        run_a.status.success(),
        "empty phantom must not fail the run: {}",
        String::from_utf8_lossy(&run_a.stderr)
    );
    let stderr = String::from_utf8_lossy(&run_a.stderr);
    assert!(stderr.contains("warning:"), "stderr was: {stderr}");
    assert!(stderr.contains("no scatterers"), "stderr was: {stderr}");
    assert!(stderr.contains("no peaks"), "stderr was: {stderr}");

    let cfg = parse_config(&covered_cyst_text()).unwrap();
    let vol = load_volume(&volume_path(&scheme_dir(&cfg, &out_a))).unwrap();
    assert!(vol.voxels.iter().all(|v| v.norm() == 0.0));
    assert!(out_a.join("gcnr.csv").exists());
    assert!(out_a.join("phantom.txt").exists());

    // Seeded generation: a second run reproduces the manifest bit for bit.
    let run_b = rcaus(&[
        "run",
        cfg_path.to_str().unwrap(),
        "--output",
        out_b.to_str().unwrap(),
    ]);
    assert!(run_b.status.success());
    assert_eq!(manifest_bytes(&out_a), manifest_bytes(&out_b));
}

// ---------------------------------------------------------------------------
// Binary: describe, exit codes
// ---------------------------------------------------------------------------

#[test]
fn describe_reports_counts_and_acquisition_rate() {
    let tmp = tempdir().unwrap();
    let text = tiny_text(
        "scheme.kind = optimus\nscheme.angle_count = 9\nscheme.max_angle = 0.17453292519943295",
        point_phantom(),
        point_grid(),
    )
    .replace("geometry.rows = 4", "geometry.rows = 128")
    .replace("geometry.cols = 4", "geometry.cols = 128");
    let cfg_path = tmp.path().join("describe.cfg");
    fs::write(&cfg_path, text).unwrap();

    let out = rcaus(&["describe", cfg_path.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("scheme: optimus"), "stdout: {stdout}");
    assert!(stdout.contains("events: 1152"), "stdout: {stdout}");
    assert!(stdout.contains("datasets: 9"), "stdout: {stdout}");
    assert!(stdout.contains("encoding: hadamard, order 128"), "stdout: {stdout}");
    assert!(stdout.contains("acquisition rate: 8.68 Hz"), "stdout: {stdout}");
}

#[test]
fn config_errors_exit_2_and_stage_errors_exit_3() {
    let tmp = tempdir().unwrap();

    // Unknown key: rejected while parsing, exit code 2.
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, tiny_text("scheme.kind = hercules", point_phantom(), point_grid()) + "geometry.pich = 1\n").unwrap();
    let out = rcaus(&["describe", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    // Missing config file: also a config error.
    let out = rcaus(&["describe", tmp.path().join("absent.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Well-formed config, but beamform has no simulated artifacts: exit 3.
    let good = tmp.path().join("good.cfg");
    fs::write(&good, tiny_text("scheme.kind = hercules", point_phantom(), point_grid())).unwrap();
    let empty_out = tmp.path().join("empty");
    fs::create_dir_all(&empty_out).unwrap();
    let out = rcaus(&[
        "beamform",
        good.to_str().unwrap(),
        "--output",
        empty_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn beamform_rejects_a_dataset_of_the_wrong_kind() {
    let cfg = hercules_config();
    let tmp = tempdir().unwrap();
    let out = tmp.path().to_path_buf();
    stage_simulate(&cfg, &out).unwrap();
    stage_decode(&cfg, &out).unwrap();

    // Clobber the decoded dataset with a volume file of the right name.
    let dir = scheme_dir(&cfg, &out);
    let vol = load_volume_fixture();
    save_volume(&decoded_path(&dir, 0), &vol).unwrap();

    let err = stage_beamform(&cfg, &out).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let msg = err.to_string();
    assert!(
        msg.contains("dataset kind is volume"),
        "message should name the offending kind: {msg}"
    );
}

fn load_volume_fixture() -> rcaus::beamform::Volume<f64> {
    use num_complex::Complex;
    let grid = rcaus::beamform::VolumeGrid {
        origin: [0.0, 0.0, 1e-3],
        spacing: [1e-4; 3],
        counts: [2, 2, 2],
    };
    let mut vol = rcaus::beamform::Volume::zeroed(grid);
    vol.voxels[0] = Complex::new(1.0, 0.0);
    vol
}

// ---------------------------------------------------------------------------
// Render
// ---------------------------------------------------------------------------

#[test]
fn render_writes_images_matching_the_grid_and_leaves_the_manifest_alone() {
    let cfg = hercules_config();
    let tmp = tempdir().unwrap();
    let out = tmp.path().to_path_buf();
    run_pipeline(&cfg, &out).unwrap();
    let manifest_before = manifest_bytes(&out);

    let vol_path = volume_path(&scheme_dir(&cfg, &out));
    let status = rcaus(&["render", vol_path.to_str().unwrap(), "--mip", "z", "--slab", "5e-3"]);
    assert!(status.status.success());
    let status = rcaus(&["render", vol_path.to_str().unwrap(), "--slice", "x"]);
    assert!(status.status.success());

    // Grid is 7 x 6 x 5 voxels (x, y, z).
    let dir = scheme_dir(&cfg, &out);
    let mip = fs::read(dir.join("volume_mip_z.pgm")).unwrap();
    assert!(mip.starts_with(b"P5\n7 6\n255\n"), "z projection keeps x by y");
    assert_eq!(mip.len(), b"P5\n7 6\n255\n".len() + 7 * 6);

    let slice = fs::read(dir.join("volume_slice_x.pgm")).unwrap();
    assert!(slice.starts_with(b"P5\n6 5\n255\n"), "x slice keeps y by z");

    let csv = fs::read_to_string(dir.join("volume_mip_z.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 7));

    // Rendering is a viewing aid; it must not rewrite the manifest.
    assert_eq!(manifest_bytes(&out), manifest_before);

    // A MIP across the full slab dominates any single slice everywhere.
    let peak_px = *fs::read(dir.join("volume_mip_z.pgm")).unwrap().iter().max().unwrap();
    assert_eq!(peak_px, 255, "projection of a bright point must hit full scale");

    // Render refuses ambiguous requests.
    let out_err = rcaus(&["render", vol_path.to_str().unwrap()]);
    assert_eq!(out_err.status.code(), Some(2));
}
