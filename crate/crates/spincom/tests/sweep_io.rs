//! Sweep-engine IO contracts: deterministic bytes, format round trips, and
//! agreement between the sweep path and direct module calls.

use std::collections::BTreeMap;

use spincom::dynamics::gaussian_state;
use spincom::entanglement::entangle;
use spincom::harness::{
    chi_map, emit_chi_csv, emit_csv, emit_json, preset, run_sweep, Axis, OutputGroup,
    OverrideValue, Spacing, SweepSpec, SweepTable, WORKERS_ENV,
};
use spincom::optics::{steady_state, InputPort};
use spincom::params::{derive_constants, silica};

fn lin(path: &str, min: f64, max: f64, count: usize) -> Axis {
    Axis {
        path: path.to_string(),
        min,
        max,
        count,
        spacing: Spacing::Linear,
    }
}

fn small_spec() -> SweepSpec {
    let wm = silica().omega_m;
    SweepSpec {
        name: "io-check".into(),
        axes: vec![
            lin("drive.omega", 0.0, 23e3, 3),
            lin("drive.delta_c", 0.5 * wm, 1.5 * wm, 5),
        ],
        fixed: BTreeMap::from([("drive.power".to_string(), OverrideValue::Number(0.02))]),
        directions: vec![InputPort::Left, InputPort::Right],
        outputs: vec![
            OutputGroup::Optics,
            OutputGroup::Stability,
            OutputGroup::Entanglement,
            OutputGroup::Aero,
            OutputGroup::Breathing,
        ],
        enforce_spin_limit: false,
        notes: vec![],
    }
}

fn csv_bytes(table: &SweepTable) -> Vec<u8> {
    let mut buf = Vec::new();
    emit_csv(table, &mut buf).expect("csv emission");
    buf
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let spec = small_spec();
    let first = csv_bytes(&run_sweep(&spec).expect("sweep"));
    let second = csv_bytes(&run_sweep(&spec).expect("sweep"));
    assert_eq!(first, second, "two runs differ");

    std::env::set_var(WORKERS_ENV, "3");
    let pooled = csv_bytes(&run_sweep(&spec).expect("sweep"));
    std::env::remove_var(WORKERS_ENV);
    assert_eq!(first, pooled, "worker count changed the output");
}

#[test]
fn json_round_trip_preserves_the_table() {
    let table = run_sweep(&small_spec()).expect("sweep");
    let mut buf = Vec::new();
    emit_json(&table, &mut buf).expect("json emission");
    let parsed: SweepTable = serde_json::from_slice(&buf).expect("json parses");
    assert_eq!(parsed.records.len(), table.records.len());
    assert_eq!(parsed.metadata.spec, table.metadata.spec);
    assert_eq!(parsed.metadata.axis_values, table.metadata.axis_values);

    let mut buf2 = Vec::new();
    emit_json(&parsed, &mut buf2).expect("json emission");
    assert_eq!(buf, buf2, "serialize-parse-serialize changed bytes");
}

#[test]
fn detuning_scan_csv_layout() {
    let table = run_sweep(&preset("fig2").expect("preset")).expect("sweep");
    assert_eq!(table.records.len(), 802, "401 detunings x 2 directions");

    let text = String::from_utf8(csv_bytes(&table)).expect("utf8");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    for col in ["E_N_left", "E_N_right", "N_left", "N_right", "delta_E_N"] {
        assert!(header.contains(&col), "missing column {col}");
    }
    assert_eq!(lines.count(), 401, "one pivoted row per grid point");
}

#[test]
fn single_point_sweep_matches_direct_calls() {
    let wm = silica().omega_m;
    let spec = SweepSpec {
        name: "point".into(),
        axes: vec![lin("drive.delta_c", 1.2 * wm, 1.2 * wm, 1)],
        fixed: BTreeMap::from([
            ("drive.omega".to_string(), OverrideValue::Number(8e3)),
            ("params.backscattering".to_string(), OverrideValue::Number(0.0)),
        ]),
        directions: vec![InputPort::Right],
        outputs: vec![
            OutputGroup::Optics,
            OutputGroup::Stability,
            OutputGroup::Entanglement,
        ],
        enforce_spin_limit: false,
        notes: vec![],
    };
    let table = run_sweep(&spec).expect("sweep");
    assert_eq!(table.records.len(), 1);
    let rec = &table.records[0];
    assert!(rec.error.is_none(), "unexpected error: {:?}", rec.error);

    let mut scn = table.metadata.base.clone();
    scn.apply_number("drive.delta_c", 1.2 * wm).expect("path");
    let scn = scn.with_direction(InputPort::Right);
    let derived = derive_constants(&scn.params).expect("valid");
    let steady = steady_state(&scn.params, &derived, &scn.drive).expect("solved");
    let gs = gaussian_state(&scn.params, &derived, &steady).expect("stable");
    let score = entangle(&gs.covariance).expect("physical");

    assert_eq!(rec.n_driven, Some(steady.n_driven));
    assert_eq!(rec.n_reflected, Some(steady.n_reflected));
    assert_eq!(rec.q_s, Some(steady.q_s));
    assert_eq!(rec.sagnac_shift, Some(steady.delta_f));
    assert_eq!(rec.stable, Some(true));
    assert_eq!(rec.log_negativity, Some(score.log_negativity));
    assert_eq!(rec.nu_minus, Some(score.nu_minus));
}

#[test]
fn revival_map_header_and_baseline() {
    let wm = silica().omega_m;
    let kappa = derive_constants(&silica()).expect("valid").kappa;
    let spec = SweepSpec {
        name: "chi-small".into(),
        axes: vec![
            lin("params.backscattering", 0.0, kappa, 2),
            lin("drive.omega", 0.0, 23e3, 2),
            lin("drive.delta_c", 0.5 * wm, 1.5 * wm, 7),
        ],
        fixed: BTreeMap::new(),
        directions: vec![InputPort::Right],
        outputs: vec![OutputGroup::Optics, OutputGroup::Entanglement],
        enforce_spin_limit: false,
        notes: vec![],
    };
    let table = run_sweep(&spec).expect("sweep");
    let cells = chi_map(&table).expect("revival map");
    assert_eq!(cells.len(), 4, "one cell per (backscattering, rotation)");
    let baseline = &cells[0];
    assert_eq!(baseline.backscattering, 0.0);
    assert_eq!(baseline.omega, 0.0);
    assert_eq!(baseline.chi, 1.0, "the baseline normalizes itself");

    let mut buf = Vec::new();
    emit_chi_csv(&cells, &mut buf).expect("csv emission");
    let text = String::from_utf8(buf).expect("utf8");
    assert_eq!(
        text.lines().next(),
        Some("backscattering,omega,peak_E_N,chi")
    );
    assert_eq!(text.lines().count(), 5);
}
