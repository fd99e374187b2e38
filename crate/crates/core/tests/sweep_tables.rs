use matchnet::sweep::{detect_peak, emit, grid, sweep, write_csv, Axis, Format, Model, PeakVerdict};
use matchnet::{ModelParams, Profile};

fn fig5() -> ModelParams<f64> {
    ModelParams::default().with_cost(0.005).with_divorce(0.015).with_marriage_value(2.0)
}

fn csv_bytes(threads: usize, model: &Model<f64>, params: &ModelParams<f64>) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let table = sweep(Axis::Arrival, &grid(0.05, 0.95, 0.01).unwrap(), params, model).unwrap();
        let mut out = Vec::new();
        write_csv(&table, &mut out).unwrap();
        out
    })
}

#[test]
fn tables_do_not_depend_on_the_worker_count() {
    let two = fig5().with_cost(0.003).with_marriage_value(1.0).with_high_share(0.8);
    for (model, params) in [(Model::Homogeneous, fig5()), (Model::Heterogeneous, two)] {
        let one = csv_bytes(1, &model, &params);
        assert_eq!(one, csv_bytes(4, &model, &params));
        assert_eq!(one, csv_bytes(7, &model, &params));
    }
}

#[test]
fn emitted_csv_reads_back_with_the_documented_header() {
    let table = sweep(Axis::Arrival, &grid(0.3, 0.7, 0.01).unwrap(), &fig5(), &Model::Homogeneous).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig5.csv");
    emit(&table, Format::Csv, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "a", "s_star", "psi", "upsilon", "m_weighted", "exists", "m_summed", "residual", "threshold", "a_bar",
            "ds_da", "iterations", "status"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 41);
    let at_half = rows.iter().find(|r| &r[0] == "0.5").unwrap();
    let s: f64 = at_half[1].parse().unwrap();
    assert!((s - 0.7852519544491616).abs() < 1e-7);
    assert!(rows.iter().all(|r| &r[5] == "true" && &r[12] == "interior"));
}

#[test]
fn emitted_json_carries_metadata_and_rows() {
    let model = Model::Exogenous(Profile::uniform(1.5));
    let params = ModelParams::default().with_cost(0.003).with_high_share(0.8);
    let table = sweep(Axis::Arrival, &grid(0.3, 0.7, 0.1).unwrap(), &params, &model).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig7.json");
    emit(&table, Format::Json, &path).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["model"], "exogenous");
    assert_eq!(doc["axis"], "a");
    assert_eq!(doc["profile"]["high"], 1.5);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 5);
    assert_eq!(doc["rows"][0]["psi_hl"], 0.0);
}

#[test]
fn sweeps_over_other_axes_and_zero_equilibria() {
    let costs = grid(0.001, 0.01, 0.001).unwrap();
    let table = sweep(Axis::Cost, &costs, &fig5(), &Model::Homogeneous).unwrap();
    let exists: Vec<bool> = (0..table.rows.len()).map(|i| table.exists(i)).collect();
    // Threshold 2 * 0.5 * 0.015 * 0.5 * 0.985 = 0.0073875.
    assert_eq!(exists, [true, true, true, true, true, true, true, false, false, false]);
    let s = table.values("s_star").unwrap();
    assert!(s[..7].windows(2).all(|w| w[1].unwrap() < w[0].unwrap()));
    assert_eq!(table.values("ds_da").unwrap()[9], None);
    assert_eq!(detect_peak(&table, "s_star").unwrap().verdict, PeakVerdict::MonotoneDecreasing);
}

#[test]
fn bad_grids_are_rejected() {
    assert!(grid(0.3, 0.7, 0.0).is_err());
    assert!(sweep(Axis::Arrival, &[0.5, 0.4], &fig5(), &Model::Homogeneous).is_err());
    assert!(sweep(Axis::Arrival, &[0.5, 1.2], &fig5(), &Model::Homogeneous).is_err());
}
