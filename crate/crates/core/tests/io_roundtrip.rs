use deepthermal::circuit::CircuitConfig;
use deepthermal::runner::*;
use deepthermal::theory::f_ratio;

fn cfg() -> CircuitConfig {
    CircuitConfig { d_a: 2, d_b1: 2, q: 8, t_max: 5, k_max: 4, n_realizations: 6, master_seed: 31 }
}

#[test]
fn records_round_trip_bit_exactly() {
    let (records, summary) = run_experiment(&cfg()).unwrap();
    assert_eq!(summary.records, 6 * 6 * 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    write_records(&path, &records).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), RECORD_HEADER);
    let back = read_records(&path).unwrap();
    assert_eq!(back, records);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_experiment(&cfg()).unwrap().0)
    };
    assert_eq!(run_with(1), run_with(3));
}

#[test]
fn aggregate_and_plot_data_round_trip() {
    let cfg = cfg();
    let (records, _) = run_experiment(&cfg).unwrap();
    let aggs = aggregate(&records, &cfg).unwrap();
    assert!(aggs.iter().all(|a| a.rms_delta >= a.mean_delta - 1e-12));
    let dir = tempfile::tempdir().unwrap();
    let agg_path = dir.path().join("aggregate.csv");
    let prov = Provenance::new(cfg.clone());
    write_aggregate(&agg_path, &aggs, &prov).unwrap();
    let text = std::fs::read_to_string(&agg_path).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# config: {")));
    assert!(text.lines().any(|l| l.starts_with("# git: ")));
    assert!(text.lines().any(|l| l == "# seed: 31"));
    assert!(text.lines().any(|l| l == AGGREGATE_HEADER));

    let (prov_back, aggs_back) = read_aggregate(&agg_path).unwrap();
    assert_eq!(prov_back, prov);
    assert_eq!(aggs_back, aggs);

    let panels = parse_panels("a,b,c,d,e,f").unwrap();
    let times = default_ratio_times(cfg.t_max);
    assert_eq!(times, [2, 4, 5]);
    let out = dir.path().join("plots");
    let files = emit_plot_data(&aggs, &prov, &panels, &times, &out).unwrap();
    assert_eq!(files.len(), 6);
    for (panel, path) in panels.iter().zip(&files) {
        let table = read_plot_table(path).unwrap();
        assert_eq!(table.provenance.config, cfg);
        write_plot_table(&dir.path().join("again.csv"), &table).unwrap();
        let again = read_plot_table(&dir.path().join("again.csv")).unwrap();
        assert_eq!(again.columns, table.columns);
        for (a, b) in again.rows.iter().flatten().zip(table.rows.iter().flatten()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        if matches!(panel, Panel::D | Panel::E | Panel::F) {
            let ks = table.column("k").unwrap();
            let theory = table.column("theory_f_ratio").unwrap();
            for (k, f) in ks.iter().zip(theory) {
                assert_eq!(f, f_ratio(*k as usize, 2));
            }
            assert_eq!(table.column("ratio").unwrap()[0], 1.0);
        }
    }
    let a = read_plot_table(&files[0]).unwrap();
    assert_eq!(a.columns[0], "T");
    assert_eq!(a.rows.len(), cfg.t_max + 1);
}

#[test]
fn empty_aggregates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prov = Provenance::new(cfg());
    let err = emit_plot_data(&[], &prov, &[Panel::A], &[1, 2, 3], dir.path()).unwrap_err();
    assert!(matches!(err, deepthermal::Error::MissingData(_)));
}
