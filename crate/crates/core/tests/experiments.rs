use proptest::prelude::*;

use sio_core::experiments::{
    emit_report, generate, run_convergence_suite, ConvergenceReport, GeneratorSpec, ReportFormat,
    SuiteConfig, Summary,
};
use sio_core::metric::Metric;

fn specs() -> impl Strategy<Value = GeneratorSpec> {
    prop_oneof![
        (1u32..=4).prop_map(GeneratorSpec::four_corner),
        (0.05f64..0.49, 1u32..=6).prop_map(|(r, l)| GeneratorSpec::cantor_1d(r, l)),
        (2usize..200, 1usize..4, any::<u64>()).prop_map(|(c, d, s)| GeneratorSpec::uniform_random(c, d, s)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_deterministic(spec in specs()) {
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        prop_assert_eq!(a.cloud.len(), b.cloud.len());
        for i in 0..a.cloud.len() {
            let (x, y) = (a.cloud.coords(i), b.cloud.coords(i));
            prop_assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        prop_assert_eq!(a.measure.weights(), b.measure.weights());
        prop_assert_eq!(a.r_min.to_bits(), b.r_min.to_bits());
        prop_assert!(a.cloud.diameter() <= 1.0);
        prop_assert!(a.cloud.diameter() >= 1.0 - 1e-14);
        if let Some(n) = spec.atom_count() {
            prop_assert_eq!(n, a.cloud.len());
        }
    }
}

#[test]
fn four_corner_geometry() {
    let g = generate(&GeneratorSpec::four_corner(3)).unwrap();
    assert_eq!(g.cloud.len(), 64);
    let mut min_d = f64::INFINITY;
    for i in 0..64 {
        for j in 0..i {
            min_d = min_d.min(g.cloud.distance(i, j).unwrap());
        }
    }
    // nearest atoms are one level-3 cell corner apart: 3/4 of the cell side
    assert!((min_d - 3.0 * g.r_min).abs() <= 1e-15, "{min_d} vs {}", g.r_min);
    let total: f64 = g.measure.weights().iter().sum();
    assert!((total - 1.0).abs() <= 1e-15);
    assert_eq!(g.cloud.metric(), &Metric::euclidean());
}

fn smoke() -> SuiteConfig {
    SuiteConfig {
        generator: GeneratorSpec::four_corner(2),
        balls: 2,
        trend_levels: Some(vec![]),
        ..SuiteConfig::default()
    }
}

#[test]
fn smoke_config_emits_one_trace_and_a_summary() {
    let report = run_convergence_suite(&smoke()).unwrap();
    assert!(report.all_ok());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["trace_0.csv", "summary.json"]);
    let csv = std::fs::read_to_string(dir.path().join("trace_0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epsilon,pairing,cauchy_diff,four_term_bound");
    assert_eq!(lines.len(), 1 + report.records[0].trace.epsilon_grid.len());
    assert!(lines.last().unwrap().ends_with(",,"));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, Summary::of(&report));
}

#[test]
fn empty_report_has_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = ConvergenceReport::default();
    emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
    emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("trace_0.csv")).unwrap(),
        "epsilon,pairing,cauchy_diff,four_term_bound\n"
    );
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["records"], serde_json::json!([]));
}

#[test]
fn json_report_round_trips_exactly() {
    let report = run_convergence_suite(&smoke()).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&report, ReportFormat::Json, a.path()).unwrap();
    let text = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    let back: ConvergenceReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    emit_report(&back, ReportFormat::Json, b.path()).unwrap();
    for name in ["report.json", "summary.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn suite_output_is_independent_of_worker_count() {
    let cfg = SuiteConfig {
        generator: GeneratorSpec::four_corner(3),
        trend_levels: Some(vec![2, 3]),
        ..SuiteConfig::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_convergence_suite(&cfg)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
        std::fs::read(dir.path().join("report.json")).unwrap()
    };
    assert_eq!(run(1), run(4));
}
