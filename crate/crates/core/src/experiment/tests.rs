use super::*;

fn kernels_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "name": "kernels-srw",
            "group": {"type": "free", "rank": 2},
            "laws": {"srw": {"kind": "srw"}},
            "experiment": "kernels",
            "params": {"radius": 2},
            "seed": 1
        }"#,
    )
    .unwrap()
}

#[test]
fn catalog_lists_every_kind() {
    let c = catalog();
    for k in ExperimentKind::ALL {
        assert!(c.contains(&format!("{}: checks", k.name())));
    }
    assert!(c.contains("dimension: checks dim ν = ℓ_G/(εℓ)"));
    assert!(c.contains("tree-approx: checks |x−y|−2kδ ≤ |φ(x)−φ(y)| ≤ |x−y|"));
}

#[test]
fn floats_have_seventeen_digits() {
    assert_eq!(format_float(1.0 / 3.0), "3.3333333333333331e-1");
    assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    assert_eq!(format_float(f64::NAN), "");
    assert_eq!(format_float(-0.0), "0.0000000000000000e0");
    let x = 0.1 + 0.2;
    assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
}

#[test]
fn csv_layout() {
    #[derive(Serialize)]
    struct Row {
        name: String,
        count: u64,
        value: f64,
        missing: Option<f64>,
    }
    let bytes = write_csv(&[Row { name: "a,b".into(), count: 3, value: 0.25, missing: None }]).unwrap();
    assert_eq!(String::from_utf8(bytes).unwrap(), "name,count,value,missing\n\"a,b\",3,2.5000000000000000e-1,\n");
    assert!(write_csv::<Row>(&[]).unwrap().is_empty());
}

#[test]
fn validation_rejects_bad_configs() {
    let mut c = kernels_config();
    c.params.law = Some("missing".into());
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    let mut c = kernels_config();
    c.experiment = ExperimentKind::Rates;
    c.params.n = Some(0);
    assert_eq!(c.validate(), Err(Error::Config("n must be positive".into())));
    let mut c = kernels_config();
    c.experiment = ExperimentKind::CompareWalks;
    assert!(c.validate().is_err());
    assert!(ExperimentConfig::from_json(r#"{"name": "x"}"#).is_err());
    let unknown = r#"{"name":"x","group":{"type":"free","rank":2},"experiment":"exit","seed":1,"colour":"red"}"#;
    assert!(ExperimentConfig::from_json(unknown).is_err());
}

#[test]
fn kernels_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let c = kernels_config();
    let a = run(&c, Some(&dir.path().join("a"))).unwrap();
    let b = run(&c, Some(&dir.path().join("b"))).unwrap();
    assert!(a.passed());
    let ka = std::fs::read(a.output_dir.join("kernels.csv")).unwrap();
    assert_eq!(ka, std::fs::read(b.output_dir.join("kernels.csv")).unwrap());
    let text = String::from_utf8(ka).unwrap();
    assert!(text.starts_with("x_word,y_word,method,F,dG,K,Theta,err,mixed_methods\n"));
    let row: Vec<&str> = text.lines().find(|l| l.starts_with("1,a,")).unwrap().split(',').collect();
    assert_eq!(row[2], "tree_exact");
    assert!((row[3].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(!text.contains("-0.0"));
    let summary = std::fs::read_to_string(a.output_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"pass\""));
}

#[test]
fn budget_errors_map_to_exit_code_two() {
    assert_eq!(exit_code(&Error::BudgetExceeded { required: 10, budget: 1 }), 2);
    assert_eq!(exit_code(&Error::Config("x".into())), 1);
}
