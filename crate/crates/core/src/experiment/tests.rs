use super::*;

#[test]
fn minimal_config_uses_defaults() {
    let cfg = ExperimentConfig::from_toml("kind = \"busy-tail\"").unwrap();
    assert_eq!(cfg.kind, ExperimentKind::BusyTail);
    assert_eq!(cfg.model, ModelSection::default());
    let resolved = cfg.resolve().unwrap();
    assert_eq!(
        resolved.grid,
        GridSpec::Geometric {
            start: Some(10.0),
            factor: 2.0,
            points: 12
        }
    );
    assert_eq!(resolved.grid.points(1.0).unwrap()[11], 10.0 * 2048.0);
}

#[test]
fn full_config_round_trips() {
    let text = r#"
kind = "finite-tk"
replications = 5000
seed = 7
workers = 3
out = "reports/tk"
grid = [1.0, 2.0, 4.0]

[model]
arrival = "exp(rate=0.25)"
service = "pareto(shape=3, scale=1)"
feedback_p = 0.25

[options]
k = 3
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(cfg.options.k, 3);
    assert_eq!(cfg.workers, 3);
    assert_eq!(cfg.grid, GridSpec::Explicit(vec![1.0, 2.0, 4.0]));
    let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    // workers are never serialized
    assert_eq!(again.workers, 0);
    assert_eq!(ExperimentConfig { workers: 3, ..again }, cfg);
}

#[test]
fn errors_name_the_offending_key() {
    let err = ExperimentConfig::from_toml("kind = \"busy-tail\"\nreplicatoins = 4").unwrap_err();
    assert!(
        matches!(&err, Error::Config { key, .. } if key == "replicatoins"),
        "{err}"
    );
    assert_eq!(exit_code(&err), 2);

    let err = ExperimentConfig::from_toml("kind = \"nope\"").unwrap_err();
    assert!(err.to_string().contains("kind"), "{err}");

    let text =
        "kind = \"busy-tail\"\n[model]\narrival = \"exp(rate=0.2)\"\nservice = \"pareto(2.5,0.6)\"\nfeedback_p = 1.2";
    let err = ExperimentConfig::from_toml(text).unwrap().resolve().unwrap_err();
    assert!(err.to_string().contains("feedback_p must lie in [0,1)"), "{err}");
    assert_eq!(exit_code(&err), 2);

    let text = "kind = \"busy-tail\"\n[model]\narrival = \"exp(rate=1)\"\nservice = \"det(2)\"";
    let err = ExperimentConfig::from_toml(text).unwrap().resolve().unwrap_err();
    assert!(matches!(err, Error::Instability { rho } if (rho - 2.0).abs() < 1e-12));
    assert_eq!(exit_code(&err), 2);

    let text = "kind = \"busy-tail\"\ngrid = [3.0, 1.0]";
    assert!(ExperimentConfig::from_toml(text).unwrap().resolve().is_err());
}

#[test]
fn every_kind_parses() {
    for kind in ExperimentKind::ALL {
        let cfg = ExperimentConfig::from_toml(&format!("kind = \"{}\"", kind.name())).unwrap();
        assert_eq!(cfg.kind, kind);
        assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::EventBudgetExceeded { budget: 1 }), 3);
    assert_eq!(exit_code(&Error::TooManyDropped { dropped: 2, total: 3 }), 3);
}
