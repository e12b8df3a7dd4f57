use nobind_cli::config::{parse_config, Command, ConfigError, Format, RunConfig};
use nobind_core::bounds::ModelSpec;

#[test]
fn minimal_optimize_config_gets_defaults() {
    let c = parse_config(r#"{"model": {"kind": "optical"}}"#, Some(Command::Optimize)).unwrap();
    assert_eq!(c.command, Some(Command::Optimize));
    assert_eq!(c.model, Some(ModelSpec::Optical));
    assert_eq!(c.optimizer.starts, 32);
    assert_eq!(c.optimizer.tol, 1e-8);
    assert_eq!(c.optimizer.n_check, 10_000);
    assert_eq!(c.output.format, Format::Json);
}

#[test]
fn nelson_needs_both_constants() {
    let err = parse_config(r#"{"command": "optimize", "model": {"kind": "nelson", "d2": 0, "alpha": 1}}"#, None).unwrap_err();
    assert_eq!(err, ConfigError::MissingField("d1".into()));
    let err = parse_config(r#"{"command": "optimize", "model": {"kind": "nelson", "d1": 5, "alpha": 1}}"#, None).unwrap_err();
    assert_eq!(err, ConfigError::MissingField("d2".into()));
}

#[test]
fn misspelled_keys_are_rejected() {
    let err = parse_config(r#"{"model": {"kind": "piezo", "lamda": 2.0}}"#, Some(Command::Optimize)).unwrap_err();
    assert_eq!(err, ConfigError::UnknownKey("lamda".into()));
    let err = parse_config(r#"{"model": {"kind": "optical"}, "optimiser": {}}"#, Some(Command::Optimize)).unwrap_err();
    assert_eq!(err, ConfigError::UnknownKey("optimiser".into()));
    let err = parse_config(r#"{"mc": {"T": 1, "steps": 3}}"#, Some(Command::Verify)).unwrap_err();
    assert_eq!(err, ConfigError::UnknownKey("steps".into()));
}

#[test]
fn syntax_errors_carry_a_position() {
    let err = parse_config("{\n  \"model\": {\"kind\": \"optical\"},\n  oops\n}", Some(Command::Optimize)).unwrap_err();
    match err {
        ConfigError::Parse { line, column, .. } => assert_eq!((line, column), (3, 3)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn required_fields_per_command() {
    assert_eq!(parse_config("{}", Some(Command::Optimize)).unwrap_err(), ConfigError::MissingField("model".into()));
    assert_eq!(parse_config("{}", Some(Command::BoundCurve)).unwrap_err(), ConfigError::MissingField("lambda_grid".into()));
    assert_eq!(parse_config("{}", Some(Command::Kernels)).unwrap_err(), ConfigError::MissingField("kernels".into()));
    assert_eq!(parse_config("{}", None).unwrap_err(), ConfigError::MissingField("command".into()));
    assert!(parse_config("{}", Some(Command::Verify)).is_ok());
}

#[test]
fn invalid_values_are_rejected() {
    let bad = [
        r#"{"model": {"kind": "piezo", "lambda": -1}}"#,
        r#"{"model": {"kind": "optical"}, "optimizer": {"starts": 0}}"#,
        r#"{"model": {"kind": "optical"}, "optimizer": {"n_check": 5}}"#,
    ];
    for text in bad {
        assert!(matches!(parse_config(text, Some(Command::Optimize)), Err(ConfigError::Invalid(_))), "{text}");
    }
    let mc = r#"{"model": {"kind": "optical"}, "mc": {"T": 1, "dt": 0.3}}"#;
    assert!(matches!(parse_config(mc, Some(Command::Mc)), Err(ConfigError::Invalid(_))));
    let nelson_mc = r#"{"model": {"kind": "nelson", "d1": 1, "d2": 0, "alpha": 1}}"#;
    assert!(matches!(parse_config(nelson_mc, Some(Command::Mc)), Err(ConfigError::Invalid(_))));
}

#[test]
fn command_must_agree() {
    let err = parse_config(r#"{"command": "mc", "model": {"kind": "optical"}}"#, Some(Command::Optimize)).unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(_)));
}

#[test]
fn aliases_for_documented_names() {
    let c = parse_config(r#"{"model": {"kind": "optical"}, "mc": {"T": 2, "dt": 0.5}, "optimizer": {"N_check": 50}}"#, Some(Command::Mc))
        .unwrap();
    assert_eq!(c.mc.horizon, 2.0);
    assert_eq!(c.optimizer.n_check, 50);
}

#[test]
fn json_round_trip() {
    let texts = [
        r#"{"model": {"kind": "piezo", "lambda": 0.1}, "optimizer": {"tol": 3e-9, "seed": 17}}"#,
        r#"{"model": {"kind": "nelson", "d1": 1234.5678901234567, "d2": 1e-300, "alpha": 0.3}}"#,
        r#"{"model": {"kind": "optical"}, "mc": {"endpoint": {"kind": "bridge", "pin": [0.1, 0.2, 0.3]}}}"#,
    ];
    for text in texts {
        let c = parse_config(text, Some(Command::Optimize)).unwrap();
        let again: RunConfig = parse_config(&c.to_json(), None).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_json(), again.to_json());
    }
    let k = parse_config(r#"{"kernels": {"queries": [{"distance": 0.5, "lag": 0, "cutoff": 2}]}, "lambda_grid": [1, 2]}"#, Some(Command::Kernels))
        .unwrap();
    assert_eq!(parse_config(&k.to_json(), None).unwrap(), k);
}
