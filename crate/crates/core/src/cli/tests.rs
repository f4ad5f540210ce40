use super::*;
use crate::cont::EventKind;

fn row(omega: f64, event: Option<EventKind>) -> Row {
    Row {
        omega,
        eps: 0.01,
        ts: Some(2.0 * std::f64::consts::PI / 0.3),
        om_s: None,
        om1s: None,
        om2s: None,
        rho_rot: Some(1.0 / 3.0),
        amps: vec![0.1 + omega.sin() * 1e-7, 3.0e-17],
        stability: Stability::Unstable,
        event,
    }
}

#[test]
fn omega_range_flag_parses() {
    assert_eq!(parse_range("0.9:1.05").unwrap(), (0.9, 1.05));
    assert!(parse_range("0.9-1.05").is_err());
}

#[test]
fn config_rejects_unknown_fields_and_versions() {
    let mut v = serde_json::to_value(Config::example1()).unwrap();
    assert!(Config::from_json(&v.to_string()).is_ok());
    v["version"] = 7.into();
    assert!(matches!(Config::from_json(&v.to_string()), Err(Error::Config(_))));
    let mut v = serde_json::to_value(Config::example1()).unwrap();
    v["ordr"] = 3.into();
    assert!(Config::from_json(&v.to_string()).is_err());
}

#[test]
fn minimal_config_fills_defaults() {
    let cfg = Config::from_json(
        r#"{"version": 1, "system": {"builder": {"name": "example1"}}, "omega_range": [0.7, 1.1], "eps": 0.01,
            "continuation": {"h_max": 0.02}}"#,
    )
    .unwrap();
    assert_eq!(cfg.order, 3);
    assert_eq!(cfg.stages, vec![Stage::Equilibrium]);
    assert_eq!(cfg.continuation.h_max, 0.02);
    assert_eq!(cfg.continuation.corrector_tol, 1e-9);
}

#[test]
fn builder_params_are_checked() {
    let bad = r#"{"version": 1, "system": {"builder": {"name": "bernoulli_beam", "params": {"n_elements": 4}}},
                  "omega_range": [15.3, 15.95], "eps": 0.002}"#;
    assert!(Config::from_json(bad).is_err());
}

#[test]
fn flags_override_config() {
    let cli = Cli::try_parse_from(["ssm", "frc-eq", "--order", "5", "--omega-range", "0.9:1.0", "--eps", "0.02", "--stage", "po"]).unwrap();
    let cfg = cli.opts.config().unwrap();
    assert_eq!((cfg.order, cfg.omega_range, cfg.eps), (5, (0.9, 1.0), 0.02));
    assert_eq!(cfg.stages, vec![Stage::Po]);
    let cli = Cli::try_parse_from(["ssm", "frc-eq", "--omega-range", "1.0:0.9"]).unwrap();
    assert!(cli.opts.config().is_err());
}

#[test]
fn csv_rows_round_trip_exactly() {
    let mut cfg = Config::example1();
    cfg.stages = vec![Stage::Equilibrium];
    let rows = vec![row(0.7, None), row(0.98123456789, Some(EventKind::HB)), row(1.1, Some(EventKind::SN))];
    let ds = FrcDataset { stage: Stage::Po, rows: rows.clone(), metadata: dummy_metadata() };
    let text = ds.to_csv().unwrap();
    assert!(text.starts_with("Omega,eps,Ts,om_s,om1s,om2s,rho_rot,amp_0,amp_1,stability,event\n"));
    let (outputs, back) = FrcDataset::rows_from_csv(&text).unwrap();
    assert_eq!(outputs, vec![0, 1]);
    assert_eq!(back, rows);
    let json = FrcDataset::from_json(&ds.to_json().unwrap()).unwrap();
    assert_eq!(json, ds);
}

fn dummy_metadata() -> Metadata {
    let cfg = Config::example1();
    Metadata {
        version: CONFIG_VERSION,
        order: 7,
        modes: cfg.modes.clone(),
        outputs: vec![0, 1],
        omega_range: cfg.omega_range,
        eps: cfg.eps,
        r: vec![1.0, 2.0],
        r_d: 1.0,
        conventions: Vec::new(),
        tolerances: Tolerances {
            continuation: cfg.continuation.clone(),
            po: cfg.po.clone(),
            mesh: cfg.mesh,
            torus: cfg.torus.clone(),
            resonance: cfg.resonance,
            n_pt: cfg.n_pt,
        },
        branches: Vec::new(),
        timings: Timings::default(),
    }
}

#[test]
fn cycle_stage_without_hb_is_a_missing_prerequisite() {
    let mut cfg = Config::example1();
    cfg.eps = 0.0;
    let mut s = Session::new(cfg).unwrap();
    assert!(matches!(s.dataset(Stage::Po), Err(Error::Missing(_))));
}
