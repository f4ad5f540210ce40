use std::process::Command;
use std::time::Instant;

use ssm_core::cli::{run_frc, Config, Format, FrcDataset, Stage, SystemFiles, SystemSource};
use ssm_core::cont::EventKind;

fn example1(stages: &[Stage]) -> Config {
    let mut cfg = Config::example1();
    cfg.stages = stages.to_vec();
    cfg.n_pt = 16;
    cfg
}

fn only(mut sets: Vec<FrcDataset>) -> FrcDataset {
    assert_eq!(sets.len(), 1);
    sets.remove(0)
}

#[test]
fn equilibrium_stage_flags_four_sn_and_two_hb() {
    let ds = only(run_frc(&example1(&[Stage::Equilibrium])).unwrap());
    assert_eq!(ds.count(EventKind::SN), 4);
    assert_eq!(ds.count(EventKind::HB), 2);
    assert_eq!(ds.metadata.branches.len(), 1);
    assert!(ds.metadata.branches[0].seed.is_none());
    // Stability flips across every SN and HB row and nowhere else.
    let mut last = ds.rows[0].stability;
    let mut crossed = false;
    for r in &ds.rows[1..] {
        if r.event.is_some() {
            crossed = true;
            continue;
        }
        assert_eq!(r.stability != last, crossed, "at Omega = {}", r.omega);
        (last, crossed) = (r.stability, false);
    }
    assert!(ds.rows.iter().all(|r| r.ts.is_none() && r.amps.len() == 2));
}

#[test]
fn unforced_run_is_one_trivial_branch() {
    let mut cfg = example1(&[Stage::Equilibrium]);
    cfg.eps = 0.0;
    let ds = only(run_frc(&cfg).unwrap());
    assert_eq!(ds.metadata.branches.len(), 1);
    assert!(ds.rows.iter().all(|r| r.event.is_none()));
    assert!(ds.rows.iter().all(|r| r.amps.iter().all(|&a| a == 0.0)));
    let first = ds.rows.first().unwrap().omega;
    let last = ds.rows.last().unwrap().omega;
    assert!((first - 0.7).abs() < 1e-12 && (last - 1.1).abs() < 1e-9, "{first} .. {last}");
}

#[test]
fn cycles_run_between_the_hopf_points() {
    let sets = run_frc(&example1(&[Stage::Equilibrium, Stage::Po])).unwrap();
    let (eq, po) = (&sets[0], &sets[1]);
    assert_eq!((eq.stage, po.stage), (Stage::Equilibrium, Stage::Po));
    let hb: Vec<f64> = eq.rows.iter().filter(|r| r.event == Some(EventKind::HB)).map(|r| r.omega).collect();
    // Every cycle branch cites an HB event of the equilibrium branch.
    for b in &po.metadata.branches {
        let s = b.seed.as_ref().unwrap();
        assert_eq!((s.stage, s.kind), (Stage::Equilibrium, EventKind::HB));
        assert!(hb.iter().any(|&w| (w - s.omega).abs() < 1e-12));
    }
    // The family born at one Hopf point dies at the other.
    let (first, last) = (po.rows.first().unwrap(), po.rows.last().unwrap());
    assert!((first.omega - hb[0]).abs() < 1e-3 || (first.omega - hb[1]).abs() < 1e-3);
    assert!((last.omega - hb[0]).abs() < 1e-3 || (last.omega - hb[1]).abs() < 1e-3);
    assert!((first.omega - last.omega).abs() > 0.01);
    for r in &po.rows {
        let (ts, ws) = (r.ts.unwrap(), r.om_s.unwrap());
        assert!((ts * ws - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }
}

#[test]
fn csv_export_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example1(&[Stage::Equilibrium]);
    let ds = only(run_frc(&cfg).unwrap());
    let path = ds.export(dir.path(), Format::Csv).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let (outputs, rows) = FrcDataset::rows_from_csv(&text).unwrap();
    assert_eq!(outputs, vec![0, 1]);
    assert_eq!(rows, ds.rows);
    let again = only(run_frc(&cfg).unwrap());
    assert_eq!(again.to_csv().unwrap(), text);
}

#[test]
fn json_metadata_records_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example1(&[Stage::Equilibrium]);
    cfg.order = 7;
    let t0 = Instant::now();
    let ds = only(run_frc(&cfg).unwrap());
    let wall = t0.elapsed().as_secs_f64();
    let path = ds.export(dir.path(), Format::Json).unwrap();
    let back = FrcDataset::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(back, ds);
    let md = &back.metadata;
    assert_eq!(md.order, 7);
    assert_eq!(md.tolerances.continuation, cfg.continuation);
    assert_eq!(md.r, vec![1.0, 2.0]);
    let t = &md.timings;
    assert!((t.parts_sum() - t.total).abs() <= 1e-9 * t.total.max(1.0));
    assert!((t.total - wall).abs() <= 0.05 * wall, "timed {} s of {wall} s", t.total);
    assert!(t.autonomous_ssm > 0.0 && t.reduced_dynamics > 0.0 && t.lift > 0.0);
}

fn write_example1_files(dir: &std::path::Path) {
    let mm = |name: &str, entries: &[(usize, usize, f64)]| {
        let mut s = format!("%%MatrixMarket matrix coordinate real general\n2 2 {}\n", entries.len());
        for (i, j, v) in entries {
            s += &format!("{i} {j} {v}\n");
        }
        std::fs::write(dir.join(name), s).unwrap();
    };
    mm("m.mtx", &[(1, 1, 1.0), (2, 2, 1.0)]);
    mm("c.mtx", &[(1, 1, 0.005), (2, 2, 0.01)]);
    mm("k.mtx", &[(1, 1, 1.0), (2, 2, 4.0)]);
    let force = r#"{"version": 1, "n": 2, "f_ext": [2.0, 0.0],
        "terms": [{"coeff": 0.3, "output": 0, "factors": [[0, 1], [1, 1]]},
                  {"coeff": 1.0, "output": 1, "factors": [[0, 2]]}]}"#;
    std::fs::write(dir.join("force.json"), force).unwrap();
}

#[test]
fn matrix_market_input_matches_the_builder() {
    let dir = tempfile::tempdir().unwrap();
    write_example1_files(dir.path());
    let mut cfg = example1(&[Stage::Equilibrium]);
    cfg.system = SystemSource::Files(SystemFiles {
        m: "m.mtx".into(),
        c: "c.mtx".into(),
        k: "k.mtx".into(),
        force: "force.json".into(),
    });
    let path = dir.path().join("run.json");
    std::fs::write(&path, cfg.to_json().unwrap()).unwrap();
    let from_files = only(run_frc(&Config::load(&path).unwrap()).unwrap());
    let built = only(run_frc(&example1(&[Stage::Equilibrium])).unwrap());
    assert_eq!(from_files.rows, built.rows);
}

#[test]
fn binary_writes_the_requested_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ssm"))
        .args(["frc-eq", "--eps", "0.005", "--format", "csv", "--threads", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("frc_equilibrium.csv")).unwrap();
    let (_, rows) = FrcDataset::rows_from_csv(&text).unwrap();
    assert!(rows.iter().all(|r| r.eps == 0.005));

    let out = Command::new(env!("CARGO_BIN_EXE_ssm")).args(["frc-eq", "--omega-range", "1.1:0.7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_range"));

    let out = Command::new(env!("CARGO_BIN_EXE_ssm")).args(["eig", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let eig: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("eigenvalues.json")).unwrap()).unwrap();
    let f: Vec<f64> = eig.as_array().unwrap().iter().map(|e| e["frequency"].as_f64().unwrap()).collect();
    assert!(f.iter().any(|w| (w - 1.0).abs() < 1e-4) && f.iter().any(|w| (w - 2.0).abs() < 1e-4));
}
