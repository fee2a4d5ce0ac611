use std::path::{Path, PathBuf};

use actseq::pipeline::{Pipeline, PipelineConfig, Stage};
use actseq::{Error, ErrorKind};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn small_config(out: &Path) -> PipelineConfig {
    let text = format!(
        r#"
output_dir = "{}"
seed = 3

[simulate]
spec = "simgen.toml"
n_subjects = 160

[features]
method = "mds"
dims = 4

[predict]
n_rep = 4
predictor_sets = ["score", "mds", "score+mds"]

[[predict.targets]]
name = "age_like"

[pls]
target = "age_like"
max_components = 3

[interpret]
interval = 40
window = 30
grid_size = 8

[[interpret.patterns]]
item = "mail"
kind = "contains-token"
token = "Submit"
"#,
        out.display()
    );
    PipelineConfig::from_toml_str(&text, &demo_dir()).unwrap()
}

#[test]
fn stages_produce_reports_with_configured_replications() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(small_config(dir.path())).unwrap();
    let plan = pipeline.plan();
    assert!(!plan.contains(&Stage::AeTrain));
    assert!(plan.contains(&Stage::Mds));
    let artifacts = pipeline.run_all().unwrap();
    for a in &artifacts {
        assert!(dir.path().join(&a.path).is_file(), "{}", a.path);
    }

    let report = std::fs::read_to_string(dir.path().join("predict/report.csv")).unwrap();
    let mut lines = report.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let set_col = header.iter().position(|h| *h == "predictor_set").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for set in ["score", "mds", "score+mds"] {
        assert_eq!(
            rows.iter().filter(|r| r[set_col] == set).count(),
            4,
            "{set}"
        );
    }
    assert!(dir.path().join("items/mail/oss.bin").is_file());
    assert!(dir
        .path()
        .join("items/mail/pls_mds/inspect_pls_1.txt")
        .is_file());
}

#[test]
fn running_a_stage_before_its_inputs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(small_config(dir.path())).unwrap();
    for stage in [Stage::Dist, Stage::Mds, Stage::Predict, Stage::Pls] {
        let err = pipeline.run(stage).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Config, "{stage}: {err}");
    }
}

#[test]
fn validation_lists_every_problem() {
    let text = r#"
output_dir = "out"
seed = 1

[features]
method = "mds"
dims = 0

[predict]
n_rep = 0

[[predict.targets]]
name = "age_like"
family = "gaussian"

[interpret]
interval = 0
"#;
    let cfg = PipelineConfig::from_toml_str(text, Path::new(".")).unwrap();
    match cfg.validate() {
        Err(Error::Config(problems)) => assert!(problems.len() >= 3, "{problems:?}"),
        other => panic!("expected config error, got {other:?}"),
    }
    assert!(Pipeline::new(cfg).is_err());
}
