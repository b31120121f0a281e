use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn activist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_activist")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = activist(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SUBCOMMANDS: [(&str, &[&str]); 10] = [
    ("synth", &["--config", "--seed", "--rows", "--null", "--out", "--truth", "--complete"]),
    ("label", &["--panel", "--campaigns", "--snapshots", "--out"]),
    ("split", &["--panel", "--seed", "--test-fraction", "--percentile", "--train-out", "--test-out"]),
    ("impute", &["--train", "--test", "--method", "--k", "--iterations", "--steps", "--seed", "--train-out", "--test-out"]),
    ("oversample", &["--panel", "--method", "--k", "--m", "--beta", "--ratio", "--seed", "--out"]),
    ("train", &["--panel", "--model", "--config", "--seed", "--out"]),
    ("evaluate", &["--model", "--panel", "--roc", "--out"]),
    ("explain", &["--model", "--panel", "--background", "--method", "--samples", "--background-rows", "--seed", "--out"]),
    ("grid", &["--config", "--panel", "--seed", "--jobs", "--threshold", "--out", "--table", "--records"]),
    ("report", &["--records", "--threshold", "--timings", "--out", "--table"]),
];

#[test]
fn help_lists_every_flag() {
    let top = ok(&["--help"]);
    for (cmd, flags) in SUBCOMMANDS {
        assert!(top.contains(cmd), "{cmd} missing from top-level help");
        let help = ok(&[cmd, "--help"]);
        for f in flags {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn bad_invocations_exit_with_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(activist(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(activist(&["synth", "--bogus"]).status.code(), Some(1));
    let missing = activist(&["split", "--panel", "/no/such.csv", "--train-out", s(&out), "--test-out", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!out.exists());
    let into_void = activist(&["synth", "--rows", "50", "--out", s(&dir.path().join("nope/p.csv"))]);
    assert_eq!(into_void.status.code(), Some(1));
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Workspace { _dir: dir, root }
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// synth -> split -> impute -> oversample -> train -> evaluate -> explain.
fn run_workflow(w: &Workspace) -> String {
    let spec = w.p("spec.toml");
    std::fs::write(&spec, "n_rows = 800\npositive_rate = 0.1\nseed = 4\n").unwrap();
    let (panel, train, test) = (w.p("panel.csv"), w.p("train.csv"), w.p("test.csv"));
    ok(&["synth", "--config", s(&spec), "--out", s(&panel), "--truth", s(&w.p("truth.json"))]);
    ok(&["split", "--panel", s(&panel), "--percentile", "--seed", "1", "--train-out", s(&train), "--test-out", s(&test)]);
    let (itrain, itest) = (w.p("itrain.csv"), w.p("itest.csv"));
    ok(&["impute", "--train", s(&train), "--test", s(&test), "--method", "knn", "--train-out", s(&itrain), "--test-out", s(&itest)]);
    let sampled = w.p("sampled.csv");
    ok(&["oversample", "--panel", s(&itrain), "--method", "borderline-smote", "--out", s(&sampled)]);
    let model = w.p("model.json");
    ok(&["train", "--panel", s(&sampled), "--model", "logistic", "--out", s(&model)]);
    let eval = ok(&["evaluate", "--model", s(&model), "--panel", s(&itest), "--roc", s(&w.p("roc.csv"))]);
    std::fs::create_dir(w.p("shap")).unwrap();
    ok(&["explain", "--model", s(&model), "--panel", s(&itest), "--background", s(&itrain), "--out", s(&w.p("shap"))]);
    eval
}

#[test]
fn workflow_is_reproducible_byte_for_byte() {
    let a = Workspace::new();
    let b = Workspace::new();
    let eval = run_workflow(&a);
    assert!(eval.starts_with("auc_roc "));
    run_workflow(&b);
    for f in ["panel.csv", "truth.json", "itrain.csv", "itest.csv", "sampled.csv", "model.json", "roc.csv", "shap/bar.csv", "shap/beeswarm.csv", "shap/coefficients.csv"] {
        assert_eq!(std::fs::read(a.p(f)).unwrap(), std::fs::read(b.p(f)).unwrap(), "{f} differs");
    }
    let bees = std::fs::read_to_string(a.p("shap/beeswarm.csv")).unwrap();
    let features: std::collections::BTreeSet<&str> = bees.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(features.len(), 15);
}

#[test]
fn grid_and_report_round_trip() {
    let w = Workspace::new();
    let panel = w.p("panel.csv");
    ok(&["synth", "--rows", "600", "--seed", "2", "--out", s(&panel)]);
    let cfg = w.p("grid.toml");
    std::fs::write(
        &cfg,
        "panel = \"panel.csv\"\nimputers = [\"mean\"]\nsamplers = [\"none\", \"random\"]\nmodels = [\"logistic\", \"xgboost\"]\nsparse_native = [\"xgboost\"]\n[gbdt]\nn_trees = 10\n",
    )
    .unwrap();
    let (report, table, records) = (w.p("report.csv"), w.p("table.txt"), w.p("records.json"));
    let said = ok(&["grid", "--config", s(&cfg), "--threshold", "0", "--jobs", "2", "--out", s(&report), "--table", s(&table), "--records", s(&records)]);
    assert!(said.starts_with("ran 5 configurations (0 failed)"), "{said}");
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "imputation,oversampling,model,auc_test,auc_train,seconds,warnings");
    assert_eq!(csv.lines().count(), 6);
    let table = std::fs::read_to_string(&table).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split(" | ").map(str::trim).collect();
    assert_eq!(header, ["Imputation", "Oversampling", "ML Method", "AUC-ROC"]);

    let again = w.p("again.csv");
    ok(&["report", "--records", s(&records), "--threshold", "0", "--out", s(&again)]);
    assert_eq!(std::fs::read(&again).unwrap(), csv.as_bytes());
}

#[test]
fn label_attaches_forward_window_targets() {
    let w = Workspace::new();
    let panel = w.p("panel.csv");
    ok(&["synth", "--rows", "40", "--seed", "1", "--out", s(&panel)]);
    let text = std::fs::read_to_string(&panel).unwrap();
    let first = text.lines().nth(1).unwrap();
    let mut cells = first.split(',');
    let (company, year) = (cells.next().unwrap(), cells.next().unwrap().parse::<i32>().unwrap());
    let campaigns = w.p("campaigns.csv");
    std::fs::write(&campaigns, format!("company_id,start_date,end_date\n{company},{}-03-01,{}-04-01\n", year + 1, year + 1)).unwrap();
    let out = w.p("labeled.csv");
    ok(&["label", "--panel", s(&panel), "--campaigns", s(&campaigns), "--out", s(&out)]);
    let labeled = std::fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = labeled.lines().next().unwrap().split(',').collect();
    let li = header.iter().position(|h| *h == "label").unwrap();
    let row = labeled
        .lines()
        .skip(1)
        .find(|l| l.starts_with(&format!("{company},{year},")))
        .unwrap();
    assert_eq!(row.split(',').nth(li).unwrap(), "1");
}
