//! End-to-end checks of the experiment command line: artifact layout,
//! config echoes, determinism, sweep resumability and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairreg"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn gen_small(dir: &Path) {
    let status = bin()
        .args(["gen-data", "--n", "1500", "--seed", "5", "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success());
}

fn fit_prop(data: &Path, out: &Path) {
    let status = bin()
        .args(["fit-propensity", "--c-grid", "0.1,1", "--folds", "3", "--data"])
        .arg(data)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn gen_data_writes_artifacts_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    gen_small(&a);
    gen_small(&b);
    for name in ["train.csv", "test.csv", "manifest.csv", "config.txt"] {
        assert!(a.join(name).exists(), "{name} missing");
    }
    assert_eq!(read(&a.join("train.csv")), read(&b.join("train.csv")));
    assert_eq!(read(&a.join("test.csv")), read(&b.join("test.csv")));
    let config = read(&a.join("config.txt"));
    assert!(config.contains("seed = 5"));
    assert!(config.contains("n = 1500"));
}

#[test]
fn train_and_sweep_produce_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_small(&data);
    let prop = tmp.path().join("prop");
    fit_prop(&data, &prop);
    assert!(prop.join("propensity.csv").exists());
    assert!(read(&prop.join("config.txt")).contains("selected_c"));

    // single training
    let run = tmp.path().join("run");
    let status = bin()
        .args(["train", "--loss", "cde", "--model", "linear", "--lambda", "0.5", "--n1", "1", "--n2", "0"])
        .arg("--data")
        .arg(&data)
        .arg("--propensity")
        .arg(prop.join("propensity.csv"))
        .arg("--out")
        .arg(&run)
        .status()
        .unwrap();
    assert!(status.success());
    let trace = read(&run.join("trace.csv"));
    assert!(trace.starts_with("lambda,phase,iteration,lambda_star,l_o,r_f,l_f,es_value,es_best"));
    assert!(trace.contains(",warm,"));
    assert!(trace.contains(",ramp,"));
    assert!(trace.contains(",final,"));
    let metrics = read(&run.join("metrics.csv"));
    assert!(metrics.starts_with("lambda,accuracy,precision,spd_outcome,spd_scores,alpha_0,alpha_1,beta_0,gamma_0,gamma_1"));
    assert!(run.join("model.txt").exists());

    // sweep over a small grid
    let out = tmp.path().join("sweep");
    let sweep_args = |cmd: &mut Command| {
        cmd.args(["sweep", "--loss", "spd", "--model", "linear", "--lambdas", "0,0.3,0.6"])
            .arg("--data")
            .arg(&data)
            .arg("--propensity")
            .arg(prop.join("propensity.csv"))
            .arg("--out")
            .arg(&out);
    };
    let mut cmd = bin();
    sweep_args(&mut cmd);
    assert!(cmd.status().unwrap().success());
    let report = read(&out.join("report.csv"));
    let lines: Vec<&str> = report.trim().lines().collect();
    assert_eq!(lines.len(), 4, "header plus one row per λ: {report}");
    // λ column strictly increasing
    let lambdas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(lambdas.windows(2).all(|w| w[1] > w[0]));
    for tag in ["lambda_0.000000", "lambda_0.300000", "lambda_0.600000"] {
        assert!(out.join("traces").join(format!("{tag}.csv")).exists());
        assert!(out.join("models").join(format!("{tag}.txt")).exists());
    }

    // resumability: drop the last row and re-run; only the missing λ is
    // recomputed and the report ends up identical
    let truncated: String = lines[..3].join("\n") + "\n";
    std::fs::write(out.join("report.csv"), &truncated).unwrap();
    let mut cmd = bin();
    sweep_args(&mut cmd);
    let output = cmd.output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(!stdout.contains("λ = 0.000000"), "resume recomputed λ=0: {stdout}");
    assert!(stdout.contains("λ = 0.600000"));
    assert_eq!(read(&out.join("report.csv")), report);
}

#[test]
fn oracle_check_exit_codes() {
    let status = bin()
        .args(["oracle-check", "--seed", "9", "--instances", "50"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // an impossibly tight tolerance exercises the failure exit code
    let status = bin()
        .args(["oracle-check", "--seed", "9", "--instances", "50", "--tolerance", "1e-30"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn usage_and_runtime_failures_are_distinguished() {
    // unknown flag: usage error
    let status = bin().args(["gen-data", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // missing input file: runtime error
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["fit-propensity", "--data"])
        .arg(tmp.path().join("nope"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn ingest_adult_round_trips_fixture_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let train = tmp.path().join("adult.data");
    std::fs::write(
        &train,
        "39, State-gov, 77516, Bachelors, 13, Never-married, Adm-clerical, Not-in-family, White, Male, 2174, 0, 40, United-States, <=50K\n\
         50, Self-emp-not-inc, 83311, Bachelors, 13, Married-civ-spouse, Exec-managerial, Husband, White, Male, 0, 0, 13, United-States, >50K\n\
         38, Private, 215646, HS-grad, 9, Divorced, Handlers-cleaners, Not-in-family, White, Female, 0, 0, 40, United-States, <=50K\n\
         28, Private, 338409, Bachelors, 13, Married-civ-spouse, Prof-specialty, Wife, Black, Female, 0, 0, 40, Cuba, <=50K\n",
    )
    .unwrap();
    let test = tmp.path().join("adult.test");
    std::fs::write(
        &test,
        "|1x3 Cross validator\n\
         25, Private, 226802, 11th, 7, Never-married, Machine-op-inspct, Own-child, Black, Male, 0, 0, 40, United-States, <=50K.\n\
         44, Private, 160323, Some-college, 10, Married-civ-spouse, Machine-op-inspct, Husband, Black, Female, 7688, 0, 40, United-States, >50K.\n",
    )
    .unwrap();
    let out = tmp.path().join("prepared");
    let status = bin()
        .args(["ingest-adult", "--train"])
        .arg(&train)
        .arg("--test")
        .arg(&test)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let train_csv = read(&out.join("train.csv"));
    assert_eq!(train_csv.trim().lines().count(), 5);
    assert!(read(&out.join("manifest.csv")).contains("age,real-data"));
}
