use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bdhk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdhk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch bdhk")
}

#[test]
fn variance_config_run_is_atomic_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# two fields, one x\nsubcommand = variance\nfield = Q\nfield = Q(i)\nx = 4000\nq_grid = geometric:3\nout = first.csv\n",
    )
    .unwrap();
    let out = bdhk(&["--config", "run.cfg", "--sequential"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = bdhk(
        &[
            "--config",
            "run.cfg",
            "--sequential",
            "--out",
            "second.csv",
            "--gnuplot",
        ],
        dir.path(),
    );
    assert!(out.status.success());

    let first = fs::read(dir.path().join("first.csv")).unwrap();
    assert_eq!(first, fs::read(dir.path().join("second.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "field,x,Q1,Q2,S,H_opt,J_opt,predicted_S,form,residual,runtime_s,error"
    );
    assert_eq!(lines.len(), 9);
    assert!(lines[1].starts_with("Q,4000,0,500,"));
    assert!(lines[8].starts_with("quad:-1,4000,0,4000,"));
    assert!(lines[8].contains(",eq5_full_range,"));

    let dat = fs::read_to_string(dir.path().join("second.csv.dat")).unwrap();
    assert_eq!(
        dat.lines()
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .count(),
        8
    );

    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["first.csv", "run.cfg", "second.csv", "second.csv.dat"]
    );

    let out = bdhk(&["regress", "--in", "first.csv"], dir.path());
    assert!(out.status.success());
    let regress = String::from_utf8(out.stdout).unwrap();
    assert_eq!(regress.lines().count(), 3);
    assert!(regress
        .lines()
        .nth(2)
        .unwrap()
        .starts_with("quad:-1,4000,4,"));
}

#[test]
fn thread_count_does_not_change_rows() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = bdhk(
            &[
                "phik",
                "--field",
                "cyc:12",
                "--field",
                "quad:5",
                "--q-max",
                "60",
                "--threads",
                threads,
            ],
            dir.path(),
        );
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 121);
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = bdhk(&["phik", "--q-max", "5"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least one field"));

    let out = bdhk(
        &[
            "variance", "--field", "Q", "--x", "100", "--q-list", "50,200",
        ],
        dir.path(),
    );
    assert!(!out.status.success());

    // a bad descriptor becomes an error row; the other field still runs
    let out = bdhk(
        &[
            "constants",
            "--field",
            "cyc:6",
            "--field",
            "Q",
            "--xs",
            "1000,2000,4000,8000",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("cyc:6,") && !rows[1].ends_with(','));
    assert!(rows[2].starts_with("Q,1.9435964") && rows[2].ends_with(','));
}

#[test]
fn verify_quick_on_rationals() {
    let dir = tempfile::tempdir().unwrap();
    let out = bdhk(&["verify", "--field", "Q", "--budget", "quick"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.lines().skip(1).all(|l| !l.contains(",fail,")),
        "{text}"
    );
    assert!(text.contains("Q,lemma3_ratio,"));
}
