use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use vawt_mine::mesh::read_stl;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vawt-mine"));
    c.env_remove("VAWT_MINE_OUT");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synthetic_run_writes_journal_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "run",
            "--mode",
            "scga-els",
            "--backend",
            "synthetic",
            "--seed",
            "7",
            "--budget",
            "160",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = stdout(&o);
    assert!(out.contains("evaluations: 160"));
    let dir = tmp.path().join("runs/scga-els-seed7");
    for f in [
        "journal.ndjson",
        "report/best_so_far.csv",
        "report/summary.csv",
        "report/evaluations_A.csv",
    ] {
        assert!(dir.join(f).is_file(), "{f}");
        assert!(
            out.contains(&format!("runs/scga-els-seed7/{f}")),
            "{f} not printed"
        );
    }
    let best = std::fs::read_to_string(dir.join("report/best_so_far.csv")).unwrap();
    assert_eq!(best.lines().count(), 161);
}

#[test]
fn identical_flags_give_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "run", "--mode", "scga", "--seed", "3", "--budget", "60", "--out", "o",
    ];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    assert_eq!(run(&args, b.path()).status.code(), Some(0));
    for f in [
        "journal.ndjson",
        "report/best_so_far.csv",
        "report/evaluations_A.csv",
        "report/evaluations_B.csv",
        "report/summary.csv",
    ] {
        let read = |d: &Path| std::fs::read(d.join("o/scga-seed3").join(f)).unwrap();
        assert!(read(a.path()) == read(b.path()), "{f}");
    }
    // Same run id again refuses to overwrite.
    assert_eq!(run(&args, a.path()).status.code(), Some(2));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--budget", "40", "--run-id", "env"])
        .env("VAWT_MINE_OUT", tmp.path().join("elsewhere"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("elsewhere/env/journal.ndjson").is_file());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("run.toml"),
        "run_id = \"from-file\"\n[strategy]\nmode = \"cga-2\"\nbudget = 100\n",
    )
    .unwrap();
    let o = run(&["run", "run.toml", "--budget", "80"], tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("evaluations: 80"));
    let header = std::fs::read_to_string(tmp.path().join("runs/from-file/journal.ndjson")).unwrap();
    assert!(header
        .lines()
        .next()
        .unwrap()
        .contains("\"mode\":\"cga-2\""));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &["run", "missing.toml"],
        &["run", "--mode", "ga"],
        &["run", "--budget", "3"],
        &["resume", "nowhere/journal.ndjson"],
        &["bench", "--study", "speed"],
        &["export-stl", "[1,2,3]", "x.stl"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = run(args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert!(
        !tmp.path().join("runs").exists(),
        "no journal for a failed start"
    );
}

#[test]
fn resume_continues_and_completed_run_exits_immediately() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "run",
            "--mode",
            "cga-cross",
            "--budget",
            "60",
            "--run-id",
            "x",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let journal = tmp.path().join("runs/x/journal.ndjson");
    let full = std::fs::read(&journal).unwrap();
    let o = run(&["resume", "runs/x/journal.ndjson"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("appended events: 0"));
    let cut: usize = full
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b == b'\n')
        .nth(90)
        .unwrap()
        .0
        + 1;
    std::fs::write(&journal, &full[..cut]).unwrap();
    let o = run(&["resume", "runs/x/journal.ndjson"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read(&journal).unwrap() == full);
}

#[test]
fn export_stl_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let genome = "[2,2,3,4,5,8,13,20,34,40,2,-5,10,3,-2,0]";
    for steps in ["50", "0"] {
        let name = format!("g{steps}.stl");
        let o = run(
            &["export-stl", genome, &name, "--smooth-steps", steps],
            tmp.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        let bytes = std::fs::read(tmp.path().join(&name)).unwrap();
        let stl = read_stl(&bytes).unwrap();
        assert_eq!(bytes.len(), 84 + 50 * stl.triangles.len());
        assert!(stdout(&o).contains(&format!("triangles: {}", stl.triangles.len())));
    }
    let smooth = std::fs::read(tmp.path().join("g50.stl")).unwrap();
    let raw = std::fs::read(tmp.path().join("g0.stl")).unwrap();
    assert_eq!(smooth.len(), raw.len());
    assert_ne!(smooth, raw);
    // Voxel corners sit on the 0.3 mm lattice only without smoothing.
    let on_lattice = |b: &[u8]| {
        read_stl(b).unwrap().triangles.iter().all(|t| {
            t.vertices
                .iter()
                .flatten()
                .all(|&c| ((c as f64 / 0.3) - (c as f64 / 0.3).round()).abs() < 1e-3)
        })
    };
    assert!(on_lattice(&raw));
    assert!(!on_lattice(&smooth));
}

#[test]
fn export_stl_from_journal_reference() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["run", "--budget", "40", "--run-id", "j"], tmp.path())
            .status
            .code(),
        Some(0)
    );
    let journal = tmp
        .path()
        .join("runs/j/journal.ndjson")
        .display()
        .to_string();
    let o = run(
        &[
            "export-stl",
            &format!("{journal}#3:B"),
            "b.stl",
            "--smooth-steps",
            "0",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = run(
        &["export-stl", &format!("{journal}#999"), "c.stl"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_single_seed_studies() {
    let tmp = tempfile::tempdir().unwrap();
    for (study, csv, rows) in [("windowing", "windowing.csv", 2), ("cv", "cv.csv", 4)] {
        let o = run(
            &["bench", "--study", study, "--seeds", "1", "--out", "b"],
            tmp.path(),
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{study}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = std::fs::read_to_string(tmp.path().join("b").join(csv)).unwrap();
        assert_eq!(text.lines().count(), rows + 1, "{study}");
        assert!(tmp.path().join(format!("b/{study}_summary.csv")).is_file());
    }
    let o = run(
        &[
            "bench",
            "--study",
            "strategies",
            "--seeds",
            "1",
            "--modes",
            "cga,scga",
            "--out",
            "b",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(tmp.path().join("b/strategies.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("mode,seed,evaluations,best_rpm"));
}

#[test]
fn hardware_run_over_stdin() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("hw.toml"),
        "backend = \"hardware\"\nrun_id = \"hw\"\nsmooth_steps = 0\n[strategy]\npopulation = 4\nbudget = 9\n[service]\nbind = \"127.0.0.1:0\"\n",
    )
    .unwrap();
    let mut child = bin()
        .args(["run", "hw.toml"])
        .current_dir(tmp.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut seen = Vec::new();
    for line in lines {
        let line = line.unwrap();
        let Some(json) = line.strip_prefix("PENDING ") else {
            continue;
        };
        let p: serde_json::Value = serde_json::from_str(json).unwrap();
        let id = p["request_id"].as_u64().unwrap();
        assert!(tmp.path().join(p["stl_a"].as_str().unwrap()).is_file());
        seen.push(id);
        if id == 5 {
            writeln!(stdin, "abort").unwrap();
            break;
        }
        writeln!(stdin, "{id} {}", 1200 + id).unwrap();
    }
    assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
    assert_eq!(child.wait().unwrap().code(), Some(3));

    // Resume re-publishes request 5 and finishes.
    let mut child = bin()
        .args(["resume", "runs/hw/journal.ndjson", "--bind", "127.0.0.1:0"])
        .current_dir(tmp.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut resumed = Vec::new();
    for line in BufReader::new(child.stdout.take().unwrap()).lines() {
        let line = line.unwrap();
        if let Some(json) = line.strip_prefix("PENDING ") {
            let id = serde_json::from_str::<serde_json::Value>(json).unwrap()["request_id"]
                .as_u64()
                .unwrap();
            resumed.push(id);
            writeln!(stdin, "{id} 900.5").unwrap();
        }
    }
    assert_eq!(resumed, vec![5, 6, 7, 8]);
    assert_eq!(child.wait().unwrap().code(), Some(0));
    let summary = std::fs::read_to_string(tmp.path().join("runs/hw/report/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("9,"));
}
