use std::path::Path;
use std::process::{Command, Output};

fn bitprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bitprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn build(dir: &Path, name: &str, contents: &str) -> (Output, std::path::PathBuf) {
    let elements = dir.join(format!("{name}.txt"));
    let out = dir.join(format!("{name}.bin"));
    std::fs::write(&elements, contents).unwrap();
    let o = bitprobe(&[
        "build",
        "--m",
        "1024",
        "--x",
        "4",
        "--y",
        "2",
        "--elements",
        path(&elements),
        "--out",
        path(&out),
    ]);
    (o, out)
}

fn query(structure: &Path, e: u64) -> Output {
    bitprobe(&[
        "query",
        "--structure",
        path(structure),
        "--element",
        &e.to_string(),
    ])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn empty_file_builds_an_empty_structure() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = build(dir.path(), "empty", "");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("total"));
    for e in [0, 1, 511, 1023] {
        let q = query(&out, e);
        assert_eq!(q.status.code(), Some(0));
        assert_eq!(stdout(&q), "false");
    }
}

#[test]
fn five_elements_answer_through_the_process_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let set = [7u64, 130, 131, 600, 1023];
    let text: String = set.iter().map(|e| format!("{e}\n")).collect();
    let (o, out) = build(dir.path(), "five", &text);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for e in [0u64, 6, 7, 8, 129, 130, 131, 132, 599, 600, 1022, 1023] {
        let expected = set.contains(&e);
        assert_eq!(stdout(&query(&out, e)), expected.to_string(), "element {e}");
    }
}

#[test]
fn user_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (six, _) = build(dir.path(), "six", "1\n2\n3\n4\n5\n6\n");
    assert_eq!(six.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&six.stderr).contains("capacity"));
    let (bad, _) = build(dir.path(), "bad", "1\ntwo\n");
    assert_eq!(bad.status.code(), Some(2));
    let (big, _) = build(dir.path(), "big", "1024\n");
    assert_eq!(big.status.code(), Some(2));

    let (ok, out) = build(dir.path(), "ok", "5\n");
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(query(&out, 1024).status.code(), Some(2));
    let mut bytes = std::fs::read(&out).unwrap();
    bytes[0] ^= 0xff;
    let corrupt = dir.path().join("corrupt.bin");
    std::fs::write(&corrupt, &bytes).unwrap();
    assert_eq!(query(&corrupt, 5).status.code(), Some(2));
    assert_eq!(
        query(&dir.path().join("missing.bin"), 5).status.code(),
        Some(2)
    );
}

#[test]
fn verify_and_lemmas_exit_codes() {
    let v = bitprobe(&[
        "verify",
        "--m",
        "1024",
        "--x",
        "4",
        "--y",
        "2",
        "--mode",
        "exhaustive",
        "--max-size",
        "1",
        "--report-format",
        "records",
    ]);
    assert_eq!(v.status.code(), Some(0));
    let first: serde_json::Value =
        serde_json::from_str(stdout(&v).lines().next().unwrap()).unwrap();
    assert_eq!(first["instances"], 1025);
    assert_eq!(first["passed"], true);

    let t = bitprobe(&[
        "verify", "--m", "1024", "--x", "4", "--y", "2", "--mode", "taxonomy", "--count", "1",
    ]);
    assert_eq!(t.status.code(), Some(0));
}

#[test]
fn counterexample_witness_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("witness.bin");
    let o = bitprobe(&[
        "counterexample",
        "--m",
        "2048",
        "--x",
        "8",
        "--y",
        "2",
        "--size",
        "7",
        "--seed",
        "1",
        "--out",
        path(&witness),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("FOUND"));
    assert_eq!(query(&witness, 0).status.code(), Some(0));

    let none = bitprobe(&[
        "counterexample",
        "--m",
        "1024",
        "--x",
        "4",
        "--y",
        "2",
        "--budget",
        "2000",
    ]);
    assert_eq!(none.status.code(), Some(1));
}
