use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_worldgrid"));
    c.current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."));
    c.env_remove("WORLDGRID_URL");
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn glue_query_from_the_command_line() {
    let o = bin().args(["info", "query", "(objectClass=GlueCE)"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes_follow_the_error_table() {
    let o = bin()
        .args(["submit", "scenarios/jobs/hello.jdl", "--user", "/CN=Nobody In Particular"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(40));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error[VoMembership]"));

    let o = bin().args(["status", "direct-000001"]).output().unwrap();
    assert_eq!(o.status.code(), Some(20));
    let o = bin().args(["--scenario", "scenarios/missing.scenario", "time"]).output().unwrap();
    assert_eq!(o.status.code(), Some(75));
    let o = bin().args(["monitor", "snapshot", "--filter", "planet=mars"]).output().unwrap();
    assert_eq!(o.status.code(), Some(70));
}

#[test]
fn run_is_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = bin()
            .args(["run", "worldgrid.scenario", "--seed", "7", "--script", "demo.cmds", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["lb.log", "events.log"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn failing_script_names_its_line() {
    let d = tempfile::tempdir().unwrap();
    let script = d.path().join("bad.cmds");
    std::fs::write(&script, "# nothing yet\ntime\nstatus nope-000001\ntime\n").unwrap();
    let o = bin().arg("run").arg("worldgrid.scenario").arg("--script").arg(&script).arg("--out").arg(d.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(20));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.cmds:3"));
    assert_eq!(stdout(&o).matches("> time").count(), 1);
}
