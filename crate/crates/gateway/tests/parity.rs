use std::path::{Path, PathBuf};
use std::process::Command;

use worldgrid::grid::Grid;
use worldgrid_gateway::api::ApiRequest;
use worldgrid_gateway::client::{Backend, Local, Remote};
use worldgrid_gateway::script::{run_script, ScriptOutcome};
use worldgrid_gateway::server::{router, Gateway};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Serves a fresh gateway on an ephemeral port from a background runtime.
fn spawn_server(seed: u64) -> String {
    let grid = Grid::load(&scenarios().join("worldgrid.scenario"), seed).unwrap();
    let gw = Gateway::start(grid, &[], false).unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, router(gw)).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn demo() -> String {
    std::fs::read_to_string(scenarios().join("demo.cmds")).unwrap()
}

fn logs(b: &mut dyn Backend) -> (String, String) {
    (b.call(ApiRequest::LbLog).unwrap().body, b.call(ApiRequest::EventLog).unwrap().body)
}

fn assert_clean(o: &ScriptOutcome) {
    assert!(o.failed.is_none(), "script failed: {:?}\n{}", o.failed, o.transcript);
}

#[test]
fn script_through_http_matches_in_process() {
    let mut local = Local::new(Grid::load(&scenarios().join("worldgrid.scenario"), 7).unwrap());
    let a = run_script(&demo(), &scenarios(), &mut local);
    assert_clean(&a);
    let mut remote = Remote::new(&spawn_server(7)).unwrap();
    let b = run_script(&demo(), &scenarios(), &mut remote);
    assert_clean(&b);
    assert_eq!(a.transcript, b.transcript);
    let (lb_a, ev_a) = logs(&mut local);
    let (lb_b, ev_b) = logs(&mut remote);
    assert!(!lb_a.is_empty());
    assert_eq!(lb_a, lb_b);
    assert_eq!(ev_a, ev_b);
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_worldgrid"));
    c.current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."));
    c.env_remove("WORLDGRID_URL");
    c
}

// Single CLI invocations against one server share its state, so a session
// of separate processes ends in the same place as the script.
#[test]
fn separate_cli_processes_share_a_server() {
    let url = spawn_server(3);
    let hello = scenarios().join("jobs/hello.jdl");
    let user = "/C=IT/O=INFN/OU=Personal Certificate/L=Padova/CN=DataTAG Demo";
    let out = bin().args(["--remote", &url, "submit"]).arg(&hello).args(["--user", user]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let id: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let id = id["id"].as_str().unwrap().to_string();
    let out = bin().args(["--remote", &url, "advance", "--until-quiet"]).output().unwrap();
    assert!(out.status.success());
    let out = bin().args(["--remote", &url, "status", &id]).output().unwrap();
    let job: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(job["state"], "DONE_OK");

    let out = bin().args(["--remote", &url, "cancel", "rb-pisa-999999"]).output().unwrap();
    assert_eq!(out.status.code(), Some(20));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[UnknownJob]"));
}

#[test]
fn unreachable_gateway_is_reported() {
    let out = bin().args(["--remote", "http://127.0.0.1:9", "time"]).output().unwrap();
    assert_eq!(out.status.code(), Some(6));
}
