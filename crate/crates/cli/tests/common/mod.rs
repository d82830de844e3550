#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

pub fn multiphonic<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_multiphonic"))
        .args(args)
        .env_remove("MULTIPHONIC_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Analysis JSON of a fixture, written to `dir/<name>.json`.
pub fn analyze_fixture(name: &str, dir: &Path, extra: &[&str]) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let wav = fixture(&format!("audio/{name}.wav"));
    let mut args: Vec<&std::ffi::OsStr> = vec![
        "analyze".as_ref(),
        wav.as_os_str(),
        "-o".as_ref(),
        path.as_os_str(),
    ];
    args.extend(extra.iter().map(std::ffi::OsStr::new));
    let out = multiphonic(args);
    assert!(out.status.success(), "analyze {name}: {}", stderr(&out));
    path
}
