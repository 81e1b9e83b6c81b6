#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn alegeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alegeo"))
        .args(args)
        .output()
        .expect("failed to launch alegeo")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `config.toml` into `dir` and returns its path.
pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Flat background, zero endpoints: the solution is `ε t(t − 1)/2`.
pub fn flat_toml(nx: usize, schedule: &str, extra: &str) -> String {
    format!(
        r#"[background]
family = "flat"
n = 2

[grid]
x_min = -1.0
x_max = 1.0
nx = {nx}
nt = 17

[endpoints.phi0]
family = "zero"

[endpoints.phi1]
family = "zero"

[solve]
eps_schedule = {schedule}
side_data = "parabolic"

[output]
dir = "out"
{extra}"#
    )
}

/// Small Eguchi–Hanson run that converges in a debug build within seconds.
pub fn eh_toml(schedule: &str, extra: &str) -> String {
    format!(
        r#"[background]
family = "eguchi-hanson"
params = {{ a = 1.0 }}

[grid]
x_min = 0.0
x_max = 4.0
nx = 81
nt = 17

[endpoints.phi0]
family = "zero"

[endpoints.phi1]
family = "inverse"
amplitude = 0.05

[solve]
eps_schedule = {schedule}

[output]
dir = "out"
{extra}"#
    )
}

pub fn cfg_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}
