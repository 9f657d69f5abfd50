#![allow(dead_code)]

use std::path::Path;

use warpflow::{parse_config_str, RunConfig};

/// Sphere run with `u₀ = 1 + amplitude · cos θ`.
pub fn sphere_cosine(nodes: [usize; 2], amplitude: f64, t_end: f64, interval: f64) -> String {
    format!(
        r#"[manifold]
preset = "round_sphere"

[initial]
profile = "cosine"
base = 1.0
amplitude = {amplitude}
mode = 1

[discretization]
nodes = [{}, {}]

[stepping]
t_end = {t_end}
diag_interval = {interval}
"#,
        nodes[0], nodes[1]
    )
}

pub fn with_output(text: &str, dir: &Path, extra: &str) -> String {
    format!("{text}\n[output]\ndir = {:?}\n{extra}\n", dir.display().to_string())
}

pub fn config(text: &str) -> RunConfig {
    parse_config_str(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Insert `lines` right after the `[section]` header.
pub fn patch(text: &str, section: &str, lines: &str) -> String {
    let header = format!("[{section}]\n");
    text.replacen(&header, &format!("{header}{lines}\n"), 1)
}
