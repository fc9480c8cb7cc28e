#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn trustwalk(args: &[&str]) -> Run {
    let out: Output = Command::new(env!("CARGO_BIN_EXE_trustwalk"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Writes `ratings.txt` and `social.txt` into `dir`.
pub fn write_dataset(dir: &Path, ratings: &str, social: &str) -> (PathBuf, PathBuf) {
    let r = dir.join("ratings.txt");
    let s = dir.join("social.txt");
    std::fs::write(&r, ratings).unwrap();
    std::fs::write(&s, social).unwrap();
    (r, s)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub const THREE_USERS_RATINGS: &str = "1 10 4\n1 20 2\n2 10 5\n2 20 3\n3 20 4\n";
pub const THREE_USERS_SOCIAL: &str = "1 2\n2 3\n";

/// Neighbor 1 is the only rater of item 10.
pub const ONE_STEP_RATINGS: &str = "1 10 4\n1 20 3\n2 20 3\n";
pub const ONE_STEP_SOCIAL: &str = "1 2\n";

/// User 3 alone rates item 99 and is unreachable from 1.
pub const UNCOVERED_RATINGS: &str = "1 10 3\n2 20 4\n3 99 5\n";
pub const UNCOVERED_SOCIAL: &str = "1 2\n";

/// Users 2-4 correlate positively with 1, never rated item 9, and all
/// rated item 7.
pub const FALLBACK_RATINGS: &str = "\
1 1 5\n1 2 4\n1 3 2\n\
2 1 5\n2 2 4\n2 3 2\n2 7 4\n\
3 1 4\n3 2 3\n3 3 1\n3 7 5\n\
4 1 5\n4 2 5\n4 3 3\n4 7 4\n\
5 9 3\n";
pub const FALLBACK_SOCIAL: &str = "1 2\n1 3\n1 4\n";

/// Appends `n` leaves to `node`, taking ids from `next`.
fn leaves(edges: &mut Vec<(u32, u32)>, node: u32, n: usize, next: &mut u32) {
    for _ in 0..n {
        edges.push((node, *next));
        *next += 1;
    }
}

/// Node 1 has degree 10 and neighbor-degree threshold 4; neighbors 2, 3, 4
/// clear it, the other seven are leaves.
pub fn impact_example() -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    let mut next = 100;
    for n in [2, 3, 4] {
        edges.push((1, n));
    }
    leaves(&mut edges, 1, 7, &mut next);
    leaves(&mut edges, 2, 9, &mut next);
    leaves(&mut edges, 3, 10, &mut next);
    leaves(&mut edges, 4, 12, &mut next);
    edges
}

/// As [`impact_example`] but one leaf of node 1 is replaced by node 5, of
/// degree 3, whose two other neighbors (6 and 7) have degree 5.
pub fn bridging_example() -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    let mut next = 100;
    for n in [2, 3, 4, 5] {
        edges.push((1, n));
    }
    leaves(&mut edges, 1, 6, &mut next);
    leaves(&mut edges, 2, 9, &mut next);
    leaves(&mut edges, 3, 10, &mut next);
    leaves(&mut edges, 4, 9, &mut next);
    edges.push((5, 6));
    edges.push((5, 7));
    leaves(&mut edges, 6, 4, &mut next);
    leaves(&mut edges, 7, 4, &mut next);
    edges
}

pub fn edge_lines(edges: &[(u32, u32)]) -> String {
    edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
}
