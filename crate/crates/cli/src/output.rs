//! Report, table and dump writers.
//!
//! CSV numbers carry 17 significant digits so that equal floats always print
//! identically and round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use finsler_core::domain::TriMesh;
use finsler_core::eigen::EigenResult;
use finsler_core::model1d::OneDSolution;
use serde::Serialize;

use crate::{CliError, RunReport, Status, SummaryRow};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::CheckFailure => "check_failure",
        Status::ConfigError => "config_error",
        Status::NumericalError => "numerical_error",
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "index",
    "id",
    "norm",
    "bc",
    "level",
    "lambda",
    "d_f",
    "i_f",
    "ratio",
    "converged",
    "checks_pass",
    "status",
];

pub fn summary_csv(rows: &[SummaryRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.id.clone(),
            r.norm.clone(),
            r.bc.clone(),
            opt(r.level, |l| l.to_string()),
            opt(r.lambda, num),
            opt(r.d_f, num),
            opt(r.i_f, num),
            opt(r.ratio, num),
            opt(r.converged, |c| c.to_string()),
            r.checks_pass.to_string(),
            status_str(r.status).to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `x,y,u` per node.
pub fn eigenfunction_csv(mesh: &TriMesh, eig: &EigenResult) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "u"]).expect("in-memory write");
    for (p, u) in mesh.nodes.iter().zip(&eig.nodal_values) {
        w.write_record([num(p[0]), num(p[1]), num(*u)])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn mesh_text(mesh: &TriMesh) -> Vec<u8> {
    let mut buf = Vec::new();
    mesh.write_text(&mut buf).expect("in-memory write");
    buf
}

/// `a,b,delta,m` rows.
pub fn model_table_csv(solutions: &[OneDSolution]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "lambda", "a", "b", "delta", "m"])
        .expect("in-memory write");
    for s in solutions {
        w.write_record([
            s.model.n.to_string(),
            num(s.model.lambda),
            num(s.model.a),
            num(s.b),
            num(s.delta),
            num(s.m),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// `t,v,v_prime` samples of one solution.
pub fn model_samples_csv(s: &OneDSolution) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "v", "v_prime"])
        .expect("in-memory write");
    for i in 0..s.t_grid.len() {
        w.write_record([num(s.t_grid[i]), num(s.v[i]), num(s.v_prime[i])])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Wall times live beside the reports so that the reports themselves stay
/// byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub runs: Vec<f64>,
}

/// Human-readable rendering of a stored report.
pub fn render_text(r: &RunReport) -> String {
    let mut s = String::new();
    let c = &r.config;
    let _ = writeln!(
        s,
        "finsler {} | {} | {} | {}",
        r.version,
        c.id.as_deref().unwrap_or("-"),
        c.norm.label(),
        c.solver.bc.as_str()
    );
    let _ = writeln!(s, "status: {}", status_str(r.status));
    if let Some(e) = &r.error {
        let _ = writeln!(s, "error: {e}");
    }
    if let Some(g) = &r.geometry {
        let _ = writeln!(
            s,
            "d_F = {:.12}  i_F = {:.12}  center = ({:.6}, {:.6}){}",
            g.diameter,
            g.inradius,
            g.center[0],
            g.center[1],
            if g.center_unique { "" } else { " (not unique)" }
        );
    }
    for l in &r.levels {
        let _ = writeln!(
            s,
            "level {:>2}  nodes {:>7}  lambda {:.12}  {:?}  iters {}  |grad| {:.2e}",
            l.level, l.nodes, l.lambda, l.stop_reason, l.iterations, l.grad_norm
        );
    }
    if let Some(x) = r.richardson.last() {
        let _ = writeln!(s, "richardson {x:.12}");
    }
    if let Some(ratio) = r.ratio() {
        let _ = writeln!(s, "ratio {ratio:.12}");
    }
    if let Some(m) = &r.model {
        let _ = writeln!(
            s,
            "1-D model: a = {}  m = {:.12}{}",
            m.model.a,
            m.m,
            if m.clamped { " (clamped)" } else { "" }
        );
    }
    for k in &r.checks {
        let _ = writeln!(
            s,
            "{:<5} {:<28} worst {:+.6e}  threshold {:.3e}  samples {}",
            if k.pass { "PASS" } else { "FAIL" },
            k.name,
            k.worst_violation,
            k.threshold,
            k.sample_count
        );
    }
    s
}

pub fn print(out: &mut impl Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(std::f64::consts::PI), "3.1415926535897931e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn summary_layout() {
        let row = SummaryRow {
            index: 0,
            id: "a,b".into(),
            norm: "euclidean".into(),
            bc: "neumann".into(),
            level: Some(3),
            lambda: Some(1.5),
            d_f: None,
            i_f: None,
            ratio: None,
            converged: Some(true),
            checks_pass: true,
            status: Status::Pass,
        };
        let text = String::from_utf8(summary_csv(&[row])).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "0,\"a,b\",euclidean,neumann,3,1.5000000000000000e0,,,,true,true,pass"
        );
    }
}
