//! Output documents of the subcommands and their CSV and human renderings.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use shepp_olkin::explorer::ScanReport;
use shepp_olkin::inequalities::{LemmaInputs, MarginReport, UkDecomposition};
use shepp_olkin::qentropy::CriticalQResult;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckEntry {
    Evaluated(MarginReport),
    NotApplicable,
}

impl CheckEntry {
    pub fn holds(&self) -> bool {
        match self {
            Self::Evaluated(r) => r.holds,
            Self::NotApplicable => true,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub schema_version: u32,
    pub p: Vec<f64>,
    pub slopes: Vec<f64>,
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    pub pmf: Vec<f64>,
    pub entropy: f64,
    pub entropy_second_derivative: f64,
    pub passed: bool,
    pub checks: BTreeMap<String, CheckEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uk: Option<UkDecomposition>,
}

impl VerifyOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance_id,inequality,k,margin\n");
        for (name, entry) in &self.checks {
            if let CheckEntry::Evaluated(r) = entry {
                for (k, m) in &r.margins {
                    let _ = writeln!(out, "0,{name},{k},{m:e}");
                }
            }
        }
        out
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p = {:?}, slopes = {:?}, t = {}", self.p, self.slopes, self.t);
        let _ = writeln!(out, "H = {:.10}, H'' = {:.10}", self.entropy, self.entropy_second_derivative);
        for (name, entry) in &self.checks {
            match entry {
                CheckEntry::Evaluated(r) => {
                    let worst = r.worst.map_or("none".to_string(), |w| format!("{w:.6e}"));
                    let verdict = if r.holds { "ok" } else { "FAIL" };
                    let _ = writeln!(out, "{name:<28} worst {worst:>14}  tol {:.1e}  {verdict}", r.tolerance);
                }
                CheckEntry::NotApplicable => {
                    let _ = writeln!(out, "{name:<28} not applicable");
                }
            }
        }
        if let Some(uk) = &self.uk {
            for e in &uk.entries {
                let branch = serde_json::to_value(e.branch).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                let _ = writeln!(out, "u_{} = {:.10} ({branch})", e.k, e.u);
            }
        }
        let _ = writeln!(out, "{}", if self.passed { "all margins hold" } else { "some margins fail" });
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HessianOutput {
    pub schema_version: u32,
    pub p: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub max_eigenvalue: f64,
    pub tolerance: f64,
    pub negative_semidefinite: bool,
}

impl HessianOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,value\n");
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{j},{v:e}");
            }
        }
        out
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        for row in &self.matrix {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.8}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        let _ = writeln!(out, "max eigenvalue {:.6e} (tol {:.1e})", self.max_eigenvalue, self.tolerance);
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LemmaOutput {
    pub schema_version: u32,
    pub inputs: LemmaInputs,
    pub margin: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub xi_second_min: f64,
    pub xi_second_argmin: f64,
}

impl LemmaOutput {
    pub fn to_csv(&self) -> String {
        format!("instance_id,inequality,k,margin\n0,functional_lemma,0,{:e}\n", self.margin)
    }

    pub fn to_human(&self) -> String {
        format!(
            "margin {:.10} (tol {:.1e}), min xi'' {:.6e} at t = {}\n",
            self.margin, self.tolerance, self.xi_second_min, self.xi_second_argmin
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DirectCriticalOutput {
    pub schema_version: u32,
    pub result: CriticalQResult,
}

fn critical_result(value: &Value) -> Option<CriticalQResult> {
    serde_json::from_value(value.get("result")?.clone()).ok()
}

pub fn critical_csv(value: &Value) -> String {
    let mut out = String::from("q,sign\n");
    if let Some(r) = critical_result(value) {
        for (q, s) in r.sign_trace {
            let _ = writeln!(out, "{q},{s}");
        }
    }
    out
}

pub fn critical_human(value: &Value) -> String {
    match critical_result(value) {
        Some(r) => format!(
            "{}: q* = {:.8} in [{}, {}] after {} evaluations\n",
            r.family,
            r.root,
            r.bracket.0,
            r.bracket.1,
            r.sign_trace.len()
        ),
        None => "no result\n".into(),
    }
}

pub fn scan_human(report: &ScanReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} instances, config {}", report.instances, &report.config_hash[..16]);
    for (name, s) in &report.checks {
        let worst = s.worst_margin.map_or("none".to_string(), |w| format!("{w:.6e}"));
        let _ = writeln!(
            out,
            "{name:<28} evaluated {:>6}  worst {worst:>14}  violations {}",
            s.evaluated, s.violations
        );
    }
    let _ = writeln!(out, "{} violations, {} certificates", report.violation_count, report.certificates.len());
    out
}
