//! Structured run reports and their three renderings: human-readable text
//! (6 significant digits), JSON (full precision, stable field order), and
//! CSV (numeric fields byte-identical to the JSON encoding).

use momrank_core::cprank::BoundResult;
use momrank_core::{FlatnessReport, SolveOptions};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Solver tolerances echoed so a report can be replayed exactly.
#[derive(Clone, Serialize)]
pub struct SolverEcho {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
}

impl From<&SolveOptions> for SolverEcho {
    fn from(o: &SolveOptions) -> Self {
        SolverEcho {
            tol_gap: o.tol_gap,
            tol_feas: o.tol_feas,
            max_iters: o.max_iters,
        }
    }
}

#[derive(Clone, Serialize)]
pub struct InstanceDesc {
    /// "cp" or "nn"
    pub kind: String,
    /// file path or built-in name as given on the command line
    pub source: String,
    pub rows: usize,
    pub cols: usize,
}

/// One bound computation.
#[derive(Clone, Serialize)]
pub struct BoundRow {
    pub instance: String,
    pub t: usize,
    pub mode: String,
    pub strength: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub time_s: f64,
    pub blocks: Vec<usize>,
    pub num_equalities: usize,
    pub nonneg_vars: usize,
}

pub fn bound_row(
    source: &str,
    t: usize,
    mode: &str,
    strength: &str,
    res: &BoundResult,
) -> BoundRow {
    BoundRow {
        instance: source.to_string(),
        t,
        mode: mode.to_string(),
        strength: strength.to_string(),
        status: res.status.to_string(),
        value: res.value,
        time_s: res.wall_time,
        blocks: res.program_stats.psd_block_dims.clone(),
        num_equalities: res.program_stats.num_equalities,
        nonneg_vars: res.program_stats.nonneg_vars,
    }
}

/// One extracted atom, flattened for tabular output.
#[derive(Clone, Serialize)]
pub struct AtomRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clique: Option<Vec<usize>>,
    pub weight: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Serialize)]
pub struct ExtractionSummary {
    pub atoms: usize,
    /// entrywise ℓ₁ distance between the rebuilt matrix and the input
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// why extraction produced no atoms, when it failed
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub atom_rows: Vec<AtomRow>,
}

#[derive(Clone, Serialize)]
pub struct Totals {
    pub wall_time_s: f64,
}

/// Report for `bound` and `extract`.
#[derive(Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub instance: InstanceDesc,
    pub rows: Vec<BoundRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flatness: Option<FlatnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ExtractionSummary>,
    pub solver: SolverEcho,
    pub totals: Totals,
}

/// One cell of a reproduction suite.
#[derive(Clone, Serialize)]
pub struct ReproCell {
    pub label: String,
    pub family: String,
    pub t: usize,
    pub mode: String,
    pub strength: String,
    /// the bundled expectation, human-readable
    pub expect: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub time_s: f64,
    pub pass: bool,
}

/// Report for `repro`.
#[derive(Serialize)]
pub struct ReproReport {
    pub schema_version: u32,
    pub command: String,
    pub suite: String,
    pub cells: Vec<ReproCell>,
    pub passed: usize,
    pub failed: usize,
    pub solver: SolverEcho,
    pub totals: Totals,
}

/// Report for `gen`.
#[derive(Serialize)]
pub struct GenReport {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub m_k: usize,
    pub nzd: f64,
    pub factors: usize,
    pub matrix_path: String,
    pub sidecar_path: String,
}

/// Sidecar metadata written next to a generated matrix.
#[derive(Serialize)]
pub struct GenSidecar {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub m_k: usize,
    pub nzd: f64,
    pub factors: usize,
}

/// `x` with 6 significant digits, for human-readable output.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let prec = (5 - exp).max(0) as usize;
    format!("{x:.prec$}")
}

/// Numeric field exactly as serde_json encodes it, so CSV equals JSON.
fn json_num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite floats always serialize")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(json_num).unwrap_or_default()
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance,t,mode,strength,status,value,time_s,flat,atoms,residual\n",
        );
        let flat = self
            .flatness
            .as_ref()
            .map(|f| f.overall_flat.to_string())
            .unwrap_or_default();
        let (atoms, residual) = match &self.extraction {
            Some(e) => (e.atoms.to_string(), opt_num(e.residual)),
            None => (String::new(), String::new()),
        };
        for row in &self.rows {
            out.push_str(&csv_line(&[
                row.instance.clone(),
                row.t.to_string(),
                row.mode.clone(),
                row.strength.clone(),
                row.status.clone(),
                opt_num(row.value),
                json_num(row.time_s),
                flat.clone(),
                atoms.clone(),
                residual.clone(),
            ]));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "instance {} ({}, {}x{})\n",
            self.instance.source, self.instance.kind, self.instance.rows, self.instance.cols
        );
        for row in &self.rows {
            let max_block = row.blocks.iter().max().copied().unwrap_or(0);
            out.push_str(&format!(
                "  t={} mode={} strength={}  status={}  value={}  time={}s  ({} psd blocks, max {}, {} equalities, {} nonneg vars)\n",
                row.t,
                row.mode,
                row.strength,
                row.status,
                row.value.map(sig6).unwrap_or_else(|| "-".into()),
                sig6(row.time_s),
                row.blocks.len(),
                max_block,
                row.num_equalities,
                row.nonneg_vars,
            ));
        }
        if let Some(f) = &self.flatness {
            out.push_str(&format!(
                "  flatness: overall={} (rank tolerance {})\n",
                f.overall_flat,
                sig6(f.rank_tol)
            ));
            for b in &f.blocks {
                out.push_str(&format!(
                    "    clique={:?}  s={}  rank M_s={}  rank M_(s-d)={}  flat={}\n",
                    b.clique, b.s, b.rank_s, b.rank_s_minus_d, b.flat
                ));
            }
        }
        if let Some(e) = &self.extraction {
            match (&e.error, e.residual) {
                (Some(err), _) => {
                    out.push_str(&format!("  extraction: 0 atoms ({err})\n"));
                }
                (None, residual) => {
                    out.push_str(&format!(
                        "  extraction: {} atoms, reconstruction residual {}\n",
                        e.atoms,
                        residual.map(sig6).unwrap_or_else(|| "-".into())
                    ));
                    for a in &e.atom_rows {
                        let point: Vec<String> = a.point.iter().map(|&x| sig6(x)).collect();
                        out.push_str(&format!(
                            "    weight={}  point=[{}]{}\n",
                            sig6(a.weight),
                            point.join(", "),
                            a.clique
                                .as_ref()
                                .map(|c| format!("  clique={c:?}"))
                                .unwrap_or_default(),
                        ));
                    }
                }
            }
        }
        out.push_str(&format!("total time: {}s\n", sig6(self.totals.wall_time_s)));
        out
    }
}

impl ReproReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("label,family,t,mode,strength,expect,status,value,time_s,pass\n");
        for c in &self.cells {
            out.push_str(&csv_line(&[
                c.label.clone(),
                c.family.clone(),
                c.t.to_string(),
                c.mode.clone(),
                c.strength.clone(),
                c.expect.clone(),
                c.status.clone(),
                opt_num(c.value),
                json_num(c.time_s),
                c.pass.to_string(),
            ]));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("suite {}: {} cells\n", self.suite, self.cells.len());
        for c in &self.cells {
            out.push_str(&format!(
                "  {:<10} t={} {:<5} {:<7}  status={:<18} value={:<10} expect {:<14} {}  ({}s)\n",
                c.label,
                c.t,
                c.mode,
                c.strength,
                c.status,
                c.value.map(sig6).unwrap_or_else(|| "-".into()),
                c.expect,
                if c.pass { "PASS" } else { "FAIL" },
                sig6(c.time_s),
            ));
        }
        out.push_str(&format!(
            "suite result: {} ({}/{} cells) in {}s\n",
            if self.failed == 0 { "PASS" } else { "FAIL" },
            self.passed,
            self.cells.len(),
            sig6(self.totals.wall_time_s),
        ));
        out
    }
}
