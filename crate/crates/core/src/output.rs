//! File emission: JSON records and CSV tables, every file stamped with the
//! tool version and the config hash. CSV uses a header row, comma separators
//! and '.' decimals (Rust's shortest round-trip float formatting), preceded
//! by one `#` metadata comment line.

use crate::continuation::{Branch, LambdaStarEstimate, SweepReport};
use crate::error::Result;
use crate::solve::{IterationTrace, SolutionRecord};
use crate::spectral::EigenBasis;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Run provenance: embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(config_json: &str, seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_json.as_bytes());
        let hash = hasher.finalize();
        let mut hex = String::with_capacity(16);
        for b in &hash[..8] {
            let _ = write!(hex, "{b:02x}");
        }
        RunMeta {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: hex,
            seed,
        }
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# fracmix {} config={} seed={}\n",
            self.tool_version, self.config_hash, self.seed
        )
    }
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    tool_version: &'a str,
    config_hash: &'a str,
    seed: u64,
    data: &'a T,
}

/// Writes a JSON document with the provenance fields at the top level.
pub fn write_json<T: Serialize>(path: &Path, meta: &RunMeta, data: &T) -> Result<()> {
    let doc = Wrapped {
        tool_version: &meta.tool_version,
        config_hash: &meta.config_hash,
        seed: meta.seed,
        data,
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// Serializable view of a solution record (the grid function goes to CSV,
/// not JSON).
#[derive(Debug, Clone, Serialize)]
pub struct RecordSummary {
    pub lambda: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub alpha: f64,
    pub kind: String,
    pub sup_norm: f64,
    pub hs_norm: f64,
    pub energy: f64,
    pub residual_norm: f64,
}

impl RecordSummary {
    pub fn of(rec: &SolutionRecord) -> Self {
        RecordSummary {
            lambda: rec.params.lambda,
            q: rec.params.q,
            r: rec.params.r,
            s: rec.params.s,
            alpha: rec.alpha,
            kind: format!("{:?}", rec.kind).to_lowercase(),
            sup_norm: rec.sup_norm,
            hs_norm: rec.hs_norm,
            energy: rec.energy,
            residual_norm: rec.residual_norm,
        }
    }
}

/// Solution field as CSV: node coordinates and values (Dirichlet nodes
/// included with value 0).
pub fn write_field_csv(
    path: &Path,
    meta: &RunMeta,
    basis: &EigenBasis,
    coords: &[[f64; 2]],
    u: &nalgebra::DVector<f64>,
) -> Result<()> {
    let mut out = meta.csv_preamble();
    out.push_str("node,x,y,value\n");
    for (node, c) in coords.iter().enumerate() {
        let v = match basis.node_to_dof[node] {
            Some(d) => u[d],
            None => 0.0,
        };
        let _ = writeln!(out, "{},{},{},{}", node, c[0], c[1], v);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_eigenvalues_csv(path: &Path, meta: &RunMeta, basis: &EigenBasis) -> Result<()> {
    let mut out = meta.csv_preamble();
    out.push_str("mode,lambda\n");
    for (j, l) in basis.lambdas.iter().enumerate() {
        let _ = writeln!(out, "{},{}", j + 1, l);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_branch_csv(path: &Path, meta: &RunMeta, branch: &Branch) -> Result<()> {
    let mut out = meta.csv_preamble();
    out.push_str("lambda,sup_norm,hs_norm,energy,residual,nu1\n");
    for p in &branch.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.lambda,
            p.record.sup_norm,
            p.record.hs_norm,
            p.record.energy,
            p.record.residual_norm,
            p.nu1
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, meta: &RunMeta, report: &SweepReport) -> Result<()> {
    let mut out = meta.csv_preamble();
    out.push_str(
        "alpha,lambda1s,sobolev_constant,lambda_star_lower,lambda_star_upper,lambda_used,\
         minimal_sup,minimal_hs,minimal_energy,mountain_pass_sup,mountain_pass_hs,\
         mountain_pass_energy,nu1,error\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.lambda1s,
            r.sobolev_constant,
            r.lambda_star_lower,
            r.lambda_star_upper,
            r.lambda_used,
            r.minimal_sup,
            r.minimal_hs,
            r.minimal_energy,
            r.mountain_pass_sup,
            r.mountain_pass_hs,
            r.mountain_pass_energy,
            r.nu1,
            r.error.as_deref().unwrap_or("")
        );
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaStarSummary {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub resolved: bool,
    pub probes: usize,
}

impl LambdaStarSummary {
    pub fn of(est: &LambdaStarEstimate) -> Self {
        LambdaStarSummary {
            lower: est.lower,
            upper: est.upper,
            width: est.width(),
            resolved: est.resolved,
            probes: est.probes.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub final_sup: Option<f64>,
}

impl TraceSummary {
    pub fn of(trace: &IterationTrace) -> Self {
        TraceSummary {
            iterations: trace.iterations,
            final_residual: trace.residuals.last().copied(),
            final_sup: trace.sup_norms.last().copied(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_hash_is_stable_and_short() {
        let a = RunMeta::new("{\"x\":1}", 7);
        let b = RunMeta::new("{\"x\":1}", 7);
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 16);
        let c = RunMeta::new("{\"x\":2}", 7);
        assert_ne!(a.config_hash, c.config_hash);
    }

    #[test]
    fn csv_preamble_has_version_and_hash() {
        let meta = RunMeta::new("cfg", 3);
        let line = meta.csv_preamble();
        assert!(line.starts_with("# fracmix "));
        assert!(line.contains(&meta.config_hash));
        assert!(line.contains("seed=3"));
    }
}
