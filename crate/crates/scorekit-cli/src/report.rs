//! Output side of the CLI: serializable result records, delimited tables,
//! and the plain-text summary, all stamped with the same provenance
//! header. Identical configs produce byte-identical files; nothing here
//! reads the clock or the filesystem layout.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::config::{ExperimentConfig, Format};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub mode: String,
    pub subcommand: String,
}

impl Provenance {
    pub fn new(cfg: &ExperimentConfig, subcommand: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(cfg.canonical().as_bytes());
        Provenance {
            config_sha256: format!("{:x}", hasher.finalize()),
            seed: cfg.solver().seed,
            version: VERSION,
            mode: cfg.mode.name().to_string(),
            subcommand: subcommand.to_string(),
        }
    }

    fn comment_header(&self) -> String {
        format!(
            "# config_sha256: {}\n# seed: {}\n# version: {}\n",
            self.config_sha256,
            self.seed.map_or("none".into(), |s| s.to_string()),
            self.version,
        )
    }
}

// ------------------------------------------------------------- result bodies

#[derive(Debug, Serialize)]
pub struct ScoreRecord {
    pub ranks: Vec<usize>,
    pub payoff: f64,
    pub credible: bool,
}

#[derive(Debug, Serialize)]
pub struct FiniteRecord {
    pub phi: f64,
    pub max_k: usize,
    pub optimal: ScoreRecord,
    pub best_credible: ScoreRecord,
    pub gap: f64,
    /// Per-state slack of the optimal score under truthful reporting.
    pub ic_slack: Vec<f64>,
    pub best_deviation: Option<(usize, usize)>,
}

#[derive(Debug, Serialize)]
pub struct LabeledScoreRecord {
    pub label: String,
    pub ranks: Vec<usize>,
    pub payoff: f64,
    pub credible: bool,
}

#[derive(Debug, Serialize)]
pub struct TwoByTwoRecord {
    pub pmf: [f64; 4],
    pub scores: Vec<LabeledScoreRecord>,
    pub optimal: String,
    pub optimal_credible: bool,
    pub pooled_ratio: f64,
    pub ratio_interval: [f64; 2],
    pub gap: f64,
}

#[derive(Debug, Serialize)]
pub struct DirectionRecord {
    pub beta: [f64; 2],
    pub q: f64,
    pub payoff: f64,
    pub residual: f64,
    pub receiver_coefficient: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct McRecord {
    pub samples: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub samples_used: u64,
    pub samples_excluded: u64,
}

#[derive(Debug, Serialize)]
pub struct CoarseRecord {
    pub cuts: Vec<f64>,
    pub payoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McRecord>,
}

#[derive(Debug, Serialize)]
pub struct GaussianRecord {
    pub sigma: [f64; 3],
    pub phi: f64,
    pub best: DirectionRecord,
    pub worst: DirectionRecord,
    pub eigenvalues: [f64; 2],
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse: Option<CoarseRecord>,
}

#[derive(Debug, Serialize)]
pub struct AuditSummaryRecord {
    pub exante_payoff: f64,
    pub min_slack: f64,
    pub credible: bool,
}

#[derive(Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub collinearity: f64,
    pub parallelism_spread: f64,
    pub boundaries_fitted: usize,
    pub boundaries_skipped: usize,
}

#[derive(Debug, Serialize)]
pub struct LloydRecord {
    pub prior: String,
    pub phi: f64,
    pub n: usize,
    pub restarts: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub repairs: usize,
    pub actions: Vec<[f64; 2]>,
    pub cell_mass: Vec<f64>,
    pub audit: AuditSummaryRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsRecord>,
}

#[derive(Debug, Serialize)]
pub struct WitnessRecord {
    pub hi: usize,
    pub lo: usize,
    pub missing_rank: usize,
}

#[derive(Debug, Serialize)]
pub struct AuditRecord {
    pub phi: f64,
    pub ranks: Vec<usize>,
    pub ivp_holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
    pub payoff: f64,
    pub credible: bool,
    pub min_slack: f64,
    pub ic_slack: Vec<f64>,
    pub best_deviation: Option<(usize, usize)>,
}

/// One grid point of a parameter sweep; only the fields meaningful for
/// the swept mode are present.
#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub payoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_best: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_worst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff_worst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collinearity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism_spread: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Finite(FiniteRecord),
    TwoByTwo(TwoByTwoRecord),
    Gaussian(GaussianRecord),
    Lloyd(LloydRecord),
    Audit(AuditRecord),
    Sweep(Vec<SweepRow>),
}

#[derive(Debug, Serialize)]
pub struct RootRecord {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: Body,
}

/// Everything one run produces, still in memory.
pub struct Bundle {
    pub record: RootRecord,
    /// `(file name, header row, data rows)` triples; each becomes one CSV.
    pub tables: Vec<(String, String, Vec<String>)>,
    /// Human-readable lines (without the provenance header).
    pub summary: Vec<String>,
}

impl Bundle {
    pub fn new(record: RootRecord) -> Self {
        Bundle {
            record,
            tables: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn summary_text(&self) -> String {
        let mut out = self.record.provenance.comment_header();
        for line in &self.summary {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    /// Writes the requested artifacts under `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, formats: &[Format]) -> Result<(), String> {
        let io = |e: std::io::Error| format!("writing {}: {e}", dir.display());
        fs::create_dir_all(dir).map_err(io)?;
        if formats.contains(&Format::Json) {
            let json = serde_json::to_string_pretty(&self.record)
                .expect("records serialize");
            write_file(&dir.join("records.json"), json.as_bytes())?;
        }
        if formats.contains(&Format::Csv) {
            for (name, header, rows) in &self.tables {
                let mut text = self.record.provenance.comment_header();
                text.push_str(header);
                text.push('\n');
                for row in rows {
                    text.push_str(row);
                    text.push('\n');
                }
                write_file(&dir.join(name), text.as_bytes())?;
            }
        }
        if formats.contains(&Format::Summary) {
            write_file(&dir.join("summary.txt"), self.summary_text().as_bytes())?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let mut f = fs::File::create(path).map_err(|e| format!("creating {}: {e}", path.display()))?;
    f.write_all(bytes)
        .map_err(|e| format!("writing {}: {e}", path.display()))
}

/// Full-precision float for machine-readable rows: shortest decimal that
/// round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn provenance_hash_is_stable_and_ignores_output() {
        let a = ExperimentConfig::parse(
            "mode = \"gaussian\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 0.5\n",
        )
        .unwrap();
        let b = ExperimentConfig::parse(
            "mode = \"gaussian\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 0.5\n\n[output]\ndir = \"x\"\n",
        )
        .unwrap();
        let pa = Provenance::new(&a, "solve");
        let pb = Provenance::new(&b, "solve");
        assert_eq!(pa.config_sha256, pb.config_sha256);
        assert_eq!(pa.config_sha256.len(), 64);
    }

    #[test]
    fn comment_header_spells_out_missing_seed() {
        let cfg = ExperimentConfig::parse(
            "mode = \"gaussian\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 0.0\n",
        )
        .unwrap();
        let head = Provenance::new(&cfg, "solve").comment_header();
        assert!(head.contains("# seed: none\n"), "{head}");
        assert!(head.contains("# version: "), "{head}");
    }
}
