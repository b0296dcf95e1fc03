//! Experiment configuration: a strict TOML schema, semantic validation
//! that reports every violation at once, and the canonical serialization
//! used for provenance hashing.

use scorekit::{OrderedScore, ENUMERATION_LIMIT, MIN_RESOLUTION};
use serde::{Deserialize, Serialize};

/// Which subcommand is driving the run; some checks depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcmd {
    Solve,
    Audit,
    Sweep,
}

impl Subcmd {
    pub fn name(self) -> &'static str {
        match self {
            Subcmd::Solve => "solve",
            Subcmd::Audit => "audit",
            Subcmd::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Finite,
    TwoByTwo,
    Gaussian,
    Lloyd,
    Audit,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Finite => "finite",
            Mode::TwoByTwo => "two-by-two",
            Mode::Gaussian => "gaussian",
            Mode::Lloyd => "lloyd",
            Mode::Audit => "audit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Summary,
}

/// One experiment. Unknown keys anywhere are rejected at parse time;
/// everything else is checked by [`validate`], which returns the full
/// list of violations rather than stopping at the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Weight on the first coordinate of the loss. Default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    /// State probabilities (finite, two-by-two, lloyd-on-points, audit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    /// Planar states, one `[x, y]` per pmf entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<[f64; 2]>>,
    /// Scalar states; mutually exclusive with `states`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states_1d: Option<Vec<f64>>,
    /// Covariance entries (gaussian, lloyd-on-grid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma12: Option<f64>,
    /// Interior thresholds for a quantized linear score (gaussian only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<f64>>,
    /// Rank per state, the score to audit (audit mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Block budget for enumeration (finite). Default 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_k: Option<usize>,
    /// Number of actions (lloyd). Default 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Credibility slack tolerance, or the stopping threshold in lloyd
    /// mode. Defaults: 1e-9 (credibility), 1e-12 (lloyd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// RNG seed; required whenever restarts or Monte Carlo are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Grid resolution per axis (lloyd prior), or the number of angle
    /// steps for the gaussian direction sweep. Default 200 (lloyd).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Restart budget for the fixed-point driver (lloyd). Default 20.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Monte Carlo sample count for the quantized-score cross-check
    /// (gaussian with `cuts`). Default 0 = skip.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<u64>,
    /// Worker threads; 0 or absent = library default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Which artifacts to write. Default: all of json, csv, summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

/// Parameter grids for the `sweep` subcommand. The cartesian product is
/// traversed with `phi` outermost, then `sigma12`, then `n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma12: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Canonical serialization; the provenance hash is taken over this
    /// with the output block and the thread count cleared (the
    /// destination is not part of the experiment's identity, and results
    /// are bit-identical for any thread count).
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        if let Some(s) = &mut c.solver {
            s.threads = None;
            if *s == SolverBlock::default() {
                c.solver = None;
            }
        }
        toml::to_string(&c).expect("config serializes")
    }

    pub fn solver(&self) -> SolverBlock {
        self.solver.clone().unwrap_or_default()
    }

    pub fn phi(&self) -> f64 {
        self.phi.unwrap_or(1.0)
    }

    pub fn formats(&self) -> Vec<Format> {
        self.output
            .as_ref()
            .and_then(|o| o.formats.clone())
            .unwrap_or_else(|| vec![Format::Json, Format::Csv, Format::Summary])
    }
}

fn is_finite(x: f64) -> bool {
    x.is_finite()
}

/// Semantic validation. Returns every violation found.
pub fn validate(cfg: &ExperimentConfig, cmd: Subcmd) -> Vec<String> {
    let mut bad = Vec::new();
    let s = cfg.solver();

    match (cmd, cfg.mode) {
        (Subcmd::Audit, m) if m != Mode::Audit => {
            bad.push(format!("the audit subcommand needs mode = \"audit\", got \"{}\"", m.name()))
        }
        (Subcmd::Solve, Mode::Audit) => {
            bad.push("mode \"audit\" runs via the audit subcommand".into())
        }
        (Subcmd::Sweep, Mode::Audit) => bad.push("sweep does not apply to audit mode".into()),
        _ => {}
    }

    if let Some(phi) = cfg.phi {
        if !(phi.is_finite() && phi > 0.0) {
            bad.push(format!("phi must be finite and > 0, got {phi}"));
        } else if cfg.mode == Mode::TwoByTwo && (phi - 1.0).abs() > 1e-12 {
            bad.push(format!(
                "two-by-two closed forms require phi = 1, got {phi}"
            ));
        }
    }
    if let Some(tol) = s.tol {
        if !(tol.is_finite() && tol > 0.0) {
            bad.push(format!("solver.tol must be finite and > 0, got {tol}"));
        }
    }

    let Some(model) = cfg.model.as_ref() else {
        bad.push("missing [model] section".into());
        return bad;
    };

    let forbid = |bad: &mut Vec<String>, present: bool, field: &str, mode: Mode| {
        if present {
            bad.push(format!("model.{field} does not apply to {} mode", mode.name()));
        }
    };
    let gaussian_entries = |bad: &mut Vec<String>| {
        match (model.sigma1_sq, model.sigma2_sq, model.sigma12) {
            (Some(s11), Some(s22), Some(s12)) => {
                if ![s11, s22, s12].iter().all(|v| v.is_finite()) {
                    bad.push("covariance entries must be finite".into());
                } else if !(s11 > 0.0 && s22 > 0.0 && s11 * s22 - s12 * s12 > 0.0) {
                    bad.push(
                        "model covariance is not positive definite \
                         (needs sigma1_sq > 0 and sigma12^2 < sigma1_sq * sigma2_sq)"
                            .into(),
                    );
                }
            }
            _ => bad.push(
                "gaussian model needs sigma1_sq, sigma2_sq and sigma12".into(),
            ),
        }
    };
    let finite_entries = |bad: &mut Vec<String>, need_square: bool| {
        let Some(pmf) = model.pmf.as_ref() else {
            bad.push("model.pmf is required for this mode".into());
            return;
        };
        if need_square && pmf.len() != 4 {
            bad.push(format!(
                "two-by-two mode needs pmf = [f00, f10, f01, f11], got {} entries",
                pmf.len()
            ));
        }
        if pmf.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            bad.push("every pmf entry must be finite and > 0".into());
        } else {
            let sum: f64 = pmf.iter().sum();
            if (sum - 1.0).abs() > scorekit::PMF_SUM_TOL {
                bad.push(format!("model.pmf sums to {sum} (residual {})", sum - 1.0));
            }
        }
        if !need_square {
            match (model.states.as_ref(), model.states_1d.as_ref()) {
                (Some(st), None) => {
                    if st.len() != pmf.len() {
                        bad.push(format!(
                            "{} states but {} pmf entries",
                            st.len(),
                            pmf.len()
                        ));
                    }
                    if !st.iter().all(|p| is_finite(p[0]) && is_finite(p[1])) {
                        bad.push("states must be finite".into());
                    }
                }
                (None, Some(st)) => {
                    if st.len() != pmf.len() {
                        bad.push(format!(
                            "{} states but {} pmf entries",
                            st.len(),
                            pmf.len()
                        ));
                    }
                    if !st.iter().all(|&x| is_finite(x)) {
                        bad.push("states must be finite".into());
                    }
                }
                (Some(_), Some(_)) => {
                    bad.push("give either model.states or model.states_1d, not both".into())
                }
                (None, None) => {
                    bad.push("model needs states (planar) or states_1d (scalar)".into())
                }
            }
        } else {
            forbid(bad, model.states.is_some(), "states", Mode::TwoByTwo);
            forbid(bad, model.states_1d.is_some(), "states_1d", Mode::TwoByTwo);
        }
    };

    match cfg.mode {
        Mode::Finite | Mode::TwoByTwo | Mode::Audit => {
            finite_entries(&mut bad, cfg.mode == Mode::TwoByTwo);
            forbid(&mut bad, model.sigma1_sq.is_some(), "sigma1_sq", cfg.mode);
            forbid(&mut bad, model.sigma2_sq.is_some(), "sigma2_sq", cfg.mode);
            forbid(&mut bad, model.sigma12.is_some(), "sigma12", cfg.mode);
            forbid(&mut bad, model.cuts.is_some(), "cuts", cfg.mode);
            if cfg.mode == Mode::Audit {
                match model.score.as_ref() {
                    Some(ranks) => {
                        if let Err(e) = OrderedScore::from_ranks(ranks.clone()) {
                            bad.push(format!("model.score is not a valid score: {e}"));
                        } else if model
                            .pmf
                            .as_ref()
                            .map(|p| p.len() != ranks.len())
                            .unwrap_or(false)
                        {
                            bad.push(format!(
                                "model.score has {} ranks but the model has {} states",
                                ranks.len(),
                                model.pmf.as_ref().map(Vec::len).unwrap_or(0)
                            ));
                        }
                    }
                    None => bad.push("audit mode needs model.score (one rank per state)".into()),
                }
            } else {
                forbid(&mut bad, model.score.is_some(), "score", cfg.mode);
            }
            if let Some(k) = s.max_k {
                if k < 2 {
                    bad.push(format!("solver.max_k must be at least 2, got {k}"));
                }
            }
            let n_states = model.pmf.as_ref().map(Vec::len).unwrap_or(0);
            if n_states > ENUMERATION_LIMIT {
                bad.push(format!(
                    "{n_states} states exceed the enumeration limit of {ENUMERATION_LIMIT}"
                ));
            }
        }
        Mode::Gaussian => {
            gaussian_entries(&mut bad);
            for (field, there) in [
                ("pmf", model.pmf.is_some()),
                ("states", model.states.is_some()),
                ("states_1d", model.states_1d.is_some()),
                ("score", model.score.is_some()),
            ] {
                forbid(&mut bad, there, field, Mode::Gaussian);
            }
            if let Some(cuts) = model.cuts.as_ref() {
                if cuts.is_empty() || !cuts.windows(2).all(|w| w[0] < w[1]) {
                    bad.push("model.cuts must be non-empty and strictly increasing".into());
                }
                if !cuts.iter().all(|&c| c.is_finite()) {
                    bad.push("model.cuts must be finite".into());
                }
            }
            if s.mc_samples.unwrap_or(0) > 0 {
                if model.cuts.is_none() {
                    bad.push("solver.mc_samples needs model.cuts (the score to sample)".into());
                }
                if s.seed.is_none() {
                    bad.push("solver.seed is required when Monte Carlo is used".into());
                }
            }
        }
        Mode::Lloyd => {
            let grid = model.sigma1_sq.is_some()
                || model.sigma2_sq.is_some()
                || model.sigma12.is_some();
            let points = model.pmf.is_some() || model.states.is_some();
            match (grid, points) {
                (true, false) => {
                    gaussian_entries(&mut bad);
                    let r = s.resolution.unwrap_or(200);
                    if r < MIN_RESOLUTION {
                        bad.push(format!(
                            "solver.resolution must be at least {MIN_RESOLUTION}, got {r}"
                        ));
                    }
                }
                (false, true) => finite_entries(&mut bad, false),
                (true, true) => bad.push(
                    "lloyd mode takes either covariance entries or states+pmf, not both".into(),
                ),
                (false, false) => bad.push(
                    "lloyd mode needs a model: covariance entries or states+pmf".into(),
                ),
            }
            forbid(&mut bad, model.cuts.is_some(), "cuts", Mode::Lloyd);
            forbid(&mut bad, model.score.is_some(), "score", Mode::Lloyd);
            if let Some(n) = s.n {
                if n < 2 {
                    bad.push(format!("solver.n must be at least 2, got {n}"));
                }
            }
            if s.restarts == Some(0) {
                bad.push("solver.restarts must be at least 1".into());
            }
            if s.seed.is_none() {
                bad.push("solver.seed is required when restarts are used".into());
            }
        }
    }

    if cmd == Subcmd::Sweep {
        match cfg.sweep.as_ref() {
            None => bad.push("sweep subcommand needs a [sweep] section".into()),
            Some(grid) => {
                let sizes = [
                    grid.phi.as_ref().map(Vec::len),
                    grid.sigma12.as_ref().map(Vec::len),
                    grid.n.as_ref().map(Vec::len),
                ];
                if sizes.iter().all(Option::is_none) {
                    bad.push("[sweep] must list at least one of phi, sigma12, n".into());
                }
                if sizes.iter().any(|&s| s == Some(0)) {
                    bad.push("sweep grids must be non-empty".into());
                }
                if grid.sigma12.is_some()
                    && !matches!(cfg.mode, Mode::Gaussian | Mode::Lloyd)
                {
                    bad.push("sweep.sigma12 applies only to gaussian or lloyd mode".into());
                }
                if grid.n.is_some() && cfg.mode != Mode::Lloyd {
                    bad.push("sweep.n applies only to lloyd mode".into());
                }
                if let (Some(phis), Mode::TwoByTwo) = (grid.phi.as_ref(), cfg.mode) {
                    if phis.iter().any(|&p| (p - 1.0).abs() > 1e-12) {
                        bad.push("two-by-two mode only admits phi = 1 in sweep.phi".into());
                    }
                }
            }
        }
    } else if cfg.sweep.is_some() {
        bad.push("[sweep] section is only read by the sweep subcommand".into());
    }

    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_square() -> &'static str {
        "mode = \"two-by-two\"\n\n[model]\npmf = [0.4, 0.1, 0.2, 0.3]\n"
    }

    #[test]
    fn minimal_square_config_is_valid() {
        let cfg = ExperimentConfig::parse(minimal_square()).unwrap();
        assert_eq!(cfg.mode, Mode::TwoByTwo);
        assert!(validate(&cfg, Subcmd::Solve).is_empty());
    }

    #[test]
    fn parse_serialize_round_trips() {
        let text = "mode = \"lloyd\"\nphi = 2.0\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 2.0\nsigma12 = 0.25\n\n[solver]\nn = 3\nseed = 7\nresolution = 64\n\n[output]\ndir = \"out\"\nformats = [\"json\", \"csv\"]\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("mode = \"finite\"\nbogus = 1\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn violations_are_collected_not_truncated() {
        let text = "mode = \"two-by-two\"\nphi = 2.0\n\n[model]\npmf = [0.25, 0.25, 0.25, 0.249]\n\n[solver]\ntol = -1.0\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let bad = validate(&cfg, Subcmd::Solve);
        assert_eq!(bad.len(), 3, "{bad:?}");
        assert!(bad.iter().any(|m| m.contains("phi = 1")));
        assert!(bad.iter().any(|m| m.contains("residual -0.001")));
        assert!(bad.iter().any(|m| m.contains("solver.tol")));
    }

    #[test]
    fn short_pmf_reports_residual() {
        let text = "mode = \"two-by-two\"\n\n[model]\npmf = [0.25, 0.25, 0.25, 0.249]\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let bad = validate(&cfg, Subcmd::Solve);
        assert!(bad.iter().any(|m| m.contains("residual -0.001")), "{bad:?}");
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let text = "mode = \"gaussian\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 1.0\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let bad = validate(&cfg, Subcmd::Solve);
        assert!(bad.iter().any(|m| m.contains("positive definite")), "{bad:?}");
    }

    #[test]
    fn lloyd_without_seed_is_rejected() {
        let text = "mode = \"lloyd\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 0.5\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let bad = validate(&cfg, Subcmd::Solve);
        assert!(bad.iter().any(|m| m.contains("seed")), "{bad:?}");
    }

    #[test]
    fn canonical_form_ignores_the_output_block() {
        let with = ExperimentConfig::parse(
            "mode = \"finite\"\n\n[model]\npmf = [0.5, 0.5]\nstates_1d = [0.0, 1.0]\n\n[output]\ndir = \"elsewhere\"\n",
        )
        .unwrap();
        let without = ExperimentConfig::parse(
            "mode = \"finite\"\n\n[model]\npmf = [0.5, 0.5]\nstates_1d = [0.0, 1.0]\n",
        )
        .unwrap();
        assert_eq!(with.canonical(), without.canonical());
    }

    #[test]
    fn canonical_form_ignores_the_thread_count() {
        let base = "mode = \"lloyd\"\n\n[model]\nsigma1_sq = 1.0\nsigma2_sq = 1.0\nsigma12 = 0.5\n\n[solver]\nseed = 7\n";
        let two_threads = ExperimentConfig::parse(&format!("{base}threads = 2\n")).unwrap();
        let unset = ExperimentConfig::parse(base).unwrap();
        assert_eq!(two_threads.canonical(), unset.canonical());

        // A solver block holding nothing but `threads` collapses entirely.
        let only_threads = ExperimentConfig::parse(
            "mode = \"two-by-two\"\n\n[model]\npmf = [0.25, 0.25, 0.25, 0.25]\n\n[solver]\nthreads = 8\n",
        )
        .unwrap();
        let no_solver = ExperimentConfig::parse(
            "mode = \"two-by-two\"\n\n[model]\npmf = [0.25, 0.25, 0.25, 0.25]\n",
        )
        .unwrap();
        assert_eq!(only_threads.canonical(), no_solver.canonical());
    }
}
