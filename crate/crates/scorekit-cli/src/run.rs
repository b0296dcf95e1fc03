//! Dispatch from a validated config to the library engines, collecting
//! results into a [`Bundle`]. Orchestration is single-threaded; any
//! parallelism happens inside the engines.

use scorekit::*;
use std::result::Result;

use crate::config::{ExperimentConfig, Mode, Subcmd};
use crate::report::*;

pub enum Failure {
    /// Validation problems; every message is one violation.
    Config(Vec<String>),
    /// Engine or I/O trouble after a valid config.
    Runtime(String),
}

fn engine<T>(what: &str, r: scorekit::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Runtime(format!("{what}: {e}")))
}

pub fn execute(cfg: &ExperimentConfig, cmd: Subcmd) -> Result<Bundle, Failure> {
    let bad = crate::config::validate(cfg, cmd);
    if !bad.is_empty() {
        return Err(Failure::Config(bad));
    }
    let prov = Provenance::new(cfg, cmd.name());
    match cmd {
        Subcmd::Sweep => run_sweep(cfg, prov),
        Subcmd::Audit => run_audit(cfg, prov),
        Subcmd::Solve => match cfg.mode {
            Mode::Finite => run_finite(cfg, prov),
            Mode::TwoByTwo => run_two_by_two(cfg, prov),
            Mode::Gaussian => run_gaussian(cfg, prov),
            Mode::Lloyd => run_lloyd(cfg, prov),
            Mode::Audit => unreachable!("validation rejects mode audit under solve"),
        },
    }
}

// ----------------------------------------------------------------- builders

fn finite_model(cfg: &ExperimentConfig) -> Result<FiniteModel, Failure> {
    let model = cfg.model.as_ref().expect("validated");
    let pmf = model.pmf.as_ref().expect("validated");
    if let Some(states) = model.states.as_ref() {
        engine("building the model", FiniteModel::new_2d(states, pmf))
    } else {
        let states = model.states_1d.as_ref().expect("validated");
        engine("building the model", FiniteModel::new_1d(states, pmf))
    }
}

fn gaussian_model(cfg: &ExperimentConfig) -> Result<GaussianModel, Failure> {
    let m = cfg.model.as_ref().expect("validated");
    engine(
        "building the model",
        GaussianModel::new(
            m.sigma1_sq.expect("validated"),
            m.sigma2_sq.expect("validated"),
            m.sigma12.expect("validated"),
        ),
    )
}

fn payoff_weights(cfg: &ExperimentConfig) -> Result<PayoffWeights, Failure> {
    engine("payoff weights", PayoffWeights::new(cfg.phi()))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn min_slack(slack: &[f64]) -> f64 {
    slack.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Per-state table shared by the finite and audit modes.
fn state_table(
    model: &FiniteModel,
    columns: &[(&str, &dyn Fn(usize) -> String)],
) -> (String, Vec<String>) {
    let mut header = String::from("state_1,state_2,mass");
    for (name, _) in columns {
        header.push(',');
        header.push_str(name);
    }
    let rows = model
        .states()
        .iter()
        .zip(model.pmf())
        .enumerate()
        .map(|(i, (s, &f))| {
            let mut row = format!("{},{},{}", num(s[0]), num(s[1]), num(f));
            for (_, col) in columns {
                row.push(',');
                row.push_str(&col(i));
            }
            row
        })
        .collect();
    (header, rows)
}

// -------------------------------------------------------------------- modes

fn run_finite(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let model = finite_model(cfg)?;
    let w = payoff_weights(cfg)?;
    let s = cfg.solver();
    let tol = s.tol.unwrap_or(1e-9);
    let max_k = s.max_k.unwrap_or(4).min(model.len());

    let gap = engine("enumeration", commitment_gap(&model, max_k, &w, tol))?;
    let audit = engine(
        "credibility audit",
        check_credibility(&model, &gap.optimal, &w, tol),
    )?;

    let record = FiniteRecord {
        phi: cfg.phi(),
        max_k,
        optimal: ScoreRecord {
            ranks: gap.optimal.ranks().to_vec(),
            payoff: gap.optimal_payoff,
            credible: gap.optimal_credible,
        },
        best_credible: ScoreRecord {
            ranks: gap.best_credible.ranks().to_vec(),
            payoff: gap.best_credible_payoff,
            credible: true,
        },
        gap: gap.gap,
        ic_slack: audit.ic_slack.clone(),
        best_deviation: audit.best_deviation,
    };

    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::Finite(record),
    });
    let opt_ranks = gap.optimal.ranks().to_vec();
    let cred_ranks = gap.best_credible.ranks().to_vec();
    let slack = audit.ic_slack.clone();
    let (header, rows) = state_table(
        &model,
        &[
            ("optimal_rank", &|i| opt_ranks[i].to_string()),
            ("best_credible_rank", &|i| cred_ranks[i].to_string()),
            ("ic_slack", &|i| num(slack[i])),
        ],
    );
    bundle.tables.push(("table.csv".into(), header, rows));
    bundle.summary = vec![
        "mode: finite".into(),
        format!(
            "optimal score: {:?}; payoff: {}; credible: {}",
            gap.optimal.ranks(),
            num(gap.optimal_payoff),
            yes_no(gap.optimal_credible)
        ),
        format!(
            "best credible score: {:?}; payoff: {}",
            gap.best_credible.ranks(),
            num(gap.best_credible_payoff)
        ),
        format!("commitment gap: {}", num(gap.gap)),
    ];
    Ok(bundle)
}

fn run_two_by_two(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let pm = cfg.model.as_ref().expect("validated").pmf.as_ref().expect("validated");
    let pmf = engine(
        "building the model",
        TwoByTwoPmf::new(pm[0], pm[1], pm[2], pm[3]),
    )?;
    let w = payoff_weights(cfg)?;
    let tol = cfg.solver().tol.unwrap_or(1e-9);
    let report = engine("closed forms", two_by_two_analysis(&pmf, &w))?;
    let model = unit_square_model(&pmf);
    let gap = engine("enumeration", commitment_gap(&model, 4, &w, tol))?;

    let named: [(&str, OrderedScore, f64); 4] = [
        ("s_D", score_pool_diagonal(), report.u_pool_diagonal),
        ("s_d", score_pool_antidiagonal(), report.u_pool_antidiagonal),
        ("s_1", score_first_coordinate(), report.u_first_coordinate),
        ("s_2", score_second_coordinate(), report.u_second_coordinate),
    ];
    let mut scores = Vec::new();
    for (label, score, payoff) in &named {
        let cred = engine(
            "credibility audit",
            check_credibility(&model, score, &w, tol),
        )?;
        scores.push(LabeledScoreRecord {
            label: (*label).into(),
            ranks: score.ranks().to_vec(),
            payoff: *payoff,
            credible: cred.credible,
        });
    }

    let optimal_label = report.optimal.to_string();
    let gap_sign = if gap.gap > PAYOFF_TIE_TOL { "> 0" } else { "= 0" };
    let headline = format!(
        "optimal: {optimal_label}; credible: {}; gap {gap_sign}",
        yes_no(report.optimal_credible)
    );

    let record = TwoByTwoRecord {
        pmf: [pmf.f00(), pmf.f10(), pmf.f01(), pmf.f11()],
        scores,
        optimal: optimal_label,
        optimal_credible: report.optimal_credible,
        pooled_ratio: report.pooled_ratio,
        ratio_interval: [CREDIBLE_RATIO_LO, CREDIBLE_RATIO_HI],
        gap: gap.gap,
    };
    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::TwoByTwo(record),
    });
    let Body::TwoByTwo(rec) = &bundle.record.body else { unreachable!() };
    bundle.tables.push((
        "table.csv".into(),
        "score,payoff,credible".into(),
        rec.scores
            .iter()
            .map(|s| format!("{},{},{}", s.label, num(s.payoff), s.credible))
            .collect(),
    ));
    bundle.summary = vec![
        "mode: two-by-two".into(),
        headline,
        format!("optimal payoff: {}", num(gap.optimal_payoff)),
        format!(
            "pooled ratio: {} (credible interval [{}, {}])",
            num(rec.pooled_ratio),
            num(CREDIBLE_RATIO_LO),
            num(CREDIBLE_RATIO_HI)
        ),
        format!("commitment gap: {}", num(gap.gap)),
    ];
    Ok(bundle)
}

fn direction_record(
    beta: [f64; 2],
    g: &GaussianModel,
    w: &PayoffWeights,
) -> Result<DirectionRecord, Failure> {
    Ok(DirectionRecord {
        beta,
        q: engine("explained variance", rayleigh_quotient(beta, g, w))?,
        payoff: engine("payoff", exante_linear_payoff(beta, g, w))?,
        residual: engine("residual", fixed_point_residual(beta, g, w))?,
        receiver_coefficient: engine("receiver response", receiver_coefficient(beta, g))?,
    })
}

fn run_gaussian(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let g = gaussian_model(cfg)?;
    let w = payoff_weights(cfg)?;
    let s = cfg.solver();
    let rep = engine("credible directions", credible_linear_scores(&g, &w))?;
    let best = direction_record(rep.scores[0].beta(), &g, &w)?;
    let worst = direction_record(rep.scores[1].beta(), &g, &w)?;

    let coarse = match cfg.model.as_ref().expect("validated").cuts.as_ref() {
        Some(cuts) => {
            let score = engine(
                "quantized score",
                CoarselyLinearScore::new(
                    LinearScore::new(best.beta[0], best.beta[1])
                        .expect("credible direction is nonzero"),
                    cuts.clone(),
                ),
            )?;
            let payoff = engine("quantized payoff", coarsely_linear_payoff(&score, &g, &w))?;
            let mc = match s.mc_samples.unwrap_or(0) {
                0 => None,
                samples => {
                    let seed = s.seed.expect("validated");
                    let est = engine(
                        "Monte Carlo",
                        mc_payoff(|th| score.cell(th) as i64, &g, &w, samples, seed),
                    )?;
                    Some(McRecord {
                        samples,
                        estimate: est.estimate,
                        std_error: est.std_error,
                        samples_used: est.samples_used,
                        samples_excluded: est.samples_excluded,
                    })
                }
            };
            Some(CoarseRecord {
                cuts: cuts.clone(),
                payoff,
                mc,
            })
        }
        None => None,
    };

    let record = GaussianRecord {
        sigma: [g.sigma1_sq(), g.sigma2_sq(), g.sigma12()],
        phi: cfg.phi(),
        best,
        worst,
        eigenvalues: rep.eigenvalues,
        degenerate: rep.degenerate,
        coarse,
    };
    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::Gaussian(record),
    });
    let Body::Gaussian(rec) = &bundle.record.body else { unreachable!() };

    bundle.tables.push((
        "table.csv".into(),
        "direction_1,direction_2,q,payoff".into(),
        [&rec.best, &rec.worst]
            .iter()
            .map(|d| {
                format!(
                    "{:.4},{:.4},{},{}",
                    d.beta[0],
                    d.beta[1],
                    num(d.q),
                    num(d.payoff)
                )
            })
            .collect(),
    ));
    if let Some(steps) = s.resolution {
        let rows = engine("angle sweep", angle_sweep(&g, &w, steps))?;
        bundle.tables.push((
            "angles.csv".into(),
            "angle,q,payoff".into(),
            rows.iter()
                .map(|(a, q, u)| format!("{},{},{}", num(*a), num(*q), num(*u)))
                .collect(),
        ));
    }

    bundle.summary = vec![
        "mode: gaussian".into(),
        format!(
            "best:  direction ({:.4}, {:.4}), q {}, payoff {}",
            rec.best.beta[0],
            rec.best.beta[1],
            num(rec.best.q),
            num(rec.best.payoff)
        ),
        format!(
            "worst: direction ({:.4}, {:.4}), q {}, payoff {}",
            rec.worst.beta[0],
            rec.worst.beta[1],
            num(rec.worst.q),
            num(rec.worst.payoff)
        ),
        format!("degenerate (all directions credible): {}", yes_no(rec.degenerate)),
    ];
    if let Some(c) = &rec.coarse {
        bundle.summary.push(format!(
            "quantized payoff ({} cuts): {}",
            c.cuts.len(),
            num(c.payoff)
        ));
        if let Some(mc) = &c.mc {
            bundle.summary.push(format!(
                "Monte Carlo ({} samples): {} ± {}",
                mc.samples,
                num(mc.estimate),
                num(mc.std_error)
            ));
        }
    }
    Ok(bundle)
}

fn run_lloyd(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let w = payoff_weights(cfg)?;
    let s = cfg.solver();
    let n = s.n.unwrap_or(2);
    let restarts = s.restarts.unwrap_or(20);
    let seed = s.seed.expect("validated");
    let tol = s.tol.unwrap_or(LLOYD_TOL);
    let model_block = cfg.model.as_ref().expect("validated");
    let on_grid = model_block.sigma1_sq.is_some();

    // Both prior kinds run through the same driver; diagnostics need the
    // grid geometry and are skipped for point priors.
    let (state, prior_label, diagnostics, masses, raster) = if on_grid {
        let g = gaussian_model(cfg)?;
        let resolution = s.resolution.unwrap_or(200);
        let prior = engine(
            "discretizing the prior",
            DiscretizedPrior::from_gaussian(&g, resolution, DEFAULT_HALF_WIDTH),
        )?;
        let state = engine(
            "fixed-point search",
            lloyd_restarts(&prior, n, &w, restarts, seed, tol, LLOYD_MAX_ITER),
        )?;
        let diag = engine("shape diagnostics", shape_diagnostics(&state, &prior, &w))?;
        let audit = engine("incentive audit", ic_audit(&state, &prior, &w, 1e-9))?;
        let masses = cell_masses(&state.assignment, prior.mass(), n);
        let raster: Vec<String> = (0..resolution)
            .map(|j| {
                state.assignment[j * resolution..(j + 1) * resolution]
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        (
            (state, audit),
            format!("gaussian-grid:{resolution}"),
            Some(diag),
            masses,
            raster,
        )
    } else {
        let model = finite_model(cfg)?;
        let state = engine(
            "fixed-point search",
            lloyd_restarts(&model, n, &w, restarts, seed, tol, LLOYD_MAX_ITER),
        )?;
        let audit = engine("incentive audit", ic_audit(&state, &model, &w, 1e-9))?;
        let masses = cell_masses(&state.assignment, model.pmf(), n);
        let raster: Vec<String> = state
            .assignment
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{i},{c}"))
            .collect();
        ((state, audit), "points".to_string(), None, masses, raster)
    };
    let (state, audit) = state;

    let record = LloydRecord {
        prior: prior_label,
        phi: cfg.phi(),
        n,
        restarts,
        objective: state.objective,
        iterations: state.iterations,
        converged: state.converged,
        repairs: state.repairs,
        actions: state.actions.clone(),
        cell_mass: masses,
        audit: AuditSummaryRecord {
            exante_payoff: audit.exante_payoff,
            min_slack: min_slack(&audit.ic_slack),
            credible: audit.credible,
        },
        diagnostics: diagnostics.as_ref().map(|d| DiagnosticsRecord {
            collinearity: d.collinearity,
            parallelism_spread: d.parallelism_spread,
            boundaries_fitted: d.boundaries_fitted,
            boundaries_skipped: d.boundaries_skipped,
        }),
    };

    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::Lloyd(record),
    });
    let Body::Lloyd(rec) = &bundle.record.body else { unreachable!() };

    bundle.tables.push((
        "table.csv".into(),
        "action,a_1,a_2,mass".into(),
        rec.actions
            .iter()
            .zip(&rec.cell_mass)
            .enumerate()
            .map(|(i, (a, m))| format!("{i},{},{},{}", num(a[0]), num(a[1]), num(*m)))
            .collect(),
    ));
    bundle.tables.push((
        "trace.csv".into(),
        "iteration,objective".into(),
        state
            .objective_trace
            .iter()
            .enumerate()
            .map(|(i, o)| format!("{i},{}", num(*o)))
            .collect(),
    ));
    let raster_header = if on_grid {
        // One row per grid line (constant y, x increasing); 0-based cells.
        "assignment_row".into()
    } else {
        "state,assignment".into()
    };
    bundle
        .tables
        .push(("assignment.csv".into(), raster_header, raster));

    bundle.summary = vec![
        "mode: lloyd".into(),
        format!("prior: {}; actions: {}; restarts: {}", rec.prior, rec.n, rec.restarts),
        format!(
            "objective: {}; iterations: {}; converged: {}; repairs: {}",
            num(rec.objective),
            rec.iterations,
            yes_no(rec.converged),
            rec.repairs
        ),
        format!(
            "credible: {} (min slack {})",
            yes_no(rec.audit.credible),
            num(rec.audit.min_slack)
        ),
    ];
    if let Some(d) = &rec.diagnostics {
        bundle.summary.push(format!(
            "collinearity: {}; parallelism spread: {} rad ({} boundaries fitted, {} skipped)",
            num(d.collinearity),
            num(d.parallelism_spread),
            d.boundaries_fitted,
            d.boundaries_skipped
        ));
    }
    Ok(bundle)
}

fn cell_masses(assignment: &[usize], mass: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&cell, &m) in assignment.iter().zip(mass) {
        out[cell] += m;
    }
    out
}

fn run_audit(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let model = finite_model(cfg)?;
    let w = payoff_weights(cfg)?;
    let tol = cfg.solver().tol.unwrap_or(1e-9);
    let ranks = cfg
        .model
        .as_ref()
        .expect("validated")
        .score
        .as_ref()
        .expect("validated")
        .clone();
    let score = engine("building the score", OrderedScore::from_ranks(ranks))?;

    let verdict = engine("ordering check", check_ivp(&model, &score))?;
    let (ivp_holds, witness) = match verdict {
        IvpVerdict::Holds => (true, None),
        IvpVerdict::Fails(wit) => (
            false,
            Some(WitnessRecord {
                hi: wit.hi,
                lo: wit.lo,
                missing_rank: wit.missing_rank,
            }),
        ),
    };
    let cred = engine("credibility audit", check_credibility(&model, &score, &w, tol))?;
    let payoff = engine("payoff", exante_payoff(&model, &score, &w))?;

    let record = AuditRecord {
        phi: cfg.phi(),
        ranks: score.ranks().to_vec(),
        ivp_holds,
        witness,
        payoff,
        credible: cred.credible,
        min_slack: min_slack(&cred.ic_slack),
        ic_slack: cred.ic_slack.clone(),
        best_deviation: cred.best_deviation,
    };
    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::Audit(record),
    });
    let Body::Audit(rec) = &bundle.record.body else { unreachable!() };

    let ranks = rec.ranks.clone();
    let slack = rec.ic_slack.clone();
    let (header, rows) = state_table(
        &model,
        &[
            ("rank", &|i| ranks[i].to_string()),
            ("ic_slack", &|i| num(slack[i])),
        ],
    );
    bundle.tables.push(("table.csv".into(), header, rows));

    let ivp_line = match &rec.witness {
        None => "ordering check: holds".to_string(),
        Some(w) => format!(
            "ordering check: fails (states {} > {} skip rank {})",
            w.hi, w.lo, w.missing_rank
        ),
    };
    bundle.summary = vec![
        "mode: audit".into(),
        format!("score: {:?}", rec.ranks),
        ivp_line,
        format!(
            "credible: {} (min slack {})",
            yes_no(rec.credible),
            num(rec.min_slack)
        ),
        format!("payoff: {}", num(rec.payoff)),
    ];
    Ok(bundle)
}

// -------------------------------------------------------------------- sweep

/// Expands the grids (phi outermost, then sigma12, then n), re-validates
/// every point, and runs them in order.
fn run_sweep(cfg: &ExperimentConfig, prov: Provenance) -> Result<Bundle, Failure> {
    let grid = cfg.sweep.as_ref().expect("validated");
    let phis = grid.phi.clone().unwrap_or_else(|| vec![cfg.phi()]);
    let sigmas: Vec<Option<f64>> = match grid.sigma12.as_ref() {
        Some(list) => list.iter().map(|&s| Some(s)).collect(),
        None => vec![None],
    };
    let ns: Vec<Option<usize>> = match grid.n.as_ref() {
        Some(list) => list.iter().map(|&n| Some(n)).collect(),
        None => vec![None],
    };

    let mut points = Vec::new();
    for &phi in &phis {
        for &sigma12 in &sigmas {
            for &n in &ns {
                let mut point = cfg.clone();
                point.sweep = None;
                point.phi = Some(phi);
                if let Some(s12) = sigma12 {
                    let m = point.model.get_or_insert_with(Default::default);
                    if m.sigma12.is_none() {
                        return Err(Failure::Config(vec![
                            "sweep.sigma12 needs a covariance model".into(),
                        ]));
                    }
                    m.sigma12 = Some(s12);
                }
                if let Some(n) = n {
                    point.solver.get_or_insert_with(Default::default).n = Some(n);
                }
                points.push((phi, sigma12, n, point));
            }
        }
    }

    let mut bad = Vec::new();
    for (phi, sigma12, n, point) in &points {
        for msg in crate::config::validate(point, Subcmd::Solve) {
            bad.push(format!("{}: {msg}", point_label(*phi, *sigma12, *n)));
        }
    }
    if !bad.is_empty() {
        return Err(Failure::Config(bad));
    }

    let mut rows = Vec::new();
    for (phi, sigma12, n, point) in &points {
        rows.push(sweep_point(point, *phi, *sigma12, *n)?);
    }

    let header = match cfg.mode {
        Mode::Finite | Mode::TwoByTwo => "phi,payoff,credible,gap",
        Mode::Gaussian => "phi,sigma12,payoff_best,q_best,payoff_worst,q_worst",
        Mode::Lloyd => "phi,sigma12,n,objective,iterations,collinearity,parallelism_spread",
        Mode::Audit => unreachable!("validation rejects audit sweeps"),
    };
    let csv_rows: Vec<String> = rows.iter().map(|r| sweep_csv_row(cfg.mode, r)).collect();

    let best = rows
        .iter()
        .max_by(|a, b| a.payoff.total_cmp(&b.payoff))
        .expect("grids are non-empty");
    let summary = vec![
        "mode: sweep".into(),
        format!("base mode: {}; points: {}", cfg.mode.name(), rows.len()),
        format!(
            "best payoff: {} at {}",
            num(best.payoff),
            point_label(best.phi, best.sigma12, best.n)
        ),
    ];

    let mut bundle = Bundle::new(RootRecord {
        provenance: prov,
        body: Body::Sweep(rows),
    });
    bundle
        .tables
        .push(("sweep.csv".into(), header.into(), csv_rows));
    bundle.summary = summary;
    Ok(bundle)
}

fn point_label(phi: f64, sigma12: Option<f64>, n: Option<usize>) -> String {
    let mut label = format!("phi={}", num(phi));
    if let Some(s) = sigma12 {
        label.push_str(&format!(", sigma12={}", num(s)));
    }
    if let Some(n) = n {
        label.push_str(&format!(", n={n}"));
    }
    label
}

fn sweep_point(
    point: &ExperimentConfig,
    phi: f64,
    sigma12: Option<f64>,
    n: Option<usize>,
) -> Result<SweepRow, Failure> {
    let w = payoff_weights(point)?;
    let s = point.solver();
    let mut row = SweepRow {
        phi,
        sigma12,
        n,
        payoff: f64::NAN,
        credible: None,
        gap: None,
        q_best: None,
        q_worst: None,
        payoff_worst: None,
        iterations: None,
        collinearity: None,
        parallelism_spread: None,
    };
    match point.mode {
        Mode::Finite | Mode::TwoByTwo => {
            let model = if point.mode == Mode::TwoByTwo {
                let pm = point.model.as_ref().expect("validated").pmf.as_ref().expect("validated");
                unit_square_model(&engine(
                    "building the model",
                    TwoByTwoPmf::new(pm[0], pm[1], pm[2], pm[3]),
                )?)
            } else {
                finite_model(point)?
            };
            let tol = s.tol.unwrap_or(1e-9);
            let max_k = s.max_k.unwrap_or(4).min(model.len());
            let gap = engine("enumeration", commitment_gap(&model, max_k, &w, tol))?;
            row.payoff = gap.optimal_payoff;
            row.credible = Some(gap.optimal_credible);
            row.gap = Some(gap.gap);
        }
        Mode::Gaussian => {
            let g = gaussian_model(point)?;
            let rep = engine("credible directions", credible_linear_scores(&g, &w))?;
            let best = rep.scores[0].beta();
            let worst = rep.scores[1].beta();
            row.payoff = engine("payoff", exante_linear_payoff(best, &g, &w))?;
            row.q_best = Some(engine("explained variance", rayleigh_quotient(best, &g, &w))?);
            row.payoff_worst = Some(engine("payoff", exante_linear_payoff(worst, &g, &w))?);
            row.q_worst = Some(engine("explained variance", rayleigh_quotient(worst, &g, &w))?);
        }
        Mode::Lloyd => {
            let n_actions = s.n.unwrap_or(2);
            let restarts = s.restarts.unwrap_or(20);
            let seed = s.seed.expect("validated");
            let tol = s.tol.unwrap_or(LLOYD_TOL);
            let model_block = point.model.as_ref().expect("validated");
            if model_block.sigma1_sq.is_some() {
                let g = gaussian_model(point)?;
                let prior = engine(
                    "discretizing the prior",
                    DiscretizedPrior::from_gaussian(
                        &g,
                        s.resolution.unwrap_or(200),
                        DEFAULT_HALF_WIDTH,
                    ),
                )?;
                let state = engine(
                    "fixed-point search",
                    lloyd_restarts(&prior, n_actions, &w, restarts, seed, tol, LLOYD_MAX_ITER),
                )?;
                let diag =
                    engine("shape diagnostics", shape_diagnostics(&state, &prior, &w))?;
                row.payoff = state.objective;
                row.iterations = Some(state.iterations);
                row.collinearity = Some(diag.collinearity);
                row.parallelism_spread = Some(diag.parallelism_spread);
            } else {
                let model = finite_model(point)?;
                let state = engine(
                    "fixed-point search",
                    lloyd_restarts(&model, n_actions, &w, restarts, seed, tol, LLOYD_MAX_ITER),
                )?;
                row.payoff = state.objective;
                row.iterations = Some(state.iterations);
            }
        }
        Mode::Audit => unreachable!("validation rejects audit sweeps"),
    }
    Ok(row)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn sweep_csv_row(mode: Mode, r: &SweepRow) -> String {
    match mode {
        Mode::Finite | Mode::TwoByTwo => format!(
            "{},{},{},{}",
            num(r.phi),
            num(r.payoff),
            r.credible.unwrap_or(false),
            opt_num(r.gap)
        ),
        Mode::Gaussian => format!(
            "{},{},{},{},{},{}",
            num(r.phi),
            opt_num(r.sigma12),
            num(r.payoff),
            opt_num(r.q_best),
            opt_num(r.payoff_worst),
            opt_num(r.q_worst)
        ),
        Mode::Lloyd => format!(
            "{},{},{},{},{},{},{}",
            num(r.phi),
            opt_num(r.sigma12),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            num(r.payoff),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            opt_num(r.collinearity),
            opt_num(r.parallelism_spread)
        ),
        Mode::Audit => unreachable!(),
    }
}
