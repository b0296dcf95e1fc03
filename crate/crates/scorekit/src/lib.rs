//! Solvers and credibility checks for quadratic cheap-talk games in which
//! the sender's message is a *score* — a ranking of states.
//!
//! The crate covers three settings that share one payoff, the negative
//! weighted squared distance between action and state:
//!
//! * [`finite`] — exhaustive enumeration of scores on small finite priors,
//!   incentive checks, and the closed forms for the `{0,1}²` game;
//! * [`gaussian`] — linear and coarsely linear scores under a bivariate
//!   normal prior, with the credible directions in closed form and a
//!   reproducible Monte Carlo cross-check;
//! * [`lloyd`] — best-response iteration on discretized priors, restart
//!   portfolios, incentive audits, and shape diagnostics connecting the
//!   discrete fixed points back to the linear theory.
//!
//! Everything deterministic is bit-reproducible: parallel loops (rayon
//! behind the default `parallel` feature) chunk their work in fixed sizes
//! and merge in chunk order, and all randomness flows from caller-supplied
//! seeds through counter-mode generators.

pub mod error;
pub mod finite;
pub mod gaussian;
pub mod lloyd;
pub mod model;
mod par;

pub use error::{Error, Result};
pub use finite::{
    check_credibility, check_ivp, commitment_gap, enumerate_scores, optimal_scores,
    score_first_coordinate, score_pool_antidiagonal, score_pool_diagonal,
    score_second_coordinate, two_by_two_analysis, unit_square_model, CommitmentGap, IvpVerdict,
    IvpWitness, Optimum, TwoByTwoLabel, TwoByTwoPmf, TwoByTwoReport, CREDIBLE_RATIO_HI,
    CREDIBLE_RATIO_LO, ENUMERATION_LIMIT, PAYOFF_TIE_TOL,
};
pub use gaussian::{
    angle_sweep, coarsely_linear_payoff, credible_linear_scores, exante_linear_payoff,
    fixed_point_residual, mc_payoff, rayleigh_quotient, receiver_coefficient,
    CoarselyLinearScore, GaussianModel, LinearEquilibriumReport, LinearScore, McPayoff,
    DEGENERACY_REL_TOL,
};
pub use lloyd::{
    ic_audit, lloyd, lloyd_restarts, principal_axis, shape_diagnostics, DiscretizedPrior,
    LloydInit, LloydState, ShapeDiagnostics, WeightedStates, DEFAULT_HALF_WIDTH, LLOYD_MAX_ITER,
    LLOYD_TOL, MIN_RESOLUTION,
};
pub use model::{
    best_response, exante_payoff, message_masses, utility, Dim, EquilibriumReport, FiniteModel,
    OrderedScore, PayoffWeights, ReceiverPolicy, PMF_SUM_TOL,
};
