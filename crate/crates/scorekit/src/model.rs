//! Core game types: states, priors, scores, receiver policies.
//!
//! The sender observes a state `θ` drawn from a finite prior over points in
//! `ℝ^d` (`d ∈ {1, 2}`) and reports a message; the receiver responds with an
//! action `a ∈ ℝ^d`. Both share the payoff
//!
//! ```text
//! u(a, θ) = -φ (a₁ - θ₁)² - (a₂ - θ₂)²      (φ > 0, and φ = 1 when d = 1)
//! ```
//!
//! A *score* is a non-constant ranking of the states. Scores are represented
//! by [`OrderedScore`]: rank `1` is the lowest message, ranks are consecutive
//! and every rank is used by at least one state.

use crate::error::{Error, Result};

/// Dimension of the state space (and of actions).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn len(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// Quadratic-loss weights. The first coordinate is weighted by `phi`, the
/// second by 1; one-dimensional models ignore `phi` and use weight 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffWeights {
    phi: f64,
}

impl PayoffWeights {
    pub fn new(phi: f64) -> Result<Self> {
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::InvalidInput(format!(
                "payoff weight phi must be finite and positive, got {phi}"
            )));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

impl Default for PayoffWeights {
    /// Equal weight on both coordinates.
    fn default() -> Self {
        Self { phi: 1.0 }
    }
}

/// Shared payoff `-φ(a₁-θ₁)² - (a₂-θ₂)²` for equal-length slices of
/// dimension one or two. One-dimensional inputs are scored with weight 1.
pub fn utility(action: &[f64], state: &[f64], weights: &PayoffWeights) -> Result<f64> {
    if action.len() != state.len() {
        return Err(Error::DimensionMismatch {
            action: action.len(),
            state: state.len(),
        });
    }
    match action.len() {
        1 => Ok(-(action[0] - state[0]).powi(2)),
        2 => Ok(utility2(
            [action[0], action[1]],
            [state[0], state[1]],
            weights.phi(),
        )),
        d => Err(Error::InvalidInput(format!(
            "utility is defined for dimension 1 or 2, got {d}"
        ))),
    }
}

/// Hot-path form of [`utility`]: fixed dimension two, `phi1` already resolved
/// (callers pass 1.0 for embedded one-dimensional states).
#[inline]
pub(crate) fn utility2(action: [f64; 2], state: [f64; 2], phi1: f64) -> f64 {
    let d1 = action[0] - state[0];
    let d2 = action[1] - state[1];
    -phi1 * d1 * d1 - d2 * d2
}

/// Finite prior over distinct states in one or two dimensions.
///
/// One-dimensional states are embedded as `(θ, 0)` so all downstream code
/// works on `[f64; 2]`; the effective first-coordinate weight is forced to 1
/// for such models.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteModel {
    dim: Dim,
    states: Vec<[f64; 2]>,
    pmf: Vec<f64>,
}

/// Largest admissible deviation of a pmf's total mass from 1.
pub const PMF_SUM_TOL: f64 = 1e-12;

fn validate_pmf(pmf: &[f64], n_states: usize) -> Result<()> {
    if pmf.len() != n_states {
        return Err(Error::InvalidModel(format!(
            "{n_states} states but {} probabilities",
            pmf.len()
        )));
    }
    for (i, &p) in pmf.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidModel(format!(
                "probability of state {i} must be finite and positive, got {p}"
            )));
        }
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_SUM_TOL {
        return Err(Error::InvalidModel(format!(
            "probabilities sum to {total}, which is farther than {PMF_SUM_TOL} from 1"
        )));
    }
    Ok(())
}

impl FiniteModel {
    pub fn new_1d(states: &[f64], pmf: &[f64]) -> Result<Self> {
        let embedded: Vec<[f64; 2]> = states.iter().map(|&x| [x, 0.0]).collect();
        Self::build(Dim::One, embedded, pmf)
    }

    pub fn new_2d(states: &[[f64; 2]], pmf: &[f64]) -> Result<Self> {
        Self::build(Dim::Two, states.to_vec(), pmf)
    }

    fn build(dim: Dim, states: Vec<[f64; 2]>, pmf: &[f64]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidModel("state space is empty".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "state {i} has a non-finite coordinate: ({}, {})",
                    s[0], s[1]
                )));
            }
        }
        for i in 0..states.len() {
            for j in (i + 1)..states.len() {
                if states[i] == states[j] {
                    return Err(Error::InvalidModel(format!(
                        "states {i} and {j} coincide at ({}, {})",
                        states[i][0], states[i][1]
                    )));
                }
            }
        }
        validate_pmf(pmf, states.len())?;
        Ok(Self {
            dim,
            states,
            pmf: pmf.to_vec(),
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty state spaces
    }

    /// States embedded in the plane (second coordinate 0 for 1-d models).
    pub fn states(&self) -> &[[f64; 2]] {
        &self.states
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// First-coordinate weight actually applied to this model: `phi` in two
    /// dimensions, 1 in one dimension.
    pub fn weight1(&self, weights: &PayoffWeights) -> f64 {
        match self.dim {
            Dim::One => 1.0,
            Dim::Two => weights.phi(),
        }
    }

    /// Prior mean, componentwise.
    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0_f64; 2];
        for (s, &p) in self.states.iter().zip(&self.pmf) {
            m[0] += p * s[0];
            m[1] += p * s[1];
        }
        m
    }

    /// Prior variances, componentwise.
    pub fn variances(&self) -> [f64; 2] {
        let m = self.mean();
        let mut v = [0.0_f64; 2];
        for (s, &p) in self.states.iter().zip(&self.pmf) {
            v[0] += p * (s[0] - m[0]).powi(2);
            v[1] += p * (s[1] - m[1]).powi(2);
        }
        v
    }
}

/// A score presented as ranks: `ranks[i]` is the message sent in state `i`.
///
/// Ranks run from 1 to `k` with every value used at least once and `k ≥ 2`,
/// so a score is never constant. Two scores inducing the same ordered
/// partition of states are the same score.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderedScore {
    ranks: Vec<usize>,
    k: usize,
}

impl OrderedScore {
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::InvalidScore(format!(
                "a score needs at least two states, got {}",
                ranks.len()
            )));
        }
        let k = *ranks.iter().max().unwrap();
        if k < 2 {
            return Err(Error::InvalidScore(
                "a score must use at least two distinct ranks".into(),
            ));
        }
        let mut seen = vec![false; k];
        for &r in &ranks {
            if r == 0 || r > k {
                return Err(Error::InvalidScore(format!(
                    "rank {r} outside 1..={k}"
                )));
            }
            seen[r - 1] = true;
        }
        if let Some(gap) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidScore(format!(
                "rank {} is never used",
                gap + 1
            )));
        }
        Ok(Self { ranks, k })
    }

    /// Number of states covered by the score.
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of distinct messages.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Rank of state `i` (1-based rank, 0-based state index).
    pub fn rank(&self, i: usize) -> usize {
        self.ranks[i]
    }

    /// State indices grouped by rank, lowest rank first.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.k];
        for (i, &r) in self.ranks.iter().enumerate() {
            blocks[r - 1].push(i);
        }
        blocks
    }
}

/// Receiver's pure strategy: one action per rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverPolicy {
    actions: Vec<[f64; 2]>,
}

impl ReceiverPolicy {
    pub(crate) fn new(actions: Vec<[f64; 2]>) -> Self {
        Self { actions }
    }

    pub fn k(&self) -> usize {
        self.actions.len()
    }

    /// Action taken on message `rank` (1-based).
    pub fn action(&self, rank: usize) -> [f64; 2] {
        self.actions[rank - 1]
    }

    pub fn actions(&self) -> &[[f64; 2]] {
        &self.actions
    }
}

/// Mass of each message under the prior, indexed by rank - 1.
pub fn message_masses(model: &FiniteModel, score: &OrderedScore) -> Result<Vec<f64>> {
    check_score_fits(model, score)?;
    let mut mass = vec![0.0_f64; score.k()];
    for (i, &p) in model.pmf().iter().enumerate() {
        mass[score.rank(i) - 1] += p;
    }
    Ok(mass)
}

fn check_score_fits(model: &FiniteModel, score: &OrderedScore) -> Result<()> {
    if score.len() != model.len() {
        return Err(Error::InvalidScore(format!(
            "score ranks {} states but the model has {}",
            score.len(),
            model.len()
        )));
    }
    Ok(())
}

/// Receiver best response to a score: the posterior mean of each message.
///
/// Posterior means do not depend on the loss weights because the loss is
/// separable and quadratic in each coordinate.
pub fn best_response(model: &FiniteModel, score: &OrderedScore) -> Result<ReceiverPolicy> {
    check_score_fits(model, score)?;
    let k = score.k();
    let mut mass = vec![0.0_f64; k];
    let mut sum = vec![[0.0_f64; 2]; k];
    for (i, (s, &p)) in model.states().iter().zip(model.pmf()).enumerate() {
        let m = score.rank(i) - 1;
        mass[m] += p;
        sum[m][0] += p * s[0];
        sum[m][1] += p * s[1];
    }
    let actions = sum
        .iter()
        .zip(&mass)
        .map(|(s, &p)| [s[0] / p, s[1] / p])
        .collect();
    Ok(ReceiverPolicy::new(actions))
}

/// Ex-ante payoff of a score when the receiver best-responds:
/// `Σ_θ f(θ) u(α(s(θ)), θ)` with `α` the posterior-mean policy.
pub fn exante_payoff(
    model: &FiniteModel,
    score: &OrderedScore,
    weights: &PayoffWeights,
) -> Result<f64> {
    let policy = best_response(model, score)?;
    Ok(exante_under_policy(model, score, &policy, weights))
}

pub(crate) fn exante_under_policy(
    model: &FiniteModel,
    score: &OrderedScore,
    policy: &ReceiverPolicy,
    weights: &PayoffWeights,
) -> f64 {
    let phi1 = model.weight1(weights);
    let mut total = 0.0;
    for (i, (s, &p)) in model.states().iter().zip(model.pmf()).enumerate() {
        total += p * utility2(policy.action(score.rank(i)), *s, phi1);
    }
    total
}

/// Incentive report for a fixed score against its best-response policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// Ex-ante payoff under the best-response policy.
    pub exante_payoff: f64,
    /// Per-state slack: on-path utility minus the best deviating message's
    /// utility. Negative slack means the state prefers to misreport.
    pub ic_slack: Vec<f64>,
    /// True when `min(ic_slack) >= -tol` for the tolerance the caller passed.
    pub credible: bool,
    /// `(state index, deviating rank)` attaining the minimum slack, reported
    /// even when the score is credible. Ties resolve to the lowest state
    /// index, then the lowest rank.
    pub best_deviation: Option<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn utility_matches_weighted_squared_loss() {
        let w = PayoffWeights::new(2.0).unwrap();
        let u = utility(&[1.0, 3.0], &[0.0, 1.0], &w).unwrap();
        assert_relative_eq!(u, -2.0 * 1.0 - 4.0);
    }

    #[test]
    fn one_dimensional_utility_ignores_phi() {
        let w = PayoffWeights::new(7.0).unwrap();
        assert_relative_eq!(utility(&[2.0], &[0.5], &w).unwrap(), -2.25);
    }

    #[test]
    fn utility_rejects_mismatched_lengths() {
        let w = PayoffWeights::default();
        assert!(matches!(
            utility(&[1.0], &[0.0, 0.0], &w),
            Err(Error::DimensionMismatch { action: 1, state: 2 })
        ));
    }

    #[test]
    fn weights_reject_nonpositive_phi() {
        assert!(PayoffWeights::new(0.0).is_err());
        assert!(PayoffWeights::new(-1.0).is_err());
        assert!(PayoffWeights::new(f64::NAN).is_err());
    }

    #[test]
    fn model_rejects_duplicate_states() {
        let err = FiniteModel::new_2d(&[[0.0, 0.0], [0.0, 0.0]], &[0.5, 0.5]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn model_rejects_bad_pmf() {
        assert!(FiniteModel::new_1d(&[0.0, 1.0], &[0.5, 0.6]).is_err());
        assert!(FiniteModel::new_1d(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(FiniteModel::new_1d(&[0.0, 1.0], &[0.5]).is_err());
    }

    #[test]
    fn score_requires_consecutive_surjective_ranks() {
        assert!(OrderedScore::from_ranks(vec![1, 3]).is_err()); // rank 2 unused
        assert!(OrderedScore::from_ranks(vec![1, 1]).is_err()); // constant
        assert!(OrderedScore::from_ranks(vec![0, 1]).is_err()); // ranks start at 1
        let s = OrderedScore::from_ranks(vec![2, 1, 2]).unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.blocks(), vec![vec![1], vec![0, 2]]);
    }

    #[test]
    fn best_response_is_posterior_mean() {
        // Pooling (1,0) and (0,1) on the unit square with masses .4/.1/.2/.3.
        let model = FiniteModel::new_2d(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &[0.4, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let score = OrderedScore::from_ranks(vec![1, 2, 2, 3]).unwrap();
        let policy = best_response(&model, &score).unwrap();
        assert_relative_eq!(policy.action(2)[0], 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(policy.action(2)[1], 2.0 / 3.0, max_relative = 1e-14);
        assert_eq!(policy.action(1), [0.0, 0.0]);
        assert_eq!(policy.action(3), [1.0, 1.0]);
    }

    #[test]
    fn exante_payoff_of_pooling_pair() {
        let model = FiniteModel::new_2d(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &[0.4, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let score = OrderedScore::from_ranks(vec![1, 2, 2, 3]).unwrap();
        let u = exante_payoff(&model, &score, &PayoffWeights::default()).unwrap();
        assert_relative_eq!(u, -2.0 / 15.0, max_relative = 1e-13);
    }

    #[test]
    fn message_masses_sum_to_one() {
        let model = FiniteModel::new_2d(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &[0.25, 0.1, 0.5, 0.15],
        )
        .unwrap();
        let score = OrderedScore::from_ranks(vec![1, 2, 2, 3]).unwrap();
        let mass = message_masses(&model, &score).unwrap();
        assert_eq!(mass.len(), 3);
        assert_relative_eq!(mass.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(mass[1], 0.6);
    }
}
