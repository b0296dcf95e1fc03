//! Exhaustive analysis of scores on small finite priors.
//!
//! A ranking of states qualifies as a score here only if it has the
//! *intermediate value property* (IVP): whenever two states receive ranks
//! `r > r'`, every rank strictly between `r` and `r'` must be attained by
//! some state inside the closed coordinate box spanned by the two states.
//! Rankings with two ranks satisfy this vacuously; a ranking that jumps
//! over a rank "in plain sight" of the two endpoint states does not.
//!
//! Enumeration walks every partition of the states into `2..=max_k` blocks
//! (as restricted growth strings) and keeps the first block ordering, in
//! lexicographic order, that has the IVP. Ex-ante payoff and incentive
//! slacks depend only on the partition, so the choice of representative
//! ordering never affects reported values.

use crate::error::{Error, Result};
use crate::model::{
    best_response, exante_under_policy, utility2, EquilibriumReport, FiniteModel, OrderedScore,
    PayoffWeights, PMF_SUM_TOL,
};
use crate::par;

/// Largest state space accepted by the enumeration routines. The partition
/// count grows super-exponentially, so bigger spaces are refused up front.
pub const ENUMERATION_LIMIT: usize = 10;

/// Two payoffs within this distance of the maximum count as tied optima.
pub const PAYOFF_TIE_TOL: f64 = 1e-12;

/// A witnessed failure of the intermediate value property: states `hi` and
/// `lo` (indices into the model) have ranks that straddle `missing_rank`,
/// but no state with that rank lies in their coordinate box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvpWitness {
    pub hi: usize,
    pub lo: usize,
    pub missing_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvpVerdict {
    Holds,
    Fails(IvpWitness),
}

impl IvpVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, IvpVerdict::Holds)
    }
}

#[inline]
fn in_box(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let (x_lo, x_hi) = if a[0] <= b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
    let (y_lo, y_hi) = if a[1] <= b[1] { (a[1], b[1]) } else { (b[1], a[1]) };
    x_lo <= p[0] && p[0] <= x_hi && y_lo <= p[1] && p[1] <= y_hi
}

/// Checks the intermediate value property of a score on a model.
///
/// On failure the witness is the first one found in a fixed scan order:
/// the higher state by descending rank (ties by ascending index), then the
/// lower state by descending rank (ties by ascending index), then the
/// missing rank in descending order.
pub fn check_ivp(model: &FiniteModel, score: &OrderedScore) -> Result<IvpVerdict> {
    if score.len() != model.len() {
        return Err(Error::InvalidScore(format!(
            "score ranks {} states but the model has {}",
            score.len(),
            model.len()
        )));
    }
    let states = model.states();
    let mut order: Vec<usize> = (0..model.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(score.rank(i)), i));
    let blocks = score.blocks();

    for (pos, &hi) in order.iter().enumerate() {
        let r_hi = score.rank(hi);
        for &lo in &order[pos + 1..] {
            let r_lo = score.rank(lo);
            if r_lo == r_hi {
                continue;
            }
            for m in (r_lo + 1..r_hi).rev() {
                let found = blocks[m - 1]
                    .iter()
                    .any(|&s| in_box(states[s], states[hi], states[lo]));
                if !found {
                    return Ok(IvpVerdict::Fails(IvpWitness {
                        hi,
                        lo,
                        missing_rank: m,
                    }));
                }
            }
        }
    }
    Ok(IvpVerdict::Holds)
}

/// Iterator over restricted growth strings: all set partitions of `0..n`,
/// with block labels in order of first appearance.
struct RgsIter {
    a: Vec<usize>,
    // prefix_max[i] = max(a[0..i]); prefix_max[0] = 0 by convention.
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

impl RgsIter {
    fn new(n: usize) -> Self {
        Self {
            a: vec![0; n],
            prefix_max: vec![0; n],
            started: false,
            done: n == 0,
        }
    }

    fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let n = self.a.len();
        let mut i = n;
        while i > 1 {
            i -= 1;
            if self.a[i] <= self.prefix_max[i] {
                self.a[i] += 1;
                for j in i + 1..n {
                    self.a[j] = 0;
                    self.prefix_max[j] = self.prefix_max[j - 1].max(self.a[j - 1]);
                }
                return true;
            }
        }
        self.done = true;
        false
    }
}

/// Smallest-rank-first permutation successor; false once the sequence is the
/// last one in lexicographic order.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Per-block-pair mask of blocks that can serve as intermediates for *every*
/// state pair spanning the two blocks.
fn block_pair_masks(
    assignment: &[usize],
    k: usize,
    state_box_masks: &[Vec<u16>],
) -> Vec<Vec<u16>> {
    let mut masks = vec![vec![u16::MAX; k]; k];
    let n = assignment.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (bi, bj) = (assignment[i], assignment[j]);
            if bi == bj {
                continue;
            }
            let mut block_mask = 0u16;
            let mut bits = state_box_masks[i][j];
            while bits != 0 {
                let s = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                block_mask |= 1 << assignment[s];
            }
            masks[bi][bj] &= block_mask;
            masks[bj][bi] &= block_mask;
        }
    }
    masks
}

/// First rank assignment (lexicographic over blocks in first-appearance
/// order) under which the partition has the IVP, if any.
fn first_ivp_ordering(
    assignment: &[usize],
    k: usize,
    state_box_masks: &[Vec<u16>],
) -> Option<OrderedScore> {
    let masks = block_pair_masks(assignment, k, state_box_masks);
    let mut perm: Vec<usize> = (1..=k).collect();
    loop {
        // rank_block[m - 1] = block holding rank m under this ordering
        let mut rank_block = vec![0usize; k];
        for (b, &r) in perm.iter().enumerate() {
            rank_block[r - 1] = b;
        }
        let mut ok = true;
        'pairs: for a in 0..k {
            for b in (a + 1)..k {
                let (r_lo, r_hi) = if perm[a] < perm[b] {
                    (perm[a], perm[b])
                } else {
                    (perm[b], perm[a])
                };
                for m in r_lo + 1..r_hi {
                    if masks[a][b] & (1 << rank_block[m - 1]) == 0 {
                        ok = false;
                        break 'pairs;
                    }
                }
            }
        }
        if ok {
            let ranks = assignment.iter().map(|&b| perm[b]).collect();
            return Some(OrderedScore::from_ranks(ranks).expect("valid by construction"));
        }
        if !next_permutation(&mut perm) {
            return None;
        }
    }
}

/// Enumerates every score with at most `max_k` messages on a model of at
/// most [`ENUMERATION_LIMIT`] states. One representative ordering is
/// returned per admissible partition; partitions with no IVP ordering are
/// dropped.
pub fn enumerate_scores(model: &FiniteModel, max_k: usize) -> Result<Vec<OrderedScore>> {
    let n = model.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if max_k < 2 || max_k > n {
        return Err(Error::MaxKRange { max_k, n });
    }

    let states = model.states();
    let mut state_box_masks = vec![vec![0u16; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut mask = 0u16;
            for s in 0..n {
                if in_box(states[s], states[i], states[j]) {
                    mask |= 1 << s;
                }
            }
            state_box_masks[i][j] = mask;
            state_box_masks[j][i] = mask;
        }
    }

    let mut out = Vec::new();
    let mut rgs = RgsIter::new(n);
    while rgs.advance() {
        let k = rgs.a.iter().max().copied().unwrap_or(0) + 1;
        if k < 2 || k > max_k {
            continue;
        }
        if let Some(score) = first_ivp_ordering(&rgs.a, k, &state_box_masks) {
            out.push(score);
        }
    }
    Ok(out)
}

/// Best achievable ex-ante payoff over all enumerated scores, together with
/// every score within [`PAYOFF_TIE_TOL`] of it (in enumeration order).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub payoff: f64,
    pub scores: Vec<OrderedScore>,
}

fn batch_payoffs(
    model: &FiniteModel,
    candidates: &[OrderedScore],
    weights: &PayoffWeights,
) -> Vec<f64> {
    let chunks = par::map_chunks(candidates.len(), 256, |_, range| {
        range
            .map(|c| {
                let policy = best_response(model, &candidates[c]).expect("enumerated score fits");
                exante_under_policy(model, &candidates[c], &policy, weights)
            })
            .collect::<Vec<f64>>()
    });
    chunks.into_iter().flatten().collect()
}

pub fn optimal_scores(
    model: &FiniteModel,
    max_k: usize,
    weights: &PayoffWeights,
) -> Result<Optimum> {
    let candidates = enumerate_scores(model, max_k)?;
    let payoffs = batch_payoffs(model, &candidates, weights);
    let best = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores = candidates
        .into_iter()
        .zip(&payoffs)
        .filter(|(_, &u)| u >= best - PAYOFF_TIE_TOL)
        .map(|(s, _)| s)
        .collect();
    Ok(Optimum {
        payoff: best,
        scores,
    })
}

/// Incentive check of a score against its best-response policy: each state's
/// slack is its on-path utility minus the best utility available from
/// reporting a different rank. Credible means no state gains more than
/// `tol` by misreporting.
pub fn check_credibility(
    model: &FiniteModel,
    score: &OrderedScore,
    weights: &PayoffWeights,
    tol: f64,
) -> Result<EquilibriumReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "credibility tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let policy = best_response(model, score)?;
    let phi1 = model.weight1(weights);
    let k = score.k();

    let mut exante = 0.0;
    let mut slacks = Vec::with_capacity(model.len());
    let mut worst: Option<(f64, usize, usize)> = None;
    for (i, (s, &p)) in model.states().iter().zip(model.pmf()).enumerate() {
        let own_rank = score.rank(i);
        let own = utility2(policy.action(own_rank), *s, phi1);
        exante += p * own;
        let mut slack = f64::INFINITY;
        let mut dev_rank = 0;
        for m in 1..=k {
            if m == own_rank {
                continue;
            }
            let gap = own - utility2(policy.action(m), *s, phi1);
            if gap < slack {
                slack = gap;
                dev_rank = m;
            }
        }
        slacks.push(slack);
        if worst.map_or(true, |(w, _, _)| slack < w) {
            worst = Some((slack, i, dev_rank));
        }
    }

    let (min_slack, state, rank) = worst.expect("scores have at least two states");
    Ok(EquilibriumReport {
        exante_payoff: exante,
        ic_slack: slacks,
        credible: min_slack >= -tol,
        best_deviation: Some((state, rank)),
    })
}

/// Value of commitment: the payoff of the best score minus the payoff of the
/// best *credible* score, over the same enumeration. Both maxima are taken
/// over one shared payoff evaluation, so `gap >= 0` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentGap {
    pub optimal_payoff: f64,
    pub best_credible_payoff: f64,
    pub gap: f64,
    pub optimal: OrderedScore,
    pub best_credible: OrderedScore,
    pub optimal_credible: bool,
}

pub fn commitment_gap(
    model: &FiniteModel,
    max_k: usize,
    weights: &PayoffWeights,
    tol: f64,
) -> Result<CommitmentGap> {
    let candidates = enumerate_scores(model, max_k)?;
    let payoffs = batch_payoffs(model, &candidates, weights);
    let credible: Vec<bool> = {
        let chunks = par::map_chunks(candidates.len(), 256, |_, range| {
            range
                .map(|c| {
                    check_credibility(model, &candidates[c], weights, tol)
                        .expect("enumerated score fits")
                        .credible
                })
                .collect::<Vec<bool>>()
        });
        chunks.into_iter().flatten().collect()
    };

    let mut best: Option<usize> = None;
    let mut best_cred: Option<usize> = None;
    for i in 0..candidates.len() {
        if best.map_or(true, |b| payoffs[i] > payoffs[b]) {
            best = Some(i);
        }
        if credible[i] && best_cred.map_or(true, |b| payoffs[i] > payoffs[b]) {
            best_cred = Some(i);
        }
    }
    let best = best.expect("enumeration is never empty for max_k >= 2");
    let best_cred = best_cred.ok_or_else(|| {
        Error::InvalidInput(format!(
            "no enumerated score is credible at tolerance {tol}"
        ))
    })?;

    Ok(CommitmentGap {
        optimal_payoff: payoffs[best],
        best_credible_payoff: payoffs[best_cred],
        gap: payoffs[best] - payoffs[best_cred],
        optimal: candidates[best].clone(),
        best_credible: candidates[best_cred].clone(),
        optimal_credible: credible[best],
    })
}

/// Probability mass function on the unit square `{0,1}²`, indexed as
/// `f{xy} = P(θ₁ = x, θ₂ = y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoByTwoPmf {
    f00: f64,
    f10: f64,
    f01: f64,
    f11: f64,
}

impl TwoByTwoPmf {
    pub fn new(f00: f64, f10: f64, f01: f64, f11: f64) -> Result<Self> {
        for (name, v) in [("f00", f00), ("f10", f10), ("f01", f01), ("f11", f11)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        let total = f00 + f10 + f01 + f11;
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidModel(format!(
                "two-by-two masses sum to {total}, which is farther than {PMF_SUM_TOL} from 1"
            )));
        }
        Ok(Self { f00, f10, f01, f11 })
    }

    pub fn f00(&self) -> f64 {
        self.f00
    }
    pub fn f10(&self) -> f64 {
        self.f10
    }
    pub fn f01(&self) -> f64 {
        self.f01
    }
    pub fn f11(&self) -> f64 {
        self.f11
    }
}

/// The unit-square model with states in the fixed order
/// `(0,0), (1,0), (0,1), (1,1)`.
pub fn unit_square_model(pmf: &TwoByTwoPmf) -> FiniteModel {
    FiniteModel::new_2d(
        &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        &[pmf.f00, pmf.f10, pmf.f01, pmf.f11],
    )
    .expect("unit-square construction is always valid")
}

/// Three-message score pooling the main diagonal `(0,0), (1,1)`; `s_D`.
pub fn score_pool_diagonal() -> OrderedScore {
    OrderedScore::from_ranks(vec![2, 1, 3, 2]).unwrap()
}

/// Three-message score pooling the antidiagonal `(1,0), (0,1)`; `s_d`.
pub fn score_pool_antidiagonal() -> OrderedScore {
    OrderedScore::from_ranks(vec![1, 2, 2, 3]).unwrap()
}

/// Two-message score revealing only the first coordinate; `s_1`.
pub fn score_first_coordinate() -> OrderedScore {
    OrderedScore::from_ranks(vec![1, 2, 1, 2]).unwrap()
}

/// Two-message score revealing only the second coordinate; `s_2`.
pub fn score_second_coordinate() -> OrderedScore {
    OrderedScore::from_ranks(vec![1, 1, 2, 2]).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoByTwoLabel {
    PoolDiagonal,
    PoolAntidiagonal,
    Tie,
}

impl std::fmt::Display for TwoByTwoLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TwoByTwoLabel::PoolDiagonal => "s_D",
            TwoByTwoLabel::PoolAntidiagonal => "s_d",
            TwoByTwoLabel::Tie => "tie",
        })
    }
}

/// Pooled-pair mass ratios inside `[√2 - 1, √2 + 1]` make the optimal
/// pooling score credible. The interval maps to itself under inversion, so
/// which of the two pooled masses goes in the numerator does not matter.
pub const CREDIBLE_RATIO_LO: f64 = std::f64::consts::SQRT_2 - 1.0;
pub const CREDIBLE_RATIO_HI: f64 = std::f64::consts::SQRT_2 + 1.0;

/// Closed-form unit-square summary (equal coordinate weights only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoByTwoReport {
    /// Payoff of [`score_pool_diagonal`]: `-2 f00 f11 / (f00 + f11)`.
    pub u_pool_diagonal: f64,
    /// Payoff of [`score_pool_antidiagonal`]: `-2 f10 f01 / (f10 + f01)`.
    pub u_pool_antidiagonal: f64,
    /// Payoff of [`score_first_coordinate`].
    pub u_first_coordinate: f64,
    /// Payoff of [`score_second_coordinate`].
    pub u_second_coordinate: f64,
    /// Which pooling score wins ([`PAYOFF_TIE_TOL`] decides ties).
    pub optimal: TwoByTwoLabel,
    /// Mass ratio of the winning pooled pair: `f10/f01` when the
    /// antidiagonal wins (and on ties), `f00/f11` when the diagonal wins.
    pub pooled_ratio: f64,
    /// Whether the winning pooling score is credible:
    /// `pooled_ratio ∈ [CREDIBLE_RATIO_LO, CREDIBLE_RATIO_HI]` (inclusive).
    pub optimal_credible: bool,
}

/// Closed-form analysis of the unit-square game. Only `phi = 1` admits
/// these formulas; other weights are refused.
pub fn two_by_two_analysis(pmf: &TwoByTwoPmf, weights: &PayoffWeights) -> Result<TwoByTwoReport> {
    if (weights.phi() - 1.0).abs() > 1e-12 {
        return Err(Error::PhiNotOne { phi: weights.phi() });
    }
    let (f00, f10, f01, f11) = (pmf.f00, pmf.f10, pmf.f01, pmf.f11);
    let u_pool_diagonal = -2.0 * f00 * f11 / (f00 + f11);
    let u_pool_antidiagonal = -2.0 * f10 * f01 / (f10 + f01);
    let u_first_coordinate = -f00 * f01 / (f00 + f01) - f10 * f11 / (f10 + f11);
    let u_second_coordinate = -f00 * f10 / (f00 + f10) - f01 * f11 / (f01 + f11);

    let optimal = if (u_pool_antidiagonal - u_pool_diagonal).abs() <= PAYOFF_TIE_TOL {
        TwoByTwoLabel::Tie
    } else if u_pool_antidiagonal > u_pool_diagonal {
        TwoByTwoLabel::PoolAntidiagonal
    } else {
        TwoByTwoLabel::PoolDiagonal
    };
    let pooled_ratio = match optimal {
        TwoByTwoLabel::PoolDiagonal => f00 / f11,
        _ => f10 / f01,
    };
    let optimal_credible = (CREDIBLE_RATIO_LO..=CREDIBLE_RATIO_HI).contains(&pooled_ratio);

    Ok(TwoByTwoReport {
        u_pool_diagonal,
        u_pool_antidiagonal,
        u_first_coordinate,
        u_second_coordinate,
        optimal,
        pooled_ratio,
        optimal_credible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(pmf: [f64; 4]) -> FiniteModel {
        FiniteModel::new_2d(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &pmf,
        )
        .unwrap()
    }

    #[test]
    fn two_block_scores_hold_vacuously() {
        let model = square([0.25; 4]);
        for ranks in [vec![1, 2, 2, 2], vec![2, 1, 2, 1], vec![1, 1, 2, 2]] {
            let score = OrderedScore::from_ranks(ranks).unwrap();
            assert!(check_ivp(&model, &score).unwrap().holds());
        }
    }

    #[test]
    fn bijection_on_square_fails_with_witness() {
        let model = square([0.25; 4]);
        let score = OrderedScore::from_ranks(vec![1, 2, 3, 4]).unwrap();
        match check_ivp(&model, &score).unwrap() {
            IvpVerdict::Fails(w) => {
                // (1,1) over (1,0) skips rank 3, whose only state (0,1)
                // sits outside the column x = 1.
                assert_eq!(w, IvpWitness { hi: 3, lo: 1, missing_rank: 3 });
            }
            IvpVerdict::Holds => panic!("bijections on the square are not scores"),
        }
    }

    #[test]
    fn diagonal_pools_hold() {
        let model = square([0.25; 4]);
        assert!(check_ivp(&model, &score_pool_diagonal()).unwrap().holds());
        assert!(check_ivp(&model, &score_pool_antidiagonal()).unwrap().holds());
    }

    #[test]
    fn square_enumeration_yields_nine_scores() {
        let model = square([0.4, 0.1, 0.2, 0.3]);
        let scores = enumerate_scores(&model, 4).unwrap();
        assert_eq!(scores.len(), 9);
        // Seven bipartitions (all vacuous) plus the two diagonal poolings.
        let three_block: Vec<_> = scores.iter().filter(|s| s.k() == 3).collect();
        assert_eq!(three_block.len(), 2);
        assert!(scores.contains(&score_pool_antidiagonal()));
        assert!(scores.contains(&score_pool_diagonal()));
        assert!(scores.iter().all(|s| s.k() < 4), "no bijection passes");
    }

    #[test]
    fn enumeration_grows_with_max_k() {
        let model = square([0.4, 0.1, 0.2, 0.3]);
        assert_eq!(enumerate_scores(&model, 2).unwrap().len(), 7);
        assert_eq!(enumerate_scores(&model, 3).unwrap().len(), 9);
        assert_eq!(enumerate_scores(&model, 4).unwrap().len(), 9);
    }

    #[test]
    fn enumeration_guards_inputs() {
        let model = square([0.25; 4]);
        assert!(matches!(
            enumerate_scores(&model, 1),
            Err(Error::MaxKRange { max_k: 1, n: 4 })
        ));
        assert!(matches!(
            enumerate_scores(&model, 5),
            Err(Error::MaxKRange { max_k: 5, n: 4 })
        ));
        let states: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let pmf = vec![1.0 / 11.0; 11];
        let big = FiniteModel::new_1d(&states, &pmf).unwrap();
        assert!(matches!(
            enumerate_scores(&big, 2),
            Err(Error::EnumerationLimit { n: 11, limit: 10 })
        ));
    }

    #[test]
    fn antidiagonal_pool_is_uniquely_optimal() {
        let model = square([0.4, 0.1, 0.2, 0.3]);
        let opt = optimal_scores(&model, 4, &PayoffWeights::default()).unwrap();
        assert_relative_eq!(opt.payoff, -2.0 / 15.0, max_relative = 1e-13);
        assert_eq!(opt.scores, vec![score_pool_antidiagonal()]);
    }

    #[test]
    fn uniform_square_has_four_way_tie() {
        let model = square([0.25; 4]);
        let opt = optimal_scores(&model, 4, &PayoffWeights::default()).unwrap();
        assert_relative_eq!(opt.payoff, -0.25, max_relative = 1e-14);
        assert_eq!(opt.scores.len(), 4);
    }

    #[test]
    fn credibility_slacks_match_hand_computation() {
        let model = square([0.25, 0.1, 0.5, 0.15]);
        let report = check_credibility(
            &model,
            &score_pool_antidiagonal(),
            &PayoffWeights::default(),
            0.0,
        )
        .unwrap();
        assert!(!report.credible);
        assert_relative_eq!(report.exante_payoff, -1.0 / 6.0, max_relative = 1e-13);
        let expect = [13.0 / 18.0, -7.0 / 18.0, 17.0 / 18.0, 13.0 / 18.0];
        for (got, want) in report.ic_slack.iter().zip(expect) {
            assert_relative_eq!(*got, want, max_relative = 1e-12);
        }
        // State (1,0) gains by deviating; ranks 1 and 3 tie, so rank 1 wins.
        assert_eq!(report.best_deviation, Some((1, 1)));
    }

    #[test]
    fn credible_example_has_nonnegative_slacks() {
        let model = square([0.4, 0.1, 0.2, 0.3]);
        let report = check_credibility(
            &model,
            &score_pool_antidiagonal(),
            &PayoffWeights::default(),
            0.0,
        )
        .unwrap();
        assert!(report.credible);
        assert!(report.ic_slack.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn commitment_gap_on_skewed_square() {
        let model = square([0.25, 0.1, 0.5, 0.15]);
        let gap = commitment_gap(&model, 4, &PayoffWeights::default(), 0.0).unwrap();
        assert_relative_eq!(gap.optimal_payoff, -1.0 / 6.0, max_relative = 1e-13);
        assert_relative_eq!(gap.best_credible_payoff, -17.0 / 91.0, max_relative = 1e-13);
        assert_relative_eq!(gap.gap, 11.0 / 546.0, max_relative = 1e-10);
        assert_eq!(gap.optimal, score_pool_antidiagonal());
        assert_eq!(gap.best_credible, score_second_coordinate());
        assert!(!gap.optimal_credible);
        assert!(gap.gap >= 0.0);
    }

    #[test]
    fn commitment_gap_zero_when_optimum_credible() {
        let model = square([0.4, 0.1, 0.2, 0.3]);
        let gap = commitment_gap(&model, 4, &PayoffWeights::default(), 0.0).unwrap();
        assert_eq!(gap.gap, 0.0);
        assert!(gap.optimal_credible);
    }

    #[test]
    fn closed_forms_match_enumeration_values() {
        let pmf = TwoByTwoPmf::new(0.4, 0.1, 0.2, 0.3).unwrap();
        let r = two_by_two_analysis(&pmf, &PayoffWeights::default()).unwrap();
        assert_relative_eq!(r.u_pool_antidiagonal, -2.0 / 15.0, max_relative = 1e-14);
        assert_relative_eq!(r.u_pool_diagonal, -12.0 / 35.0, max_relative = 1e-14);
        assert_relative_eq!(r.u_first_coordinate, -5.0 / 24.0, max_relative = 1e-14);
        assert_relative_eq!(r.u_second_coordinate, -0.2, max_relative = 1e-14);
        assert_eq!(r.optimal, TwoByTwoLabel::PoolAntidiagonal);
        assert_relative_eq!(r.pooled_ratio, 0.5);
        assert!(r.optimal_credible);
    }

    #[test]
    fn skewed_square_summary() {
        let pmf = TwoByTwoPmf::new(0.25, 0.1, 0.5, 0.15).unwrap();
        let r = two_by_two_analysis(&pmf, &PayoffWeights::default()).unwrap();
        assert_eq!(r.optimal, TwoByTwoLabel::PoolAntidiagonal);
        assert_relative_eq!(r.pooled_ratio, 0.2);
        assert!(!r.optimal_credible, "ratio 0.2 < sqrt(2) - 1");
    }

    #[test]
    fn uniform_square_ties_and_stays_credible() {
        let pmf = TwoByTwoPmf::new(0.25, 0.25, 0.25, 0.25).unwrap();
        let r = two_by_two_analysis(&pmf, &PayoffWeights::default()).unwrap();
        assert_eq!(r.optimal, TwoByTwoLabel::Tie);
        assert_relative_eq!(r.pooled_ratio, 1.0);
        assert!(r.optimal_credible);
        assert_relative_eq!(r.u_pool_diagonal, -0.25);
        assert_relative_eq!(r.u_pool_antidiagonal, -0.25);
    }

    #[test]
    fn closed_forms_require_unit_phi() {
        let pmf = TwoByTwoPmf::new(0.25, 0.25, 0.25, 0.25).unwrap();
        let w = PayoffWeights::new(2.0).unwrap();
        assert!(matches!(
            two_by_two_analysis(&pmf, &w),
            Err(Error::PhiNotOne { .. })
        ));
    }

    #[test]
    fn one_dimensional_line_enumeration() {
        // On a line every rank gap must be bridged inside the interval, so
        // the bijection ordered by position passes and disordered ones fail.
        let model = FiniteModel::new_1d(&[0.0, 1.0, 2.0], &[1.0 / 3.0; 3]).unwrap();
        let two_block = enumerate_scores(&model, 2).unwrap();
        assert_eq!(two_block.len(), 3, "every bipartition holds vacuously");
        let scores = enumerate_scores(&model, 3).unwrap();
        assert_eq!(scores.len(), 4);
        let monotone = OrderedScore::from_ranks(vec![1, 2, 3]).unwrap();
        assert!(scores.contains(&monotone));
        let zigzag = OrderedScore::from_ranks(vec![1, 3, 2]).unwrap();
        assert!(!check_ivp(&model, &zigzag).unwrap().holds());
    }
}
