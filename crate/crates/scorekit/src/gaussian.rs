//! Linear and coarsely linear scores under a bivariate normal prior.
//!
//! For a centered normal prior with covariance `Σ` and loss weights
//! `Φ = diag(φ, 1)`, a linear score `s(θ) = β'θ` earns the ex-ante payoff
//!
//! ```text
//! -tr(ΦΣ) + q(β),   q(β) = (β'ΣΦΣβ) / (β'Σβ),
//! ```
//!
//! so ranking directions by payoff is ranking them by the Rayleigh-type
//! quotient `q`. The credible linear scores are exactly the eigenvector
//! directions of `ΦΣ` — the fixed points of `β ↦ ΦΣβ` up to scale — and
//! there are two of them except in the fully symmetric case `σ₁₂ = 0`,
//! `φσ₁² = σ₂²`, where every direction works.
//!
//! Cutting a linear score into finitely many level bands ("coarsely
//! linear") scales the informative part of the payoff by the explained
//! variance of a quantized standard normal, computed here from `erfc` so
//! that far-tail cells keep full relative precision.

use crate::error::{Error, Result};
use crate::model::PayoffWeights;
use crate::par;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Centered bivariate normal prior, stored as its covariance entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    s11: f64,
    s22: f64,
    s12: f64,
}

impl GaussianModel {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, sigma12: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma1_sq", sigma1_sq),
            ("sigma2_sq", sigma2_sq),
            ("sigma12", sigma12),
        ] {
            if !v.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(
                    "{name} is not finite: {v}"
                )));
            }
        }
        if sigma1_sq <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "sigma1_sq = {sigma1_sq} must be positive"
            )));
        }
        let det = sigma1_sq * sigma2_sq - sigma12 * sigma12;
        if det <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "determinant {det} is not positive"
            )));
        }
        Ok(Self {
            s11: sigma1_sq,
            s22: sigma2_sq,
            s12: sigma12,
        })
    }

    pub fn sigma1_sq(&self) -> f64 {
        self.s11
    }
    pub fn sigma2_sq(&self) -> f64 {
        self.s22
    }
    pub fn sigma12(&self) -> f64 {
        self.s12
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    /// `Σ v`.
    pub fn mul_sigma(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.s11 * v[0] + self.s12 * v[1],
            self.s12 * v[0] + self.s22 * v[1],
        ]
    }

    /// `tr(ΦΣ) = φσ₁² + σ₂²`, the payoff of a babbling (uninformative)
    /// message under this prior.
    pub fn trace_phi_sigma(&self, weights: &PayoffWeights) -> f64 {
        weights.phi() * self.s11 + self.s22
    }

    /// Lower Cholesky factor `(l11, l21, l22)` of the covariance.
    pub fn cholesky(&self) -> [f64; 3] {
        let l11 = self.s11.sqrt();
        let l21 = self.s12 / l11;
        let l22 = (self.s22 - l21 * l21).sqrt();
        [l11, l21, l22]
    }
}

/// Sign-and-scale convention for direction vectors: unit Euclidean norm,
/// first nonzero component positive.
fn conventional(v: [f64; 2]) -> Result<[f64; 2]> {
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::InvalidScore(format!(
            "direction has a non-finite component: ({}, {})",
            v[0], v[1]
        )));
    }
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        return Err(Error::InvalidScore("direction is the zero vector".into()));
    }
    let mut u = [v[0] / n, v[1] / n];
    let flip = if u[0] != 0.0 { u[0] < 0.0 } else { u[1] < 0.0 };
    if flip {
        u = [-u[0], -u[1]];
    }
    Ok(u)
}

/// A linear score `s(θ) = β'θ`, stored under the convention of unit norm
/// with the first nonzero component positive. Scaling a score leaves every
/// payoff and credibility statement unchanged, so the convention only pins a
/// canonical representative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScore {
    beta: [f64; 2],
}

impl LinearScore {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        Ok(Self {
            beta: conventional([b1, b2])?,
        })
    }

    pub fn beta(&self) -> [f64; 2] {
        self.beta
    }

    /// Score value at a state.
    pub fn value(&self, theta: [f64; 2]) -> f64 {
        self.beta[0] * theta[0] + self.beta[1] * theta[1]
    }
}

fn check_direction(beta: [f64; 2]) -> Result<()> {
    if !(beta[0].is_finite() && beta[1].is_finite()) || (beta[0] == 0.0 && beta[1] == 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta must be finite and nonzero, got ({}, {})",
            beta[0], beta[1]
        )));
    }
    Ok(())
}

/// The quotient `q(β) = (β'ΣΦΣβ)/(β'Σβ)`. Invariant under scaling of `β`;
/// any nonzero vector is accepted.
pub fn rayleigh_quotient(
    beta: [f64; 2],
    model: &GaussianModel,
    weights: &PayoffWeights,
) -> Result<f64> {
    check_direction(beta)?;
    let t = model.mul_sigma(beta);
    let num = weights.phi() * t[0] * t[0] + t[1] * t[1];
    let den = beta[0] * t[0] + beta[1] * t[1];
    Ok(num / den)
}

/// Ex-ante payoff of the exact linear score `β'θ`: `-tr(ΦΣ) + q(β)`.
pub fn exante_linear_payoff(
    beta: [f64; 2],
    model: &GaussianModel,
    weights: &PayoffWeights,
) -> Result<f64> {
    Ok(-model.trace_phi_sigma(weights) + rayleigh_quotient(beta, model, weights)?)
}

/// Coefficient vector of the receiver's best response to the exact linear
/// score: on message `m = β'θ` the receiver plays `a = m · Σβ/(β'Σβ)`.
/// Rescaling `β` rescales the coefficient inversely, so the induced action
/// rule is scale-invariant.
pub fn receiver_coefficient(beta: [f64; 2], model: &GaussianModel) -> Result<[f64; 2]> {
    check_direction(beta)?;
    let t = model.mul_sigma(beta);
    let den = beta[0] * t[0] + beta[1] * t[1];
    Ok([t[0] / den, t[1] / den])
}

/// Distance between `β` and its image under `β ↦ ΦΣβ`, both reduced to the
/// canonical direction representative. Zero exactly at the credible linear
/// scores; order one elsewhere.
pub fn fixed_point_residual(
    beta: [f64; 2],
    model: &GaussianModel,
    weights: &PayoffWeights,
) -> Result<f64> {
    check_direction(beta)?;
    let v = conventional(beta)?;
    let sv = model.mul_sigma(v);
    let image = conventional([weights.phi() * sv[0], sv[1]])?;
    Ok((v[0] - image[0]).hypot(v[1] - image[1]))
}

/// Relative tolerance deciding the fully symmetric (all directions
/// credible) case.
pub const DEGENERACY_REL_TOL: f64 = 1e-14;

/// The two credible linear scores, best payoff first.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquilibriumReport {
    /// Eigenvector directions of `ΦΣ`, ordered best payoff first.
    pub scores: [LinearScore; 2],
    /// Matching eigenvalues of `ΦΣ`; each equals `q` at its score.
    pub eigenvalues: [f64; 2],
    /// True when `σ₁₂ = 0` and `φσ₁² = σ₂²` (within a relative
    /// [`DEGENERACY_REL_TOL`]): every direction is then credible and the
    /// two reported scores are a conventional basis choice.
    pub degenerate: bool,
}

/// Solves for the credible linear scores of a Gaussian prior.
///
/// With `σ₁₂ ≠ 0` the two eigenvector directions of `ΦΣ` are computed from
/// the characteristic quadratic in closed form, picking the root expression
/// without cancellation in each branch; with `σ₁₂ = 0` they are the axes.
pub fn credible_linear_scores(
    model: &GaussianModel,
    weights: &PayoffWeights,
) -> Result<LinearEquilibriumReport> {
    let phi = weights.phi();
    let (s11, s22, s12) = (model.s11, model.s22, model.s12);
    let d = phi * s11 - s22;

    if s12 == 0.0 {
        let (lam1, lam2) = (phi * s11, s22);
        let e1 = LinearScore::new(1.0, 0.0)?;
        let e2 = LinearScore::new(0.0, 1.0)?;
        let degenerate = (lam1 - lam2).abs() <= DEGENERACY_REL_TOL * lam1.max(lam2);
        let (scores, eigenvalues) = if lam1 >= lam2 {
            ([e1, e2], [lam1, lam2])
        } else {
            ([e2, e1], [lam2, lam1])
        };
        return Ok(LinearEquilibriumReport {
            scores,
            eigenvalues,
            degenerate,
        });
    }

    // Eigenvalue gap of ΦΣ: sqrt(d² + 4φσ₁₂²), computed without overflow.
    let gap = d.hypot(2.0 * phi.sqrt() * s12);
    // β ∝ (λ - σ₂², σ₁₂) with λ - σ₂² = (d ± gap)/2; rewrite the
    // cancelling branch through the root product (d+gap)(gap-d) = 4φσ₁₂².
    let best_first = if d >= 0.0 {
        (d + gap) / 2.0
    } else {
        2.0 * phi * s12 * s12 / (gap - d)
    };
    let worst_first = if d <= 0.0 {
        (d - gap) / 2.0
    } else {
        -2.0 * phi * s12 * s12 / (gap + d)
    };
    let trace = phi * s11 + s22;
    Ok(LinearEquilibriumReport {
        scores: [
            LinearScore::new(best_first, s12)?,
            LinearScore::new(worst_first, s12)?,
        ],
        eigenvalues: [(trace + gap) / 2.0, (trace - gap) / 2.0],
        degenerate: false,
    })
}

/// A linear score reported only up to level bands: the sender announces
/// which of the `cuts.len() + 1` intervals `β'θ` falls in.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarselyLinearScore {
    score: LinearScore,
    cuts: Vec<f64>,
}

impl CoarselyLinearScore {
    pub fn new(score: LinearScore, cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidScore(
                "a coarsely linear score needs at least one cut".into(),
            ));
        }
        for w in cuts.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidScore(format!(
                    "cuts must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidScore("cuts must be finite".into()));
        }
        Ok(Self { score, cuts })
    }

    pub fn score(&self) -> &LinearScore {
        &self.score
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of messages (cells).
    pub fn k(&self) -> usize {
        self.cuts.len() + 1
    }

    /// Cell index of a state, `0..k`.
    pub fn cell(&self, theta: [f64; 2]) -> usize {
        let v = self.score.value(theta);
        self.cuts.partition_point(|&c| c < v)
    }
}

/// Standard normal cdf over `(a, b]` via `erfc`, accurate in both tails.
fn cell_mass(a: f64, b: f64) -> f64 {
    let hi = if a == f64::NEG_INFINITY {
        2.0
    } else {
        erfc(a * FRAC_1_SQRT_2)
    };
    let lo = if b == f64::INFINITY {
        0.0
    } else {
        erfc(b * FRAC_1_SQRT_2)
    };
    0.5 * (hi - lo)
}

fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (SQRT_2 * PI.sqrt())
    }
}

/// Explained variance of a standard normal quantized at `z_cuts`:
/// `Σ_m p_m E[z | cell m]²`. Lies in `(0, 1)`.
fn quantizer_explained_variance(z_cuts: &[f64]) -> Result<f64> {
    let mut edges = Vec::with_capacity(z_cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend_from_slice(z_cuts);
    edges.push(f64::INFINITY);
    let mut v = 0.0;
    for (m, w) in edges.windows(2).enumerate() {
        let p = cell_mass(w[0], w[1]);
        if p < 1e-15 {
            return Err(Error::VoidCell { index: m, mass: p });
        }
        let mean = (std_normal_pdf(w[0]) - std_normal_pdf(w[1])) / p;
        v += p * mean * mean;
    }
    Ok(v)
}

/// Ex-ante payoff of a coarsely linear score under the best-responding
/// receiver: `-tr(ΦΣ) + q(β) · V`, where `V` is the explained variance of
/// the standard normal quantized at the cuts (in units of the score's
/// standard deviation). Cells carrying less than `1e-15` mass are refused
/// rather than silently zeroed.
pub fn coarsely_linear_payoff(
    score: &CoarselyLinearScore,
    model: &GaussianModel,
    weights: &PayoffWeights,
) -> Result<f64> {
    let beta = score.score.beta();
    let t = model.mul_sigma(beta);
    let sigma_s = (beta[0] * t[0] + beta[1] * t[1]).sqrt();
    let z_cuts: Vec<f64> = score.cuts.iter().map(|c| c / sigma_s).collect();
    let v = quantizer_explained_variance(&z_cuts)?;
    let q = rayleigh_quotient(beta, model, weights)?;
    Ok(-model.trace_phi_sigma(weights) + q * v)
}

/// Monte Carlo estimate of a score's ex-ante payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPayoff {
    pub estimate: f64,
    pub std_error: f64,
    /// Second-pass samples scored against a first-pass posterior mean.
    pub samples_used: u64,
    /// Second-pass samples whose message never appeared in the first pass;
    /// they are dropped and counted rather than guessed at.
    pub samples_excluded: u64,
    /// Distinct messages observed in the first pass.
    pub messages: usize,
}

const MC_CHUNK: u64 = 16384;

fn chunk_rng(seed: u64, pass: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((pass << 56) | chunk);
    rng
}

fn sample_state(rng: &mut ChaCha8Rng, chol: [f64; 3]) -> [f64; 2] {
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    [chol[0] * z1, chol[1] * z1 + chol[2] * z2]
}

/// Two-pass Monte Carlo payoff of an arbitrary message rule under the
/// Gaussian prior: the first pass estimates the receiver's posterior mean
/// for every observed message, the second pass (fresh, independent stream)
/// scores states against those actions.
///
/// Sampling is chunked with one counter-mode RNG stream per
/// `(pass, chunk)`, and chunk results merge in index order, so the output
/// is bit-identical for a given `(samples, seed)` no matter how many
/// worker threads run.
pub fn mc_payoff<S>(
    score: S,
    model: &GaussianModel,
    weights: &PayoffWeights,
    samples: u64,
    seed: u64,
) -> Result<McPayoff>
where
    S: Fn([f64; 2]) -> i64 + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let chol = model.cholesky();
    let n_chunks = samples.div_ceil(MC_CHUNK) as usize;
    let chunk_len = |i: usize| -> u64 {
        let start = i as u64 * MC_CHUNK;
        (samples - start).min(MC_CHUNK)
    };

    // Pass 1: posterior mean per message.
    let partials = par::map_chunks(n_chunks, 1, |_, range| {
        let i = range.start;
        let mut rng = chunk_rng(seed, 1, i as u64);
        let mut acc: BTreeMap<i64, (u64, f64, f64)> = BTreeMap::new();
        for _ in 0..chunk_len(i) {
            let th = sample_state(&mut rng, chol);
            let e = acc.entry(score(th)).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += th[0];
            e.2 += th[1];
        }
        acc
    });
    let mut merged: BTreeMap<i64, (u64, f64, f64)> = BTreeMap::new();
    for part in partials {
        for (m, (c, s1, s2)) in part {
            let e = merged.entry(m).or_insert((0, 0.0, 0.0));
            e.0 += c;
            e.1 += s1;
            e.2 += s2;
        }
    }
    let actions: BTreeMap<i64, [f64; 2]> = merged
        .iter()
        .map(|(&m, &(c, s1, s2))| (m, [s1 / c as f64, s2 / c as f64]))
        .collect();

    // Pass 2: payoff against the frozen actions, Welford per chunk, chunks
    // combined pairwise in order.
    struct Stats {
        n: u64,
        mean: f64,
        m2: f64,
        excluded: u64,
    }
    let phi = weights.phi();
    let stats = par::map_chunks(n_chunks, 1, |_, range| {
        let i = range.start;
        let mut rng = chunk_rng(seed, 2, i as u64);
        let mut s = Stats {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            excluded: 0,
        };
        for _ in 0..chunk_len(i) {
            let th = sample_state(&mut rng, chol);
            match actions.get(&score(th)) {
                None => s.excluded += 1,
                Some(a) => {
                    let d1 = a[0] - th[0];
                    let d2 = a[1] - th[1];
                    let u = -phi * d1 * d1 - d2 * d2;
                    s.n += 1;
                    let delta = u - s.mean;
                    s.mean += delta / s.n as f64;
                    s.m2 += delta * (u - s.mean);
                }
            }
        }
        s
    });

    let mut total = Stats {
        n: 0,
        mean: 0.0,
        m2: 0.0,
        excluded: 0,
    };
    for s in stats {
        total.excluded += s.excluded;
        if s.n == 0 {
            continue;
        }
        if total.n == 0 {
            total.n = s.n;
            total.mean = s.mean;
            total.m2 = s.m2;
            continue;
        }
        let n1 = total.n as f64;
        let n2 = s.n as f64;
        let delta = s.mean - total.mean;
        total.mean += delta * n2 / (n1 + n2);
        total.m2 += s.m2 + delta * delta * n1 * n2 / (n1 + n2);
        total.n += s.n;
    }

    if total.n < 2 {
        return Err(Error::InvalidInput(
            "fewer than 2 second-pass samples matched a first-pass message".into(),
        ));
    }
    let n = total.n as f64;
    let variance = total.m2 / (n - 1.0);
    Ok(McPayoff {
        estimate: total.mean,
        std_error: (variance / n).sqrt(),
        samples_used: total.n,
        samples_excluded: total.excluded,
        messages: actions.len(),
    })
}

/// Payoff curve over score directions `(cos a, sin a)` for `a` on a uniform
/// grid of `steps` angles covering `[0, π)`. Rows are
/// `(angle, q, payoff)`.
pub fn angle_sweep(
    model: &GaussianModel,
    weights: &PayoffWeights,
    steps: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if steps == 0 {
        return Err(Error::InvalidInput("angle sweep needs at least one step".into()));
    }
    let trace = model.trace_phi_sigma(weights);
    let rows = par::map_chunks(steps, par::CHUNK, |_, range| {
        range
            .map(|i| {
                let a = PI * i as f64 / steps as f64;
                let beta = [a.cos(), a.sin()];
                let q = rayleigh_quotient(beta, model, weights).expect("unit vector");
                (a, q, -trace + q)
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn symmetric() -> GaussianModel {
        GaussianModel::new(1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn covariance_must_be_positive_definite() {
        assert!(GaussianModel::new(0.0, 1.0, 0.0).is_err());
        assert!(GaussianModel::new(1.0, 1.0, 1.0).is_err()); // det = 0
        assert!(GaussianModel::new(1.0, 1.0, -1.2).is_err());
        assert!(GaussianModel::new(1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn linear_scores_normalize_with_sign_convention() {
        let s = LinearScore::new(-1.0, -1.0).unwrap();
        assert_relative_eq!(s.beta()[0], FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_relative_eq!(s.beta()[1], FRAC_1_SQRT_2, max_relative = 1e-15);
        let s = LinearScore::new(0.0, -2.0).unwrap();
        assert_eq!(s.beta(), [0.0, 1.0]);
        assert!(LinearScore::new(0.0, 0.0).is_err());
        assert!(LinearScore::new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn rayleigh_quotient_on_symmetric_prior() {
        let g = symmetric();
        let w = PayoffWeights::default();
        assert_relative_eq!(rayleigh_quotient([1.0, 1.0], &g, &w).unwrap(), 1.5);
        assert_relative_eq!(rayleigh_quotient([1.0, -1.0], &g, &w).unwrap(), 0.5);
        // Scale invariance.
        assert_relative_eq!(
            rayleigh_quotient([-3.0, -3.0], &g, &w).unwrap(),
            1.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn linear_payoffs_on_symmetric_prior() {
        let g = symmetric();
        let w = PayoffWeights::default();
        assert_relative_eq!(exante_linear_payoff([1.0, 1.0], &g, &w).unwrap(), -0.5);
        assert_relative_eq!(exante_linear_payoff([1.0, -1.0], &g, &w).unwrap(), -1.5);
    }

    #[test]
    fn receiver_coefficient_example() {
        let g = symmetric();
        let c = receiver_coefficient([1.0, 1.0], &g).unwrap();
        assert_relative_eq!(c[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(c[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn credible_scores_on_symmetric_prior() {
        let g = symmetric();
        let r = credible_linear_scores(&g, &PayoffWeights::default()).unwrap();
        assert!(!r.degenerate);
        assert_relative_eq!(r.eigenvalues[0], 1.5, max_relative = 1e-14);
        assert_relative_eq!(r.eigenvalues[1], 0.5, max_relative = 1e-14);
        let b = r.scores[0].beta();
        assert_relative_eq!(b[0], FRAC_1_SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(b[1], FRAC_1_SQRT_2, max_relative = 1e-14);
        let b = r.scores[1].beta();
        assert_relative_eq!(b[0], FRAC_1_SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(b[1], -FRAC_1_SQRT_2, max_relative = 1e-14);
    }

    #[test]
    fn diagonal_covariance_gives_axis_scores() {
        let g = GaussianModel::new(1.0, 2.0, 0.0).unwrap();
        let r = credible_linear_scores(&g, &PayoffWeights::default()).unwrap();
        assert!(!r.degenerate);
        assert_eq!(r.scores[0].beta(), [0.0, 1.0]);
        assert_eq!(r.scores[1].beta(), [1.0, 0.0]);
        assert_eq!(r.eigenvalues, [2.0, 1.0]);
        // Weighting the first coordinate enough flips the ranking.
        let w = PayoffWeights::new(4.0).unwrap();
        let r = credible_linear_scores(&g, &w).unwrap();
        assert_eq!(r.scores[0].beta(), [1.0, 0.0]);
        assert_eq!(r.eigenvalues, [4.0, 2.0]);
    }

    #[test]
    fn isotropic_prior_is_degenerate() {
        let g = GaussianModel::new(1.0, 1.0, 0.0).unwrap();
        let r = credible_linear_scores(&g, &PayoffWeights::default()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.scores[0].beta(), [1.0, 0.0]);
    }

    #[test]
    fn residual_vanishes_only_at_credible_scores() {
        let g = symmetric();
        let w = PayoffWeights::default();
        let r = credible_linear_scores(&g, &w).unwrap();
        for s in r.scores {
            assert!(fixed_point_residual(s.beta(), &g, &w).unwrap() < 1e-14);
        }
        assert!(fixed_point_residual([1.0, 0.0], &g, &w).unwrap() > 1e-2);
        assert!(fixed_point_residual([1.0, 3.0], &g, &w).unwrap() > 1e-2);
    }

    #[test]
    fn stable_roots_survive_tiny_covariance() {
        // Near-diagonal case: the naive quadratic root (d - gap)/2 would
        // cancel catastrophically for the worst score.
        let g = GaussianModel::new(4.0, 1.0, 1e-9).unwrap();
        let w = PayoffWeights::default();
        let r = credible_linear_scores(&g, &w).unwrap();
        assert!(fixed_point_residual(r.scores[0].beta(), &g, &w).unwrap() < 1e-13);
        assert!(fixed_point_residual(r.scores[1].beta(), &g, &w).unwrap() < 1e-13);
        assert!(r.eigenvalues[0] > r.eigenvalues[1]);
    }

    #[test]
    fn single_cut_halves_the_information() {
        let g = GaussianModel::new(1.0, 1.0, 0.0).unwrap();
        let w = PayoffWeights::default();
        let s = CoarselyLinearScore::new(LinearScore::new(1.0, 1.0).unwrap(), vec![0.0]).unwrap();
        let u = coarsely_linear_payoff(&s, &g, &w).unwrap();
        assert_relative_eq!(u, -2.0 + 2.0 / PI, max_relative = 1e-14);
        assert_abs_diff_eq!(u, -1.3633802276324187, epsilon = 1e-15);
    }

    #[test]
    fn more_cuts_never_hurt() {
        let g = symmetric();
        let w = PayoffWeights::default();
        let beta = LinearScore::new(1.0, 1.0).unwrap();
        let linear = exante_linear_payoff(beta.beta(), &g, &w).unwrap();
        let mut last = f64::NEG_INFINITY;
        for cuts in [vec![0.0], vec![-0.6, 0.6], vec![-1.0, 0.0, 1.0]] {
            let s = CoarselyLinearScore::new(beta, cuts).unwrap();
            let u = coarsely_linear_payoff(&s, &g, &w).unwrap();
            assert!(u > last);
            assert!(u < linear);
            last = u;
        }
    }

    #[test]
    fn void_cells_are_refused() {
        let g = GaussianModel::new(1.0, 1.0, 0.0).unwrap();
        let w = PayoffWeights::default();
        let s = CoarselyLinearScore::new(
            LinearScore::new(1.0, 0.0).unwrap(),
            vec![8.0, 8.0001],
        )
        .unwrap();
        assert!(matches!(
            coarsely_linear_payoff(&s, &g, &w),
            Err(Error::VoidCell { index: 1, .. })
        ));
    }

    #[test]
    fn cut_validation() {
        let s = LinearScore::new(1.0, 0.0).unwrap();
        assert!(CoarselyLinearScore::new(s, vec![]).is_err());
        assert!(CoarselyLinearScore::new(s, vec![1.0, 1.0]).is_err());
        assert!(CoarselyLinearScore::new(s, vec![2.0, 1.0]).is_err());
        assert!(CoarselyLinearScore::new(s, vec![f64::NAN]).is_err());
        let ok = CoarselyLinearScore::new(s, vec![-1.0, 1.0]).unwrap();
        assert_eq!(ok.k(), 3);
        assert_eq!(ok.cell([-5.0, 0.0]), 0);
        assert_eq!(ok.cell([0.0, 7.0]), 1);
        assert_eq!(ok.cell([2.0, 0.0]), 2);
    }

    #[test]
    fn mc_payoff_is_seed_reproducible() {
        let g = symmetric();
        let w = PayoffWeights::default();
        let cs =
            CoarselyLinearScore::new(LinearScore::new(1.0, 1.0).unwrap(), vec![0.0]).unwrap();
        let f = |th: [f64; 2]| cs.cell(th) as i64;
        let a = mc_payoff(f, &g, &w, 50_000, 7).unwrap();
        let b = mc_payoff(f, &g, &w, 50_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples_used + a.samples_excluded, 50_000);
        assert_eq!(a.messages, 2);
        let c = mc_payoff(f, &g, &w, 50_000, 8).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn mc_payoff_matches_closed_form() {
        let g = symmetric();
        let w = PayoffWeights::default();
        let cs =
            CoarselyLinearScore::new(LinearScore::new(1.0, 1.0).unwrap(), vec![0.0]).unwrap();
        let exact = coarsely_linear_payoff(&cs, &g, &w).unwrap();
        let mc = mc_payoff(|th| cs.cell(th) as i64, &g, &w, 400_000, 11).unwrap();
        assert!(
            (mc.estimate - exact).abs() < 4.0 * mc.std_error,
            "estimate {} vs exact {} with stderr {}",
            mc.estimate,
            exact,
            mc.std_error
        );
    }

    #[test]
    fn angle_sweep_peaks_at_best_score() {
        let g = symmetric();
        let w = PayoffWeights::default();
        let rows = angle_sweep(&g, &w, 1000).unwrap();
        assert_eq!(rows.len(), 1000);
        let best = rows
            .iter()
            .cloned()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // Peak at 45 degrees, value 1.5.
        assert_abs_diff_eq!(best.0, PI / 4.0, epsilon = PI / 1000.0);
        assert_abs_diff_eq!(best.1, 1.5, epsilon = 1e-4);
        for (a, q, u) in rows {
            assert_relative_eq!(u, -2.0 + q, max_relative = 1e-14);
            assert!((0.0..PI).contains(&a));
        }
    }
}
