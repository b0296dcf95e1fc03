//! Fixed points of best-response dynamics on discretized priors.
//!
//! The iteration alternates the two halves of an equilibrium: assign every
//! state to its utility-maximizing action (the sender's incentive
//! constraint), then move every action to the posterior mean of its cell
//! (the receiver's best response). Each step weakly raises the ex-ante
//! payoff, so the loop climbs to a fixed point that satisfies both
//! constraints on the discrete prior — a credible partition of the grid.
//!
//! The landscape has many basins. Configurations whose actions fall on one
//! line are an invariant family: on it, the centroid step rotates the line
//! toward the dominant eigenvector direction, reproducing the credible
//! linear scores of the Gaussian model as the grid refines. Those collinear
//! fixed points are genuine but *transversally unstable* — a generic start,
//! or even a collinear seed plus rounding noise amplified over enough
//! iterations, escapes sideways into a better staircase-shaped equilibrium
//! that is not a score at all. [`lloyd`] therefore runs direction seeds
//! through an inner collinear relaxation until the direction settles, and
//! hands the unconstrained iteration a configuration it accepts within a
//! couple of steps; probing the unstable family and the generic basins is
//! [`lloyd_restarts`]'s job.

use crate::error::{Error, Result};
use crate::gaussian::GaussianModel;
use crate::model::{EquilibriumReport, FiniteModel, PayoffWeights};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Anything that exposes weighted planar states.
pub trait WeightedStates: Sync {
    fn points(&self) -> &[[f64; 2]];
    fn mass(&self) -> &[f64];
    /// Effective first-coordinate loss weight for this prior.
    fn weight1(&self, weights: &PayoffWeights) -> f64 {
        weights.phi()
    }
}

impl WeightedStates for FiniteModel {
    fn points(&self) -> &[[f64; 2]] {
        self.states()
    }
    fn mass(&self) -> &[f64] {
        self.pmf()
    }
    fn weight1(&self, weights: &PayoffWeights) -> f64 {
        FiniteModel::weight1(self, weights)
    }
}

/// Square grid of cell centers carrying a renormalized Gaussian density.
///
/// Cell `(i, j)` sits at the center of a `resolution × resolution` tiling
/// of `[-rσ₁, rσ₁] × [-rσ₂, rσ₂]` and carries mass proportional to the
/// bivariate normal density at its center. Mass outside the window is not
/// redistributed beyond the global renormalization, so expect a relative
/// truncation bias of order `exp(-r²/2)`; the default window of
/// [`DEFAULT_HALF_WIDTH`] standard deviations keeps it below 4e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedPrior {
    points: Vec<[f64; 2]>,
    mass: Vec<f64>,
    resolution: usize,
    spacing: [f64; 2],
}

/// Coarsest grid accepted by [`DiscretizedPrior::from_gaussian`].
pub const MIN_RESOLUTION: usize = 32;

/// Default half-width of the discretization window, in standard deviations.
pub const DEFAULT_HALF_WIDTH: f64 = 5.0;

impl DiscretizedPrior {
    pub fn from_gaussian(
        model: &GaussianModel,
        resolution: usize,
        half_width_sigmas: f64,
    ) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidInput(format!(
                "resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
            )));
        }
        if !(half_width_sigmas.is_finite() && half_width_sigmas > 0.0) {
            return Err(Error::InvalidInput(format!(
                "window half-width must be positive, got {half_width_sigmas} sigmas"
            )));
        }
        let sd1 = model.sigma1_sq().sqrt();
        let sd2 = model.sigma2_sq().sqrt();
        let h1 = 2.0 * half_width_sigmas * sd1 / resolution as f64;
        let h2 = 2.0 * half_width_sigmas * sd2 / resolution as f64;
        let det = model.det();
        // Inverse covariance, for the density exponent.
        let (w11, w22, w12) = (
            model.sigma2_sq() / det,
            model.sigma1_sq() / det,
            -model.sigma12() / det,
        );

        let n = resolution * resolution;
        let mut points = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        let mut total = 0.0;
        for j in 0..resolution {
            let y = -half_width_sigmas * sd2 + (j as f64 + 0.5) * h2;
            for i in 0..resolution {
                let x = -half_width_sigmas * sd1 + (i as f64 + 0.5) * h1;
                let quad = w11 * x * x + 2.0 * w12 * x * y + w22 * y * y;
                let m = (-0.5 * quad).exp();
                points.push([x, y]);
                mass.push(m);
                total += m;
            }
        }
        for m in &mut mass {
            *m /= total;
        }
        Ok(Self {
            points,
            mass,
            resolution,
            spacing: [h1, h2],
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Cell side lengths `(h₁, h₂)`.
    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl WeightedStates for DiscretizedPrior {
    fn points(&self) -> &[[f64; 2]] {
        &self.points
    }
    fn mass(&self) -> &[f64] {
        &self.mass
    }
}

/// Neumaier compensated accumulator.
#[derive(Clone, Copy)]
struct Comp {
    s: f64,
    c: f64,
}

impl Comp {
    fn new() -> Self {
        Comp { s: 0.0, c: 0.0 }
    }
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
    fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// Eigenpairs of the symmetric matrix `[[a, b], [b, c]]`, largest first.
/// Eigenvectors are unit length with the first nonzero component positive.
fn sym_eigen2x2(a: f64, b: f64, c: f64) -> ([f64; 2], [f64; 2], f64, f64) {
    let tr = a + c;
    let gap = (a - c).hypot(2.0 * b);
    let l1 = (tr + gap) / 2.0;
    let l2 = (tr - gap) / 2.0;
    let v1 = if b == 0.0 {
        if a >= c {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    } else {
        // Pick the non-cancelling eigenvector formula per branch.
        let raw = if a - c >= 0.0 {
            [(a - c + gap) / 2.0, b]
        } else {
            [b, (c - a + gap) / 2.0]
        };
        let nrm = raw[0].hypot(raw[1]);
        let mut v = [raw[0] / nrm, raw[1] / nrm];
        let flip = if v[0] != 0.0 { v[0] < 0.0 } else { v[1] < 0.0 };
        if flip {
            v = [-v[0], -v[1]];
        }
        v
    };
    let mut v2 = [-v1[1], v1[0]];
    let flip = if v2[0] != 0.0 { v2[0] < 0.0 } else { v2[1] < 0.0 };
    if flip {
        v2 = [-v2[0], -v2[1]];
    }
    (v1, v2, l1, l2)
}

/// Mass-weighted mean and covariance entries `(mean, a, b, c)` of a point
/// set, where the covariance is `[[a, b], [b, c]]`.
fn weighted_moments(points: &[[f64; 2]], mass: &[f64]) -> ([f64; 2], f64, f64, f64) {
    let mut m = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (p, &w) in points.iter().zip(mass) {
        m += w;
        sx += w * p[0];
        sy += w * p[1];
    }
    let mean = [sx / m, sy / m];
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (p, &w) in points.iter().zip(mass) {
        let dx = p[0] - mean[0];
        let dy = p[1] - mean[1];
        a += w * dx * dx;
        b += w * dx * dy;
        c += w * dy * dy;
    }
    (mean, a / m, b / m, c / m)
}

/// Principal (highest-variance) direction of a weighted point set.
pub fn principal_axis<P: WeightedStates>(prior: &P) -> [f64; 2] {
    let (_, a, b, c) = weighted_moments(prior.points(), prior.mass());
    sym_eigen2x2(a, b, c).0
}

fn minor_axis<P: WeightedStates>(prior: &P) -> [f64; 2] {
    let (_, a, b, c) = weighted_moments(prior.points(), prior.mass());
    sym_eigen2x2(a, b, c).1
}

/// One-dimensional weighted quantizer: `k` levels for values `t` (ascending
/// with prefix sums of mass and mass·t), iterated to a fixed point of the
/// midpoint-cut / conditional-mean map.
fn lloyd_max_1d(t: &[f64], pm: &[f64], pmt: &[f64], k: usize) -> Vec<f64> {
    let n = t.len();
    let total = pm[n];
    let spread = t[n - 1] - t[0];
    // Mass-quantile initialization.
    let mut levels = Vec::with_capacity(k);
    let mut lo = 0usize;
    for j in 0..k {
        let target = (j as f64 + 0.5) / k as f64 * total;
        while lo + 1 < n && pm[lo + 1] < target {
            lo += 1;
        }
        levels.push(t[lo.min(n - 1)]);
    }
    if spread == 0.0 {
        return levels;
    }
    for _ in 0..512 {
        let mut max_move = 0.0_f64;
        let mut start = 0usize;
        let mut next = levels.clone();
        for j in 0..k {
            let end = if j + 1 < k {
                let cut = 0.5 * (levels[j] + levels[j + 1]);
                t.partition_point(|&x| x <= cut)
            } else {
                n
            };
            let (m, mt) = (pm[end] - pm[start], pmt[end] - pmt[start]);
            if m > 0.0 {
                let mean = mt / m;
                max_move = max_move.max((mean - next[j]).abs());
                next[j] = mean;
            }
            start = end.max(start);
        }
        levels = next;
        if max_move <= 1e-13 * spread {
            break;
        }
    }
    levels
}

/// Deterministic fallback seed: `n` distinct prior points spread evenly
/// through the order sorted by `key`, then by coordinates.
fn distinct_point_seed<P: WeightedStates>(prior: &P, n: usize, key: &[f64]) -> Vec<[f64; 2]> {
    let pts = prior.points();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| {
        key[a]
            .total_cmp(&key[b])
            .then(pts[a][0].total_cmp(&pts[b][0]))
            .then(pts[a][1].total_cmp(&pts[b][1]))
    });
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut cursor = 0usize;
    for j in 0..n {
        let target = ((j as f64 + 0.5) / n as f64 * pts.len() as f64) as usize;
        let mut idx = target.min(pts.len() - 1).max(cursor);
        while out.contains(&pts[order[idx]]) {
            idx += 1; // distinct states guarantee an unused point ahead
        }
        out.push(pts[order[idx]]);
        cursor = idx + 1;
    }
    out
}

/// Collinear relaxation: holds the action configuration on a moving line
/// and iterates (slab partition ⇒ level quantizer ⇒ cell centroids ⇒
/// refit line) until the direction settles. Returns the cell centroids,
/// which the unconstrained iteration accepts nearly unchanged.
fn relax_direction<P: WeightedStates>(
    prior: &P,
    n: usize,
    weights: &PayoffWeights,
    dir: [f64; 2],
    max_inner: usize,
) -> Vec<[f64; 2]> {
    let pts = prior.points();
    let mass = prior.mass();
    let npts = pts.len();
    let phi1 = prior.weight1(weights);
    let mut v = {
        let nv = dir[0].hypot(dir[1]);
        [dir[0] / nv, dir[1] / nv]
    };

    let mut centroids: Vec<[f64; 2]> = Vec::new();
    let mut c_key = vec![0.0_f64; npts];
    for _ in 0..max_inner {
        // Actions on the line along v induce slabs normal to Φv.
        let u = [phi1 * v[0], v[1]];
        let un = u[0].hypot(u[1]);
        let u = [u[0] / un, u[1] / un];
        for (i, p) in pts.iter().enumerate() {
            c_key[i] = u[0] * p[0] + u[1] * p[1];
        }
        let mut order: Vec<usize> = (0..npts).collect();
        order.sort_by(|&a, &b| c_key[a].total_cmp(&c_key[b]).then(a.cmp(&b)));
        let sorted_c: Vec<f64> = order.iter().map(|&i| c_key[i]).collect();
        let mut pm = vec![0.0_f64; npts + 1];
        let mut pmc = vec![0.0_f64; npts + 1];
        let mut pmx = vec![0.0_f64; npts + 1];
        let mut pmy = vec![0.0_f64; npts + 1];
        for (r, &i) in order.iter().enumerate() {
            pm[r + 1] = pm[r] + mass[i];
            pmc[r + 1] = pmc[r] + mass[i] * c_key[i];
            pmx[r + 1] = pmx[r] + mass[i] * pts[i][0];
            pmy[r + 1] = pmy[r] + mass[i] * pts[i][1];
        }

        let levels = lloyd_max_1d(&sorted_c, &pm, &pmc, n);
        centroids.clear();
        let mut cell_mass = Vec::with_capacity(n);
        let mut start = 0usize;
        for j in 0..n {
            let end = if j + 1 < n {
                let cut = 0.5 * (levels[j] + levels[j + 1]);
                sorted_c.partition_point(|&x| x <= cut)
            } else {
                npts
            };
            let m = pm[end] - pm[start];
            if m > 0.0 {
                centroids.push([
                    (pmx[end] - pmx[start]) / m,
                    (pmy[end] - pmy[start]) / m,
                ]);
                cell_mass.push(m);
            }
            start = end.max(start);
        }
        if centroids.len() < 2 {
            break;
        }

        // Refit the line through the centroids, mass-weighted.
        let (_, a, b, c) = weighted_moments(&centroids, &cell_mass);
        let (mut v1, _, l1, _) = sym_eigen2x2(a, b, c);
        if l1 <= 0.0 {
            break;
        }
        if v1[0] * v[0] + v1[1] * v[1] < 0.0 {
            v1 = [-v1[0], -v1[1]];
        }
        let delta = (v1[0] - v[0]).hypot(v1[1] - v[1]);
        v = v1;
        if delta < 1e-14 {
            break;
        }
    }

    // The relaxation can collapse cells on degenerate directions; hand a
    // plain distinct-point seed to the caller in that case.
    let mut ok = centroids.len() == n && centroids.iter().all(|p| p[0].is_finite() && p[1].is_finite());
    if ok {
        'dist: for i in 0..n {
            for j in (i + 1)..n {
                if centroids[i] == centroids[j] {
                    ok = false;
                    break 'dist;
                }
            }
        }
    }
    if ok {
        centroids
    } else {
        distinct_point_seed(prior, n, &c_key)
    }
}

/// Starting configuration for [`lloyd`].
#[derive(Debug, Clone, PartialEq)]
pub enum LloydInit {
    /// Collinear relaxation seed along the prior's principal axis.
    PrincipalAxis,
    /// Collinear relaxation seed along an explicit direction.
    Direction([f64; 2]),
    /// Explicit starting actions: exactly `n` distinct finite points.
    Points(Vec<[f64; 2]>),
}

/// A fixed point (or best effort within `max_iter`) of the best-response
/// iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydState {
    /// Action per message, `n` entries.
    pub actions: Vec<[f64; 2]>,
    /// Message per prior point (index into `actions`).
    pub assignment: Vec<usize>,
    /// Ex-ante payoff of (`actions`, `assignment`) under the prior.
    pub objective: f64,
    /// Completed assign-centroid iterations.
    pub iterations: usize,
    /// Empty-cell repairs performed.
    pub repairs: usize,
    /// False when the loop hit `max_iter` without the improvement dropping
    /// under `tol`.
    pub converged: bool,
    /// Objective after every iteration, then after the final assignment
    /// pass; nondecreasing.
    pub objective_trace: Vec<f64>,
}

/// Default stopping tolerance on per-iteration objective improvement.
pub const LLOYD_TOL: f64 = 1e-12;

/// Default iteration cap.
pub const LLOYD_MAX_ITER: usize = 10_000;

fn assign_points<P: WeightedStates>(
    prior: &P,
    actions: &[[f64; 2]],
    phi1: f64,
) -> Vec<usize> {
    let pts = prior.points();
    let chunks = par::map_chunks(pts.len(), par::CHUNK, |_, range| {
        range
            .map(|p| {
                let th = pts[p];
                let mut best = 0usize;
                let mut best_u = f64::NEG_INFINITY;
                for (j, a) in actions.iter().enumerate() {
                    let d1 = a[0] - th[0];
                    let d2 = a[1] - th[1];
                    let u = -phi1 * d1 * d1 - d2 * d2;
                    if u > best_u {
                        best_u = u;
                        best = j;
                    }
                }
                best
            })
            .collect::<Vec<usize>>()
    });
    chunks.into_iter().flatten().collect()
}

fn cell_stats<P: WeightedStates>(
    prior: &P,
    assignment: &[usize],
    n: usize,
) -> Vec<[f64; 3]> {
    let pts = prior.points();
    let mass = prior.mass();
    let partials = par::map_chunks(pts.len(), par::CHUNK, |_, range| {
        let mut acc = vec![[0.0_f64; 3]; n];
        for p in range {
            let j = assignment[p];
            let m = mass[p];
            acc[j][0] += m;
            acc[j][1] += m * pts[p][0];
            acc[j][2] += m * pts[p][1];
        }
        acc
    });
    let mut total = vec![[0.0_f64; 3]; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t[0] += p[0];
            t[1] += p[1];
            t[2] += p[2];
        }
    }
    total
}

fn objective_of<P: WeightedStates>(
    prior: &P,
    actions: &[[f64; 2]],
    assignment: &[usize],
    phi1: f64,
) -> f64 {
    let pts = prior.points();
    let mass = prior.mass();
    let partials = par::map_chunks(pts.len(), par::CHUNK, |_, range| {
        let mut acc = Comp::new();
        for p in range {
            let a = actions[assignment[p]];
            let d1 = a[0] - pts[p][0];
            let d2 = a[1] - pts[p][1];
            acc.add(mass[p] * (-phi1 * d1 * d1 - d2 * d2));
        }
        (acc.s, acc.c)
    });
    let mut total = Comp::new();
    for (s, c) in partials {
        total.add(s);
        total.add(c);
    }
    total.total()
}

fn validate_common<P: WeightedStates>(prior: &P, n: usize, tol: f64, max_iter: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 actions, got {n}"
        )));
    }
    let positive = prior.mass().iter().filter(|&&m| m > 0.0).count();
    if positive < n {
        return Err(Error::InvalidInput(format!(
            "prior has {positive} points with positive mass, fewer than n = {n}"
        )));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    Ok(())
}

fn resolve_init<P: WeightedStates>(
    prior: &P,
    n: usize,
    weights: &PayoffWeights,
    init: &LloydInit,
) -> Result<Vec<[f64; 2]>> {
    let actions = match init {
        LloydInit::PrincipalAxis => relax_direction(prior, n, weights, principal_axis(prior), 300),
        LloydInit::Direction(d) => {
            if !(d[0].is_finite() && d[1].is_finite()) || (d[0] == 0.0 && d[1] == 0.0) {
                return Err(Error::InvalidInput(format!(
                    "direction must be finite and nonzero, got ({}, {})",
                    d[0], d[1]
                )));
            }
            relax_direction(prior, n, weights, *d, 300)
        }
        LloydInit::Points(p) => p.clone(),
    };
    if actions.len() != n {
        return Err(Error::InvalidInput(format!(
            "init provides {} actions but n = {n}",
            actions.len()
        )));
    }
    for (i, a) in actions.iter().enumerate() {
        if !(a[0].is_finite() && a[1].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "init action {i} is not finite: ({}, {})",
                a[0], a[1]
            )));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if actions[i] == actions[j] {
                return Err(Error::InvalidInput(format!(
                    "init actions {i} and {j} coincide at ({}, {})",
                    actions[i][0], actions[i][1]
                )));
            }
        }
    }
    Ok(actions)
}

/// Runs the assign/centroid iteration from `init` until the objective
/// improves by less than `tol` or `max_iter` iterations elapse.
///
/// Assignment ties break to the lowest action index. A cell that captures
/// zero mass is repaired by reseeding its action at the worst-served
/// point (the repair is counted, never silent). The loop ends with one
/// extra assignment pass so the returned state satisfies the sender's
/// incentive constraint against its own actions exactly; the recorded
/// objective trace is nondecreasing.
pub fn lloyd<P: WeightedStates>(
    prior: &P,
    n: usize,
    weights: &PayoffWeights,
    init: &LloydInit,
    tol: f64,
    max_iter: usize,
) -> Result<LloydState> {
    validate_common(prior, n, tol, max_iter)?;
    let mut actions = resolve_init(prior, n, weights, init)?;
    let pts = prior.points();
    let mass = prior.mass();
    let phi1 = prior.weight1(weights);

    let mut assignment;
    let mut trace = Vec::new();
    let mut repairs = 0usize;
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0usize;

    for it in 1..=max_iter {
        iterations = it;
        assignment = assign_points(prior, &actions, phi1);

        // Repair cells that captured no mass.
        let mut stats = cell_stats(prior, &assignment, n);
        let empties: Vec<usize> = (0..n).filter(|&j| stats[j][0] <= 0.0).collect();
        if !empties.is_empty() {
            let mut taken = vec![false; pts.len()];
            for j in empties {
                let mut worst: Option<(f64, usize)> = None;
                for (p, th) in pts.iter().enumerate() {
                    if mass[p] <= 0.0 || taken[p] {
                        continue;
                    }
                    let a = actions[assignment[p]];
                    let d1 = a[0] - th[0];
                    let d2 = a[1] - th[1];
                    let u = -phi1 * d1 * d1 - d2 * d2;
                    if worst.map_or(true, |(wu, _)| u < wu) {
                        worst = Some((u, p));
                    }
                }
                let (_, p) = worst.expect("positive-mass points outnumber actions");
                actions[j] = pts[p];
                assignment[p] = j;
                taken[p] = true;
                repairs += 1;
            }
            stats = cell_stats(prior, &assignment, n);
        }

        for (j, s) in stats.iter().enumerate() {
            if s[0] > 0.0 {
                actions[j] = [s[1] / s[0], s[2] / s[0]];
            }
        }

        let obj = objective_of(prior, &actions, &assignment, phi1);
        trace.push(obj);
        if obj - prev < tol {
            converged = true;
            break;
        }
        prev = obj;
    }

    // Final assignment pass: incentive constraints hold exactly at exit.
    assignment = assign_points(prior, &actions, phi1);
    let objective = objective_of(prior, &actions, &assignment, phi1);
    trace.push(objective);

    Ok(LloydState {
        actions,
        assignment,
        objective,
        iterations,
        repairs,
        converged,
        objective_trace: trace,
    })
}

/// Best objective over all mass-positive halfspace bipartitions of a small
/// point set, in the Φ-scaled metric; returns the two cell centroids.
fn best_halfspace_pair<P: WeightedStates>(
    prior: &P,
    weights: &PayoffWeights,
) -> Option<Vec<[f64; 2]>> {
    let pts = prior.points();
    let mass = prior.mass();
    let npts = pts.len();
    let phi1 = prior.weight1(weights);
    let root = phi1.sqrt();
    let scaled: Vec<[f64; 2]> = pts.iter().map(|p| [root * p[0], p[1]]).collect();

    // Normal directions where the projected order can change, then probe
    // between consecutive ones.
    let mut angles = Vec::new();
    for i in 0..npts {
        for j in (i + 1)..npts {
            let d = [scaled[j][0] - scaled[i][0], scaled[j][1] - scaled[i][1]];
            let mut a = d[1].atan2(d[0]) + PI / 2.0;
            while a >= PI {
                a -= PI;
            }
            while a < 0.0 {
                a += PI;
            }
            angles.push(a);
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let mut probes = angles.clone();
    for w in angles.windows(2) {
        probes.push(0.5 * (w[0] + w[1]));
    }
    if let (Some(&first), Some(&last)) = (angles.first(), angles.last()) {
        probes.push((last + (first + PI)) / 2.0 % PI);
    }

    let mut best: Option<(f64, Vec<[f64; 2]>)> = None;
    let mut order: Vec<usize> = (0..npts).collect();
    for &a in &probes {
        let u = [a.cos(), a.sin()];
        order.sort_by(|&x, &y| {
            let tx = u[0] * scaled[x][0] + u[1] * scaled[x][1];
            let ty = u[0] * scaled[y][0] + u[1] * scaled[y][1];
            tx.total_cmp(&ty).then(x.cmp(&y))
        });
        // Prefix sums in sorted order over the *original* coordinates.
        let mut cm = vec![0.0; npts + 1];
        let mut cx = vec![0.0; npts + 1];
        let mut cy = vec![0.0; npts + 1];
        let mut cxx = vec![0.0; npts + 1];
        let mut cyy = vec![0.0; npts + 1];
        for (r, &i) in order.iter().enumerate() {
            let m = mass[i];
            cm[r + 1] = cm[r] + m;
            cx[r + 1] = cx[r] + m * pts[i][0];
            cy[r + 1] = cy[r] + m * pts[i][1];
            cxx[r + 1] = cxx[r] + m * pts[i][0] * pts[i][0];
            cyy[r + 1] = cyy[r] + m * pts[i][1] * pts[i][1];
        }
        let total = npts;
        for cut in 1..total {
            let (m1, m2) = (cm[cut], cm[total] - cm[cut]);
            if m1 <= 0.0 || m2 <= 0.0 {
                continue;
            }
            let seg = |lo: usize, hi: usize, m: f64| -> f64 {
                let sx = cx[hi] - cx[lo];
                let sy = cy[hi] - cy[lo];
                let sxx = cxx[hi] - cxx[lo];
                let syy = cyy[hi] - cyy[lo];
                -(phi1 * (sxx - sx * sx / m) + (syy - sy * sy / m))
            };
            let obj = seg(0, cut, m1) + seg(cut, total, m2);
            if best.as_ref().map_or(true, |(b, _)| obj > *b) {
                let c1 = [(cx[cut]) / m1, (cy[cut]) / m1];
                let c2 = [
                    (cx[total] - cx[cut]) / m2,
                    (cy[total] - cy[cut]) / m2,
                ];
                if c1 != c2 {
                    best = Some((obj, vec![c1, c2]));
                }
            }
        }
    }
    best.map(|(_, pair)| pair)
}

/// Point-set size up to which [`lloyd_restarts`] runs the exhaustive
/// halfspace sweep for two-action problems.
const HALFSPACE_SWEEP_LIMIT: usize = 64;

/// Multi-start driver around [`lloyd`].
///
/// Probe 0 relaxes along the principal axis of the prior and the next
/// structured probes cover the minor axis and (for two actions on priors
/// of at most [`HALFSPACE_SWEEP_LIMIT`] points) the best halfspace split
/// found by an exhaustive sweep of separating directions — the global
/// two-cell optimum is always such a split. Remaining restarts alternate
/// between relaxation seeds along seeded random directions and (on priors
/// small enough to enumerate) random distinct-state seeds, so both the
/// collinear family and the generic basins get probed. The best objective
/// wins; ties keep the earliest probe.
pub fn lloyd_restarts<P: WeightedStates>(
    prior: &P,
    n: usize,
    weights: &PayoffWeights,
    restarts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<LloydState> {
    if restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    validate_common(prior, n, tol, max_iter)?;

    let mut inits: Vec<LloydInit> = vec![LloydInit::PrincipalAxis];
    if n == 2 && prior.points().len() <= HALFSPACE_SWEEP_LIMIT {
        if let Some(pair) = best_halfspace_pair(prior, weights) {
            inits.push(LloydInit::Points(pair));
        }
    }
    inits.push(LloydInit::Direction(minor_axis(prior)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small = prior.points().len() <= HALFSPACE_SWEEP_LIMIT;
    let mut flip = false;
    while inits.len() < restarts {
        if flip && small {
            // Random distinct-state seed.
            let positive: Vec<usize> = (0..prior.points().len())
                .filter(|&p| prior.mass()[p] > 0.0)
                .collect();
            let mut idx = positive.clone();
            for i in 0..n {
                let j = rng.gen_range(i..idx.len());
                idx.swap(i, j);
            }
            let pts: Vec<[f64; 2]> = idx[..n].iter().map(|&p| prior.points()[p]).collect();
            inits.push(LloydInit::Points(pts));
        } else {
            let angle: f64 = rng.gen_range(0.0..PI);
            inits.push(LloydInit::Direction([angle.cos(), angle.sin()]));
        }
        flip = !flip;
    }
    inits.truncate(restarts);

    let mut best: Option<LloydState> = None;
    for init in &inits {
        let state = lloyd(prior, n, weights, init, tol, max_iter)?;
        if best.as_ref().map_or(true, |b| state.objective > b.objective) {
            best = Some(state);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// Recomputes the incentive slacks of a fixed point against all of its
/// actions (used or not): per point, on-path utility minus the best
/// alternative action's utility. `best_deviation` reports 0-based
/// `(point index, action index)`.
pub fn ic_audit<P: WeightedStates>(
    state: &LloydState,
    prior: &P,
    weights: &PayoffWeights,
    tol: f64,
) -> Result<EquilibriumReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "audit tolerance must be finite and nonnegative, got {tol}"
        )));
    }
    let pts = prior.points();
    let mass = prior.mass();
    if state.assignment.len() != pts.len() {
        return Err(Error::InvalidInput(format!(
            "state assigns {} points but the prior has {}",
            state.assignment.len(),
            pts.len()
        )));
    }
    let n = state.actions.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "audit needs at least two actions".into(),
        ));
    }
    let phi1 = prior.weight1(weights);

    let chunks = par::map_chunks(pts.len(), par::CHUNK, |_, range| {
        let mut slacks = Vec::with_capacity(range.len());
        let mut acc = Comp::new();
        let mut worst: Option<(f64, usize, usize)> = None;
        for p in range {
            let th = pts[p];
            let own_j = state.assignment[p];
            let a = state.actions[own_j];
            let d1 = a[0] - th[0];
            let d2 = a[1] - th[1];
            let own = -phi1 * d1 * d1 - d2 * d2;
            acc.add(mass[p] * own);
            let mut slack = f64::INFINITY;
            let mut dev = 0usize;
            for (j, b) in state.actions.iter().enumerate() {
                if j == own_j {
                    continue;
                }
                let e1 = b[0] - th[0];
                let e2 = b[1] - th[1];
                let gap = own - (-phi1 * e1 * e1 - e2 * e2);
                if gap < slack {
                    slack = gap;
                    dev = j;
                }
            }
            slacks.push(slack);
            if worst.map_or(true, |(w, _, _)| slack < w) {
                worst = Some((slack, p, dev));
            }
        }
        (slacks, acc.s, acc.c, worst)
    });

    let mut ic_slack = Vec::with_capacity(pts.len());
    let mut acc = Comp::new();
    let mut worst: Option<(f64, usize, usize)> = None;
    for (slacks, s, c, w) in chunks {
        ic_slack.extend(slacks);
        acc.add(s);
        acc.add(c);
        if let Some((ws, wp, wd)) = w {
            if worst.map_or(true, |(bs, _, _)| ws < bs) {
                worst = Some((ws, wp, wd));
            }
        }
    }
    let (min_slack, point, dev) = worst.expect("audited priors are non-empty");
    Ok(EquilibriumReport {
        exante_payoff: acc.total(),
        ic_slack,
        credible: min_slack >= -tol,
        best_deviation: Some((point, dev)),
    })
}

/// Geometry summary of a fixed point on a grid prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeDiagnostics {
    /// Max distance of the actions from their best-fit line, over the
    /// action diameter. Exactly 0 for two actions.
    pub collinearity: f64,
    /// Largest pairwise angle (mod π) between fitted boundary normals.
    /// 0 when fewer than two boundaries could be fitted.
    pub parallelism_spread: f64,
    /// Consecutive-cell boundaries that had at least two band points.
    pub boundaries_fitted: usize,
    /// Boundaries skipped for lack of band points.
    pub boundaries_skipped: usize,
}

/// Measures how close a fixed point is to a coarsely linear score: are the
/// actions collinear, and are the cell boundaries parallel?
///
/// Boundary bands collect grid points whose top two actions are a
/// consecutive pair (cells ordered along the action line) and whose
/// utility gap is below `‖2Φ(aᵢ - aⱼ)‖ h`, with `h` half the grid cell
/// diagonal — the tightest band guaranteed to contain every grid point
/// adjacent to the true bisector line.
pub fn shape_diagnostics(
    state: &LloydState,
    prior: &DiscretizedPrior,
    weights: &PayoffWeights,
) -> Result<ShapeDiagnostics> {
    let pts = prior.points();
    if state.assignment.len() != pts.len() {
        return Err(Error::InvalidInput(format!(
            "state assigns {} points but the prior has {}",
            state.assignment.len(),
            pts.len()
        )));
    }
    let n = state.actions.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "diagnostics need at least two actions".into(),
        ));
    }
    let phi1 = prior.weight1(weights);

    // Collinearity of the actions.
    let uniform = vec![1.0; n];
    let (center, a, b, c) = weighted_moments(&state.actions, &uniform);
    let (axis, normal, _, _) = sym_eigen2x2(a, b, c);
    let mut diameter = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (state.actions[i][0] - state.actions[j][0])
                .hypot(state.actions[i][1] - state.actions[j][1]);
            diameter = diameter.max(d);
        }
    }
    let collinearity = if n == 2 || diameter == 0.0 {
        0.0
    } else {
        let mut worst = 0.0_f64;
        for act in &state.actions {
            let dev = (act[0] - center[0]) * normal[0] + (act[1] - center[1]) * normal[1];
            worst = worst.max(dev.abs());
        }
        worst / diameter
    };

    // Order the cells along the action line.
    let mut cell_order: Vec<usize> = (0..n).collect();
    cell_order.sort_by(|&i, &j| {
        let ti = state.actions[i][0] * axis[0] + state.actions[i][1] * axis[1];
        let tj = state.actions[j][0] * axis[0] + state.actions[j][1] * axis[1];
        ti.total_cmp(&tj).then(i.cmp(&j))
    });

    let h = 0.5 * prior.spacing()[0].hypot(prior.spacing()[1]);

    // Top-2 actions per grid point.
    let top2: Vec<(usize, usize, f64)> = {
        let chunks = par::map_chunks(pts.len(), par::CHUNK, |_, range| {
            range
                .map(|p| {
                    let th = pts[p];
                    let mut b1 = (f64::NEG_INFINITY, 0usize);
                    let mut b2 = (f64::NEG_INFINITY, 0usize);
                    for (j, act) in state.actions.iter().enumerate() {
                        let d1 = act[0] - th[0];
                        let d2 = act[1] - th[1];
                        let u = -phi1 * d1 * d1 - d2 * d2;
                        if u > b1.0 {
                            b2 = b1;
                            b1 = (u, j);
                        } else if u > b2.0 {
                            b2 = (u, j);
                        }
                    }
                    (b1.1, b2.1, b1.0 - b2.0)
                })
                .collect::<Vec<_>>()
        });
        chunks.into_iter().flatten().collect()
    };

    let mut normals = Vec::new();
    let mut skipped = 0usize;
    for w in cell_order.windows(2) {
        let (i, j) = (w[0], w[1]);
        let diff = [
            state.actions[i][0] - state.actions[j][0],
            state.actions[i][1] - state.actions[j][1],
        ];
        let grad = (2.0 * phi1 * diff[0]).hypot(2.0 * diff[1]);
        let band: Vec<[f64; 2]> = pts
            .iter()
            .zip(&top2)
            .filter(|(_, &(t1, t2, gap))| {
                ((t1 == i && t2 == j) || (t1 == j && t2 == i)) && gap <= grad * h
            })
            .map(|(p, _)| *p)
            .collect();
        if band.len() < 2 {
            skipped += 1;
            continue;
        }
        let unif = vec![1.0; band.len()];
        let (_, ba, bb, bc) = weighted_moments(&band, &unif);
        let (_, bnormal, _, _) = sym_eigen2x2(ba, bb, bc);
        let mut ang = bnormal[1].atan2(bnormal[0]);
        while ang < 0.0 {
            ang += PI;
        }
        while ang >= PI {
            ang -= PI;
        }
        normals.push(ang);
    }

    let mut spread = 0.0_f64;
    for i in 0..normals.len() {
        for j in (i + 1)..normals.len() {
            let d = (normals[i] - normals[j]).abs();
            spread = spread.max(d.min(PI - d));
        }
    }

    Ok(ShapeDiagnostics {
        collinearity,
        parallelism_spread: spread,
        boundaries_fitted: normals.len(),
        boundaries_skipped: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_square() -> FiniteModel {
        FiniteModel::new_2d(
            &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            &[0.25; 4],
        )
        .unwrap()
    }

    #[test]
    fn grid_prior_is_normalized_and_symmetric() {
        let g = GaussianModel::new(1.0, 1.0, 0.5).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 32, 5.0).unwrap();
        assert_eq!(prior.len(), 1024);
        let total: f64 = prior.mass().iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        // Central symmetry of the density: cell k and its antipode match.
        let n = prior.len();
        for k in [0usize, 17, 400] {
            assert_relative_eq!(
                prior.mass()[k],
                prior.mass()[n - 1 - k],
                max_relative = 1e-12
            );
        }
        let h = prior.spacing();
        assert_relative_eq!(h[0], 10.0 / 32.0, max_relative = 1e-15);
    }

    #[test]
    fn grid_prior_rejects_coarse_resolutions() {
        let g = GaussianModel::new(1.0, 1.0, 0.0).unwrap();
        assert!(DiscretizedPrior::from_gaussian(&g, 31, 5.0).is_err());
        assert!(DiscretizedPrior::from_gaussian(&g, 32, 0.0).is_err());
    }

    #[test]
    fn tie_breaking_keeps_the_lowest_action() {
        // From the corner pair, both off-corner states are equidistant and
        // must join cell 0; the run settles at the lopsided 3-1 split.
        let model = uniform_square();
        let init = LloydInit::Points(vec![[0.0, 0.0], [1.0, 1.0]]);
        let state = lloyd(
            &model,
            2,
            &PayoffWeights::default(),
            &init,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        assert!(state.converged);
        assert_relative_eq!(state.objective, -1.0 / 3.0, max_relative = 1e-13);
        assert_eq!(state.assignment, vec![0, 0, 0, 1]);
    }

    #[test]
    fn restarts_escape_the_tie_trap() {
        let model = uniform_square();
        let state = lloyd_restarts(
            &model,
            2,
            &PayoffWeights::default(),
            50,
            1234,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        assert_relative_eq!(state.objective, -0.25, max_relative = 1e-13);
    }

    #[test]
    fn objective_trace_is_nondecreasing() {
        let g = GaussianModel::new(1.0, 0.8, 0.3).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 48, 5.0).unwrap();
        let state = lloyd(
            &prior,
            4,
            &PayoffWeights::default(),
            &LloydInit::PrincipalAxis,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        assert!(state.converged);
        for w in state.objective_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-12,
                "objective fell from {} to {}",
                w[0],
                w[1]
            );
        }
        assert_eq!(
            state.objective,
            *state.objective_trace.last().unwrap()
        );
    }

    #[test]
    fn empty_cells_are_repaired_and_counted() {
        let model = uniform_square();
        let init = LloydInit::Points(vec![[0.5, 0.5], [10.0, 10.0]]);
        let state = lloyd(
            &model,
            2,
            &PayoffWeights::default(),
            &init,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        assert!(state.repairs >= 1);
        assert!(state.converged);
        // Both cells end up used.
        assert!(state.assignment.iter().any(|&j| j == 0));
        assert!(state.assignment.iter().any(|&j| j == 1));
    }

    #[test]
    fn fixed_points_pass_their_own_audit() {
        let g = GaussianModel::new(1.0, 1.0, 0.5).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 48, 5.0).unwrap();
        let w = PayoffWeights::default();
        let state = lloyd(
            &prior,
            3,
            &w,
            &LloydInit::PrincipalAxis,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        let audit = ic_audit(&state, &prior, &w, 0.0).unwrap();
        assert!(audit.credible);
        assert!(audit.ic_slack.iter().all(|&s| s >= 0.0));
        assert_relative_eq!(audit.exante_payoff, state.objective, max_relative = 1e-12);
    }

    #[test]
    fn invalid_inits_are_rejected() {
        let model = uniform_square();
        let w = PayoffWeights::default();
        let dup = LloydInit::Points(vec![[0.0, 0.0], [0.0, 0.0]]);
        assert!(lloyd(&model, 2, &w, &dup, LLOYD_TOL, 10).is_err());
        let short = LloydInit::Points(vec![[0.0, 0.0]]);
        assert!(lloyd(&model, 2, &w, &short, LLOYD_TOL, 10).is_err());
        let nan = LloydInit::Direction([f64::NAN, 1.0]);
        assert!(lloyd(&model, 2, &w, &nan, LLOYD_TOL, 10).is_err());
        assert!(lloyd(&model, 5, &w, &LloydInit::PrincipalAxis, LLOYD_TOL, 10).is_err());
        assert!(lloyd(&model, 1, &w, &LloydInit::PrincipalAxis, LLOYD_TOL, 10).is_err());
    }

    #[test]
    fn principal_axis_of_a_tilted_prior() {
        let g = GaussianModel::new(1.0, 1.0, 0.9).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 48, 5.0).unwrap();
        let v = principal_axis(&prior);
        assert_relative_eq!(v[0], std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-6);
        assert_relative_eq!(v[1], std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-6);
    }

    #[test]
    fn principal_axis_seed_stays_collinear() {
        let g = GaussianModel::new(1.0, 1.0, 0.5).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 64, 5.0).unwrap();
        let w = PayoffWeights::default();
        let state = lloyd(
            &prior,
            5,
            &w,
            &LloydInit::PrincipalAxis,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        let d = shape_diagnostics(&state, &prior, &w).unwrap();
        assert!(
            d.collinearity < 1e-10,
            "relaxed seed escaped the line: {}",
            d.collinearity
        );
        assert!(state.iterations <= 4, "handoff took {}", state.iterations);
    }

    #[test]
    fn diagnostics_flag_non_collinear_states() {
        let g = GaussianModel::new(1.0, 1.0, 0.0).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 48, 5.0).unwrap();
        let w = PayoffWeights::default();
        // A square of actions is as far from a line as it gets.
        let init = LloydInit::Points(vec![
            [-1.0, -1.0],
            [1.0, -1.0],
            [-1.0, 1.0],
            [1.0, 1.0],
        ]);
        let state = lloyd(&prior, 4, &w, &init, LLOYD_TOL, LLOYD_MAX_ITER).unwrap();
        let d = shape_diagnostics(&state, &prior, &w).unwrap();
        assert!(d.collinearity > 0.2, "square config read as a line");
    }

    #[test]
    fn two_action_states_are_exactly_collinear() {
        let g = GaussianModel::new(1.0, 1.0, 0.3).unwrap();
        let prior = DiscretizedPrior::from_gaussian(&g, 32, 5.0).unwrap();
        let w = PayoffWeights::default();
        let state = lloyd(
            &prior,
            2,
            &w,
            &LloydInit::PrincipalAxis,
            LLOYD_TOL,
            LLOYD_MAX_ITER,
        )
        .unwrap();
        let d = shape_diagnostics(&state, &prior, &w).unwrap();
        assert_eq!(d.collinearity, 0.0);
    }
}
