//! Oracles shared by the integration suites. Everything here recomputes
//! results from first principles, independent of the library's own
//! algebraic shortcuts, so agreement is evidence rather than tautology.
#![allow(dead_code)] // each test binary uses a different subset

/// Eigenpairs of `ΦΣ` via the symmetrizing congruence: with
/// `S = Φ^{1/2} Σ Φ^{1/2}` symmetric, `S w = λ w` maps to
/// `ΦΣ (Φ^{1/2} w) = λ (Φ^{1/2} w)`. Returns unit, sign-conventioned
/// vectors for the larger and smaller eigenvalue.
pub fn eigen_oracle(s11: f64, s22: f64, s12: f64, phi: f64) -> ([f64; 2], [f64; 2], f64, f64) {
    let r = phi.sqrt();
    let (a, b, c) = (phi * s11, r * s12, s22);
    let tr = a + c;
    let disc = ((a - c) * 0.5).hypot(b);
    let (l1, l2) = (tr * 0.5 + disc, tr * 0.5 - disc);
    let unitize = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        let mut u = [v[0] / n, v[1] / n];
        let neg = if u[0] != 0.0 { u[0] < 0.0 } else { u[1] < 0.0 };
        if neg {
            u = [-u[0], -u[1]];
        }
        u
    };
    let back = |l: f64| {
        let w = if b == 0.0 {
            if (l - a).abs() < (l - c).abs() {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            }
        } else if (l - c).abs() >= (l - a).abs() {
            [l - c, b]
        } else {
            [b, l - a]
        };
        unitize([r * w[0], w[1]])
    };
    (back(l1), back(l2), l1, l2)
}

/// Best two-cell ex-ante payoff by exhausting all bipartitions with a
/// bitmask, computing posterior means directly. Independent of the
/// library's enumeration and score machinery.
pub fn brute_force_two_block(states: &[[f64; 2]], pmf: &[f64], phi: f64) -> f64 {
    let n = states.len();
    assert!((2..=20).contains(&n));
    let mut best = f64::NEG_INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let mut cell = [[0.0f64; 3]; 2]; // mass, Σ f·θ1, Σ f·θ2
        for (i, (s, &f)) in states.iter().zip(pmf).enumerate() {
            let c = ((mask >> i) & 1) as usize;
            cell[c][0] += f;
            cell[c][1] += f * s[0];
            cell[c][2] += f * s[1];
        }
        if cell[0][0] <= 0.0 || cell[1][0] <= 0.0 {
            continue;
        }
        let actions: Vec<[f64; 2]> = cell
            .iter()
            .map(|c| [c[1] / c[0], c[2] / c[0]])
            .collect();
        let mut u = 0.0;
        for (i, (s, &f)) in states.iter().zip(pmf).enumerate() {
            let a = actions[((mask >> i) & 1) as usize];
            u -= f * (phi * (a[0] - s[0]).powi(2) + (a[1] - s[1]).powi(2));
        }
        best = best.max(u);
    }
    best
}
