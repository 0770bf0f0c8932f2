//! Potential evaluation along branches, Birkhoff-sum bounds over cylinders,
//! and the variation moduli used as weak-Gibbs slack.

use crate::env::{EnvModel, EnvPath};
use crate::error::{Error, Result};
use crate::subshift::{is_admissible, Word};

/// Which potential a Birkhoff sum refers to: the geometric log-derivative
/// potential psi or the mass potential phi.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Psi,
    Phi,
}

/// Per-cylinder bounds on a Birkhoff sum: inf_sum <= S_n over the cylinder
/// <= sup_sum. Equal for locally constant potentials.
#[derive(Debug, Clone, Copy)]
pub struct BirkhoffBounds {
    pub inf_sum: f64,
    pub sup_sum: f64,
    pub n: usize,
}

/// psi(omega, s, x) at a geometric point x inside the branch interval.
pub fn eval_psi(path: &EnvPath, k: usize, letter: u8, x: f64) -> Result<f64> {
    let branch = path.branch(k, letter);
    if x < branch.a - 1e-12 || x > branch.b + 1e-12 {
        return Err(Error::Other(format!("x = {x} outside branch [{}, {}]", branch.a, branch.b)));
    }
    Ok(branch.psi_at_u(branch.u_of(x)))
}

/// phi(omega, s, x) at a geometric point x inside the branch interval.
pub fn eval_phi(path: &EnvPath, k: usize, letter: u8, x: f64) -> Result<f64> {
    let branch = path.branch(k, letter);
    if x < branch.a - 1e-12 || x > branch.b + 1e-12 {
        return Err(Error::Other(format!("x = {x} outside branch [{}, {}]", branch.a, branch.b)));
    }
    Ok(branch.phi.eval(branch.u_of(x)))
}

/// Bounds S_n over the cylinder by summing per-step extrema of the potential
/// over the geometric image of the suffix cylinder at each level. Supported
/// profiles are monotone in the normalized coordinate, so endpoint
/// evaluation is exact per step.
pub fn birkhoff_bounds(path: &EnvPath, word: &Word, which: Which) -> Result<BirkhoffBounds> {
    if !is_admissible(path, word) {
        return Err(Error::Inadmissible(word.to_string()));
    }
    let n = word.len();
    let mut inf_sum = 0.0;
    let mut sup_sum = 0.0;
    // walk suffix cylinders from the innermost letter outward, tracking the
    // normalized image of the suffix inside each branch
    let mut per_level = vec![(0.0f64, 0.0f64); n];
    let (mut lo, mut hi) = (0.0f64, 1.0f64); // geometric image of the suffix, in [0,1]
    for (i, &letter) in word.letters.iter().enumerate().rev() {
        let branch = path.branch(word.offset + i, letter);
        // normalized coordinates of the suffix image inside this branch:
        // g maps [lo, hi] (as y-values) onto the geometric child interval.
        // psi/phi profiles live in the Moebius-normalized coordinate z.
        let (zlo, zhi) = match branch.map {
            crate::env::BranchMap::Affine => (lo, hi),
            crate::env::BranchMap::Moebius { c } => {
                (lo / (1.0 + c - c * lo), hi / (1.0 + c - c * hi))
            }
        };
        per_level[i] = match which {
            Which::Psi => branch.psi_range(zlo, zhi),
            Which::Phi => branch.phi.range_on(zlo.min(zhi), zlo.max(zhi)),
        };
        // geometric image for the next (outer) level, renormalized to [0,1]
        // coordinates of that branch's domain
        let glo = branch.g(lo);
        let ghi = branch.g(hi);
        lo = glo;
        hi = ghi;
    }
    for (inf, sup) in per_level {
        inf_sum += inf;
        sup_sum += sup;
    }
    Ok(BirkhoffBounds { inf_sum, sup_sum, n })
}

// ---------------------------------------------------------------------------
// Variation accounting

/// Largest Lipschitz constant of the requested potential over all branches,
/// in the normalized coordinate.
pub fn lipschitz_bound(model: &EnvModel, which: Which) -> f64 {
    model
        .states
        .iter()
        .flat_map(|st| st.branches.iter())
        .map(|b| match which {
            Which::Psi => b.psi_slope_bound(),
            Which::Phi => b.phi.lipschitz_slope(),
        })
        .fold(0.0, f64::max)
}

/// Uniform upper bound on branch contraction ratios. Must be < 1 for the
/// geometric variation bounds to close; every shipped configuration
/// satisfies this.
pub fn contraction_bound(model: &EnvModel) -> f64 {
    model
        .states
        .iter()
        .flat_map(|st| st.branches.iter())
        .map(|b| b.contraction_bound())
        .fold(0.0, f64::max)
}

/// Uniform bound on how much knowing n letters still leaves the potential
/// value uncertain: L * rho^n / (1 - rho). Zero for locally constant
/// potentials; non-increasing in n.
pub fn variation_modulus(model: &EnvModel, n: usize, which: Which) -> f64 {
    let slope = lipschitz_bound(model, which);
    if slope == 0.0 {
        return 0.0;
    }
    let rho = contraction_bound(model);
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    slope * rho.powi(n as i32) / (1.0 - rho)
}

/// Bound on the total gap sup_sum - inf_sum of `birkhoff_bounds` at depth n:
/// the per-level extrema are taken over suffix images of normalized diameter
/// at most rho^(n-1-k), so the gaps sum to at most L (1 - rho^n)/(1 - rho).
pub fn birkhoff_gap_bound(model: &EnvModel, n: usize, which: Which) -> f64 {
    let slope = lipschitz_bound(model, which);
    if slope == 0.0 {
        return 0.0;
    }
    let rho = contraction_bound(model);
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    slope * (1.0 - rho.powi(n as i32)) / (1.0 - rho)
}

/// Per-depth weak-Gibbs slack epsilon(n), post-processed so that
/// n * epsilon(n) is non-decreasing.
pub fn eps_schedule(model: &EnvModel, n_max: usize, which: Which) -> Vec<f64> {
    let mut neps = Vec::with_capacity(n_max);
    let mut running = 0.0f64;
    for n in 1..=n_max {
        let gap = birkhoff_gap_bound(model, n, which);
        running = running.max(gap);
        neps.push(running);
    }
    neps.iter().enumerate().map(|(i, &v)| v / (i + 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_path, BranchMap};
    use crate::presets;
    use crate::subshift::enumerate_words;
    use std::sync::Arc;

    fn path_for(model: crate::env::EnvModel, horizon: usize) -> crate::env::EnvPath {
        sample_path(&Arc::new(model), horizon, "main").unwrap()
    }

    #[test]
    fn affine_psi_is_log_ratio() {
        let path = path_for(presets::bernoulli2(), 10);
        let v = eval_psi(&path, 0, 1, 0.1).unwrap();
        assert!((v - 0.25f64.ln()).abs() < 1e-15);
        assert!((v + 1.3862943611198906).abs() < 1e-12);
    }

    #[test]
    fn moebius_psi_endpoints() {
        let mut model = presets::bernoulli2();
        model.states[0].branches[0].map = BranchMap::Moebius { c: 0.5 };
        let path = path_for(model, 10);
        let at0 = eval_psi(&path, 0, 1, 0.0).unwrap();
        let at1 = eval_psi(&path, 0, 1, 0.25).unwrap();
        assert!(((at1 - at0) - 2.0 * 1.5f64.ln()).abs() < 1e-12);

        // c = 0 degenerates to the affine value
        let mut model0 = presets::bernoulli2();
        model0.states[0].branches[0].map = BranchMap::Moebius { c: 0.0 };
        let path0 = path_for(model0, 10);
        assert!((eval_psi(&path0, 0, 1, 0.2).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn psi_matches_finite_differences() {
        let mut model = presets::bernoulli2();
        model.states[0].branches[1].map = BranchMap::Moebius { c: 0.4 };
        let path = path_for(model, 10);
        let mut stream = crate::rng::Stream::new(11, "fd");
        for letter in [1u8, 2] {
            let branch = path.branch(0, letter);
            for _ in 0..100 {
                let t = 0.05 + 0.9 * stream.next_f64();
                let x = branch.a + t * (branch.b - branch.a);
                let h = 1e-7 * (branch.b - branch.a);
                let f = |x: f64| branch.forward(x);
                let deriv = (f(x + h) - f(x - h)) / (2.0 * h);
                let psi = eval_psi(&path, 0, letter, x).unwrap();
                assert!(
                    ((-deriv.abs().ln()) - psi).abs() / psi.abs().max(1.0) < 1e-6,
                    "letter {letter} x {x}"
                );
            }
        }
    }

    #[test]
    fn locally_constant_bounds_are_tight() {
        let path = path_for(presets::bernoulli2(), 20);
        let w = Word::new(0, vec![1, 2]);
        let b = birkhoff_bounds(&path, &w, Which::Phi).unwrap();
        let expect = (2.0f64 / 3.0).ln() + (1.0f64 / 3.0).ln();
        assert_eq!(b.inf_sum, b.sup_sum);
        assert!((b.sup_sum - expect).abs() < 1e-14);

        let b = birkhoff_bounds(&path, &Word::new(0, vec![1; 7]), Which::Psi).unwrap();
        assert!((b.sup_sum - 7.0 * 0.25f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn lipschitz_gap_shrinks_with_depth() {
        let path = path_for(presets::rand2(), 30);
        let mut prev_gap = f64::INFINITY;
        let mut letters = Vec::new();
        for depth in 1..=6 {
            letters = if letters.is_empty() {
                vec![1]
            } else {
                let mut l = letters.clone();
                let k = depth - 1;
                let prev = *l.last().unwrap();
                let alpha = path.alphabet_size(k) as u8;
                let next = (1..=alpha).find(|&c| path.edge(k - 1).allows(prev, c)).unwrap();
                l.push(next);
                l
            };
            let w = Word::new(0, letters.clone());
            let b = birkhoff_bounds(&path, &w, Which::Phi).unwrap();
            let gap = b.sup_sum - b.inf_sum;
            assert!(gap >= -1e-15);
            // the gap of the final level shrinks with the cylinder; totals
            // stay bounded by the closed-form budget
            assert!(gap <= birkhoff_gap_bound(&path.model, depth, Which::Phi) + 1e-12);
            prev_gap = prev_gap.min(gap);
        }
    }

    #[test]
    fn variation_modulus_closed_form() {
        // lipschitz slope 0.1 on a branch of ratio 1/4: modulus(2) =
        // 0.1 * (1/16) / 0.75
        let mut model = presets::symmetric_quarter();
        model.states[0].branches[0].phi =
            crate::env::PotentialProfile::Lipschitz { value: 0.5f64.ln(), slope: 0.1 };
        let m2 = variation_modulus(&model, 2, Which::Phi);
        assert!((m2 - 0.1 * (1.0 / 16.0) / 0.75).abs() < 1e-15);
        // locally constant psi: zero modulus
        assert_eq!(variation_modulus(&model, 3, Which::Psi), 0.0);
        // n * eps(n) non-decreasing
        let eps = eps_schedule(&model, 12, Which::Phi);
        for n in 1..12 {
            let a = eps[n - 1] * n as f64;
            let b = eps[n] * (n + 1) as f64;
            assert!(b >= a - 1e-15);
        }
    }

    #[test]
    fn bounds_bracket_diameters_exactly() {
        // |U^v| = exp(sum of psi at mean-value points), so the per-level
        // sup/inf bracket is exact for every supported branch kind.
        let mut model = presets::rand2();
        model.states[0].branches[0].map = BranchMap::Moebius { c: -0.2 };
        let path = path_for(model, 30);
        for n in 1..=8 {
            for w in enumerate_words(&path, 0, n).unwrap() {
                let iv = crate::geometry::cylinder_interval(&path, &w).unwrap();
                let b = birkhoff_bounds(&path, &w, Which::Psi).unwrap();
                let diam = iv.diam();
                assert!(
                    diam.ln() >= b.inf_sum - 1e-9 && diam.ln() <= b.sup_sum + 1e-9,
                    "diam bracket failed at {w}: {} not in [{}, {}]",
                    diam.ln(),
                    b.inf_sum,
                    b.sup_sum
                );
            }
        }
    }
}
