//! Built-in model configurations.
//!
//! The 1-state models have closed-form pressure (scalar equations of Moran
//! type), which makes them the reference points for the whole pipeline. The
//! 2-state model exercises genuinely random alphabets and admissibility.

use std::collections::BTreeMap;

use crate::env::{Admissibility, BranchMap, BranchSpec, EnvModel, EnvState, PotentialProfile};

fn branch(a: f64, b: f64, phi: f64) -> BranchSpec {
    BranchSpec { a, b, map: BranchMap::Affine, phi: PotentialProfile::Constant { value: phi } }
}

fn one_state(branches: Vec<BranchSpec>, adm: Admissibility, seed: u64) -> EnvModel {
    let mut admissibility = BTreeMap::new();
    admissibility.insert((0usize, 0usize), adm);
    EnvModel {
        states: vec![EnvState { id: 0, branches }],
        transition: vec![vec![1.0]],
        admissibility,
        seed,
    }
}

/// Two affine branches [0,1/4], [1/2,3/4] with masses (2/3, 1/3).
/// Pressure identities: P(Phi) = 0 exactly, t0 = 1/2, calT(0) = -1.
pub fn bernoulli2() -> EnvModel {
    one_state(
        vec![
            branch(0.0, 0.25, (2.0f64 / 3.0).ln()),
            branch(0.5, 0.75, (1.0f64 / 3.0).ln()),
        ],
        Admissibility::full(2, 2),
        07191204,
    )
}

/// Equal-ratio, equal-mass model: branches of ratio 1/4, masses (1/2, 1/2).
/// The scaling exponent is linear (degenerate single-point spectrum).
pub fn symmetric_quarter() -> EnvModel {
    one_state(
        vec![branch(0.0, 0.25, 0.5f64.ln()), branch(0.5, 0.75, 0.5f64.ln())],
        Admissibility::full(2, 2),
        2040915,
    )
}

/// Middle-third Cantor geometry with equal masses; t0 = log 2 / log 3.
pub fn cantor_third() -> EnvModel {
    one_state(
        vec![branch(0.0, 1.0 / 3.0, 0.5f64.ln()), branch(2.0 / 3.0, 1.0, 0.5f64.ln())],
        Admissibility::full(2, 2),
        31219,
    )
}

/// Unequal ratios (1/3, 1/4) and unequal masses (0.6, 0.4).
pub fn moran_a() -> EnvModel {
    one_state(
        vec![branch(0.0, 1.0 / 3.0, 0.6f64.ln()), branch(0.5, 0.75, 0.4f64.ln())],
        Admissibility::full(2, 2),
        5550231,
    )
}

/// Unequal ratios (0.2, 0.45) and masses (0.7, 0.3).
pub fn moran_b() -> EnvModel {
    one_state(
        vec![branch(0.0, 0.2, 0.7f64.ln()), branch(0.45, 0.9, 0.3f64.ln())],
        Admissibility::full(2, 2),
        98766,
    )
}

/// Golden-mean subshift (letter 2 cannot follow itself) on two affine
/// branches with distinct weights.
pub fn golden_mean() -> EnvModel {
    one_state(
        vec![branch(0.0, 0.3, 0.6f64.ln()), branch(0.5, 0.9, 0.55f64.ln())],
        Admissibility { rows: vec![vec![1, 1], vec![1, 0]] },
        40302,
    )
}

/// Branch intervals tiling [0,1]: the attractor is the whole interval, so
/// the zero-Lebesgue check must fail. Used by validation tests.
pub fn tiling() -> EnvModel {
    one_state(
        vec![branch(0.0, 0.5, 0.5f64.ln()), branch(0.5, 1.0, 0.5f64.ln())],
        Admissibility::full(2, 2),
        1,
    )
}

/// Single contracting branch: the attractor is a point. Fails the
/// branching-alphabet check but remains structurally sound; geometry and
/// box-dimension operations still accept it.
pub fn single_branch() -> EnvModel {
    one_state(vec![branch(0.0, 0.5, 0.5f64.ln())], Admissibility::full(1, 1), 2)
}

/// Two-state chain with alphabets (2, 3), mixed admissibility, one Moebius
/// branch and one Lipschitz potential profile. No closed forms; exercised
/// through invariants.
pub fn rand2() -> EnvModel {
    let state0 = EnvState {
        id: 0,
        branches: vec![
            BranchSpec {
                a: 0.0,
                b: 0.28,
                map: BranchMap::Affine,
                phi: PotentialProfile::Lipschitz { value: 0.55f64.ln(), slope: 0.05 },
            },
            BranchSpec {
                a: 0.55,
                b: 0.85,
                map: BranchMap::Moebius { c: 0.3 },
                phi: PotentialProfile::Constant { value: 0.45f64.ln() },
            },
        ],
    };
    let state1 = EnvState {
        id: 1,
        branches: vec![
            BranchSpec {
                a: 0.0,
                b: 0.22,
                map: BranchMap::Affine,
                phi: PotentialProfile::Constant { value: 0.4f64.ln() },
            },
            BranchSpec {
                a: 0.34,
                b: 0.55,
                map: BranchMap::Affine,
                phi: PotentialProfile::Lipschitz { value: 0.35f64.ln(), slope: -0.04 },
            },
            BranchSpec {
                a: 0.7,
                b: 0.92,
                map: BranchMap::Affine,
                phi: PotentialProfile::Constant { value: 0.25f64.ln() },
            },
        ],
    };
    let mut admissibility = BTreeMap::new();
    admissibility.insert((0, 0), Admissibility::full(2, 2));
    admissibility.insert((0, 1), Admissibility { rows: vec![vec![1, 1, 0], vec![0, 1, 1]] });
    admissibility.insert((1, 0), Admissibility { rows: vec![vec![1, 1], vec![1, 0], vec![0, 1]] });
    admissibility.insert((1, 1), Admissibility { rows: vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]] });
    EnvModel {
        states: vec![state0, state1],
        transition: vec![vec![0.6, 0.4], vec![0.5, 0.5]],
        admissibility,
        seed: 660301,
    }
}

/// All 1-state closed-form models used by the oracle-backed tests.
pub fn closed_form_models() -> Vec<(&'static str, EnvModel)> {
    vec![
        ("bernoulli2", bernoulli2()),
        ("moran_a", moran_a()),
        ("moran_b", moran_b()),
    ]
}
