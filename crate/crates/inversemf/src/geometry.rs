//! Interval geometry of the cocycle: cylinder intervals as images of [0,1]
//! under composed inverse branches, attractor extrema by extremal
//! path-following, and the symbolic-to-geometric projection.

use crate::env::{EnvPath, DIAM_UNDERFLOW};
use crate::error::{Error, Result};
use crate::subshift::{is_admissible, Word};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderInterval {
    pub lo: f64,
    pub hi: f64,
    /// Tracked multiplicatively while composing, so it stays meaningful even
    /// when `hi - lo` collapses under absolute rounding at depth.
    diam: f64,
}

impl CylinderInterval {
    pub fn diam(&self) -> f64 {
        self.diam
    }
}

/// Min or max attractor point of a cylinder, with a certified error bound.
#[derive(Debug, Clone, Copy)]
pub struct ExtremaPair {
    pub m: f64,
    pub big_m: f64,
    pub certified_error: f64,
}

/// Image of [0,1] under g^{v_0} ∘ g^{v_1} ∘ ... ∘ g^{v_{n-1}}, computed by
/// composing endpoint images from the innermost map outward.
pub fn cylinder_interval(path: &EnvPath, word: &Word) -> Result<CylinderInterval> {
    if !is_admissible(path, word) {
        return Err(Error::Inadmissible(word.to_string()));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut diam = 1.0f64;
    for (i, &letter) in word.letters.iter().enumerate().rev() {
        let branch = path.branch(word.offset + i, letter);
        // width multiplier of g over [lo, hi]:
        // affine: (b - a); moebius: (b - a)(1+c)/((1+c-c hi)(1+c-c lo))
        let factor = match branch.map {
            crate::env::BranchMap::Affine => branch.len(),
            crate::env::BranchMap::Moebius { c } => {
                branch.len() * (1.0 + c) / ((1.0 + c - c * hi) * (1.0 + c - c * lo))
            }
        };
        diam *= factor;
        lo = branch.g(lo);
        hi = branch.g(hi);
    }
    if !word.is_empty() && diam < DIAM_UNDERFLOW {
        return Err(Error::DepthGuard { depth: word.len() });
    }
    Ok(CylinderInterval { lo, hi, diam })
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// Extends `word` by extremal admissible letters until the cylinder diameter
/// drops below `tol`; returns the deep word. Smallest letters give the
/// leftmost attractor point, largest the rightmost (branches are ordered
/// left to right inside each state).
fn extremal_extension(path: &EnvPath, word: &Word, tol: f64, side: Side) -> Result<Word> {
    let mut current = word.clone();
    if current.is_empty() {
        // seed with the extremal admissible first letter
        let alpha = path.alphabet_size(current.offset) as u8;
        let letter = match side {
            Side::Left => 1,
            Side::Right => alpha,
        };
        current = current.child(letter);
    }
    loop {
        let iv = cylinder_interval(path, &current)?;
        if iv.diam() < tol {
            return Ok(current);
        }
        let k = current.offset + current.len() - 1;
        if k + 1 > path.horizon() {
            // estimate how much deeper we need at the observed contraction
            let per_step = (iv.diam() / 1.0).powf(1.0 / current.len() as f64);
            let extra = ((tol.ln() / per_step.ln()).ceil() as usize).saturating_sub(current.len()) + 1;
            return Err(Error::HorizonTooShort {
                required: current.offset + current.len() + extra,
                available: path.horizon(),
            });
        }
        let prev = *current.letters.last().unwrap();
        let adm = path.edge(k);
        let alpha = path.alphabet_size(k + 1) as u8;
        let next = match side {
            Side::Left => (1..=alpha).find(|&l| adm.allows(prev, l)),
            Side::Right => (1..=alpha).rev().find(|&l| adm.allows(prev, l)),
        };
        // admissibility rows are never all-zero, so a continuation exists
        current = current.child(next.expect("admissibility row has a nonzero entry"));
    }
}

/// Leftmost and rightmost attractor points of the cylinder, certified to
/// `tol` by following extremal admissible continuations until the
/// containing cylinder is smaller than `tol`.
pub fn attractor_extrema(path: &EnvPath, word: &Word, tol: f64) -> Result<ExtremaPair> {
    if tol <= 0.0 {
        return Err(Error::Other("tolerance must be positive".into()));
    }
    if !is_admissible(path, word) {
        return Err(Error::Inadmissible(word.to_string()));
    }
    let left = extremal_extension(path, word, tol, Side::Left)?;
    let right = extremal_extension(path, word, tol, Side::Right)?;
    let left_iv = cylinder_interval(path, &left)?;
    let right_iv = cylinder_interval(path, &right)?;
    Ok(ExtremaPair {
        m: left_iv.lo,
        big_m: right_iv.hi,
        certified_error: left_iv.diam().max(right_iv.diam()),
    })
}

/// Geometric projection of a deep word: the left endpoint of its cylinder,
/// with the diameter as error bound.
pub fn project(path: &EnvPath, word: &Word) -> Result<(f64, f64)> {
    let iv = cylinder_interval(path, word)?;
    Ok((iv.lo, iv.diam()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sample_path;
    use crate::presets;
    use crate::subshift::enumerate_words;
    use std::sync::Arc;

    fn path_for(model: crate::env::EnvModel, horizon: usize) -> EnvPath {
        sample_path(&Arc::new(model), horizon, "main").unwrap()
    }

    #[test]
    fn bernoulli2_cylinders() {
        let path = path_for(presets::bernoulli2(), 50);
        let iv = cylinder_interval(&path, &Word::new(0, vec![1])).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.0, 0.25));
        let iv = cylinder_interval(&path, &Word::new(0, vec![1, 2])).unwrap();
        assert!((iv.lo - 0.125).abs() < 1e-15);
        assert!((iv.hi - 0.1875).abs() < 1e-15);
        let iv = cylinder_interval(&path, &Word::empty(0)).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.0, 1.0));
    }

    #[test]
    fn inadmissible_word_rejected() {
        let path = path_for(presets::golden_mean(), 10);
        assert!(cylinder_interval(&path, &Word::new(0, vec![2, 2])).is_err());
    }

    #[test]
    fn nesting_and_sibling_order() {
        for model in [presets::bernoulli2(), presets::golden_mean(), presets::rand2()] {
            let path = path_for(model, 30);
            for n in 1..=10usize {
                let words: Vec<Word> = enumerate_words(&path, 0, n).unwrap().collect();
                let mut prev_hi = f64::NEG_INFINITY;
                for w in &words {
                    let iv = cylinder_interval(&path, w).unwrap();
                    assert!(iv.diam() > 0.0);
                    // lexicographic order equals spatial order
                    assert!(iv.lo >= prev_hi - 1e-12, "siblings out of order at {w}");
                    prev_hi = iv.hi;
                    if n > 1 {
                        let parent = Word::new(0, w.letters[..n - 1].to_vec());
                        let piv = cylinder_interval(&path, &parent).unwrap();
                        assert!(iv.lo >= piv.lo - 1e-15 && iv.hi <= piv.hi + 1e-15, "not nested at {w}");
                    }
                }
            }
        }
    }

    #[test]
    fn bernoulli2_extrema_closed_form() {
        // leftmost fixed point: g1(0) = 0; rightmost: x = g2(x) = 1/2 + x/4,
        // so x = 2/3. Piece extrema follow by applying one branch map.
        let path = path_for(presets::bernoulli2(), 120);
        let tol = 1e-13;
        let root = attractor_extrema(&path, &Word::empty(0), tol).unwrap();
        assert!((root.m - 0.0).abs() <= tol);
        assert!((root.big_m - 2.0 / 3.0).abs() <= tol);

        let one = attractor_extrema(&path, &Word::new(0, vec![1]), tol).unwrap();
        assert!((one.m - 0.0).abs() <= tol);
        assert!((one.big_m - (2.0 / 3.0) * 0.25).abs() <= tol); // g1(2/3) = 1/6

        let two = attractor_extrema(&path, &Word::new(0, vec![2]), tol).unwrap();
        assert!((two.m - 0.5).abs() <= tol); // g2(0) = 1/2
        assert!((two.big_m - 2.0 / 3.0).abs() <= tol); // g2(2/3) = 2/3
        assert!(one.certified_error <= tol && two.certified_error <= tol);
    }

    #[test]
    fn extrema_monotone_in_tolerance() {
        let path = path_for(presets::rand2(), 200);
        let word = Word::new(0, vec![2, 1]);
        let coarse = attractor_extrema(&path, &word, 1e-4).unwrap();
        let fine = attractor_extrema(&path, &word, 1e-12).unwrap();
        assert!(fine.m >= coarse.m - 1e-4 && fine.m <= coarse.m + 1e-4);
        assert!(fine.big_m >= coarse.big_m - 1e-4 && fine.big_m <= coarse.big_m + 1e-4);
    }

    #[test]
    fn horizon_too_short_reports_requirement() {
        let path = path_for(presets::bernoulli2(), 5);
        let err = attractor_extrema(&path, &Word::new(0, vec![1]), 1e-12).unwrap_err();
        match err {
            Error::HorizonTooShort { required, available } => {
                assert_eq!(available, 5);
                assert!(required > 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn projection_of_deep_words() {
        let path = path_for(presets::bernoulli2(), 60);
        let all_ones = Word::new(0, vec![1; 40]);
        let (x, err) = project(&path, &all_ones).unwrap();
        assert!(x.abs() < 1e-12 && err < 1e-12);
        let mut letters = vec![2u8];
        letters.extend(vec![1u8; 39]);
        let (x, err) = project(&path, &Word::new(0, letters)).unwrap();
        assert!((x - 0.5).abs() < 1e-12 && err < 1e-12);
    }

    #[test]
    fn moebius_branch_matches_affine_at_c_zero() {
        let mut model = presets::bernoulli2();
        model.states[0].branches[0].map = crate::env::BranchMap::Moebius { c: 0.0 };
        let path = path_for(model, 30);
        let iv = cylinder_interval(&path, &Word::new(0, vec![1, 2])).unwrap();
        assert!((iv.lo - 0.125).abs() < 1e-15 && (iv.hi - 0.1875).abs() < 1e-15);
    }
}
