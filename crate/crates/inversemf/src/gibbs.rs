//! The random weak Gibbs measure: transfer-operator application, the
//! eigenvalue sequence and eigenmeasure cylinder masses via backward dual
//! power iteration, and the weak-Gibbs ratio diagnostic.

use std::collections::HashMap;

use crate::env::EnvPath;
use crate::error::{Error, Result};
use crate::potential::{birkhoff_bounds, Which};
use crate::subshift::{enumerate_words, Word};

/// Cylinder masses of one measure fiber: entries for every admissible word
/// of length `depth` at `offset`, in lexicographic order.
#[derive(Debug, Clone)]
pub struct MeasureTable {
    pub offset: usize,
    pub depth: usize,
    pub words: Vec<Word>,
    pub masses: Vec<f64>,
}

impl MeasureTable {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Index of a word by its letters (words are sorted lexicographically).
    pub fn find(&self, letters: &[u8]) -> Option<usize> {
        self.words.binary_search_by(|w| w.letters.as_slice().cmp(letters)).ok()
    }

    pub fn mass_of(&self, letters: &[u8]) -> Option<f64> {
        self.find(letters).map(|i| self.masses[i])
    }

    /// Aggregates masses to a shallower depth by summing children; exact
    /// parent-child additivity by construction.
    pub fn aggregate_to(&self, depth: usize) -> MeasureTable {
        assert!(depth >= 1 && depth <= self.depth);
        if depth == self.depth {
            return self.clone();
        }
        let mut words: Vec<Word> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (w, &m) in self.words.iter().zip(&self.masses) {
            let prefix = &w.letters[..depth];
            if words.last().map(|p: &Word| p.letters.as_slice() != prefix).unwrap_or(true) {
                words.push(Word::new(self.offset, prefix.to_vec()));
                masses.push(0.0);
            }
            *masses.last_mut().unwrap() += m;
        }
        MeasureTable { offset: self.offset, depth, words, masses }
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "# measure,{},{}", self.depth, self.offset)?;
        writeln!(out, "word,mass")?;
        for (w, m) in self.words.iter().zip(&self.masses) {
            writeln!(out, "\"{}\",{}", w, m)?;
        }
        Ok(())
    }
}

/// Result of the backward eigenproblem iteration.
#[derive(Debug, Clone)]
pub struct RpfResult {
    /// Estimates of the eigenvalue along the path: lambdas[k] ~ lambda(sigma^{offset+k} omega).
    pub lambdas: Vec<f64>,
    pub table: MeasureTable,
    /// Max |log mass ratio| between the runs started at horizon `iters` and
    /// `iters - 1`; measures backward-cone alignment.
    pub residual: f64,
}

/// One application of the dual transfer operator: pulls a depth-m mass table
/// at `offset + 1` back to a depth-m table at `offset`. Masses accumulate
/// exp(phi sup over the depth-(m+1) cylinder) times the child mass.
pub fn rpf_apply(path: &EnvPath, offset: usize, table: &MeasureTable) -> Result<(MeasureTable, f64)> {
    if table.offset != offset + 1 {
        return Err(Error::Other(format!(
            "table offset {} does not continue position {offset}",
            table.offset
        )));
    }
    let m = table.depth;
    path.require_horizon(offset + m)?;
    // index children by their first (m-1) letters for suffix matching
    let mut by_prefix: HashMap<&[u8], Vec<usize>> = HashMap::new();
    for (i, w) in table.words.iter().enumerate() {
        by_prefix.entry(&w.letters[..m - 1]).or_default().push(i);
    }
    let mut words = Vec::new();
    let mut masses = Vec::new();
    for word in enumerate_words(path, offset, m)? {
        let mut acc = 0.0;
        if let Some(children) = by_prefix.get(&word.letters[1..]) {
            for &ci in children {
                let child = &table.words[ci];
                let last = *child.letters.last().unwrap();
                // the (m+1)-cylinder word w0 w1 ... w_{m-1} s at `offset`
                let mut deep = word.letters.clone();
                deep.push(last);
                let deep_word = Word::new(offset, deep);
                if !crate::subshift::is_admissible(path, &deep_word) {
                    continue;
                }
                let phi = birkhoff_bounds(path, &deep_word, Which::Phi)?;
                // per-step sup of phi at level 0 of the deep cylinder
                let tail = Word::new(offset + 1, deep_word.letters[1..].to_vec());
                let phi_tail = birkhoff_bounds(path, &tail, Which::Phi)?;
                let step_sup = phi.sup_sum - phi_tail.sup_sum;
                acc += step_sup.exp() * table.masses[ci];
            }
        }
        words.push(word);
        masses.push(acc);
    }
    let normalizer: f64 = masses.iter().sum();
    if normalizer <= 0.0 {
        return Err(Error::Other("transfer-operator pullback produced zero mass".into()));
    }
    for m in &mut masses {
        *m /= normalizer;
    }
    Ok((MeasureTable { offset, depth: m, words, masses }, normalizer))
}

fn backward_run(path: &EnvPath, offset: usize, depth: usize, iters: usize) -> Result<(MeasureTable, Vec<f64>)> {
    // uniform initial masses at time offset + iters
    let start = offset + iters;
    let words: Vec<Word> = enumerate_words(path, start, depth)?.collect();
    let n = words.len();
    let mut table = MeasureTable {
        offset: start,
        depth,
        words,
        masses: vec![1.0 / n as f64; n],
    };
    let mut lambdas = vec![0.0; iters];
    for k in (offset..start).rev() {
        let (next, normalizer) = rpf_apply(path, k, &table)?;
        lambdas[k - offset] = normalizer;
        table = next;
    }
    Ok((table, lambdas))
}

/// Cylinder masses of the eigenmeasure fiber at `offset`, via dual power
/// iteration pulled back from time `offset + iters` with uniform initial
/// mass, renormalizing at every step. The normalizers estimate the
/// eigenvalues; the residual compares against a run one step shorter.
pub fn rpf_measure(path: &EnvPath, offset: usize, depth: usize, iters: usize) -> Result<RpfResult> {
    rpf_measure_with_bound(path, offset, depth, iters, 1e-6)
}

pub fn rpf_measure_with_bound(
    path: &EnvPath,
    offset: usize,
    depth: usize,
    iters: usize,
    residual_bound: f64,
) -> Result<RpfResult> {
    if iters < 2 {
        return Err(Error::Other("need at least 2 pullback steps".into()));
    }
    path.require_horizon(offset + depth + iters)?;
    let (table, lambdas) = backward_run(path, offset, depth, iters)?;
    let (shorter, _) = backward_run(path, offset, depth, iters - 1)?;
    let mut residual = 0.0f64;
    for (a, b) in table.masses.iter().zip(&shorter.masses) {
        if *a > 0.0 && *b > 0.0 {
            residual = residual.max((a.ln() - b.ln()).abs());
        } else if *a != *b {
            residual = f64::INFINITY;
        }
    }
    if residual > residual_bound {
        return Err(Error::NonConvergence { residual, bound: residual_bound });
    }
    Ok(RpfResult { lambdas, table, residual })
}

/// Average of log lambda along the path; converges to the pressure.
pub fn mean_log_lambda(result: &RpfResult) -> f64 {
    let k = result.lambdas.len() as f64;
    result.lambdas.iter().map(|l| l.ln()).sum::<f64>() / k
}

#[derive(Debug, Clone)]
pub struct GibbsReport {
    /// max over cylinders of |log mass - S_n phi sup| / n.
    pub defect_per_n: f64,
    /// Certified budget the defect is checked against.
    pub budget_per_n: f64,
    pub passed: bool,
    /// Components of the budget, for diagnostics.
    pub variation_part: f64,
    pub lambda_drift: f64,
    pub letter_mass_floor: f64,
}

/// Weak-Gibbs ratio diagnostic: compares log cylinder masses against the
/// sup Birkhoff sums of phi. The certified budget combines the variation
/// modulus, the accumulated normalizer drift |sum log lambda|, the
/// single-letter mass floor of the continuation fiber, and the iteration
/// residual.
pub fn gibbs_diagnostic(result: &RpfResult, path: &EnvPath) -> Result<GibbsReport> {
    let table = &result.table;
    let n = table.depth;
    let mut defect = 0.0f64;
    for (w, &mass) in table.words.iter().zip(&table.masses) {
        if mass <= 0.0 {
            return Err(Error::Other(format!("zero mass at cylinder {w}: positivity breach")));
        }
        let phi = birkhoff_bounds(path, w, Which::Phi)?;
        defect = defect.max((mass.ln() - phi.sup_sum).abs());
    }
    let variation = crate::potential::birkhoff_gap_bound(&path.model, n, Which::Phi);
    let lambda_drift: f64 = result.lambdas[..n.min(result.lambdas.len())]
        .iter()
        .map(|l| l.ln())
        .sum::<f64>()
        .abs();
    // continuation-fiber letter masses at offset + n
    let deep = table.offset + n;
    let letter_floor = if deep + 1 <= path.horizon() {
        let letters: Vec<Word> = enumerate_words(path, deep, 1)?.collect();
        // masses of single letters under the eigenmeasure at the deep fiber:
        // estimated from a short backward run
        let iters = (path.horizon() - deep - 1).min(12);
        if iters >= 2 {
            let (t, _) = backward_run(path, deep, 1, iters)?;
            t.masses.iter().cloned().fold(1.0f64, f64::min).max(1e-300)
        } else {
            1.0 / letters.len().max(1) as f64
        }
    } else {
        1.0
    };
    let letter_part = -letter_floor.ln();
    let budget = variation + lambda_drift + letter_part + result.residual * (n as f64) + 1e-9;
    let defect_per_n = defect / n as f64;
    let budget_per_n = budget / n as f64;
    Ok(GibbsReport {
        defect_per_n,
        budget_per_n,
        passed: defect_per_n <= budget_per_n,
        variation_part: variation,
        lambda_drift,
        letter_mass_floor: letter_floor,
    })
}
