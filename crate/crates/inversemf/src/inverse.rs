//! The inverse measure as an explicit weighted Dirac sum: CDF intervals of
//! cylinders, suffix sets with right-neighbor pairing, atom enumeration with
//! certified residual, gap scans, and designated maximal-gap atoms.

use crate::env::EnvPath;
use crate::error::{Error, Result};
use crate::geometry::{attractor_extrema, ExtremaPair};
use crate::gibbs::MeasureTable;
use crate::potential::{birkhoff_bounds, Which};
use crate::subshift::{enumerate_words, is_admissible, Word};

/// CDF image of one cylinder: I = [lo, hi), with length equal to the
/// cylinder mass and ell = 2 * length the associated approximation radius.
#[derive(Debug, Clone)]
pub struct IntervalRecord {
    pub word: Word,
    pub lo: f64,
    pub hi: f64,
}

impl IntervalRecord {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn ell(&self) -> f64 {
        2.0 * self.length()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

/// Cumulative sums of the table masses in lexicographic (= spatial) order:
/// a partition of [0, 1) into CDF intervals.
pub fn interval_table(table: &MeasureTable) -> Vec<IntervalRecord> {
    interval_table_at(table, table.depth)
}

/// CDF intervals of the depth-`depth` ancestors, with all endpoints taken
/// from the deep table's single prefix-sum array. Boundaries shared between
/// depths are bitwise identical, which keeps atom positions consistent
/// across generations.
pub fn interval_table_at(table: &MeasureTable, depth: usize) -> Vec<IntervalRecord> {
    assert!(depth >= 1 && depth <= table.depth);
    let cum = prefix_sums(&table.masses);
    let mut records = Vec::new();
    for (prefix, start, end) in prefix_groups(table, depth) {
        records.push(IntervalRecord {
            word: Word::new(table.offset, prefix.to_vec()),
            lo: if start == 0 { 0.0 } else { cum[start - 1] },
            hi: cum[end - 1],
        });
    }
    records
}

fn prefix_sums(masses: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(masses.len());
    let mut acc = 0.0f64;
    for &m in masses {
        acc += m;
        cum.push(acc);
    }
    cum
}

/// Contiguous index ranges of the deep table sharing each depth-`depth`
/// prefix, in lexicographic order: (prefix, start, end-exclusive).
fn prefix_groups(table: &MeasureTable, depth: usize) -> Vec<(&[u8], usize, usize)> {
    let mut groups: Vec<(&[u8], usize, usize)> = Vec::new();
    for (i, w) in table.words.iter().enumerate() {
        let prefix = &w.letters[..depth];
        match groups.last_mut() {
            Some((p, _, end)) if *p == prefix => *end = i + 1,
            _ => groups.push((prefix, i, i + 1)),
        }
    }
    groups
}

/// Admissible length-k suffixes of `word`, and the right-neighbor pairs:
/// each w paired with the w-tilde whose cylinder is the nearest right
/// neighbor (the lexicographic successor, since sibling cylinders are
/// spatially ordered). The rightmost suffix has no right neighbor. May be
/// empty.
pub fn suffix_sets(path: &EnvPath, word: &Word, k: usize) -> Result<(Vec<Word>, Vec<(Word, Word)>)> {
    if !is_admissible(path, word) {
        return Err(Error::Inadmissible(word.to_string()));
    }
    let start = word.offset + word.len();
    path.require_horizon(start + k - 1)?;
    let last = word.letters.last().copied();
    let suffixes: Vec<Word> = enumerate_words(path, start, k)?
        .filter(|w| match last {
            Some(l) => path.edge(start - 1).allows(l, w.letters[0]),
            None => true,
        })
        .collect();
    let pairs: Vec<(Word, Word)> =
        suffixes.windows(2).map(|p| (p[0].clone(), p[1].clone())).collect();
    Ok((suffixes, pairs))
}

/// One Dirac atom of the inverse measure: the gap between an attractor piece
/// and its right neighbor, placed at the CDF image of the piece's maximum.
#[derive(Debug, Clone)]
pub struct Atom {
    pub parent: Word,
    pub branch: u8,
    pub position: f64,
    pub weight: f64,
    pub position_err: f64,
    /// Weight is zero up to the extrema tolerance (contiguous pieces).
    pub zero_flag: bool,
}

#[derive(Debug, Clone)]
pub struct AtomList {
    pub atoms: Vec<Atom>,
    /// Mass of the Dirac at 0: the leftmost attractor point.
    pub boundary_left: f64,
    /// Mass of the Dirac at 1: one minus the rightmost attractor point.
    pub boundary_right: f64,
    /// Exact mass still held in generations beyond `gen_depth`: the total
    /// piece length at the deepest materialized level.
    pub residual: f64,
    pub gen_depth: usize,
    pub extrema_tol: f64,
}

impl AtomList {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// boundary + atoms + residual; equals 1 up to summation rounding.
    pub fn conservation_sum(&self) -> f64 {
        self.boundary_left + self.total_weight() + self.residual + self.boundary_right
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "# atoms,gen_depth={},residual={}", self.gen_depth, self.residual)?;
        writeln!(out, "word,s,position,weight,position_err")?;
        for a in &self.atoms {
            writeln!(out, "\"{}\",{},{},{},{}", a.parent, a.branch, a.position, a.weight, a.position_err)?;
        }
        Ok(())
    }
}

/// Enumerates the atoms of all generations below `gen_depth`.
///
/// For every parent word v with |v| < gen_depth and every admissible child
/// pair (vs, vs-tilde) adjacent at depth |v|+1, the atom sits at the CDF
/// image of max X^{vs} (the cumulative mass through vs) and weighs
/// m^{vs-tilde} - M^{vs}. Extrema are path-followed at tolerance `tol`;
/// identical greedy extensions make parent and child extrema bitwise
/// consistent, so the conservation sum telescopes to 1 exactly up to
/// rounding.
pub fn atoms(table: &MeasureTable, path: &EnvPath, gen_depth: usize, tol: f64) -> Result<AtomList> {
    if gen_depth < 1 || gen_depth > table.depth {
        return Err(Error::Other(format!(
            "gen_depth {gen_depth} out of range 1..={}",
            table.depth
        )));
    }
    let cum = prefix_sums(&table.masses);
    let mut atoms = Vec::new();
    let mut residual = 0.0f64;
    let mut boundary_left = 0.0f64;
    let mut boundary_right = 0.0f64;
    for depth in 1..=gen_depth {
        let groups = prefix_groups(table, depth);
        let extrema: Vec<ExtremaPair> = groups
            .iter()
            .map(|(prefix, _, _)| {
                attractor_extrema(path, &Word::new(table.offset, prefix.to_vec()), tol)
            })
            .collect::<Result<Vec<_>>>()?;
        if depth == 1 {
            boundary_left = extrema[0].m;
            boundary_right = 1.0 - extrema[extrema.len() - 1].big_m;
        }
        if depth == gen_depth {
            residual = extrema.iter().map(|e| e.big_m - e.m).sum();
        }
        for i in 0..groups.len().saturating_sub(1) {
            let (prefix, _, end) = groups[i];
            let (next_prefix, _, _) = groups[i + 1];
            if prefix[..depth - 1] != next_prefix[..depth - 1] {
                continue; // different parents: the gap belongs to a shallower generation
            }
            let weight = extrema[i + 1].m - extrema[i].big_m;
            atoms.push(Atom {
                parent: Word::new(table.offset, prefix[..depth - 1].to_vec()),
                branch: prefix[depth - 1],
                position: cum[end - 1],
                weight: weight.max(0.0),
                position_err: tol + (end as f64) * f64::EPSILON,
                zero_flag: weight <= tol,
            });
        }
    }
    Ok(AtomList { atoms, boundary_left, boundary_right, residual, gen_depth, extrema_tol: tol })
}

#[derive(Debug, Clone)]
pub struct GapReport {
    /// min over first-level letters of the best gap within k_max suffix
    /// levels.
    pub gap: f64,
    /// per-letter best gap and the realizing pair (left word, right word).
    pub per_letter: Vec<(u8, f64, Word, Word)>,
}

/// Largest attractor gap reachable within `k_max` suffix levels below each
/// first-level letter at `offset`; reports the min over letters.
pub fn gap_scan(path: &EnvPath, offset: usize, k_max: usize, tol: f64) -> Result<GapReport> {
    if k_max < 1 {
        return Err(Error::Other("k_max must be >= 1".into()));
    }
    let mut per_letter = Vec::new();
    let mut min_gap = f64::INFINITY;
    for letter in 1..=path.alphabet_size(offset) as u8 {
        let v = Word::new(offset, vec![letter]);
        let mut best = 0.0f64;
        let mut best_pair: Option<(Word, Word)> = None;
        for k in 1..=k_max {
            let (_, pairs) = suffix_sets(path, &v, k)?;
            for (w, wt) in pairs {
                let mut left = v.letters.clone();
                left.extend_from_slice(&w.letters);
                let mut right = v.letters.clone();
                right.extend_from_slice(&wt.letters);
                let left_word = Word::new(offset, left);
                let right_word = Word::new(offset, right);
                let le = attractor_extrema(path, &left_word, tol)?;
                let re = attractor_extrema(path, &right_word, tol)?;
                let gap = re.m - le.big_m;
                if gap > best {
                    best = gap;
                    best_pair = Some((left_word, right_word));
                }
            }
        }
        if best < min_gap {
            min_gap = best;
        }
        if let Some((l, r)) = best_pair {
            per_letter.push((letter, best, l, r));
        } else {
            per_letter.push((letter, 0.0, v.clone(), v));
        }
    }
    Ok(GapReport { gap: if min_gap.is_finite() { min_gap } else { 0.0 }, per_letter })
}

#[derive(Debug, Clone)]
pub struct DesignatedAtom {
    pub atom: Atom,
    /// Suffix length that realized the atom (the empirical lookahead).
    pub suffix_len: usize,
    /// log(weight) / sup Birkhoff sum of psi over the parent cylinder.
    pub weight_ratio: f64,
}

/// Picks the maximal-weight atom strictly inside the open CDF interval of
/// `word`, among atoms generated within `lookahead` suffix levels. Ties
/// break toward the smallest position. Exposes log(weight)/S_n psi-sup for
/// the gap lower-bound diagnostic.
pub fn designated_atom(
    table: &MeasureTable,
    path: &EnvPath,
    word: &Word,
    lookahead: usize,
    tol: f64,
) -> Result<DesignatedAtom> {
    if lookahead < 1 {
        return Err(Error::Other("lookahead must be >= 1".into()));
    }
    let need_depth = word.len() + lookahead;
    if need_depth > table.depth {
        return Err(Error::Other(format!(
            "table depth {} cannot serve lookahead {lookahead} below |v| = {}",
            table.depth,
            word.len()
        )));
    }
    if !is_admissible(path, word) {
        return Err(Error::Inadmissible(word.to_string()));
    }
    let cum = prefix_sums(&table.masses);
    let mut best: Option<(Atom, usize)> = None;
    for depth in word.len() + 1..=need_depth {
        // groups restricted to descendants of `word`
        let groups: Vec<(&[u8], usize, usize)> = prefix_groups(table, depth)
            .into_iter()
            .filter(|(p, _, _)| p.starts_with(&word.letters))
            .collect();
        if groups.len() < 2 {
            continue;
        }
        let extrema: Vec<ExtremaPair> = groups
            .iter()
            .map(|(prefix, _, _)| {
                attractor_extrema(path, &Word::new(table.offset, prefix.to_vec()), tol)
            })
            .collect::<Result<Vec<_>>>()?;
        for i in 0..groups.len() - 1 {
            let (prefix, _, end) = groups[i];
            let (next_prefix, _, _) = groups[i + 1];
            if prefix[..depth - 1] != next_prefix[..depth - 1] {
                continue;
            }
            let weight = extrema[i + 1].m - extrema[i].big_m;
            if weight <= tol {
                continue;
            }
            let atom = Atom {
                parent: Word::new(table.offset, prefix[..depth - 1].to_vec()),
                branch: prefix[depth - 1],
                position: cum[end - 1],
                weight,
                position_err: tol,
                zero_flag: false,
            };
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    atom.weight > b.weight + 1e-15
                        || ((atom.weight - b.weight).abs() <= 1e-15 && atom.position < b.position)
                }
            };
            if better {
                best = Some((atom, depth - word.len()));
            }
        }
    }
    match best {
        Some((atom, suffix_len)) => {
            let ratio = if word.is_empty() {
                f64::NAN
            } else {
                let psi = birkhoff_bounds(path, word, Which::Psi)?;
                atom.weight.ln() / psi.sup_sum
            };
            Ok(DesignatedAtom { atom, suffix_len, weight_ratio: ratio })
        }
        None => Err(Error::NoAtomFound { lookahead }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sample_path;
    use crate::gibbs::rpf_measure;
    use crate::presets;
    use std::sync::Arc;

    fn path_for(model: crate::env::EnvModel, horizon: usize) -> EnvPath {
        sample_path(&Arc::new(model), horizon, "main").unwrap()
    }

    fn bernoulli_table(depth: usize) -> (EnvPath, MeasureTable) {
        let path = path_for(presets::bernoulli2(), 160);
        let result = rpf_measure(&path, 0, depth, 40).unwrap();
        (path, result.table)
    }

    #[test]
    fn interval_table_partitions() {
        let (_, table) = bernoulli_table(2);
        let records = interval_table(&table);
        assert_eq!(records.len(), 4);
        assert!((records[0].lo).abs() < 1e-15);
        assert!((records[0].hi - 4.0 / 9.0).abs() < 1e-10); // mass of "11" = (2/3)^2
        assert!((records.last().unwrap().hi - 1.0).abs() < 1e-12);
        for pair in records.windows(2) {
            assert_eq!(pair[0].hi, pair[1].lo);
        }
    }

    #[test]
    fn bernoulli_depth1_intervals() {
        let (_, table) = bernoulli_table(1);
        let records = interval_table(&table);
        assert!((records[0].hi - 2.0 / 3.0).abs() < 1e-10);
        assert!((records[1].lo - 2.0 / 3.0).abs() < 1e-10);
        assert!((records[1].hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suffix_sets_full_shift() {
        let path = path_for(presets::bernoulli2(), 20);
        let v = Word::new(0, vec![1]);
        let (s, sp) = suffix_sets(&path, &v, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(sp.len(), 1);
        assert_eq!(sp[0].0.letters, vec![1]);
        assert_eq!(sp[0].1.letters, vec![2]);
    }

    #[test]
    fn suffix_sets_golden_mean_after_two() {
        let path = path_for(presets::golden_mean(), 20);
        let v = Word::new(0, vec![2]);
        let (s, sp) = suffix_sets(&path, &v, 1).unwrap();
        assert_eq!(s.len(), 1); // adjacency row (1, 0)
        assert!(sp.is_empty());
    }

    #[test]
    fn bernoulli_atoms_generation_zero() {
        let (path, table) = bernoulli_table(6);
        let list = atoms(&table, &path, 1, 1e-13).unwrap();
        // generation 0: single atom between X^1 and X^2 at F(M^1) = 2/3
        assert_eq!(list.atoms.len(), 1);
        let atom = &list.atoms[0];
        assert!(atom.parent.is_empty());
        assert_eq!(atom.branch, 1);
        assert!((atom.position - 2.0 / 3.0).abs() < 1e-10);
        // weight = m^2 - M^1 = 1/2 - 1/6 = 1/3
        assert!((atom.weight - 1.0 / 3.0).abs() < 1e-12, "weight = {}", atom.weight);
        // boundaries: delta_0 mass 0, delta_1 mass 1 - 2/3 = 1/3
        assert!(list.boundary_left.abs() < 1e-12);
        assert!((list.boundary_right - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn conservation_across_generations() {
        let (path, table) = bernoulli_table(8);
        for gen in 1..=8 {
            let list = atoms(&table, &path, gen, 1e-13).unwrap();
            let total = list.conservation_sum();
            assert!((total - 1.0).abs() < 1e-10, "gen {gen}: {total}");
            assert!(list.residual >= 0.0);
        }
    }

    #[test]
    fn conservation_random_model() {
        let path = path_for(presets::rand2(), 160);
        let result = rpf_measure(&path, 0, 8, 40).unwrap();
        for gen in [4usize, 6, 8] {
            let list = atoms(&result.table, &path, gen, 1e-13).unwrap();
            let total = list.conservation_sum();
            assert!((total - 1.0).abs() < 1e-10, "gen {gen}: {total}");
        }
    }

    #[test]
    fn atom_positions_strictly_increase() {
        let (path, table) = bernoulli_table(8);
        let list = atoms(&table, &path, 8, 1e-13).unwrap();
        let mut sorted = list.atoms.clone();
        sorted.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
        for pair in sorted.windows(2) {
            assert!(
                pair[1].position > pair[0].position - 1e-12,
                "positions collide: {} vs {}",
                pair[0].position,
                pair[1].position
            );
        }
    }

    #[test]
    fn nu_mass_in_cylinder_bounded_by_diameter() {
        let (path, table) = bernoulli_table(8);
        let list = atoms(&table, &path, 8, 1e-13).unwrap();
        let records = interval_table_at(&table, 3);
        for rec in &records {
            let inside: f64 = list
                .atoms
                .iter()
                .filter(|a| a.position > rec.lo && a.position < rec.hi)
                .map(|a| a.weight)
                .sum();
            let iv = crate::geometry::cylinder_interval(&path, &rec.word).unwrap();
            assert!(inside <= iv.diam() + 1e-10, "word {}: {} > {}", rec.word, inside, iv.diam());
        }
    }

    #[test]
    fn gap_scan_bernoulli() {
        let path = path_for(presets::bernoulli2(), 120);
        let report = gap_scan(&path, 0, 1, 1e-13).unwrap();
        // per letter v: children gap scales the level-0 gap 1/3 by 1/4
        assert!((report.gap - 1.0 / 12.0).abs() < 1e-12, "gap = {}", report.gap);
        let deeper = gap_scan(&path, 0, 2, 1e-13).unwrap();
        assert!(deeper.gap >= report.gap - 1e-15);
    }

    #[test]
    fn gap_scan_tiling_is_zero() {
        let path = path_for(presets::tiling(), 120);
        let report = gap_scan(&path, 0, 2, 1e-13).unwrap();
        assert!(report.gap.abs() < 1e-12);
    }

    #[test]
    fn designated_atom_bernoulli() {
        let (path, table) = bernoulli_table(6);
        let v = Word::new(0, vec![1]);
        let picked = designated_atom(&table, &path, &v, 1, 1e-13).unwrap();
        // the only depth-1 pair below "1": gap (1/4) * (1/3)
        assert!((picked.atom.weight - 1.0 / 12.0).abs() < 1e-12);
        assert_eq!(picked.suffix_len, 1);
        // diagnostic ratio: log(1/12) / log(1/4)
        let expect = (1.0f64 / 12.0).ln() / 0.25f64.ln();
        assert!((picked.weight_ratio - expect).abs() < 1e-9);
    }

    #[test]
    fn designated_atom_golden_mean_needs_lookahead() {
        let model = presets::golden_mean();
        let path = path_for(model, 160);
        let result = rpf_measure(&path, 0, 6, 40).unwrap();
        // after letter 2 only one child exists: no atom at lookahead 1
        let v = Word::new(0, vec![1, 2]);
        assert!(matches!(
            designated_atom(&result.table, &path, &v, 1, 1e-13),
            Err(Error::NoAtomFound { .. })
        ));
        let picked = designated_atom(&result.table, &path, &v, 2, 1e-13).unwrap();
        assert!(picked.atom.weight > 0.0);
        assert_eq!(picked.suffix_len, 2);
    }

    #[test]
    fn designated_atom_weight_is_max_over_competitors() {
        let (path, table) = bernoulli_table(6);
        for letters in [vec![1u8], vec![2], vec![1, 2], vec![2, 1]] {
            let v = Word::new(0, letters);
            let picked = designated_atom(&table, &path, &v, 3, 1e-13).unwrap();
            let list = atoms(&table, &path, (v.len() + 3).min(6), 1e-13).unwrap();
            let records = interval_table_at(&table, v.len());
            let rec = records.iter().find(|r| r.word.letters == v.letters).unwrap();
            let max_inside = list
                .atoms
                .iter()
                .filter(|a| {
                    a.position > rec.lo
                        && a.position < rec.hi
                        && a.parent.letters.starts_with(&v.letters)
                        && a.parent.len() < v.len() + 3
                })
                .map(|a| a.weight)
                .fold(0.0f64, f64::max);
            assert!((picked.atom.weight - max_inside).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_lower_bound_diagnostic() {
        // exact self-similar gaps: log(weight) >= S_n psi sup - slack with
        // slack 2 |log gamma|, gamma the level-0 gap
        let (path, table) = bernoulli_table(8);
        let gamma: f64 = 1.0 / 3.0;
        let slack = 2.0 * gamma.ln().abs();
        for depth in 1..=8usize {
            let level = table.aggregate_to(depth);
            for w in &level.words {
                let picked = match designated_atom(&table, &path, w, (8 - depth).max(1).min(2), 1e-13) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let psi = birkhoff_bounds(&path, w, Which::Psi).unwrap();
                assert!(
                    picked.atom.weight.ln() >= psi.sup_sum - slack,
                    "word {w}: log w = {} vs bound {}",
                    picked.atom.weight.ln(),
                    psi.sup_sum - slack
                );
            }
        }
    }
}
