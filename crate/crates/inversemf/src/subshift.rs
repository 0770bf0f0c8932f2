//! Admissible words over an environment path: enumeration, counting,
//! mixing times, and the bridging operation that concatenates words across
//! a connector.

use std::fmt;

use crate::env::EnvPath;
use crate::error::{Error, Result};

/// A finite admissible word. Letters are 1-based; `offset` is the position
/// along the environment path where the word starts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub offset: usize,
    pub letters: Vec<u8>,
}

impl Word {
    pub fn new(offset: usize, letters: Vec<u8>) -> Self {
        Word { offset, letters }
    }

    pub fn empty(offset: usize) -> Self {
        Word { offset, letters: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut letters = self.letters.clone();
        letters.push(letter);
        Word { offset: self.offset, letters }
    }

    /// Serialized form: comma-separated letters with an `@offset` suffix.
    pub fn parse(text: &str) -> Result<Word> {
        let (body, offset) = text
            .rsplit_once('@')
            .ok_or_else(|| Error::Other(format!("word {:?} missing @offset suffix", text)))?;
        let offset: usize =
            offset.parse().map_err(|_| Error::Other(format!("bad word offset in {:?}", text)))?;
        let letters = body
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<u8>().map_err(|_| Error::Other(format!("bad letter in {:?}", text))))
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word { offset, letters })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
        write!(f, "{}@{}", body.join(","), self.offset)
    }
}

/// True iff every letter is within its state alphabet and every consecutive
/// pair is allowed by the edge admissibility. Out-of-range symbols yield
/// `false`, not an error.
pub fn is_admissible(path: &EnvPath, word: &Word) -> bool {
    if word.is_empty() {
        return word.offset <= path.horizon();
    }
    if word.offset + word.len() > path.horizon() + 1 {
        return false;
    }
    for (i, &l) in word.letters.iter().enumerate() {
        let k = word.offset + i;
        if l == 0 || l as usize > path.alphabet_size(k) {
            return false;
        }
        if i + 1 < word.len() && !path.edge(k).allows(l, word.letters[i + 1]) {
            return false;
        }
    }
    true
}

/// Lazy lexicographic enumeration of the admissible words of length `n`
/// starting at `offset`.
pub struct WordCursor<'a> {
    path: &'a EnvPath,
    offset: usize,
    n: usize,
    stack: Vec<u8>,
    done: bool,
}

impl<'a> WordCursor<'a> {
    fn advance_from(&mut self, mut depth: usize) -> bool {
        // depth = number of fixed letters; try to increment stack[depth..]
        loop {
            if depth == self.stack.len() && depth == self.n {
                return true;
            }
            let next_letter = if depth < self.stack.len() {
                let l = self.stack[depth] + 1;
                self.stack.truncate(depth);
                l
            } else {
                1
            };
            let k = self.offset + depth;
            let alpha = self.path.alphabet_size(k) as u8;
            let mut found = None;
            for l in next_letter..=alpha {
                let ok = if depth == 0 {
                    true
                } else {
                    self.path.edge(k - 1).allows(self.stack[depth - 1], l)
                };
                if ok {
                    found = Some(l);
                    break;
                }
            }
            match found {
                Some(l) => {
                    self.stack.push(l);
                    depth += 1;
                }
                None => {
                    if depth == 0 {
                        return false;
                    }
                    depth -= 1;
                }
            }
        }
    }
}

impl<'a> Iterator for WordCursor<'a> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let start_depth = if self.stack.len() == self.n && self.n > 0 {
            self.n - 1 // backtrack over the last letter of the previous word
        } else {
            self.stack.len()
        };
        if self.advance_from(start_depth) {
            Some(Word::new(self.offset, self.stack.clone()))
        } else {
            self.done = true;
            None
        }
    }
}

/// Cursor over the admissible words of length `n` at `offset`, in strict
/// lexicographic order.
pub fn enumerate_words<'a>(path: &'a EnvPath, offset: usize, n: usize) -> Result<WordCursor<'a>> {
    if n == 0 {
        return Err(Error::Other("word length must be >= 1".into()));
    }
    path.require_horizon(offset + n - 1)?;
    Ok(WordCursor { path, offset, n, stack: Vec::with_capacity(n), done: false })
}

/// Number of admissible words of length `n` at `offset`, via the product
/// of the admissibility matrices.
pub fn count_words(path: &EnvPath, offset: usize, n: usize) -> Result<u128> {
    if n == 0 {
        return Err(Error::Other("word length must be >= 1".into()));
    }
    path.require_horizon(offset + n - 1)?;
    let mut counts = vec![1u128; path.alphabet_size(offset + n - 1)];
    for k in (offset..offset + n - 1).rev() {
        let adm = path.edge(k);
        let rows = path.alphabet_size(k);
        let mut next = vec![0u128; rows];
        for (r, cell) in next.iter_mut().enumerate() {
            for (c, &count) in counts.iter().enumerate() {
                if adm.rows[r][c] == 1 {
                    *cell += count;
                }
            }
        }
        counts = next;
    }
    Ok(counts.iter().sum())
}

/// Smallest p <= cap with A(offset) A(offset+1) ... A(offset+p-1) entrywise
/// positive.
pub fn mixing_time(path: &EnvPath, offset: usize, cap: usize) -> Result<usize> {
    if cap == 0 {
        return Err(Error::Other("cap must be >= 1".into()));
    }
    path.require_horizon(offset + cap)?;
    // product[r][c] = 1 iff a length-p admissible word from letter r at
    // offset reaches letter c at offset+p
    let mut product: Vec<Vec<bool>> = Vec::new();
    for p in 1..=cap {
        let adm = path.edge(offset + p - 1);
        if p == 1 {
            product = adm.rows.iter().map(|r| r.iter().map(|&e| e == 1).collect()).collect();
        } else {
            let cols = path.alphabet_size(offset + p);
            let mut next = vec![vec![false; cols]; product.len()];
            for (r, next_row) in next.iter_mut().enumerate() {
                for (mid, &reach) in product[r].iter().enumerate() {
                    if reach {
                        for (c, cell) in next_row.iter_mut().enumerate() {
                            *cell = *cell || adm.rows[mid][c] == 1;
                        }
                    }
                }
            }
            product = next;
        }
        if product.iter().all(|row| row.iter().all(|&x| x)) {
            return Ok(p);
        }
    }
    Err(Error::NotMixingWithinCap { cap })
}

/// Letters at position `pos` from which `target` at position `pos + steps`
/// is reachable through admissible transitions.
fn backward_reachable(path: &EnvPath, pos: usize, steps: usize, target: u8) -> Vec<Vec<bool>> {
    // result[j] = reachability set at position pos + j, j = 0..=steps
    let mut sets = vec![Vec::new(); steps + 1];
    let mut cur = vec![false; path.alphabet_size(pos + steps)];
    cur[(target - 1) as usize] = true;
    sets[steps] = cur.clone();
    for j in (0..steps).rev() {
        let adm = path.edge(pos + j);
        let mut prev = vec![false; path.alphabet_size(pos + j)];
        for (r, cell) in prev.iter_mut().enumerate() {
            *cell = cur.iter().enumerate().any(|(c, &ok)| ok && adm.rows[r][c] == 1);
        }
        sets[j] = prev.clone();
        cur = prev;
    }
    sets
}

/// Bridges `w` to `w_next` across a connector of length `p`: returns
/// `w · v · w_next` where `v` is the lexicographically smallest admissible
/// connector. The connector depends only on the junction letters, offsets,
/// and `p`.
pub fn bridge(path: &EnvPath, w: &Word, w_next: &Word, p: usize) -> Result<Word> {
    if w.is_empty() || w_next.is_empty() {
        return Err(Error::Other("bridge requires non-empty words".into()));
    }
    if w_next.offset != w.offset + w.len() + p {
        return Err(Error::Other(format!(
            "offset mismatch: w_next starts at {}, expected {}",
            w_next.offset,
            w.offset + w.len() + p
        )));
    }
    if !is_admissible(path, w) || !is_admissible(path, w_next) {
        return Err(Error::Inadmissible("bridge endpoints".into()));
    }
    let last = *w.letters.last().unwrap();
    let first = w_next.letters[0];
    let junction = w.offset + w.len() - 1; // position of `last`
    // reachable[j]: letters at junction + j that can reach `first`
    let reachable = backward_reachable(path, junction, p + 1, first);
    if !reachable[0][(last - 1) as usize] {
        return Err(Error::NoConnector { from: last, to: first, len: p });
    }
    let mut connector = Vec::with_capacity(p);
    let mut prev = last;
    for j in 1..=p {
        let k = junction + j;
        let alpha = path.alphabet_size(k) as u8;
        let mut chosen = None;
        for l in 1..=alpha {
            if path.edge(k - 1).allows(prev, l) && reachable[j][(l - 1) as usize] {
                chosen = Some(l);
                break;
            }
        }
        let l = chosen.ok_or(Error::NoConnector { from: last, to: first, len: p })?;
        connector.push(l);
        prev = l;
    }
    if !path.edge(junction + p).allows(prev, first) {
        return Err(Error::NoConnector { from: last, to: first, len: p });
    }
    let mut letters = w.letters.clone();
    letters.extend_from_slice(&connector);
    letters.extend_from_slice(&w_next.letters);
    Ok(Word::new(w.offset, letters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sample_path;
    use crate::presets;
    use std::sync::Arc;

    fn path_for(model: crate::env::EnvModel, horizon: usize) -> EnvPath {
        sample_path(&Arc::new(model), horizon, "main").unwrap()
    }

    #[test]
    fn full_shift_counts_are_powers() {
        let path = path_for(presets::bernoulli2(), 20);
        assert_eq!(count_words(&path, 0, 10).unwrap(), 1024);
        let words: Vec<Word> = enumerate_words(&path, 0, 10).unwrap().collect();
        assert_eq!(words.len(), 1024);
    }

    #[test]
    fn golden_mean_counts_are_fibonacci() {
        let path = path_for(presets::golden_mean(), 20);
        // counts 2, 3, 5, 8, 13 for n = 1..5
        let expect = [2u128, 3, 5, 8, 13];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(count_words(&path, 0, i + 1).unwrap(), e);
            assert_eq!(enumerate_words(&path, 0, i + 1).unwrap().count() as u128, e);
        }
    }

    #[test]
    fn admissibility_checks() {
        let path = path_for(presets::golden_mean(), 10);
        assert!(is_admissible(&path, &Word::new(0, vec![2, 1, 2])));
        assert!(!is_admissible(&path, &Word::new(0, vec![2, 2])));
        assert!(!is_admissible(&path, &Word::new(0, vec![3])));
        assert!(is_admissible(&path, &Word::new(3, vec![1, 1])));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let path = path_for(presets::golden_mean(), 12);
        for n in 1..=8 {
            let words: Vec<Word> = enumerate_words(&path, 0, n).unwrap().collect();
            for pair in words.windows(2) {
                assert!(pair[0].letters < pair[1].letters);
            }
            for w in &words {
                assert!(is_admissible(&path, w));
            }
        }
    }

    #[test]
    fn rand2_counts_match_enumeration() {
        let path = path_for(presets::rand2(), 16);
        for offset in 0..3 {
            for n in 1..=12 {
                let count = count_words(&path, offset, n).unwrap();
                let listed = enumerate_words(&path, offset, n).unwrap().count() as u128;
                assert_eq!(count, listed, "offset {offset} n {n}");
            }
        }
    }

    #[test]
    fn mixing_times() {
        let full = path_for(presets::bernoulli2(), 10);
        assert_eq!(mixing_time(&full, 0, 5).unwrap(), 1);
        let golden = path_for(presets::golden_mean(), 10);
        assert_eq!(mixing_time(&golden, 0, 5).unwrap(), 2);
        let single = path_for(presets::single_branch(), 10);
        // 1x1 all-ones matrix is positive immediately
        assert_eq!(mixing_time(&single, 0, 5).unwrap(), 1);
    }

    #[test]
    fn identity_admissibility_never_mixes() {
        let mut model = presets::bernoulli2();
        model.admissibility.insert((0, 0), crate::env::Admissibility { rows: vec![vec![1, 0], vec![0, 1]] });
        let path = path_for(model, 30);
        assert!(matches!(mixing_time(&path, 0, 20), Err(Error::NotMixingWithinCap { .. })));
    }

    #[test]
    fn bridge_full_shift_uses_letter_one() {
        let path = path_for(presets::bernoulli2(), 10);
        let w = Word::new(0, vec![2, 2]);
        let w_next = Word::new(3, vec![2]);
        let bridged = bridge(&path, &w, &w_next, 1).unwrap();
        assert_eq!(bridged.letters, vec![2, 2, 1, 2]);
        assert!(is_admissible(&path, &bridged));
    }

    #[test]
    fn bridge_golden_mean_two_to_two() {
        let path = path_for(presets::golden_mean(), 10);
        let w = Word::new(0, vec![1, 2]);
        let w_next = Word::new(4, vec![2, 1]);
        let bridged = bridge(&path, &w, &w_next, 2).unwrap();
        // connector must be 1,1: 2->1->1->2 admissible
        assert_eq!(bridged.letters, vec![1, 2, 1, 1, 2, 1]);
        assert!(is_admissible(&path, &bridged));
    }

    #[test]
    fn bridge_connector_ignores_earlier_letters() {
        let path = path_for(presets::golden_mean(), 12);
        let tail = Word::new(5, vec![2, 1]);
        let a = bridge(&path, &Word::new(0, vec![1, 1, 2]), &tail, 2).unwrap();
        let b = bridge(&path, &Word::new(0, vec![2, 1, 2]), &tail, 2).unwrap();
        // same last letter (2) gives the same connector
        assert_eq!(a.letters[3..5], b.letters[3..5]);
    }

    #[test]
    fn bridge_rejects_empty() {
        let path = path_for(presets::bernoulli2(), 10);
        let w = Word::new(0, vec![1]);
        assert!(bridge(&path, &w, &Word::empty(3), 2).is_err());
    }

    #[test]
    fn word_serialization_roundtrip() {
        let w = Word::new(0, vec![2, 1, 2]);
        assert_eq!(w.to_string(), "2,1,2@0");
        assert_eq!(Word::parse("2,1,2@0").unwrap(), w);
    }
}
