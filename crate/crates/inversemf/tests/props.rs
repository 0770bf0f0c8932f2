//! Property tests for the structural invariants the pipeline leans on.

use std::sync::Arc;

use proptest::prelude::*;

use inversemf::env::{sample_path, Admissibility, EnvModel};
use inversemf::gibbs::rpf_measure;
use inversemf::inverse::{atoms, interval_table};
use inversemf::presets;
use inversemf::subshift::{count_words, enumerate_words, is_admissible, Word};

/// 0/1 matrices with at least one nonzero entry in each row and column.
fn admissibility(n: usize) -> impl Strategy<Value = Admissibility> {
    proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), n)
        .prop_map(move |mut rows| {
            for (i, row) in rows.iter_mut().enumerate() {
                if row.iter().all(|&b| !b) {
                    row[i % n] = true;
                }
            }
            for c in 0..n {
                if (0..n).all(|r| !rows[r][c]) {
                    rows[c % n][c] = true;
                }
            }
            Admissibility {
                rows: rows
                    .into_iter()
                    .map(|r| r.into_iter().map(|b| b as u8).collect())
                    .collect(),
            }
        })
}

fn model_with(adm: Admissibility) -> EnvModel {
    let mut model = presets::bernoulli2();
    model.admissibility.insert((0, 0), adm);
    model
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_is_lexicographic_and_counts_match(adm in admissibility(2), n in 1usize..9) {
        let model = model_with(adm);
        let path = sample_path(&Arc::new(model), 20, "main").unwrap();
        let words: Vec<Word> = enumerate_words(&path, 0, n).unwrap().collect();
        prop_assert_eq!(words.len() as u128, count_words(&path, 0, n).unwrap());
        for w in &words {
            prop_assert!(is_admissible(&path, w));
        }
        for pair in words.windows(2) {
            prop_assert!(pair[0].letters < pair[1].letters);
        }
    }

    #[test]
    fn word_serialization_roundtrips(letters in proptest::collection::vec(1u8..9, 1..12), offset in 0usize..50) {
        let word = Word::new(offset, letters);
        let text = word.to_string();
        prop_assert_eq!(Word::parse(&text).unwrap(), word);
    }

    #[test]
    fn interval_records_partition_unit(depth in 2usize..7) {
        let path = sample_path(&Arc::new(presets::rand2()), 80, "main").unwrap();
        let result = rpf_measure(&path, 0, depth, 30).unwrap();
        let records = interval_table(&result.table);
        prop_assert!(records[0].lo.abs() < 1e-15);
        prop_assert!((records.last().unwrap().hi - 1.0).abs() < 1e-10);
        for pair in records.windows(2) {
            prop_assert_eq!(pair[0].hi.to_bits(), pair[1].lo.to_bits());
        }
    }

    #[test]
    fn conservation_holds_at_every_generation(gen in 1usize..7) {
        let path = sample_path(&Arc::new(presets::golden_mean()), 120, "main").unwrap();
        let result = rpf_measure(&path, 0, 7, 40).unwrap();
        let list = atoms(&result.table, &path, gen, 1e-13).unwrap();
        prop_assert!((list.conservation_sum() - 1.0).abs() < 1e-10);
        prop_assert!(list.residual >= 0.0);
    }
}
