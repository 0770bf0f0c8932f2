use inversemf::analysis::lq_estimate;
use inversemf::curve::CurveMeta;
use inversemf::env::sample_path;
use inversemf::gibbs::MeasureTable;
use inversemf::inverse::atoms;
use inversemf::presets;
use inversemf::subshift::{enumerate_words, Word};
use std::sync::Arc;

fn main() {
    let model = presets::bernoulli2();
    let path = sample_path(&Arc::new(model.clone()), 300, "main").unwrap();
    let p = [2.0/3.0, 1.0/3.0];
    for gen in [14usize, 17, 20] {
        // exact product-measure table (bernoulli closed form)
        let words: Vec<Word> = enumerate_words(&path, 0, gen).unwrap().collect();
        let masses: Vec<f64> = words.iter()
            .map(|w| w.letters.iter().map(|&l| p[(l-1) as usize]).product())
            .collect();
        let table = MeasureTable { offset: 0, depth: gen, words, masses };
        let list = atoms(&table, &path, gen, 1e-13).unwrap();
        let scales: Vec<f64> = (6..=12).map(|e| 2.0f64.powi(-e)).collect();
        let qs = [-2.0, -1.0, -0.5];
        let curve = lq_estimate(&list, &model, &qs, &scales, 4, CurveMeta::default()).unwrap();
        println!("gen {gen}: tau(-2)={:+.4} (want -6.859)  tau(-1)={:+.4} (want -3.613)  tau(-.5)={:+.4} (want -2.196)",
            curve.values[0], curve.values[1], curve.values[2]);
    }
}
