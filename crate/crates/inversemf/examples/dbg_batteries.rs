use inversemf::analysis::*;
use inversemf::env::sample_path;
use inversemf::gibbs::rpf_measure;
use inversemf::inverse::atoms;
use inversemf::presets;
use inversemf::report::{alpha_estimate_at, typical_points};
use inversemf::rng::Stream;
use std::sync::Arc;

fn main() {
    let model = presets::bernoulli2();
    let path = sample_path(&Arc::new(model.clone()), 300, "main").unwrap();
    let rpf = rpf_measure(&path, 0, 14, 40).unwrap();
    let list = atoms(&rpf.table, &path, 14, 1e-13).unwrap();
    let index = AtomIndex::build(&list);
    let mut heavy: Vec<&inversemf::inverse::Atom> = list.atoms.iter().filter(|a| a.weight > 0.0).collect();
    heavy.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
    let xs: Vec<f64> = heavy.iter().take(50).map(|a| a.position).collect();
    for (emin, emax, window) in [(6, 12, 3usize), (6, 16, 2), (8, 18, 2), (6, 18, 3)] {
        let scales: Vec<f64> = (emin..=emax).map(|e| 2.0f64.powi(-e)).collect();
        let dims = local_dims(&index, &xs, &scales, window);
        let worst = dims.iter().map(|d| d.lower).fold(f64::NEG_INFINITY, f64::max);
        println!("c9 scales 2^-{emin}..2^-{emax} window {window}: worst signed lower = {:.4}", worst);
    }
    let tables = DepthTables::build(&rpf.table);
    for (emin, emax, window) in [(6, 12, 3usize), (6, 12, 2), (5, 13, 2), (6, 14, 2)] {
        let scales: Vec<f64> = (emin..=emax).map(|e| 2.0f64.powi(-e)).collect();
        let mut stream = Stream::new(model.seed, "samples");
        let typical = typical_points(&rpf.table, &index, 200, &mut stream);
        let txs: Vec<f64> = typical.iter().map(|(_, x)| *x).collect();
        let tdims = local_dims(&index, &txs, &scales, window);
        let mut viol = 0;
        for ((_, x), d) in typical.iter().zip(&tdims) {
            let alpha = alpha_estimate_at(&rpf.table, &path, &tables, *x, 14).unwrap();
            if d.lower.is_finite() && d.lower > alpha + 0.1 { viol += 1; }
        }
        println!("c10 scales 2^-{emin}..2^-{emax} window {window}: violations {viol}/200");
    }
}
