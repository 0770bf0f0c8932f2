//! Writes the built-in model configurations as JSON files.
//!
//! Usage: cargo run -p inversemf --example export_models -- <output-dir>

use inversemf::presets;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "models".to_string());
    std::fs::create_dir_all(&dir).expect("create output dir");
    let all = [
        ("bernoulli2", presets::bernoulli2()),
        ("symmetric_quarter", presets::symmetric_quarter()),
        ("cantor_third", presets::cantor_third()),
        ("moran_a", presets::moran_a()),
        ("moran_b", presets::moran_b()),
        ("golden_mean", presets::golden_mean()),
        ("rand2", presets::rand2()),
        ("tiling_invalid", presets::tiling()),
    ];
    for (name, model) in all {
        let path = format!("{dir}/{name}.json");
        std::fs::write(&path, model.to_json().expect("serialize")).expect("write model");
        println!("wrote {path}");
    }
}
