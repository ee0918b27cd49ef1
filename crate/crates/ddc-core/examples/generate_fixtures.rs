//! Regenerate the shipped tensor fixtures from the built-in generators.
//!
//! Run from the workspace root: `cargo run -p ddc-core --example generate_fixtures`

use ddc_core::{ddct, fixtures};

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&dir).expect("create fixtures dir");
    let bank = fixtures::demo_pair_bank::<f32>();
    let tensor = ddct::Tensor::F32(bank.weights().clone().into_dyn());
    let path = dir.join("demo_pair.ddct");
    ddct::write_tensor(&path, &tensor).expect("write fixture");
    println!("wrote {}", path.display());
}
