//! Regenerate the shipped netspec files from the built-in network builders.
//!
//! Run from the workspace root: `cargo run -p ddc-core --example generate_netspecs`

use ddc_core::nets;

fn main() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../netspecs");
    std::fs::create_dir_all(&dir).expect("create netspecs dir");
    for (file, net) in [
        ("mobilenetv2_cifar10.toml", nets::mobilenet_v2_cifar10()),
        (
            "efficientnet_b0_cifar10.toml",
            nets::efficientnet_b0_cifar10(),
        ),
        ("demo.toml", nets::demo_net()),
    ] {
        let path = dir.join(file);
        net.save(&path).expect("write netspec");
        println!("wrote {}", path.display());
    }
}
