//! Network snapshots: the versioned flat binary format used for
//! checkpoints, shown byte by byte.
//!
//! ```bash
//! cargo run --release --example snapshot_roundtrip
//! ```

use p3s::nn::{load_network, save_network, Mlp, OutputActivation};

fn main() {
    let net = Mlp::init(&[3, 4, 2], OutputActivation::Tanh, 99).unwrap();
    let dir = std::env::temp_dir();
    let path = dir.join("snapshot_roundtrip_demo.p3sn");

    save_network(&net, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    println!("wrote {} bytes for a [3, 4, 2] tanh network", bytes.len());
    println!("header:");
    println!("  magic             {:?}", std::str::from_utf8(&bytes[0..4]).unwrap());
    println!("  version           {}", u32::from_le_bytes(bytes[4..8].try_into().unwrap()));
    println!("  output activation {} (0 linear, 1 tanh)", bytes[8]);
    let n_sizes = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
    println!("  layer count       {n_sizes}");
    let sizes: Vec<u32> = (0..n_sizes as usize)
        .map(|k| u32::from_le_bytes(bytes[13 + 4 * k..17 + 4 * k].try_into().unwrap()))
        .collect();
    println!("  layer sizes       {sizes:?}");
    println!(
        "payload: {} parameters x 8 bytes, row-major weights then biases per layer, little-endian",
        net.param_count()
    );

    let first_weight = f64::from_le_bytes(bytes[25..33].try_into().unwrap());
    println!("  first weight      {first_weight}");

    let loaded = load_network(&path).unwrap();
    assert_eq!(loaded, net);
    println!("\nreloaded network equals the original on every bit");
    std::fs::remove_file(&path).ok();
}
