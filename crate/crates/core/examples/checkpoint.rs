//! Saves a network, inspects its manifest, and reloads it bit for bit.

use sskt::models::{
    build_target, load_checkpoint, save_checkpoint, ConvBlockSpec, NetworkSpec, TrunkSpec,
};

fn main() -> sskt::Result<()> {
    let trunk = TrunkSpec {
        input: [1, 8, 8],
        blocks: vec![ConvBlockSpec::new(4, 4, 2, 1)],
    };
    let net = build_target(NetworkSpec::new(trunk, 3).with_sources(vec![5], true), 1)?;

    let dir = std::env::temp_dir().join("sskt-checkpoint-example");
    let manifest = save_checkpoint(&net, &dir)?;
    println!(
        "{} v{} sha256 {}",
        manifest.format, manifest.version, manifest.sha256
    );
    for t in &manifest.tensors {
        println!("  {:<16} {:?} at byte {}", t.name, t.shape, t.offset);
    }

    let back = load_checkpoint(&dir)?;
    assert_eq!(back.params().checksum(), net.params().checksum());
    println!("reloaded, parameter checksum {}", back.params().checksum());
    Ok(())
}
