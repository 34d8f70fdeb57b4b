//! Regenerates the shipped scenario documents under `scenarios/`.

use std::path::Path;

use glosa_sim::config::default_document;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["ring", "ring-traffic", "grid", "corridor-low", "corridor-medium", "corridor-high"] {
        let doc = default_document(name).expect("known name");
        std::fs::write(dir.join(format!("{name}.json")), doc.to_json())?;
    }
    Ok(())
}
