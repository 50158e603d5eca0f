//! Writes the concentric and an eccentric mesh of the default machine in the
//! plain-text mesh format, plus one field solution per step of a short run.
//!
//! cargo run --release --example mesh_export -- [out_dir]

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use pmsm_uq::eccentricity::EccentricityState;
use pmsm_uq::machine::MachineSpec;
use pmsm_uq::simulation::{PeriodKind, PreparedMachine, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/mesh".into()));
    std::fs::create_dir_all(&out)?;
    let spec = MachineSpec::default();
    let machine = PreparedMachine::new(&spec, 0)?;
    machine
        .mesh()
        .write_text(BufWriter::new(File::create(out.join("mesh.txt"))?))?;

    let ecc = EccentricityState::from_eccentricity(0.5, 0.0, spec.airgap())?;
    let eccentric = machine.with_eccentricity(&ecc)?;
    eccentric
        .mesh()
        .write_text(BufWriter::new(File::create(out.join("mesh_eps_0.5.txt"))?))?;

    let options = RunOptions {
        period: PeriodKind::Electrical,
        dump_dir: Some(out.join("fields")),
        ..Default::default()
    };
    let run = machine.run_period(&machine.drive(), &options)?;
    println!(
        "wrote {} ({} nodes), the eccentric mesh and {} field files",
        out.join("mesh.txt").display(),
        machine.mesh().node_count(),
        run.records.len()
    );
    Ok(())
}
