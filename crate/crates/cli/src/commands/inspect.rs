use std::path::Path;

use anyhow::Context;
use log::warn;
use plantbridge::plant_abi::{PlantManifest, PlantSymbols};
use plantbridge::{InputBlock, Plant, PlantHandle};

use crate::config::RunConfig;
use crate::exit::{CmdResult, ExitCodeExt, CONFIG};

/// Loads `plant` with the layout in `manifest`, resolves every symbol,
/// runs one initialize/step/terminate cycle and prints what it found.
pub fn run(plant: &Path, manifest: &Path, config: Option<&Path>) -> CmdResult {
    let manifest = PlantManifest::from_path(manifest)
        .with_context(|| format!("manifest {}", manifest.display()))
        .exit_code(CONFIG)?;
    let mut handle = PlantHandle::load_with_manifest(plant, &manifest)
        .with_context(|| format!("plant {}", plant.display()))
        .exit_code(CONFIG)?;

    println!("plant    {}", handle.image_path().display());
    println!("model    {}", manifest.model_name);
    println!("symbols");
    let symbols = handle.symbols();
    for name in PlantSymbols::names(&manifest.model_name) {
        let addr = if name.ends_with("_U") {
            format!("  @ {:#x}", symbols.input_block_addr())
        } else if name.ends_with("_Y") {
            format!("  @ {:#x}", symbols.output_block_addr())
        } else {
            String::new()
        };
        println!("  {name}{addr}");
    }
    for (label, layout) in [("input block", &manifest.inputs), ("output block", &manifest.outputs)] {
        println!("{label} ({} x f64, {} bytes)", layout.len(), layout.len() * 8);
        for field in layout.fields() {
            println!("  +{:<3} {field}", layout.byte_offset(field).unwrap_or_default());
        }
    }
    println!("substep  {} s", manifest.substep_size_s);

    let agent = RunConfig::load_or_default(config)?.env;
    match agent.substeps_for(manifest.substep_size_s) {
        Some(n) if n == agent.substeps_per_action => {
            println!("agent    {} s = {n} sub-steps", agent.agent_sample_time)
        }
        Some(n) => warn_mismatch(format!(
            "manifest sub-step {} s implies {n} sub-steps per {} s action, config says {}",
            manifest.substep_size_s, agent.agent_sample_time, agent.substeps_per_action
        )),
        None => warn_mismatch(format!(
            "manifest sub-step {} s does not divide the {} s agent sample time",
            manifest.substep_size_s, agent.agent_sample_time
        )),
    }

    // Smoke cycle: a conforming plant initializes, steps to finite outputs
    // and terminates.
    handle.initialize().exit_code(CONFIG)?;
    handle.write_inputs(InputBlock::default()).exit_code(CONFIG)?;
    handle.step().exit_code(CONFIG)?;
    let out = handle.read_outputs().exit_code(CONFIG)?;
    handle.terminate().exit_code(CONFIG)?;
    println!("smoke    pitch {} rad, velocity {} rad/s after one sub-step at rest", out.pitch, out.velocity);
    println!("conformant");
    Ok(())
}

fn warn_mismatch(msg: String) {
    warn!("{msg}");
    eprintln!("warning: {msg}");
}
