use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const PARAMS: [(&str, &str, f64); 5] = [
    ("INERTIA", "PLANTBRIDGE_AERO_J", 0.0217),
    ("DAMPING", "PLANTBRIDGE_AERO_D", 0.0071),
    ("STIFFNESS", "PLANTBRIDGE_AERO_KS", 0.0104),
    ("TORQUE_GAIN", "PLANTBRIDGE_AERO_KT", 0.0045),
    ("SUBSTEP", "PLANTBRIDGE_AERO_H", 0.02),
];

fn main() {
    let out_dir = PathBuf::from(env::var("OUT_DIR").unwrap());
    let rustc = env::var("RUSTC").unwrap_or_else(|_| "rustc".into());
    let source = Path::new("plant/aero.rs");

    println!("cargo:rerun-if-changed=plant/aero.rs");
    println!("cargo:rerun-if-changed=plant/aero.manifest");

    let mut consts = String::new();
    let mut values = Vec::new();
    for (name, var, default) in PARAMS {
        println!("cargo:rerun-if-env-changed={var}");
        let value = match env::var(var) {
            Ok(s) => s
                .parse::<f64>()
                .unwrap_or_else(|e| panic!("{var}={s:?} is not a number: {e}")),
            Err(_) => default,
        };
        assert!(value > 0.0 && value.is_finite(), "{var} must be positive");
        consts.push_str(&format!("const {name}: f64 = {value:?};\n"));
        values.push(format!("{value:?}"));
    }
    let params_rs = out_dir.join("plant_params.rs");
    fs::write(&params_rs, consts).unwrap();
    fs::write(
        out_dir.join("built_params.rs"),
        format!("[{}]", values.join(", ")),
    )
    .unwrap();

    let prefix = env::var("CARGO_CFG_TARGET_OS")
        .map(|os| if os == "windows" { "" } else { "lib" })
        .unwrap_or("lib");
    let suffix = match env::var("CARGO_CFG_TARGET_OS").as_deref() {
        Ok("windows") => "dll",
        Ok("macos") | Ok("ios") => "dylib",
        _ => "so",
    };

    let full = out_dir.join(format!("{prefix}aero.{suffix}"));
    let no_term = out_dir.join(format!("{prefix}aero_noterm.{suffix}"));
    compile(&rustc, source, &params_rs, &full, &[]);
    compile(&rustc, source, &params_rs, &no_term, &["--cfg", "omit_terminate"]);

    println!("cargo:rustc-env=AERO_PLANT_LIB={}", full.display());
    println!("cargo:rustc-env=AERO_PLANT_NOTERM_LIB={}", no_term.display());
}

fn compile(rustc: &str, source: &Path, params: &Path, out: &Path, extra: &[&str]) {
    let status = Command::new(rustc)
        .args(["--edition", "2021", "--crate-type", "cdylib", "--crate-name", "aero"])
        .args(["-C", "opt-level=2", "-C", "panic=abort"])
        .args(extra)
        .arg("-o")
        .arg(out)
        .arg(source)
        .env("PLANT_PARAMS_RS", params)
        .status()
        .expect("failed to spawn rustc for the reference plant");
    assert!(status.success(), "building {} failed", out.display());
}
