//! Reference pitch plant shipped as a real shared library.
//!
//! The build script compiles `plant/aero.rs` into a standalone cdylib that
//! exports `aero_initialize`, `aero_step`, `aero_terminate`, `aero_U` and
//! `aero_Y`. This crate only hands out paths to the built artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Path of the conforming reference plant library.
pub const AERO_LIB: &str = env!("AERO_PLANT_LIB");

/// Same plant built without `aero_terminate`, for conformance failure tests.
pub const AERO_NOTERM_LIB: &str = env!("AERO_PLANT_NOTERM_LIB");

/// Manifest describing the reference plant's data blocks.
pub const AERO_MANIFEST: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/plant/aero.manifest");

/// Compiled-in constants `[J, D, K_s, K_t, h]` of the reference plant.
pub const BUILT_PARAMS: [f64; 5] = include!(concat!(env!("OUT_DIR"), "/built_params.rs"));

pub fn aero_lib() -> &'static Path {
    Path::new(AERO_LIB)
}

pub fn aero_manifest() -> &'static Path {
    Path::new(AERO_MANIFEST)
}

/// A private copy of a plant library plus its manifest.
///
/// Every copy is a distinct library image with its own exported data blocks,
/// so independent tests can each hold a live plant without tripping the
/// one-handle-per-image rule.
pub struct PlantCopy {
    dir: tempfile::TempDir,
    lib: PathBuf,
    manifest: PathBuf,
}

impl PlantCopy {
    pub fn lib(&self) -> &Path {
        &self.lib
    }

    pub fn manifest(&self) -> &Path {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }
}

/// Copies the reference plant into a fresh temporary directory.
pub fn isolated_copy() -> io::Result<PlantCopy> {
    copy_of(aero_lib())
}

/// Copies the `aero_terminate`-less plant into a fresh temporary directory.
pub fn isolated_noterm_copy() -> io::Result<PlantCopy> {
    copy_of(Path::new(AERO_NOTERM_LIB))
}

fn copy_of(src: &Path) -> io::Result<PlantCopy> {
    let dir = tempfile::tempdir()?;
    let lib = dir.path().join(src.file_name().expect("library path has a file name"));
    fs::copy(src, &lib)?;
    let manifest = dir.path().join("aero.manifest");
    fs::copy(aero_manifest(), &manifest)?;
    Ok(PlantCopy { dir, lib, manifest })
}
