use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use libloading::Library;
use log::debug;

use super::{
    check_outputs, is_valid_identifier, InputBlock, Lifecycle, OutputBlock, Plant, PlantError,
    PlantManifest,
};

type EntryPoint = unsafe extern "C" fn();

/// Canonical paths of library images that currently have a live handle.
fn live_images() -> &'static Mutex<HashSet<PathBuf>> {
    static LIVE: OnceLock<Mutex<HashSet<PathBuf>>> = OnceLock::new();
    LIVE.get_or_init(Default::default)
}

/// Resolved ABI entry points and data block addresses.
#[derive(Debug, Clone, Copy)]
pub struct PlantSymbols {
    init_fn: EntryPoint,
    step_fn: EntryPoint,
    term_fn: EntryPoint,
    input_block: *mut f64,
    output_block: *mut f64,
}

impl PlantSymbols {
    /// The five symbol names a model must export, in resolution order.
    pub fn names(model_name: &str) -> [String; 5] {
        ["initialize", "step", "terminate", "U", "Y"].map(|s| format!("{model_name}_{s}"))
    }

    pub fn input_block_addr(&self) -> usize {
        self.input_block as usize
    }

    pub fn output_block_addr(&self) -> usize {
        self.output_block as usize
    }
}

/// A loaded, symbol-resolved plant library.
///
/// The exported data blocks are globals of the library image, so only one
/// handle per image may be alive at a time. Dropping an initialized handle
/// terminates the model first.
pub struct PlantHandle {
    // `_library` stays the last field so it is dropped after everything
    // that points into it.
    symbols: PlantSymbols,
    manifest: PlantManifest,
    state: Lifecycle,
    substeps: u64,
    pitch_idx: usize,
    velocity_idx: usize,
    v0_idx: usize,
    v1_idx: usize,
    image: PathBuf,
    _library: Library,
}

// The handle owns its image exclusively (see the registry); raw block
// pointers are only dereferenced through `&self`/`&mut self`.
unsafe impl Send for PlantHandle {}

/// Loads `library_path` as model `model_name` with the standard block layout.
pub fn load_plant(
    library_path: impl AsRef<Path>,
    model_name: &str,
) -> Result<PlantHandle, PlantError> {
    PlantHandle::load(library_path, model_name)
}

impl PlantHandle {
    pub fn load(library_path: impl AsRef<Path>, model_name: &str) -> Result<Self, PlantError> {
        Self::load_with_manifest(library_path, &PlantManifest::standard(model_name))
    }

    pub fn load_with_manifest(
        library_path: impl AsRef<Path>,
        manifest: &PlantManifest,
    ) -> Result<Self, PlantError> {
        let path = library_path.as_ref();
        if !is_valid_identifier(&manifest.model_name) {
            return Err(PlantError::InvalidModelName(manifest.model_name.clone()));
        }
        let field = |layout: &super::BlockLayout, name: &str| {
            layout.index_of(name).ok_or_else(|| {
                PlantError::LayoutMismatch(format!("manifest does not declare field `{name}`"))
            })
        };
        let v0_idx = field(&manifest.inputs, "v0")?;
        let v1_idx = field(&manifest.inputs, "v1")?;
        let pitch_idx = field(&manifest.outputs, "pitch")?;
        let velocity_idx = field(&manifest.outputs, "velocity")?;

        let image = path.canonicalize().map_err(|e| PlantError::FileNotLoadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;

        let mut live = live_images().lock().unwrap_or_else(|e| e.into_inner());
        if live.contains(&image) {
            return Err(PlantError::AlreadyLoaded {
                path: image.display().to_string(),
            });
        }

        // SAFETY: loading runs the library's initializers; plant libraries
        // are trusted artifacts by contract.
        let library = unsafe { Library::new(&image) }.map_err(|e| PlantError::FileNotLoadable {
            path: image.display().to_string(),
            reason: e.to_string(),
        })?;

        let [init, step, term, u, y] = PlantSymbols::names(&manifest.model_name);
        let entry = |name: &str| -> Result<EntryPoint, PlantError> {
            // SAFETY: the ABI fixes these as `void f(void)`.
            unsafe { library.get::<EntryPoint>(name.as_bytes()) }
                .map(|s| *s)
                .map_err(|_| PlantError::MissingSymbol {
                    name: name.to_owned(),
                })
        };
        let block = |name: &str| -> Result<*mut f64, PlantError> {
            // SAFETY: a data symbol resolves to the address of the object.
            let addr = unsafe { library.get::<*mut f64>(name.as_bytes()) }
                .map(|s| *s)
                .map_err(|_| PlantError::MissingSymbol {
                    name: name.to_owned(),
                })?;
            if addr.is_null() {
                return Err(PlantError::MissingSymbol {
                    name: name.to_owned(),
                });
            }
            Ok(addr)
        };
        let symbols = PlantSymbols {
            init_fn: entry(&init)?,
            step_fn: entry(&step)?,
            term_fn: entry(&term)?,
            input_block: block(&u)?,
            output_block: block(&y)?,
        };

        live.insert(image.clone());
        debug!("loaded plant `{}` from {}", manifest.model_name, image.display());

        Ok(Self {
            symbols,
            manifest: manifest.clone(),
            state: Lifecycle::Loaded,
            substeps: 0,
            pitch_idx,
            velocity_idx,
            v0_idx,
            v1_idx,
            image,
            _library: library,
        })
    }

    pub fn symbols(&self) -> &PlantSymbols {
        &self.symbols
    }

    pub fn manifest(&self) -> &PlantManifest {
        &self.manifest
    }

    pub fn model_name(&self) -> &str {
        &self.manifest.model_name
    }

    pub fn image_path(&self) -> &Path {
        &self.image
    }

    fn require(&self, op: &'static str, allowed: &[Lifecycle]) -> Result<(), PlantError> {
        if allowed.contains(&self.state) {
            Ok(())
        } else {
            Err(PlantError::WrongLifecycleState {
                op,
                state: self.state,
            })
        }
    }

    /// Writes every input field in manifest order. Unchecked beyond finiteness.
    pub fn write_raw_inputs(&mut self, values: &[f64]) -> Result<(), PlantError> {
        self.require("write_inputs", &[Lifecycle::Initialized])?;
        if values.len() != self.manifest.inputs.len() {
            return Err(PlantError::LayoutMismatch(format!(
                "input block has {} fields, got {} values",
                self.manifest.inputs.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFiniteInput(values.to_vec()));
        }
        for (i, v) in values.iter().enumerate() {
            // SAFETY: the manifest sizes the exported block.
            unsafe { self.symbols.input_block.add(i).write(*v) };
        }
        Ok(())
    }

    pub fn read_raw_inputs(&self) -> Vec<f64> {
        (0..self.manifest.inputs.len())
            // SAFETY: as above.
            .map(|i| unsafe { self.symbols.input_block.add(i).read() })
            .collect()
    }

    pub fn read_raw_outputs(&self) -> Result<Vec<f64>, PlantError> {
        self.require("read_outputs", &[Lifecycle::Initialized])?;
        Ok((0..self.manifest.outputs.len())
            // SAFETY: the manifest sizes the exported block.
            .map(|i| unsafe { self.symbols.output_block.add(i).read() })
            .collect())
    }

    /// The raw bytes of the exported input block as they sit in memory.
    pub fn input_block_bytes(&self) -> Vec<u8> {
        self.read_raw_inputs()
            .iter()
            .flat_map(|v| v.to_ne_bytes())
            .collect()
    }
}

impl Plant for PlantHandle {
    fn lifecycle(&self) -> Lifecycle {
        self.state
    }

    fn substep_size_s(&self) -> f64 {
        self.manifest.substep_size_s
    }

    fn initialize(&mut self) -> Result<(), PlantError> {
        self.require("initialize", &[Lifecycle::Loaded, Lifecycle::Terminated])?;
        // SAFETY: resolved `void f(void)` entry point of a live library.
        unsafe { (self.symbols.init_fn)() };
        self.state = Lifecycle::Initialized;
        self.substeps = 0;
        Ok(())
    }

    fn step(&mut self) -> Result<(), PlantError> {
        self.require("step", &[Lifecycle::Initialized])?;
        // SAFETY: as above.
        unsafe { (self.symbols.step_fn)() };
        self.substeps += 1;
        self.read_outputs().map(|_| ())
    }

    fn write_inputs(&mut self, block: InputBlock) -> Result<(), PlantError> {
        self.require("write_inputs", &[Lifecycle::Initialized])?;
        if !block.is_finite() {
            return Err(PlantError::NonFiniteInput(vec![block.v0, block.v1]));
        }
        let mut raw = self.read_raw_inputs();
        raw[self.v0_idx] = block.v0;
        raw[self.v1_idx] = block.v1;
        self.write_raw_inputs(&raw)
    }

    fn read_outputs(&self) -> Result<OutputBlock, PlantError> {
        let raw = self.read_raw_outputs()?;
        check_outputs(OutputBlock {
            pitch: raw[self.pitch_idx],
            velocity: raw[self.velocity_idx],
        })
    }

    fn terminate(&mut self) -> Result<(), PlantError> {
        self.require("terminate", &[Lifecycle::Initialized])?;
        // SAFETY: as above.
        unsafe { (self.symbols.term_fn)() };
        self.state = Lifecycle::Terminated;
        Ok(())
    }

    fn substeps(&self) -> u64 {
        self.substeps
    }
}

impl Drop for PlantHandle {
    fn drop(&mut self) {
        if self.state == Lifecycle::Initialized {
            // SAFETY: library is still loaded; it is dropped after this body.
            unsafe { (self.symbols.term_fn)() };
        }
        live_images()
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&self.image);
    }
}

impl std::fmt::Debug for PlantHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlantHandle")
            .field("model", &self.manifest.model_name)
            .field("image", &self.image)
            .field("state", &self.state)
            .field("substeps", &self.substeps)
            .finish()
    }
}
