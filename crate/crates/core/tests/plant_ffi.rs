//! The loader against the real reference plant library.

use plantbridge::env::{AeroParams, TwinPlant};
use plantbridge::plant_abi::{PlantManifest, PlantSymbols};
use plantbridge::{load_plant, InputBlock, Lifecycle, OutputBlock, Plant, PlantError, PlantHandle};
use plantbridge_refplant::{isolated_copy, isolated_noterm_copy, BUILT_PARAMS};
use proptest::prelude::*;

fn fresh() -> (plantbridge_refplant::PlantCopy, PlantHandle) {
    let copy = isolated_copy().unwrap();
    let handle = load_plant(copy.lib(), "aero").unwrap();
    (copy, handle)
}

#[test]
fn load_resolves_all_symbols() {
    let (_copy, h) = fresh();
    assert_eq!(h.lifecycle(), Lifecycle::Loaded);
    assert_eq!(h.model_name(), "aero");
    assert_ne!(h.symbols().input_block_addr(), 0);
    assert_ne!(h.symbols().output_block_addr(), 0);
    assert_eq!(
        PlantSymbols::names("aero"),
        ["aero_initialize", "aero_step", "aero_terminate", "aero_U", "aero_Y"]
    );
}

#[test]
fn wrong_model_name_is_missing_symbol() {
    let copy = isolated_copy().unwrap();
    let err = load_plant(copy.lib(), "nosuch").unwrap_err();
    assert_eq!(err, PlantError::MissingSymbol { name: "nosuch_initialize".into() });
}

#[test]
fn missing_terminate_is_named() {
    let copy = isolated_noterm_copy().unwrap();
    let err = load_plant(copy.lib(), "aero").unwrap_err();
    assert_eq!(err, PlantError::MissingSymbol { name: "aero_terminate".into() });
}

#[test]
fn bad_paths_and_names() {
    assert!(matches!(
        load_plant("/definitely/not/here.so", "aero"),
        Err(PlantError::FileNotLoadable { .. })
    ));
    let copy = isolated_copy().unwrap();
    assert!(matches!(
        load_plant(copy.manifest(), "aero"),
        Err(PlantError::FileNotLoadable { .. })
    ));
    assert!(matches!(load_plant(copy.lib(), "1aero"), Err(PlantError::InvalidModelName(_))));
}

#[test]
fn single_handle_per_image() {
    let (copy, h) = fresh();
    assert!(matches!(load_plant(copy.lib(), "aero"), Err(PlantError::AlreadyLoaded { .. })));
    drop(h);
    let again = load_plant(copy.lib(), "aero").unwrap();
    assert_eq!(again.lifecycle(), Lifecycle::Loaded);
}

#[test]
fn lifecycle_automaton() {
    use Lifecycle::*;
    // Exhaustive over every (state, operation) pair.
    type Op = fn(&mut PlantHandle) -> Result<(), PlantError>;
    let ops: [(&str, Op); 5] = [
        ("initialize", |h| h.initialize()),
        ("step", |h| h.step()),
        ("terminate", |h| h.terminate()),
        ("write", |h| h.write_inputs(InputBlock::default())),
        ("read", |h| h.read_outputs().map(|_| ())),
    ];
    let reach = |h: &mut PlantHandle, s: Lifecycle| match s {
        Loaded => {}
        Initialized => h.initialize().unwrap(),
        Terminated => {
            h.initialize().unwrap();
            h.terminate().unwrap();
        }
    };
    for state in [Loaded, Initialized, Terminated] {
        for (name, op) in ops {
            let (_copy, mut h) = fresh();
            reach(&mut h, state);
            let allowed = match name {
                "initialize" => state != Initialized,
                _ => state == Initialized,
            };
            let res = op(&mut h);
            assert_eq!(res.is_ok(), allowed, "{name} in {state}: {res:?}");
            if !allowed {
                assert!(matches!(res, Err(PlantError::WrongLifecycleState { .. })));
                assert_eq!(h.lifecycle(), state);
            }
        }
    }
}

#[test]
fn five_steps_are_one_agent_period() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    for _ in 0..5 {
        h.step().unwrap();
    }
    assert_eq!(h.substeps(), 5);
    assert!((h.time_s() - 0.1).abs() < 1e-15);
}

#[test]
fn rest_stays_at_rest() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    h.write_inputs(InputBlock::default()).unwrap();
    h.step().unwrap();
    assert_eq!(h.read_outputs().unwrap(), OutputBlock::default());
    for _ in 0..500 {
        h.step().unwrap();
    }
    assert_eq!(h.read_outputs().unwrap().pitch, 0.0);
}

#[test]
fn reads_are_pure() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    h.write_inputs(InputBlock::new(1.0, -0.5)).unwrap();
    h.step().unwrap();
    let a = h.read_outputs().unwrap();
    let b = h.read_outputs().unwrap();
    assert_eq!(a, b);
    assert_eq!(h.substeps(), 1);
}

#[test]
fn input_block_raw_bytes() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    h.write_inputs(InputBlock::new(3.0, -3.0)).unwrap();
    let mut expected = 3.0f64.to_le_bytes().to_vec();
    expected.extend((-3.0f64).to_le_bytes());
    if cfg!(target_endian = "little") {
        assert_eq!(h.input_block_bytes(), expected);
    }
    assert_eq!(h.read_raw_inputs(), vec![3.0, -3.0]);
    assert!(matches!(
        h.write_inputs(InputBlock::new(f64::NAN, 0.0)),
        Err(PlantError::NonFiniteInput(_))
    ));
    // A rejected write leaves the block untouched.
    assert_eq!(h.read_raw_inputs(), vec![3.0, -3.0]);
}

#[test]
fn steady_state_under_constant_input() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    let inputs = InputBlock::new(1.0, -1.0);
    h.write_inputs(inputs).unwrap();
    for _ in 0..3000 {
        h.step().unwrap();
    }
    let out = h.read_outputs().unwrap();
    let expected = AeroParams::from_array(BUILT_PARAMS).steady_state_pitch(inputs);
    assert!(((out.pitch - expected) / expected).abs() < 0.01, "{} vs {expected}", out.pitch);
    assert!(out.velocity.abs() < 1e-3);
}

#[test]
fn reinitialize_matches_fresh_load() {
    let run = |h: &mut PlantHandle| -> Vec<OutputBlock> {
        h.write_inputs(InputBlock::new(2.0, -1.0)).unwrap();
        (0..50).map(|_| { h.step().unwrap(); h.read_outputs().unwrap() }).collect()
    };
    let (_c1, mut a) = fresh();
    a.initialize().unwrap();
    let first = run(&mut a);
    a.terminate().unwrap();
    a.initialize().unwrap();
    assert_eq!(a.substeps(), 0);
    let second = run(&mut a);

    let (_c2, mut b) = fresh();
    b.initialize().unwrap();
    assert_eq!(first, second);
    assert_eq!(run(&mut b), first);
}

#[test]
fn manifest_drives_loading() {
    let copy = isolated_copy().unwrap();
    let manifest = PlantManifest::from_path(copy.manifest()).unwrap();
    let h = PlantHandle::load_with_manifest(copy.lib(), &manifest).unwrap();
    assert_eq!(h.substep_size_s(), 0.02);
    drop(h);
    let mut odd = manifest.clone();
    odd.outputs = plantbridge::plant_abi::BlockLayout::new(["theta", "velocity"]);
    assert!(matches!(
        PlantHandle::load_with_manifest(copy.lib(), &odd),
        Err(PlantError::LayoutMismatch(_))
    ));
}

#[test]
fn handle_moves_across_threads() {
    let (_copy, mut h) = fresh();
    h.initialize().unwrap();
    let h = std::thread::spawn(move || {
        h.step().unwrap();
        h
    })
    .join()
    .unwrap();
    assert_eq!(h.substeps(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Same call sequence, same bits, and the same bits as the twin.
    #[test]
    fn deterministic_and_matches_twin(inputs in proptest::collection::vec((-24.0f64..24.0, -24.0f64..24.0), 1..40)) {
        let (_c1, mut a) = fresh();
        let (_c2, mut b) = fresh();
        let mut twin = TwinPlant::new(AeroParams::from_array(BUILT_PARAMS));
        for p in [&mut a as &mut dyn Plant, &mut b, &mut twin] {
            p.initialize().unwrap();
        }
        for (v0, v1) in inputs {
            for p in [&mut a as &mut dyn Plant, &mut b, &mut twin] {
                p.write_inputs(InputBlock::new(v0, v1)).unwrap();
                p.step().unwrap();
            }
            let (oa, ob, ot) = (a.read_outputs().unwrap(), b.read_outputs().unwrap(), twin.read_outputs().unwrap());
            prop_assert_eq!(oa.pitch.to_bits(), ob.pitch.to_bits());
            prop_assert_eq!(oa.velocity.to_bits(), ob.velocity.to_bits());
            prop_assert!((oa.pitch - ot.pitch).abs() < 1e-9);
            prop_assert!((oa.velocity - ot.velocity).abs() < 1e-9);
        }
    }

    /// Writing the same value several times within a sub-step changes nothing.
    #[test]
    fn zero_order_hold(u in -10.0f64..10.0, extra_writes in 0usize..4) {
        let (_c1, mut once) = fresh();
        let (_c2, mut many) = fresh();
        once.initialize().unwrap();
        many.initialize().unwrap();
        once.write_inputs(InputBlock::differential(u)).unwrap();
        for _ in 0..10 {
            once.step().unwrap();
            for _ in 0..=extra_writes {
                many.write_inputs(InputBlock::new(0.0, 0.0)).unwrap();
                many.write_inputs(InputBlock::differential(u)).unwrap();
            }
            many.step().unwrap();
        }
        prop_assert_eq!(once.read_outputs().unwrap(), many.read_outputs().unwrap());
    }
}
