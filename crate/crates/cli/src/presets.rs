//! Named scenario presets.

use platoon_core::scenario::{build_braking_scenario, build_oscillatory_scenario, ControllerKind, ScenarioSpec};

pub const DRY_MU: f64 = 0.8;
pub const WET_MU: f64 = 0.5;
pub const ACC_TIME_GAP: f64 = 1.1;
pub const CACC_TIME_GAP: f64 = 0.6;

/// Preset name and one-line description.
pub const PRESETS: &[(&str, &str)] = &[
    ("braking-dry-acc", "3 vehicles, lead brakes 90 -> 30 km/h at 150 s, mu 0.8, ACC h 1.1"),
    ("braking-dry-cacc", "3 vehicles, lead brakes 90 -> 30 km/h at 150 s, mu 0.8, connected h 0.6"),
    ("braking-wet-acc", "3 vehicles, lead brakes 90 -> 30 km/h at 150 s, mu 0.5, ACC h 1.1"),
    ("braking-wet-cacc", "3 vehicles, lead brakes 90 -> 30 km/h at 150 s, mu 0.5, connected h 0.6"),
    ("oscillatory-1-acc", "8 vehicles, lead 80 +/- 4 km/h sine, T 40 s, ACC h 1.1"),
    ("oscillatory-1-cacc", "8 vehicles, lead 80 +/- 4 km/h sine, T 40 s, connected h 0.6"),
    ("oscillatory-2-acc", "8 vehicles, lead 80 +/- 4 km/h sine, T 20 s, ACC h 1.1"),
    ("oscillatory-2-cacc", "8 vehicles, lead 80 +/- 4 km/h sine, T 20 s, connected h 0.6"),
    ("braking-dry-acc-h0.6", "braking reference, ACC at the short time gap"),
    ("oscillatory-1-acc-h0.6", "oscillatory 1 reference, ACC at the short time gap"),
    ("oscillatory-2-acc-h0.6", "oscillatory 2 reference, ACC at the short time gap"),
];

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    use ControllerKind::{Acc, Cacc};
    let mut spec = match name {
        "braking-dry-acc" => build_braking_scenario(DRY_MU, Acc, ACC_TIME_GAP),
        "braking-dry-cacc" => build_braking_scenario(DRY_MU, Cacc, CACC_TIME_GAP),
        "braking-wet-acc" => build_braking_scenario(WET_MU, Acc, ACC_TIME_GAP),
        "braking-wet-cacc" => build_braking_scenario(WET_MU, Cacc, CACC_TIME_GAP),
        "braking-dry-acc-h0.6" => build_braking_scenario(DRY_MU, Acc, CACC_TIME_GAP),
        "oscillatory-1-acc" => build_oscillatory_scenario(1, Acc, ACC_TIME_GAP).ok()?,
        "oscillatory-1-cacc" => build_oscillatory_scenario(1, Cacc, CACC_TIME_GAP).ok()?,
        "oscillatory-2-acc" => build_oscillatory_scenario(2, Acc, ACC_TIME_GAP).ok()?,
        "oscillatory-2-cacc" => build_oscillatory_scenario(2, Cacc, CACC_TIME_GAP).ok()?,
        "oscillatory-1-acc-h0.6" => build_oscillatory_scenario(1, Acc, CACC_TIME_GAP).ok()?,
        "oscillatory-2-acc-h0.6" => build_oscillatory_scenario(2, Acc, CACC_TIME_GAP).ok()?,
        _ => return None,
    };
    spec.name = name.to_string();
    Some(spec)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}
