//! The checked-in fuzz seeds are valid inputs for their decoders.

use std::fs;
use std::path::PathBuf;

use malab::config::ExperimentConfig;
use malab::estimates::EstimateReport;
use malab::magf;
use malab::singular::CantorStructure;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn text(b: &[u8]) -> &str {
    std::str::from_utf8(b).unwrap()
}

#[test]
fn magf_seeds_parse_and_round_trip() {
    for (name, bytes) in seeds("magf") {
        let u = magf::parse_bytes(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
        let back = magf::parse(&magf::write(&u)).unwrap();
        assert_eq!(back.grid(), u.grid(), "{name}");
        assert!(back.values().iter().zip(u.values()).all(|(a, b)| a == b || (a.is_nan() && b.is_nan())), "{name}");
    }
}

#[test]
fn json_seeds_parse() {
    for (name, b) in seeds("config_json") {
        ExperimentConfig::from_json(text(&b)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, b) in seeds("cantor_json") {
        CantorStructure::from_json(text(&b)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, b) in seeds("report_json") {
        EstimateReport::from_json(text(&b)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
