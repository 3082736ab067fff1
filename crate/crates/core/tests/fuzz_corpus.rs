//! Replays the checked-in fuzz corpus through the parsers so the seeds stay
//! meaningful when the fuzzers are not being run.

use std::fs;
use std::path::PathBuf;

use vecfish::io::{parse_neighbor_schedule, read_dataset, CsvOptions, RunRecord};
use vecfish::optimizer::Optimizer;
use vecfish::simulate::Layout;
use vecfish::Family;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn dataset_seeds() {
    let mut parsed = Vec::new();
    for (name, bytes) in seeds("dataset_csv") {
        let (&flags, body) = bytes.split_first().unwrap();
        let opts = CsvOptions {
            covariates: (flags & 1 == 1).then(|| vec!["z1".to_string()]),
            intercept: flags & 2 == 0,
        };
        if read_dataset(body, &opts).is_ok() {
            parsed.push(name);
        }
    }
    assert_eq!(
        parsed,
        ["covariate.csv", "lonlat.csv", "planar.csv", "spacetime.csv"]
    );
}

#[test]
fn schedule_seeds() {
    let got: Vec<(String, bool)> = seeds("neighbor_schedule")
        .into_iter()
        .map(|(n, b)| {
            (
                n,
                parse_neighbor_schedule(std::str::from_utf8(&b).unwrap()).is_ok(),
            )
        })
        .collect();
    for (name, ok) in got {
        let expect = !matches!(name.as_str(), "empty_entry" | "nonpositive");
        assert_eq!(ok, expect, "{name}");
    }
}

#[test]
fn record_seeds() {
    for (name, bytes) in seeds("run_record") {
        let text = String::from_utf8(bytes).unwrap();
        let rec = RunRecord::from_json(&text);
        assert_eq!(rec.is_ok(), name == "exponential.json", "{name}");
        if let Ok(rec) = rec {
            assert_eq!(RunRecord::from_json(&rec.to_json().unwrap()).unwrap(), rec);
        }
    }
}

#[test]
fn name_seeds() {
    for (name, bytes) in seeds("names") {
        let s = String::from_utf8(bytes).unwrap();
        let hits = s.parse::<Family>().is_ok() as u8
            + s.parse::<Optimizer>().is_ok() as u8
            + s.parse::<Layout>().is_ok() as u8;
        assert_eq!(hits, 1, "{name}");
    }
}
