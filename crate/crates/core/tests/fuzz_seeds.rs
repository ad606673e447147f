//! Runs the fuzz corpus seeds through the same round-trip checks as the
//! fuzz targets, so the seeds stay valid on stable toolchains.

use std::path::PathBuf;

use weaklog::config::RunConfig;
use weaklog::dataset::parse_dataset;
use weaklog::embed::{load_pretrained, write_vectors};
use weaklog::kb::{parse_goal, parse_program, KnowledgeBase, Symbols};
use weaklog::templates::parse_templates;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("seeds are UTF-8")
}

#[test]
fn program_seeds_round_trip() {
    for (_, b) in seeds("parse_program") {
        let kb = parse_program(text(&b)).unwrap();
        let printed = kb.to_program_text();
        assert_eq!(parse_program(&printed).unwrap().to_program_text(), printed);
    }
}

#[test]
fn goal_seeds_round_trip() {
    for (_, b) in seeds("parse_goal") {
        let mut symbols = Symbols::new();
        let goal = parse_goal(text(&b), &mut symbols).unwrap();
        let shown = symbols.show(&goal).to_string();
        let again = parse_goal(&shown, &mut symbols).unwrap();
        assert_eq!(symbols.show(&again).to_string(), shown);
    }
}

#[test]
fn template_seeds_round_trip() {
    for (_, b) in seeds("parse_templates") {
        let ts = parse_templates(text(&b)).unwrap();
        let printed: String = ts.iter().map(|t| format!("{t}\n")).collect();
        assert_eq!(parse_templates(&printed).unwrap(), ts);
    }
}

#[test]
fn triple_seeds_parse_or_fail_cleanly() {
    let mut ok = 0;
    for (_, b) in seeds("parse_triples") {
        let mut kb = KnowledgeBase::new();
        if let Ok(n) = kb.extend_triples(b.as_slice()) {
            assert_eq!(n, kb.facts.len());
            ok += 1;
        }
    }
    assert!(ok > 0);
}

#[test]
fn vector_seeds_round_trip() {
    let mut ok = 0;
    for (_, b) in seeds("load_vectors") {
        if let Ok(kv) = load_pretrained(b.as_slice()) {
            let mut out = Vec::new();
            write_vectors(&mut out, kv.dim(), kv.iter()).unwrap();
            assert_eq!(load_pretrained(out.as_slice()).unwrap(), kv);
            ok += 1;
        }
    }
    assert!(ok > 0);
}

#[test]
fn dataset_and_config_seeds() {
    let parsed = seeds("parse_dataset").iter().filter(|(_, b)| parse_dataset(b.as_slice(), &mut Symbols::new()).is_ok()).count();
    assert!(parsed > 0);
    for (p, b) in seeds("parse_config") {
        let cfg = RunConfig::from_toml(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let _ = cfg.validate();
    }
}
