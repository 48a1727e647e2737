//! Keeps the problem files shipped under `fixtures/` in lockstep with the
//! built-in registry. Run with `REGEN_FIXTURE_FILES=1` to rewrite them.

use std::path::PathBuf;

use newcomblike::fileio;
use newcomblike::fixtures;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn shipped_problem_files_match_the_registry() {
    let dir = fixtures_dir();
    let regen = std::env::var_os("REGEN_FIXTURE_FILES").is_some();
    if regen {
        std::fs::create_dir_all(&dir).unwrap();
    }
    for name in fixtures::names() {
        let fixture = fixtures::load(name).unwrap();
        let expected = fileio::save_string(&fixture.problem).unwrap();
        let path = dir.join(format!("{name}.json"));
        if regen {
            std::fs::write(&path, &expected).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, expected, "{name}.json is stale; regenerate it");
    }
}

#[test]
fn shipped_problem_files_reload_cleanly() {
    let dir = fixtures_dir();
    for name in fixtures::names() {
        let path = dir.join(format!("{name}.json"));
        let problem = fileio::load_path(&path).unwrap();
        assert!(problem.validate().is_empty(), "{name}");
    }
}
