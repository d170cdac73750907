use std::fs;
use std::path::Path;
use std::process::Command as Process;

use opfield_cli::{parse_config, serialize_config, CliError, EXIT_CONFIG, EXIT_IO, EXIT_PASS};

const SMALL: &str = r#"
seed = 5

[field]
representation = "moving-average"
E = 1.0
dim = 1
D = 0.4

[generator]
mode = "per-component"
alphas = [1.5]

[grid]
origin = [0.25]
spacing = [0.25]
dims = [4]

[resolution]
radial_per_octave = 2
tail_tol = 0.01

[run]
replicates = 20
"#;

fn opfield(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_opfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn shipped_configs_round_trip_with_stable_hash() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = parse_config(&fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg.hash(), again.hash(), "{}", path.display());
        assert_eq!(cfg.field.config_hash(), again.field.config_hash());
        assert_eq!(serialize_config(&cfg), serialize_config(&again));
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn hash_ignores_formatting_but_not_values() {
    let a = parse_config(SMALL).unwrap();
    let b = parse_config(&SMALL.replace("D = 0.4", "D   =   0.40")).unwrap();
    let c = parse_config(&SMALL.replace("D = 0.4", "D = 0.45")).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn empty_document_is_a_syntax_error() {
    let err = parse_config("  \n").unwrap_err();
    assert!(matches!(err, CliError::Syntax(_)));
    assert_eq!(err.exit_code(), EXIT_CONFIG);
}

#[test]
fn unknown_key_is_rejected() {
    let err = parse_config(&SMALL.replace("seed = 5", "seed = 5\nsede = 6")).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_CONFIG);
}

#[test]
fn integrability_boundary_is_a_config_error() {
    let text = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ma_anisotropic.toml"),
    )
    .unwrap();
    let err = parse_config(&text.replace("c = 0.75", "c = 1.5")).unwrap_err();
    assert!(matches!(err, CliError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), EXIT_CONFIG);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let empty = write(d, "empty.toml", "");
    let out = opfield(&[
        "simulate",
        "--config",
        &empty,
        "--out",
        &d.join("o1").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    let missing = d.join("nope.toml");
    let out = opfield(&[
        "simulate",
        "--config",
        &missing.to_string_lossy(),
        "--out",
        &d.join("o2").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_IO));

    // D and B do not commute
    let skew = write(
        d,
        "skew.toml",
        r#"
[field]
representation = "moving-average"
E = [1.0, 2.0]
D = [[0.5, 0.1], [0.0, 0.5]]

[generator]
mode = "per-component"
alphas = [1.2, 1.8]

[grid]
points = [[1.0, 0.5]]
"#,
    );
    let out = opfield(&[
        "verify-oss",
        "--config",
        &skew,
        "--out",
        &d.join("o3").to_string_lossy(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_CONFIG),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let small = write(d, "small.toml", SMALL);
    let blocker = d.join("blocker");
    fs::write(&blocker, "file").unwrap();
    let out = opfield(&[
        "simulate",
        "--config",
        &small,
        "--out",
        &blocker.join("sub").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_IO));

    let tagged = write(d, "tagged.toml", &format!("command = \"check\"\n{SMALL}"));
    let out = opfield(&[
        "simulate",
        "--config",
        &tagged,
        "--out",
        &d.join("o4").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn same_seed_gives_identical_raster() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "small.toml", SMALL);
    let run = |name: &str, seed: &str| {
        let out_dir = d.join(name);
        let out = opfield(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            &out_dir.to_string_lossy(),
            "--seed",
            seed,
        ]);
        assert_eq!(
            out.status.code(),
            Some(EXIT_PASS),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(out_dir.join("field.opfd")).unwrap()
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    assert_eq!(&a[..4], b"OPFD");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn single_thread_matches_default_pool() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "small.toml", SMALL);
    let a = d.join("a");
    let b = d.join("b");
    assert!(
        opfield(&["simulate", "--config", &cfg, "--out", &a.to_string_lossy()])
            .status
            .success()
    );
    assert!(opfield(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        &b.to_string_lossy(),
        "--threads",
        "1"
    ])
    .status
    .success());
    assert_eq!(
        fs::read(a.join("field.opfd")).unwrap(),
        fs::read(b.join("field.opfd")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("field.csv")).unwrap(),
        fs::read(b.join("field.csv")).unwrap()
    );
}

#[test]
fn check_reports_pass_for_admissible_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write(d, "small.toml", SMALL);
    let out = opfield(&[
        "check",
        "--config",
        &cfg,
        "--out",
        &d.join("o").to_string_lossy(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_PASS),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report = fs::read_to_string(d.join("o/report.txt")).unwrap();
    assert!(report.starts_with("[run]\ncommand=check\n"));
}
