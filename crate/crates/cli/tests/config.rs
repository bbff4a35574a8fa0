use perturb_cli::{parse_config_str, Kind};

const PROBIT: &str = "\
# comment line
kind = probit
seed = 42

[data]
n = 20   # trailing comment
p = 2

[drift]
sigmas = 2.5
";

#[test]
fn valid_file_with_sections() {
    let c = parse_config_str(PROBIT, "p.conf", None, None).unwrap();
    assert_eq!(c.kind, Kind::Probit);
    assert_eq!(c.seed, 42);
    assert_eq!(c.usize_or("data.n", 0), 20);
    assert_eq!(c.usize_or("data.p", 0), 2);
    assert_eq!(c.f64_or("drift.sigmas", 0.0), 2.5);
    assert_eq!(c.usize_or("mcmc.steps", 77), 77);
}

#[test]
fn dotted_keys_equal_sections() {
    let flat = parse_config_str("kind = probit\nseed = 1\ndata.n = 9\n", "a", None, None).unwrap();
    assert_eq!(flat.usize_or("data.n", 0), 9);
}

#[test]
fn misspelled_key_reports_line_and_column() {
    let text = "kind = probit\nseed = 3\n[data]\n  nn = 20\n";
    let e = parse_config_str(text, "bad.conf", None, None).unwrap_err();
    assert_eq!(e.line, Some(4));
    assert_eq!(e.column, Some(3));
    assert!(e.message.contains("unknown key 'data.nn'"), "{e}");
    assert!(e.to_string().starts_with("bad.conf:4:3:"), "{e}");
}

#[test]
fn missing_seed_is_rejected() {
    let e = parse_config_str("kind = pcn\n", "x", None, None).unwrap_err();
    assert!(e.message.contains("seed required for reproducibility"), "{e}");
    let ok = parse_config_str("kind = pcn\n", "x", None, Some(5)).unwrap();
    assert_eq!(ok.seed, 5);
}

#[test]
fn command_line_seed_overrides_file() {
    let c = parse_config_str(PROBIT, "p", None, Some(9)).unwrap();
    assert_eq!(c.seed, 9);
}

#[test]
fn type_mismatch_points_at_value() {
    let e = parse_config_str("kind = probit\nseed = 1\ndata.n = many\n", "t", None, None).unwrap_err();
    assert_eq!(e.line, Some(3));
    assert_eq!(e.column, Some(10));
    assert!(e.message.contains("'data.n'"), "{e}");
}

#[test]
fn kind_must_match_command() {
    let e = parse_config_str(PROBIT, "p", Some(Kind::Pcn), None).unwrap_err();
    assert!(e.message.contains("'probit'"), "{e}");
    assert!(parse_config_str("seed = 1\n", "p", None, None).unwrap_err().message.contains("missing 'kind'"));
}

#[test]
fn duplicate_keys_are_errors() {
    let e = parse_config_str("kind = probit\nseed = 1\n[data]\nn = 1\n[data]\nn = 2\n", "d", None, None).unwrap_err();
    assert_eq!(e.line, Some(6));
    assert!(e.message.contains("duplicate"), "{e}");
}

#[test]
fn lists_parse() {
    let c = parse_config_str("kind = pcn\nseed = 1\ncheck.probes = 0, 0.5 ,1\n", "l", None, None).unwrap();
    assert_eq!(c.f64_list("check.probes"), Some(vec![0.0, 0.5, 1.0]));
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            perturb_cli::parse_config(&path).unwrap_or_else(|e| panic!("{e}"));
            seen += 1;
        }
    }
    assert!(seen >= Kind::ALL.len());
}
