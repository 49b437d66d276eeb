use std::process::{Command, Output};

use serde_json::Value;

fn freelat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freelat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("JSON error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn apq_of_cauchy_half_moment() {
    let out = freelat(&["apq", "--p", "0.5", "--q", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    assert_eq!(v["config"]["command"]["p"], 0.5);
    assert_eq!(v["config"]["global"]["seed"], 0);
    assert!(v.get("timestamp").is_some());
}

#[test]
fn apq_at_the_pole_is_a_validation_error() {
    let out = freelat(&["apq", "--p", "1", "--q", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "divergent");
    assert!(err["message"].as_str().unwrap().contains("p must be < q"));
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(
        freelat(&["apq", "--p", "0.5", "--q", "1", "--bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(freelat(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        freelat(&["apq", "--p", "0.5", "--q", "1", "--json", "--csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn hilbert_table_for_one_cell_has_zero_minimum() {
    let out = freelat(&["hilbert-table", "--n", "1", "--cells", "101"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json_of(&out)["rows"][0];
    assert_eq!(row["n"], 1);
    assert!(row["grid_min"].as_f64().unwrap().abs() <= 1e-3);
}

#[test]
fn hilbert_table_csv_has_named_columns_and_full_precision() {
    let out = freelat(&["hilbert-table", "--n", "1,2,4", "--cells", "1001", "--csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(
        lines.next().unwrap(),
        "n,grid_min,log_2n_minus_1,weak_l1_lb,grid_tolerance"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    let field = rows[1].split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert_eq!(field.parse::<f64>().unwrap(), 3f64.ln());
}

#[test]
fn reproducible_runs_are_byte_identical() {
    let args = [
        "fbl-norm",
        "--space",
        "lp:2:3",
        "--p",
        "0.5",
        "--expr",
        "(max (gen 0) (abs (sub (gen 1) (gen 2))))",
        "--seed",
        "7",
        "--reproducible",
    ];
    let a = freelat(&args);
    let b = freelat(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(json_of(&a).get("timestamp").is_none());

    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    let c = json_of(&freelat(&threaded));
    let mut a = json_of(&a);
    a["config"]["global"]["threads"] = Value::Null;
    let mut c = c;
    c["config"]["global"]["threads"] = Value::Null;
    assert_eq!(a, c);
}

#[test]
fn stable_samples_follow_the_seed() {
    let draw = |seed: &str| {
        json_of(&freelat(&[
            "stable-sample",
            "--q",
            "1.5",
            "--samples",
            "5",
            "--seed",
            seed,
            "--reproducible",
        ]))["samples"]
            .clone()
    };
    assert_eq!(draw("3"), draw("3"));
    assert_ne!(draw("3"), draw("4"));
}

#[test]
fn fbl_norm_reports_exact_bracket() {
    let out = freelat(&[
        "fbl-norm",
        "--space",
        "lp:1:2",
        "--p",
        "1",
        "--expr",
        "(add (abs (gen 0)) (abs (gen 1)))",
        "--budget",
        "n=4,restarts=4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!((v["lower"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
    assert!((v["upper"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
    assert!(v["flags"].is_object());
    assert!(v["lower_certificate"].is_array());
}

#[test]
fn rejected_certificate_exits_with_property_failure() {
    let out = freelat(&[
        "fbl-norm",
        "--space",
        "lp:1:2",
        "--expr",
        "(add (abs (gen 0)) (abs (gen 1)))",
        "--cert",
        "1,0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "certificate-rejected");
    assert!(err["witness"]["functional"].is_array());
}

#[test]
fn printed_expressions_reparse_with_identical_values() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let f = freelat::acceptance::random_expr(&mut rng, 3, 4);
        let src = f.to_string();
        let out = freelat(&["expr-eval", "--expr", &src, "--at", "1;2;3"]);
        assert_eq!(out.status.code(), Some(0));
        let printed = json_of(&out)["expr"].as_str().unwrap().to_string();
        let g = freelat::parse(&printed).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
            assert_eq!(
                f.evaluate_scalar(&x[..]).unwrap().to_bits(),
                g.evaluate_scalar(&x[..]).unwrap().to_bits()
            );
        }
    }
}

#[test]
fn expr_eval_on_lattice_elements() {
    let out = freelat(&[
        "expr-eval",
        "--expr",
        "(max (gen 0) (gen 1))",
        "--at",
        "1,-2;0,3",
        "--space",
        "lp:1:2",
    ]);
    let v = json_of(&out);
    assert_eq!(v["values"], serde_json::json!([1.0, 3.0]));
    assert_eq!(v["quasi_norm"], 4.0);
}

#[test]
fn projectivity_emits_five_verdicts() {
    let out = freelat(&[
        "projectivity",
        "--N",
        "6",
        "--p",
        "0.5",
        "--trials",
        "500",
        "--sandwich",
        "3",
        "--seed",
        "7",
        "--csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let verdicts: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(verdicts.len(), 5);
    assert!(verdicts.iter().all(|l| l.ends_with(",true")));
}

#[test]
fn self_test_filter_runs_only_the_selected_group() {
    let out = freelat(&["self-test", "--filter", "hilbert"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let ids: Vec<u64> = v["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, vec![5, 6, 7]);
    assert_eq!(v["passed"], true);
    let log = String::from_utf8(out.stderr).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}

#[test]
fn output_flag_writes_a_file() {
    let path = std::env::temp_dir().join(format!("freelat-cli-{}.json", std::process::id()));
    let p = path.to_str().unwrap();
    let out = freelat(&[
        "mn-bound",
        "--p",
        "0.25",
        "--r",
        "0.5",
        "--q",
        "1",
        "--type-const",
        "2",
        "--output",
        p,
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!((v["bound"].as_f64().unwrap() - 2.0 * v["ratio"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn lemma_check_defaults_to_the_full_range() {
    let v = json_of(&freelat(&["lemma-check"]));
    assert_eq!(v["reports"].as_array().unwrap().len(), 64);
    assert_eq!(v["passed"], true);
}
