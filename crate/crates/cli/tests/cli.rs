use std::path::PathBuf;
use std::process::{Command, Output};

fn programs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn poa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poa")).current_dir(programs()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn add_prints_the_closed_form() {
    let o = poa(&["analyze", "add.fun", "uniform2.dist", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\n1/(n*n)*max(min(n,z-1) - max(1,z-n) + 1,0)\n"), "{}", stdout(&o));
}

#[test]
fn max_check_and_expectation() {
    let o = poa(&["analyze", "max.fun", "uniform2.dist", "--check", "n=3", "--expect", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("check n=3: all 7 values agree"), "{s}");
    assert!(s.contains("E = 22/9"), "{s}");
}

#[test]
fn divergent_program_reports_pbox_and_nontermination() {
    let o = poa(&["analyze", "loop.fun", "point.dist", "--check", "--no-meta"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("over: 0") && s.contains("under: 0"), "{s}");
    assert!(s.contains("termination: unknown"), "{s}");
    assert!(s.contains("oracle nonterminating mass: 1"), "{s}");
}

#[test]
fn four_branch_interval_and_csv() {
    let csv = std::env::temp_dir().join(format!("poa-four-branch-{}.csv", std::process::id()));
    let o = poa(&["analyze", "four_branch.fun", "uniform4.dist", "--check", "--expect", "--no-meta", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("status: residual"), "{s}");
    assert!(s.contains("sandwich holds"), "{s}");
    assert!(s.contains("E in [2, 3]"), "{s}");
    let table = std::fs::read_to_string(&csv).unwrap();
    std::fs::remove_file(&csv).ok();
    assert!(table.starts_with("z,under,over,f_down,f_up\n"));
    assert!(table.contains("\n2,0,1/2,1/4,3/4\n"), "{table}");
}

#[test]
fn oracle_csv_rows() {
    let o = poa(&["oracle", "add.fun", "uniform2.dist", "--bind", "n=2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "value,numerator,denominator\n2,1,4\n3,1,2\n4,1,4\n");
    let o = poa(&["oracle", "member.fun", "member.dist", "--bind", "n=2,k=2"]);
    assert_eq!(stdout(&o), "value,numerator,denominator\nfalse,1,4\ntrue,3,4\n");
}

#[test]
fn empty_support_is_an_input_error() {
    let dir = std::env::temp_dir().join(format!("poa-id-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("id.fun"), "id(x) = x\n").unwrap();
    let o = poa(&["oracle", dir.join("id.fun").to_str().unwrap(), "empty.dist"]);
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not 1"));
}

#[test]
fn failing_check_exits_with_one() {
    let o = poa(&["analyze", "max.fun", "uniform2.dist", "--assume", "n <= 0", "--check", "n=2", "--no-meta"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("z = 1: oracle 1/4, analysis 0"));
}

#[test]
fn missing_file_exits_with_two() {
    let o = poa(&["analyze", "nope.fun", "uniform2.dist"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible_without_meta() {
    let a = poa(&["analyze", "add.fun", "uniform2.dist", "--trace", "--no-meta", "--check", "n=4"]);
    let b = poa(&["analyze", "add.fun", "uniform2.dist", "--trace", "--no-meta", "--check", "n=4"]);
    assert_eq!(a.stdout, b.stdout);
    let with_meta = stdout(&poa(&["analyze", "add.fun", "uniform2.dist"]));
    assert!(with_meta.starts_with("# poa "));
}

#[test]
fn config_file_supplies_flags() {
    let cfg = std::env::temp_dir().join(format!("poa-{}.toml", std::process::id()));
    std::fs::write(&cfg, "check = \"n=3\"\nexpect = true\nno_meta = true\nbudget = 10000\nassume = [\"n >= 1\"]\n").unwrap();
    let o = poa(&["analyze", "max.fun", "uniform2.dist", "--config", cfg.to_str().unwrap()]);
    std::fs::remove_file(&cfg).ok();
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(!s.starts_with('#'));
    assert!(s.contains("E = 22/9"), "{s}");
}

#[test]
fn derivation_is_printed_with_trace() {
    let o = poa(&["analyze", "max.fun", "uniform2.dist", "--trace", "--no-meta"]);
    let s = stdout(&o);
    assert!(s.contains("[R1] sum_y with y = z"), "{s}");
    assert!(s.contains("=> 1/(n*n)*(2*z - 1)*C(1 <= z <= n) (4 steps)"), "{s}");
}
