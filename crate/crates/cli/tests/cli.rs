//! End-to-end behaviors of the `rolekit` binary that the acceptance gate
//! does not already pin down: output determinism, environment handling,
//! filter flags, and the canonical formatter.

use std::path::Path;
use std::process::{Command, Output};

const HOSPITAL: &str = include_str!("fixtures/hospital.rbac");
const BANK: &str = include_str!("fixtures/bank.rbac");
const PAYMENTS_TRACE: &str = include_str!("fixtures/payments.trace");

fn rolekit() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rolekit"));
    // Tests control the audit location explicitly.
    cmd.env_remove("AUDIT_PATH");
    cmd
}

fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let trace = write(dir.path(), "payments.trace", PAYMENTS_TRACE);

    let run_check = || {
        let out = rolekit()
            .arg("check")
            .arg("--policy")
            .arg(&policy)
            .args(["--user", "alice", "--activate", "PaymentInitiator"])
            .args(["--tran", "initiate-payment", "--operand", "payment#1"])
            .args(["--format", "json"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    assert_eq!(run_check(), run_check());

    // Simulation without an --audit flag runs against a fresh in-memory
    // log, so two runs see identical inputs.
    let run_simulate = || {
        let out = rolekit()
            .arg("simulate")
            .arg("--policy")
            .arg(&policy)
            .arg("--trace")
            .arg(&trace)
            .args(["--format", "json"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(1));
        out.stdout
    };
    assert_eq!(run_simulate(), run_simulate());
}

#[test]
fn every_deny_names_the_first_failing_rule() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "hospital.rbac", HOSPITAL);

    // R3 deny via check, text mode.
    let out = rolekit()
        .arg("check")
        .arg("--policy")
        .arg(&policy)
        .args(["--user", "bob", "--activate", "Pharmacist"])
        .args(["--tran", "prescribe-medication"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("decision: deny at R3"));

    // R1 deny: no role activated.
    let out = rolekit()
        .arg("check")
        .arg("--policy")
        .arg(&policy)
        .args(["--user", "bob", "--tran", "dispense-drug"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("decision: deny at R1"));
}

#[test]
fn audit_path_env_is_honored_and_the_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let trace = write(dir.path(), "payments.trace", PAYMENTS_TRACE);
    let env_log = dir.path().join("env.log");
    let flag_log = dir.path().join("flag.log");

    let status = rolekit()
        .arg("simulate")
        .arg("--policy")
        .arg(&policy)
        .arg("--trace")
        .arg(&trace)
        .env("AUDIT_PATH", &env_log)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(env_log.exists(), "AUDIT_PATH alone selects the log");

    let status = rolekit()
        .arg("simulate")
        .arg("--policy")
        .arg(&policy)
        .arg("--trace")
        .arg(&trace)
        .arg("--audit")
        .arg(&flag_log)
        .env("AUDIT_PATH", dir.path().join("ignored.log"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    assert!(flag_log.exists(), "--audit selects the log");
    assert!(!dir.path().join("ignored.log").exists(), "--audit overrides AUDIT_PATH");
}

#[test]
fn check_never_creates_the_audit_log() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let log = dir.path().join("absent.log");

    let out = rolekit()
        .arg("check")
        .arg("--policy")
        .arg(&policy)
        .args(["--user", "alice", "--activate", "PaymentInitiator"])
        .args(["--tran", "initiate-payment", "--operand", "payment#1"])
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "missing log reads as empty history");
    assert!(!log.exists(), "a read-only check must not create the log");
}

#[test]
fn audit_query_filters_and_echoes_log_lines_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let trace = write(dir.path(), "payments.trace", PAYMENTS_TRACE);
    let log = dir.path().join("audit.log");

    rolekit()
        .arg("simulate")
        .arg("--policy")
        .arg(&policy)
        .arg("--trace")
        .arg(&trace)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();

    // Unfiltered text output is exactly the log file.
    let all = rolekit().args(["audit", "query", "--audit"]).arg(&log).output().unwrap();
    assert_eq!(all.status.code(), Some(0));
    assert_eq!(stdout_of(&all), std::fs::read_to_string(&log).unwrap());

    // kind + operand filter: the two executions touching payment#42.
    let filtered = rolekit()
        .args(["audit", "query", "--kind", "execution", "--operand", "payment#42", "--audit"])
        .arg(&log)
        .output()
        .unwrap();
    let lines: Vec<String> = stdout_of(&filtered).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("\"actor\":\"alice\"") && lines[0].contains("initiate-payment"));
    assert!(lines[1].contains("\"actor\":\"bob\"") && lines[1].contains("authorize-payment"));

    // Ordinal window.
    let windowed = rolekit()
        .args(["audit", "query", "--from", "2", "--to", "3", "--audit"])
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(stdout_of(&windowed).lines().count(), 2);

    // A bad kind is a usage error.
    let bad = rolekit()
        .args(["audit", "query", "--kind", "nonsense", "--audit"])
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    // Querying a log that does not exist yields empty output, creates nothing.
    let missing = dir.path().join("never.log");
    let empty = rolekit().args(["audit", "query", "--audit"]).arg(&missing).output().unwrap();
    assert_eq!(empty.status.code(), Some(0));
    assert_eq!(stdout_of(&empty), "");
    assert!(!missing.exists());
}

#[test]
fn fmt_is_canonical_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    // Scrambled section order, comments, and unsorted lists all normalize.
    let messy = write(
        dir.path(),
        "messy.rbac",
        "policy tidy mode bound\n\
         role Z allocates t-b,t-a members u-2   # comment\n\
         user u-2\n\
         user u-1\n\
         transaction t-b proc p-b binds o-1:write,read\n\
         transaction t-a proc p-a binds o-1:read\n\
         object o-1\n\
         role A allocates t-a members u-1\n",
    );

    let once = rolekit().arg("fmt").arg("--policy").arg(&messy).output().unwrap();
    assert_eq!(once.status.code(), Some(0));
    let canonical = stdout_of(&once);
    assert!(canonical.starts_with("policy tidy mode bound\n"));
    assert!(!canonical.contains('#'), "comments do not survive canonicalization");
    let users_at = canonical.find("user u-1").unwrap();
    assert!(users_at < canonical.find("user u-2").unwrap());
    assert!(canonical.find("role A").unwrap() < canonical.find("role Z").unwrap());

    // --write rewrites the file; a second fmt is a fixed point.
    let status = rolekit().arg("fmt").arg("--policy").arg(&messy).arg("--write").status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&messy).unwrap(), canonical);
    let twice = rolekit().arg("fmt").arg("--policy").arg(&messy).output().unwrap();
    assert_eq!(stdout_of(&twice), canonical);
}

#[test]
fn validate_reports_spans_in_json() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(
        dir.path(),
        "broken.rbac",
        "policy oops mode bound\nrole A contains B\nrole B contains A\n",
    );
    let out = rolekit()
        .arg("validate")
        .arg("--policy")
        .arg(&broken)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["ok"], serde_json::Value::Bool(false));
    let errors = report["errors"].as_array().unwrap();
    assert!(!errors.is_empty());
    assert_eq!(errors[0]["code"], "CYCLE");
    assert!(errors[0]["span"]["line"].as_u64().unwrap() >= 2);
}

#[test]
fn simulate_supports_admin_steps_and_change_function() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "hospital.rbac", HOSPITAL);
    let trace = write(
        dir.path(),
        "lifecycle.trace",
        "# gwen joins as a healer, proves out, and moves to the intern track\n\
         admin onboard gwen\n\
         admin grant gwen Healer\n\
         session gwen activate Healer\n\
         exec gwen take-vitals\n\
         admin change-function gwen Intern\n\
         session gwen deactivate Healer\n\
         session gwen activate Intern\n\
         exec gwen review-chart\n",
    );
    let out = rolekit()
        .arg("simulate")
        .arg("--policy")
        .arg(&policy)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    let stdout = stdout_of(&out);
    assert_eq!(out.status.code(), Some(0), "clean trace exits 0:\n{stdout}");
    assert!(stdout.contains("admin onboard gwen -> ok"));
    assert!(stdout.contains("exec gwen take-vitals -> allow"));
    assert!(stdout.contains("change-function gwen"));
    assert!(stdout.contains("exec gwen review-chart -> allow"));
    assert!(stdout.contains("result: 0 denials, 0 refusals"));
}

#[test]
fn admin_requires_an_audit_log() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "hospital.rbac", HOSPITAL);
    let out = rolekit()
        .args(["admin", "onboard", "zoe"])
        .arg("--policy")
        .arg(&policy)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("must be audited"), "actual: {stderr}");
}

#[test]
fn admin_add_sod_validates_its_shape() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let log = dir.path().join("audit.log");

    // Dynamic constraints must not take --role.
    let bad = rolekit()
        .args(["admin", "add-sod", "dynamic", "mix-up"])
        .args(["--role", "Clerk", "--tran", "initiate-payment"])
        .arg("--policy")
        .arg(&policy)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    // A well-formed static constraint is applied and serialized back.
    let ok = rolekit()
        .args(["admin", "add-sod", "static", "desk-split"])
        .args(["--role", "Clerk", "--role", "PaymentAuthorizer", "--max", "1"])
        .arg("--policy")
        .arg(&policy)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(1), "alice holds both Clerk and PaymentAuthorizer");
    let stderr = String::from_utf8_lossy(&ok.stderr);
    assert!(stderr.contains("STATIC_SOD_VIOLATION"), "retroactive check: {stderr}");

    // With max 2 the constraint fits the existing memberships.
    let ok = rolekit()
        .args(["admin", "add-sod", "static", "desk-split"])
        .args(["--role", "Clerk", "--role", "PaymentAuthorizer", "--max", "2"])
        .arg("--policy")
        .arg(&policy)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let rewritten = std::fs::read_to_string(&policy).unwrap();
    assert!(rewritten.contains("static-sod desk-split roles Clerk,PaymentAuthorizer max 2"));
}

#[test]
fn admin_restrict_and_clear_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let log = dir.path().join("audit.log");

    let restrict = rolekit()
        .args(["admin", "restrict", "alice", "--tran", "initiate-payment"])
        .arg("--policy")
        .arg(&policy)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(restrict.status.code(), Some(0));
    assert!(std::fs::read_to_string(&policy)
        .unwrap()
        .contains("restrict alice to initiate-payment"));

    // The restriction bites on the very next check.
    let denied = rolekit()
        .arg("check")
        .arg("--policy")
        .arg(&policy)
        .args(["--user", "alice", "--activate", "PaymentAuthorizer"])
        .args(["--tran", "authorize-payment", "--operand", "payment#9"])
        .output()
        .unwrap();
    assert_eq!(denied.status.code(), Some(1));
    assert!(stdout_of(&denied).contains("deny at RESTRICTION"));

    let clear = rolekit()
        .args(["admin", "restrict", "alice", "--clear"])
        .arg("--policy")
        .arg(&policy)
        .arg("--audit")
        .arg(&log)
        .output()
        .unwrap();
    assert_eq!(clear.status.code(), Some(0));
    assert!(!std::fs::read_to_string(&policy).unwrap().contains("restrict alice"));
}

#[test]
fn report_without_history_shows_everything_as_surplus() {
    let dir = tempfile::tempdir().unwrap();
    let policy = write(dir.path(), "bank.rbac", BANK);
    let out = rolekit()
        .args(["report", "least-privilege"])
        .arg("--policy")
        .arg(&policy)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row["exercised"].as_array().unwrap().len(), 0);
        assert_eq!(row["granted"], row["surplus"]);
    }
}
