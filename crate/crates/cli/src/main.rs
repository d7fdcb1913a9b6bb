//! `rolekit` — command-line front end for the role-based access control
//! toolkit. Exit codes are the machine contract:
//! 0 success/allow, 1 deny or violation found, 2 usage error,
//! 3 policy/parse error, 4 I/O error.
//! Stdout carries data; stderr carries diagnostics.

mod trace;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rolekit_core::admin::{AdminApplyError, AdminError, AdminOp, Administrator};
use rolekit_core::audit::{
    encode_line, query, AuditError, AuditStore, AuditView, EventFilter, EventKind, RecordError,
};
use rolekit_core::dsl::{parse_policy_bytes, serialize_policy};
use rolekit_core::engine::{activate_role, EngineError, RuleOutcome};
use rolekit_core::model::{ConstraintId, Policy, RoleId, Session, TranId, UserId};
use rolekit_core::sod::SodError;

use trace::TraceStep;

const EXIT_OK: i32 = 0;
const EXIT_DENY: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_POLICY: i32 = 3;
const EXIT_IO: i32 = 4;

#[derive(Parser)]
#[command(
    name = "rolekit",
    version,
    about = "Role-based access control: validate policies, decide requests, administer, audit",
    long_about = None
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct FormatArg {
    /// Output format; json output is stable across runs
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Check a policy file for well-formedness
    Validate {
        /// Policy file to check
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Decide one execution request and print the rule trace
    Check {
        /// Policy file to decide against
        #[arg(long)]
        policy: PathBuf,
        /// Subject of the ephemeral session
        #[arg(long)]
        user: String,
        /// Role to activate first (repeatable)
        #[arg(long = "activate", value_name = "ROLE")]
        activate: Vec<String>,
        /// Transaction to request
        #[arg(long)]
        tran: String,
        /// Operand key, required for transactions under a dynamic constraint
        #[arg(long)]
        operand: Option<String>,
        /// Audit log consulted for dynamic separation of duty (read-only;
        /// overrides AUDIT_PATH)
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Replay a trace file; sessions persist across its lines
    Simulate {
        /// Policy file the trace runs against
        #[arg(long)]
        policy: PathBuf,
        /// Trace file: session/exec/admin steps, one per line
        #[arg(long)]
        trace: PathBuf,
        /// Audit log to record into (overrides AUDIT_PATH); in-memory if absent
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Actor recorded for admin steps
        #[arg(long, default_value = "root")]
        actor: String,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Apply one audited administrative operation and rewrite the policy
    Admin {
        #[command(subcommand)]
        verb: AdminVerb,
    },
    /// Inspect the audit log
    Audit {
        #[command(subcommand)]
        action: AuditAction,
    },
    /// Generate analysis reports
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
    /// Rewrite a policy file in canonical form
    Fmt {
        /// Policy file to format
        #[arg(long)]
        policy: PathBuf,
        /// Rewrite the file in place instead of printing to stdout
        #[arg(long)]
        write: bool,
    },
}

/// Flags shared by every administrative verb.
#[derive(Args)]
struct AdminCommon {
    /// Policy file to administer; rewritten canonically on success
    #[arg(long)]
    policy: PathBuf,
    /// Audit log (overrides AUDIT_PATH); administration must be audited
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Administrator identity recorded in the log
    #[arg(long, default_value = "root")]
    actor: String,
    #[command(flatten)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum AdminVerb {
    /// Add a user to a role's membership
    Grant {
        user: String,
        role: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Remove a user from a role's membership
    Revoke {
        user: String,
        role: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Allocate a transaction to a role
    Allocate {
        role: String,
        tran: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Remove a transaction from a role
    Deallocate {
        role: String,
        tran: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Make parent contain child (child's transactions flow upward)
    Contain {
        parent: String,
        child: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Remove a containment edge
    Uncontain {
        parent: String,
        child: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Introduce a new user
    Onboard {
        user: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Remove a user entirely (memberships and restriction included)
    Offboard {
        user: String,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Narrow a user to the named transactions, or lift it with --clear
    Restrict {
        user: String,
        /// Transaction the user stays allowed to run (repeatable; none
        /// means restrict to nothing)
        #[arg(long = "tran", value_name = "TRAN")]
        transactions: Vec<String>,
        /// Remove the restriction instead
        #[arg(long, conflicts_with = "transactions")]
        clear: bool,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Replace a user's memberships and restriction with a new role set
    ChangeFunction {
        user: String,
        /// Role in the user's new function (repeatable)
        #[arg(long = "role", value_name = "ROLE")]
        roles: Vec<String>,
        #[command(flatten)]
        common: AdminCommon,
    },
    /// Add a separation-of-duty constraint
    AddSod {
        /// static (membership-time) or dynamic (execution-time)
        #[arg(value_enum)]
        kind: SodKind,
        /// Constraint identifier
        id: String,
        /// Conflicting role (static; repeat at least twice)
        #[arg(long = "role", value_name = "ROLE")]
        roles: Vec<String>,
        /// Conflicting transaction (dynamic; repeat at least twice)
        #[arg(long = "tran", value_name = "TRAN")]
        transactions: Vec<String>,
        /// Memberships allowed within the role set (static only)
        #[arg(long)]
        max: Option<u32>,
        #[command(flatten)]
        common: AdminCommon,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SodKind {
    Static,
    Dynamic,
}

#[derive(Subcommand)]
enum AuditAction {
    /// Print events matching every supplied filter, ascending ordinal
    Query {
        /// Audit log to read (overrides AUDIT_PATH)
        #[arg(long)]
        audit: Option<PathBuf>,
        /// admin, decision, or execution
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        actor: Option<String>,
        #[arg(long)]
        tran: Option<String>,
        #[arg(long)]
        operand: Option<String>,
        /// Inclusive lower ordinal bound
        #[arg(long)]
        from: Option<u64>,
        /// Inclusive upper ordinal bound
        #[arg(long)]
        to: Option<u64>,
        #[command(flatten)]
        format: FormatArg,
    },
}

#[derive(Subcommand)]
enum ReportKind {
    /// Granted-versus-exercised transactions per user
    LeastPrivilege {
        /// Policy file defining the granted sets
        #[arg(long)]
        policy: PathBuf,
        /// Audit log defining the exercised sets (overrides AUDIT_PATH)
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Inclusive lower ordinal bound of the audit window
        #[arg(long)]
        from: Option<u64>,
        /// Inclusive upper ordinal bound of the audit window
        #[arg(long)]
        to: Option<u64>,
        #[command(flatten)]
        format: FormatArg,
    },
}

/// A terminal failure: message to stderr, process exits with `code`.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
    fn policy(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_POLICY,
            message: message.into(),
        }
    }
    fn io(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(f) => {
            eprintln!("rolekit: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Validate { policy, format } => cmd_validate(&policy, format.format),
        Command::Check {
            policy,
            user,
            activate,
            tran,
            operand,
            audit,
            format,
        } => cmd_check(
            &policy,
            &user,
            &activate,
            &tran,
            operand.as_deref(),
            audit,
            format.format,
        ),
        Command::Simulate {
            policy,
            trace,
            audit,
            actor,
            format,
        } => cmd_simulate(&policy, &trace, audit, &actor, format.format),
        Command::Admin { verb } => cmd_admin(verb),
        Command::Audit {
            action:
                AuditAction::Query {
                    audit,
                    kind,
                    actor,
                    tran,
                    operand,
                    from,
                    to,
                    format,
                },
        } => cmd_audit_query(audit, kind, actor, tran, operand, from, to, format.format),
        Command::Report {
            kind:
                ReportKind::LeastPrivilege {
                    policy,
                    audit,
                    from,
                    to,
                    format,
                },
        } => cmd_report_least_privilege(&policy, audit, from, to, format.format),
        Command::Fmt { policy, write } => cmd_fmt(&policy, write),
    }
}

// ---------------------------------------------------------------- helpers

fn audit_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os("AUDIT_PATH").map(PathBuf::from))
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn load_policy(path: &Path) -> Result<Policy, Failure> {
    let bytes = read_file(path)?;
    parse_policy_bytes(&bytes).map_err(|errors| {
        let mut message = format!("{} is not a valid policy:", path.display());
        for e in &errors {
            message.push_str(&format!("\n  {e}"));
        }
        Failure {
            code: EXIT_POLICY,
            message,
        }
    })
}

fn open_store(path: &Path) -> Result<AuditStore, Failure> {
    let (store, warnings) = AuditStore::open(path).map_err(|e| match e {
        AuditError::Io { .. } => Failure::io(e.to_string()),
        AuditError::Corrupt { .. } => Failure::io(e.to_string()),
    })?;
    for w in warnings {
        eprintln!("rolekit: warning: {w}");
    }
    Ok(store)
}

/// Read-only view of an audit log; a missing file is an empty history,
/// not a reason to create one.
fn load_view(path: Option<PathBuf>) -> Result<AuditView, Failure> {
    match path {
        Some(p) if p.exists() => Ok(open_store(&p)?.view()),
        _ => Ok(AuditView::empty()),
    }
}

fn user_id(s: &str) -> Result<UserId, Failure> {
    UserId::new(s).map_err(|e| Failure::usage(format!("bad user {s:?}: {e}")))
}
fn role_id(s: &str) -> Result<RoleId, Failure> {
    RoleId::new(s).map_err(|e| Failure::usage(format!("bad role {s:?}: {e}")))
}
fn tran_id(s: &str) -> Result<TranId, Failure> {
    TranId::new(s).map_err(|e| Failure::usage(format!("bad transaction {s:?}: {e}")))
}
fn constraint_id(s: &str) -> Result<ConstraintId, Failure> {
    ConstraintId::new(s).map_err(|e| Failure::usage(format!("bad constraint id {s:?}: {e}")))
}

/// Stable machine-readable refusal codes for administrative errors.
fn admin_code(e: &AdminError) -> &'static str {
    match e {
        AdminError::UnknownUser(_) | AdminError::UnknownRole(_) | AdminError::UnknownTran(_) => {
            "UNKNOWN_ID"
        }
        AdminError::DuplicateUser(_) => "DUPLICATE_USER",
        AdminError::StaticSodViolation { .. } => "STATIC_SOD_VIOLATION",
        AdminError::Cycle { .. } => "CYCLE",
        AdminError::RestrictionWidens { .. } => "RESTRICTION_WIDENS",
        AdminError::Sod(inner) => match inner {
            SodError::RetroactiveStaticViolation { .. } => "STATIC_SOD_VIOLATION",
            SodError::DuplicateConstraint(_) => "DUPLICATE_CONSTRAINT",
            SodError::UnknownRole(..) | SodError::UnknownTran(..) => "UNKNOWN_ID",
            _ => "INVALID_CONSTRAINT",
        },
    }
}

// ---------------------------------------------------------------- validate

fn cmd_validate(path: &Path, format: Format) -> Result<i32, Failure> {
    let bytes = read_file(path)?;
    match parse_policy_bytes(&bytes) {
        Ok(policy) => {
            match format {
                Format::Text => println!("ok: policy {} is well-formed", policy.name),
                Format::Json => println!("{}", json!({ "ok": true, "errors": [] })),
            }
            Ok(EXIT_OK)
        }
        Err(errors) => {
            match format {
                Format::Text => {
                    for e in &errors {
                        println!("{e}");
                    }
                }
                Format::Json => {
                    println!(
                        "{}",
                        serde_json::to_string(&json!({ "ok": false, "errors": errors }))
                            .expect("serializable")
                    );
                }
            }
            Ok(EXIT_POLICY)
        }
    }
}

// ---------------------------------------------------------------- check

fn cmd_check(
    policy_path: &Path,
    user: &str,
    activate: &[String],
    tran: &str,
    operand: Option<&str>,
    audit: Option<PathBuf>,
    format: Format,
) -> Result<i32, Failure> {
    let policy = load_policy(policy_path)?;
    let view = load_view(audit_path(audit))?;

    let subject = user_id(user)?;
    let tran = tran_id(tran)?;
    let mut session = Session::new("cli-check", subject);
    for role in activate {
        let role = role_id(role)?;
        session = activate_role(&policy, &session, &role).map_err(|e| match e {
            EngineError::RoleNotAuthorized { .. } | EngineError::CapExceeded { .. } => Failure {
                code: EXIT_DENY,
                message: format!("activation refused: {e}"),
            },
            other => Failure::usage(other.to_string()),
        })?;
    }

    let decision = rolekit_core::engine::can_execute(&policy, &session, &tran, operand, &view)
        .map_err(|e| match e {
            EngineError::MissingOperand(_) => {
                Failure::usage(format!("{e}; pass --operand with the operand key"))
            }
            other => Failure::usage(other.to_string()),
        })?;

    match format {
        Format::Text => {
            for entry in &decision.rule_trace {
                let outcome = match entry.outcome {
                    RuleOutcome::Pass => "pass",
                    RuleOutcome::Fail => "fail",
                };
                println!("{} {}: {}", entry.rule, outcome, entry.detail);
            }
            match decision.first_failure() {
                None => println!("decision: allow"),
                Some(failed) => println!("decision: deny at {}", failed.rule),
            }
        }
        Format::Json => {
            println!("{}", serde_json::to_string(&decision).expect("serializable"));
        }
    }
    Ok(if decision.allowed { EXIT_OK } else { EXIT_DENY })
}

// ---------------------------------------------------------------- simulate

fn cmd_simulate(
    policy_path: &Path,
    trace_path: &Path,
    audit: Option<PathBuf>,
    actor: &str,
    format: Format,
) -> Result<i32, Failure> {
    let policy = load_policy(policy_path)?;
    let trace_bytes = read_file(trace_path)?;
    let trace_text = String::from_utf8(trace_bytes)
        .map_err(|_| Failure::policy(format!("{} is not UTF-8", trace_path.display())))?;
    let steps = trace::parse_trace(&trace_text).map_err(Failure::policy)?;
    let actor = user_id(actor)?;

    let store = match audit_path(audit) {
        Some(p) => open_store(&p)?,
        None => AuditStore::in_memory(),
    };
    let mut admin = Administrator::new(policy, &store, actor);
    let mut sessions: BTreeMap<UserId, Session> = BTreeMap::new();
    let mut denials = 0usize;
    let mut refusals = 0usize;
    let mut json_steps = Vec::new();

    for (line_no, step) in steps {
        match step {
            TraceStep::Activate { user, role } => {
                let session = sessions
                    .entry(user.clone())
                    .or_insert_with(|| Session::new(format!("sim-{user}"), user.clone()));
                match activate_role(admin.policy(), session, &role) {
                    Ok(next) => {
                        *session = next;
                        emit_step(
                            format,
                            &mut json_steps,
                            line_no,
                            format!("session {user} activate {role} -> ok"),
                            json!({ "line": line_no, "step": "activate", "user": user, "role": role, "ok": true }),
                        );
                    }
                    Err(e) => {
                        refusals += 1;
                        emit_step(
                            format,
                            &mut json_steps,
                            line_no,
                            format!("session {user} activate {role} -> refused: {e}"),
                            json!({ "line": line_no, "step": "activate", "user": user, "role": role, "ok": false, "error": e.to_string() }),
                        );
                    }
                }
            }
            TraceStep::Deactivate { user, role } => {
                let session = sessions
                    .entry(user.clone())
                    .or_insert_with(|| Session::new(format!("sim-{user}"), user.clone()));
                *session = rolekit_core::engine::deactivate_role(session, &role);
                emit_step(
                    format,
                    &mut json_steps,
                    line_no,
                    format!("session {user} deactivate {role} -> ok"),
                    json!({ "line": line_no, "step": "deactivate", "user": user, "role": role, "ok": true }),
                );
            }
            TraceStep::Exec {
                user,
                tran,
                operand,
            } => {
                let session = sessions
                    .entry(user.clone())
                    .or_insert_with(|| Session::new(format!("sim-{user}"), user.clone()));
                let decision = store
                    .record_execution(admin.policy(), session, &tran, operand.as_deref())
                    .map_err(|e| match e {
                        RecordError::Engine(e) => {
                            Failure::usage(format!("trace line {line_no}: {e}"))
                        }
                        RecordError::Store(e) => Failure::io(e.to_string()),
                    })?;
                let operand_note = operand
                    .as_deref()
                    .map(|k| format!(" operand {k}"))
                    .unwrap_or_default();
                if decision.allowed {
                    emit_step(
                        format,
                        &mut json_steps,
                        line_no,
                        format!("exec {user} {tran}{operand_note} -> allow"),
                        json!({ "line": line_no, "step": "exec", "user": user, "tran": tran, "operand": operand, "outcome": "allow" }),
                    );
                } else {
                    denials += 1;
                    let failed = decision.first_failure().expect("denied decisions name a rule");
                    emit_step(
                        format,
                        &mut json_steps,
                        line_no,
                        format!(
                            "exec {user} {tran}{operand_note} -> deny at {}: {}",
                            failed.rule, failed.detail
                        ),
                        json!({ "line": line_no, "step": "exec", "user": user, "tran": tran, "operand": operand, "outcome": "deny", "rule": failed.rule, "detail": failed.detail }),
                    );
                }
            }
            TraceStep::Admin(op) => {
                let describe = admin_op_text(&op);
                match admin.apply(op) {
                    Ok(ordinal) => emit_step(
                        format,
                        &mut json_steps,
                        line_no,
                        format!("admin {describe} -> ok (ordinal {ordinal})"),
                        json!({ "line": line_no, "step": "admin", "op": describe, "ok": true, "ordinal": ordinal }),
                    ),
                    Err(AdminApplyError::Admin(e)) => {
                        refusals += 1;
                        emit_step(
                            format,
                            &mut json_steps,
                            line_no,
                            format!("admin {describe} -> refused [{}]: {e}", admin_code(&e)),
                            json!({ "line": line_no, "step": "admin", "op": describe, "ok": false, "code": admin_code(&e), "error": e.to_string() }),
                        );
                    }
                    Err(AdminApplyError::Store(e)) => return Err(Failure::io(e.to_string())),
                }
            }
            TraceStep::ChangeFunction { user, roles } => {
                let describe = format!(
                    "change-function {user} -> [{}]",
                    roles
                        .iter()
                        .map(|r| r.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                match admin.change_function(&user, &roles) {
                    Ok(ordinals) => emit_step(
                        format,
                        &mut json_steps,
                        line_no,
                        format!("admin {describe} -> ok (ordinals {ordinals:?})"),
                        json!({ "line": line_no, "step": "admin", "op": describe, "ok": true, "ordinals": ordinals }),
                    ),
                    Err(AdminApplyError::Admin(e)) => {
                        refusals += 1;
                        emit_step(
                            format,
                            &mut json_steps,
                            line_no,
                            format!("admin {describe} -> refused [{}]: {e}", admin_code(&e)),
                            json!({ "line": line_no, "step": "admin", "op": describe, "ok": false, "code": admin_code(&e), "error": e.to_string() }),
                        );
                    }
                    Err(AdminApplyError::Store(e)) => return Err(Failure::io(e.to_string())),
                }
            }
        }
    }

    match format {
        Format::Text => println!("result: {denials} denials, {refusals} refusals"),
        Format::Json => println!(
            "{}",
            serde_json::to_string(&json!({
                "steps": json_steps,
                "denials": denials,
                "refusals": refusals,
            }))
            .expect("serializable")
        ),
    }
    Ok(if denials + refusals > 0 { EXIT_DENY } else { EXIT_OK })
}

fn emit_step(
    format: Format,
    json_steps: &mut Vec<serde_json::Value>,
    _line_no: usize,
    text: String,
    value: serde_json::Value,
) {
    match format {
        Format::Text => println!("{text}"),
        Format::Json => json_steps.push(value),
    }
}

fn admin_op_text(op: &AdminOp) -> String {
    match op {
        AdminOp::Grant { user, role } => format!("grant {user} {role}"),
        AdminOp::Revoke { user, role } => format!("revoke {user} {role}"),
        AdminOp::Allocate { role, tran } => format!("allocate {role} {tran}"),
        AdminOp::Deallocate { role, tran } => format!("deallocate {role} {tran}"),
        AdminOp::Contain { parent, child } => format!("contain {parent} {child}"),
        AdminOp::Uncontain { parent, child } => format!("uncontain {parent} {child}"),
        AdminOp::Onboard { user } => format!("onboard {user}"),
        AdminOp::Offboard { user } => format!("offboard {user}"),
        AdminOp::Restrict { user, transactions } => format!(
            "restrict {user} [{}]",
            transactions
                .iter()
                .map(|t| t.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ),
        AdminOp::ClearRestriction { user } => format!("clear-restriction {user}"),
        AdminOp::AddStaticSod { id, .. } => format!("add-sod static {id}"),
        AdminOp::AddDynamicSod { id, .. } => format!("add-sod dynamic {id}"),
    }
}

// ---------------------------------------------------------------- admin

fn cmd_admin(verb: AdminVerb) -> Result<i32, Failure> {
    let (common, action) = split_admin_verb(verb)?;
    let policy = load_policy(&common.policy)?;
    let Some(audit) = audit_path(common.audit.clone()) else {
        return Err(Failure::usage(
            "administration must be audited: pass --audit or set AUDIT_PATH",
        ));
    };
    let store = open_store(&audit)?;
    let actor = user_id(&common.actor)?;
    let mut admin = Administrator::new(policy, &store, actor);

    let outcome = match action {
        AdminAction::Op(op) => admin.apply(op).map(|o| vec![o]),
        AdminAction::ChangeFunction { user, roles } => admin.change_function(&user, &roles),
    };

    match outcome {
        Ok(ordinals) => {
            let canonical = serialize_policy(admin.policy())
                .expect("administrative operations preserve well-formedness");
            std::fs::write(&common.policy, canonical).map_err(|e| {
                Failure::io(format!("cannot rewrite {}: {e}", common.policy.display()))
            })?;
            match common.format.format {
                Format::Text => {
                    let list = ordinals
                        .iter()
                        .map(|o| o.to_string())
                        .collect::<Vec<_>>()
                        .join(", ");
                    println!("applied; event ordinal(s) {list}; policy rewritten");
                }
                Format::Json => println!(
                    "{}",
                    serde_json::to_string(&json!({ "applied": true, "ordinals": ordinals }))
                        .expect("serializable")
                ),
            }
            Ok(EXIT_OK)
        }
        Err(AdminApplyError::Admin(e)) => {
            eprintln!("rolekit: refused [{}]: {e}", admin_code(&e));
            if common.format.format == Format::Json {
                println!(
                    "{}",
                    serde_json::to_string(
                        &json!({ "applied": false, "code": admin_code(&e), "error": e.to_string() })
                    )
                    .expect("serializable")
                );
            }
            Ok(EXIT_DENY)
        }
        Err(AdminApplyError::Store(e)) => Err(Failure::io(e.to_string())),
    }
}

enum AdminAction {
    Op(AdminOp),
    ChangeFunction { user: UserId, roles: Vec<RoleId> },
}

fn split_admin_verb(verb: AdminVerb) -> Result<(AdminCommon, AdminAction), Failure> {
    Ok(match verb {
        AdminVerb::Grant { user, role, common } => (
            common,
            AdminAction::Op(AdminOp::Grant {
                user: user_id(&user)?,
                role: role_id(&role)?,
            }),
        ),
        AdminVerb::Revoke { user, role, common } => (
            common,
            AdminAction::Op(AdminOp::Revoke {
                user: user_id(&user)?,
                role: role_id(&role)?,
            }),
        ),
        AdminVerb::Allocate { role, tran, common } => (
            common,
            AdminAction::Op(AdminOp::Allocate {
                role: role_id(&role)?,
                tran: tran_id(&tran)?,
            }),
        ),
        AdminVerb::Deallocate { role, tran, common } => (
            common,
            AdminAction::Op(AdminOp::Deallocate {
                role: role_id(&role)?,
                tran: tran_id(&tran)?,
            }),
        ),
        AdminVerb::Contain {
            parent,
            child,
            common,
        } => (
            common,
            AdminAction::Op(AdminOp::Contain {
                parent: role_id(&parent)?,
                child: role_id(&child)?,
            }),
        ),
        AdminVerb::Uncontain {
            parent,
            child,
            common,
        } => (
            common,
            AdminAction::Op(AdminOp::Uncontain {
                parent: role_id(&parent)?,
                child: role_id(&child)?,
            }),
        ),
        AdminVerb::Onboard { user, common } => (
            common,
            AdminAction::Op(AdminOp::Onboard {
                user: user_id(&user)?,
            }),
        ),
        AdminVerb::Offboard { user, common } => (
            common,
            AdminAction::Op(AdminOp::Offboard {
                user: user_id(&user)?,
            }),
        ),
        AdminVerb::Restrict {
            user,
            transactions,
            clear,
            common,
        } => {
            let user = user_id(&user)?;
            let op = if clear {
                AdminOp::ClearRestriction { user }
            } else {
                AdminOp::Restrict {
                    user,
                    transactions: transactions
                        .iter()
                        .map(|t| tran_id(t))
                        .collect::<Result<_, _>>()?,
                }
            };
            (common, AdminAction::Op(op))
        }
        AdminVerb::ChangeFunction { user, roles, common } => (
            common,
            AdminAction::ChangeFunction {
                user: user_id(&user)?,
                roles: roles
                    .iter()
                    .map(|r| role_id(r))
                    .collect::<Result<_, _>>()?,
            },
        ),
        AdminVerb::AddSod {
            kind,
            id,
            roles,
            transactions,
            max,
            common,
        } => {
            let id = constraint_id(&id)?;
            let op = match kind {
                SodKind::Static => {
                    if !transactions.is_empty() {
                        return Err(Failure::usage(
                            "static constraints take --role, not --tran",
                        ));
                    }
                    AdminOp::AddStaticSod {
                        id,
                        roles: roles
                            .iter()
                            .map(|r| role_id(r))
                            .collect::<Result<_, _>>()?,
                        max: max.unwrap_or(1),
                    }
                }
                SodKind::Dynamic => {
                    if !roles.is_empty() || max.is_some() {
                        return Err(Failure::usage(
                            "dynamic constraints take --tran only",
                        ));
                    }
                    AdminOp::AddDynamicSod {
                        id,
                        transactions: transactions
                            .iter()
                            .map(|t| tran_id(t))
                            .collect::<Result<_, _>>()?,
                    }
                }
            };
            (common, AdminAction::Op(op))
        }
    })
}

// ---------------------------------------------------------------- audit

#[allow(clippy::too_many_arguments)]
fn cmd_audit_query(
    audit: Option<PathBuf>,
    kind: Option<String>,
    actor: Option<String>,
    tran: Option<String>,
    operand: Option<String>,
    from: Option<u64>,
    to: Option<u64>,
    format: Format,
) -> Result<i32, Failure> {
    let Some(path) = audit_path(audit) else {
        return Err(Failure::usage(
            "no audit log named: pass --audit or set AUDIT_PATH",
        ));
    };
    let filter = EventFilter {
        kind: kind
            .as_deref()
            .map(|k| k.parse::<EventKind>().map_err(Failure::usage))
            .transpose()?,
        actor: actor.as_deref().map(user_id).transpose()?,
        tran: tran.as_deref().map(tran_id).transpose()?,
        operand,
        from_ordinal: from,
        to_ordinal: to,
    };
    let view = load_view(Some(path))?;
    let events = query(&view, &filter);
    match format {
        Format::Text => {
            for event in &events {
                println!("{}", encode_line(event));
            }
        }
        Format::Json => println!("{}", serde_json::to_string(&events).expect("serializable")),
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- report

fn cmd_report_least_privilege(
    policy_path: &Path,
    audit: Option<PathBuf>,
    from: Option<u64>,
    to: Option<u64>,
    format: Format,
) -> Result<i32, Failure> {
    let policy = load_policy(policy_path)?;
    let view = load_view(audit_path(audit))?;
    let rows = rolekit_core::admin::least_privilege_report(&policy, &view, from, to);
    match format {
        Format::Text => {
            for row in &rows {
                let surplus = row
                    .surplus
                    .iter()
                    .map(|t| t.as_str())
                    .collect::<Vec<_>>()
                    .join(", ");
                println!(
                    "{}: granted {}, exercised {}, surplus [{}]",
                    row.user,
                    row.granted.len(),
                    row.exercised.len(),
                    surplus
                );
            }
        }
        Format::Json => println!("{}", serde_json::to_string(&rows).expect("serializable")),
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- fmt

fn cmd_fmt(path: &Path, write: bool) -> Result<i32, Failure> {
    let policy = load_policy(path)?;
    let canonical = serialize_policy(&policy)
        .expect("a policy that parses cleanly always serializes");
    if write {
        std::fs::write(path, canonical)
            .map_err(|e| Failure::io(format!("cannot rewrite {}: {e}", path.display())))?;
    } else {
        print!("{canonical}");
    }
    Ok(EXIT_OK)
}
