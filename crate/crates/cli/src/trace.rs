//! Parser for `simulate` trace files: one step per line.
//!
//! ```text
//! # full-line comments only; '#' elsewhere stays part of a token,
//! # so operand keys like payment#42 survive.
//! session alice activate PaymentInitiator
//! exec alice initiate-payment operand payment#42
//! admin grant bob PaymentAuthorizer
//! ```

use rolekit_core::admin::AdminOp;
use rolekit_core::model::{ConstraintId, RoleId, TranId, UserId};

/// One parsed trace line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    Activate {
        user: UserId,
        role: RoleId,
    },
    Deactivate {
        user: UserId,
        role: RoleId,
    },
    Exec {
        user: UserId,
        tran: TranId,
        operand: Option<String>,
    },
    Admin(AdminOp),
    /// `admin change-function <user> <role>...` — expands to several
    /// audited operations, so it is not a single [`AdminOp`].
    ChangeFunction {
        user: UserId,
        roles: Vec<RoleId>,
    },
}

/// Steps tagged with their 1-based source line, for error reporting.
pub fn parse_trace(text: &str) -> Result<Vec<(usize, TraceStep)>, String> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let step = parse_line(line).map_err(|e| format!("trace line {line_no}: {e}"))?;
        steps.push((line_no, step));
    }
    Ok(steps)
}

fn parse_line(line: &str) -> Result<TraceStep, String> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    match tokens.as_slice() {
        ["session", user, "activate", role] => Ok(TraceStep::Activate {
            user: user_id(user)?,
            role: role_id(role)?,
        }),
        ["session", user, "deactivate", role] => Ok(TraceStep::Deactivate {
            user: user_id(user)?,
            role: role_id(role)?,
        }),
        ["exec", user, tran] => Ok(TraceStep::Exec {
            user: user_id(user)?,
            tran: tran_id(tran)?,
            operand: None,
        }),
        ["exec", user, tran, "operand", key] => Ok(TraceStep::Exec {
            user: user_id(user)?,
            tran: tran_id(tran)?,
            operand: Some((*key).to_string()),
        }),
        ["admin", rest @ ..] => parse_admin(rest),
        _ => Err(format!(
            "unrecognized step {line:?} (expected session/exec/admin)"
        )),
    }
}

fn parse_admin(tokens: &[&str]) -> Result<TraceStep, String> {
    let op = match tokens {
        ["grant", user, role] => AdminOp::Grant {
            user: user_id(user)?,
            role: role_id(role)?,
        },
        ["revoke", user, role] => AdminOp::Revoke {
            user: user_id(user)?,
            role: role_id(role)?,
        },
        ["allocate", role, tran] => AdminOp::Allocate {
            role: role_id(role)?,
            tran: tran_id(tran)?,
        },
        ["deallocate", role, tran] => AdminOp::Deallocate {
            role: role_id(role)?,
            tran: tran_id(tran)?,
        },
        ["contain", parent, child] => AdminOp::Contain {
            parent: role_id(parent)?,
            child: role_id(child)?,
        },
        ["uncontain", parent, child] => AdminOp::Uncontain {
            parent: role_id(parent)?,
            child: role_id(child)?,
        },
        ["onboard", user] => AdminOp::Onboard {
            user: user_id(user)?,
        },
        ["offboard", user] => AdminOp::Offboard {
            user: user_id(user)?,
        },
        ["restrict", user, trans @ ..] => AdminOp::Restrict {
            user: user_id(user)?,
            transactions: trans
                .iter()
                .map(|t| tran_id(t))
                .collect::<Result<_, _>>()?,
        },
        ["clear-restriction", user] => AdminOp::ClearRestriction {
            user: user_id(user)?,
        },
        ["change-function", user, roles @ ..] => {
            return Ok(TraceStep::ChangeFunction {
                user: user_id(user)?,
                roles: roles.iter().map(|r| role_id(r)).collect::<Result<_, _>>()?,
            })
        }
        ["add-sod", "static", id, max, roles @ ..] => AdminOp::AddStaticSod {
            id: constraint_id(id)?,
            roles: roles
                .iter()
                .map(|r| role_id(r))
                .collect::<Result<_, _>>()?,
            max: max
                .parse::<u32>()
                .map_err(|_| format!("bad max {max:?} (expected a number)"))?,
        },
        ["add-sod", "dynamic", id, trans @ ..] => AdminOp::AddDynamicSod {
            id: constraint_id(id)?,
            transactions: trans
                .iter()
                .map(|t| tran_id(t))
                .collect::<Result<_, _>>()?,
        },
        _ => {
            return Err(format!(
                "unrecognized admin step {:?}",
                tokens.join(" ")
            ))
        }
    };
    Ok(TraceStep::Admin(op))
}

fn user_id(s: &str) -> Result<UserId, String> {
    UserId::new(s).map_err(|e| format!("bad user {s:?}: {e}"))
}
fn role_id(s: &str) -> Result<RoleId, String> {
    RoleId::new(s).map_err(|e| format!("bad role {s:?}: {e}"))
}
fn tran_id(s: &str) -> Result<TranId, String> {
    TranId::new(s).map_err(|e| format!("bad transaction {s:?}: {e}"))
}
fn constraint_id(s: &str) -> Result<ConstraintId, String> {
    ConstraintId::new(s).map_err(|e| format!("bad constraint id {s:?}: {e}"))
}
