//! Canonical serializer: every well-formed policy has exactly one textual
//! form, so formatting is byte-stable and diffs stay meaningful.

use std::fmt::Write as _;

use crate::model::{validate_policy, Policy, PolicyMode, Violation};

use super::parse_policy;

/// Why a policy could not be serialized.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SerializeError {
    #[error("policy is not well-formed: {}", describe(.0))]
    IllformedPolicy(Vec<Violation>),
}

fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Renders `policy` in canonical form: sections in a fixed order, entries
/// sorted, one statement per line, no comments. The output round-trips
/// through [`parse_policy`] and is a fixed point of serialize-then-parse.
pub fn serialize_policy(policy: &Policy) -> Result<String, SerializeError> {
    let violations = validate_policy(policy);
    if !violations.is_empty() {
        return Err(SerializeError::IllformedPolicy(violations));
    }

    let mut out = String::new();
    write!(out, "policy {} mode {}", policy.name, mode_word(policy.mode)).unwrap();
    if policy.single_active_role {
        out.push_str(" single-active-role");
    }
    out.push('\n');

    let mut sections: Vec<Vec<String>> = Vec::new();

    let users: Vec<String> = policy.users.iter().map(|u| format!("user {u}")).collect();
    sections.push(users);

    let objects: Vec<String> = policy
        .objects
        .iter()
        .map(|o| format!("object {o}"))
        .collect();
    sections.push(objects);

    let mut transactions = Vec::new();
    for (id, tran) in &policy.transactions {
        let mut line = format!("transaction {id} proc {}", tran.procedure);
        let mut bindings: Vec<_> = tran.bindings.iter().collect();
        bindings.sort_by(|a, b| a.object.cmp(&b.object));
        if !bindings.is_empty() {
            line.push_str(" binds");
            for binding in bindings {
                let modes = binding
                    .modes
                    .iter()
                    .map(|m| m.as_str())
                    .collect::<Vec<_>>()
                    .join(",");
                write!(line, " {}:{modes}", binding.object).unwrap();
            }
        }
        transactions.push(line);
    }
    sections.push(transactions);

    let mut roles = Vec::new();
    for (id, role) in &policy.roles {
        let mut line = format!("role {id}");
        if !role.transactions.is_empty() {
            write!(line, " allocates {}", join(role.transactions.iter())).unwrap();
        }
        if !role.contains.is_empty() {
            write!(line, " contains {}", join(role.contains.iter())).unwrap();
        }
        if !role.members.is_empty() {
            write!(line, " members {}", join(role.members.iter())).unwrap();
        }
        roles.push(line);
    }
    sections.push(roles);

    let mut constraints = Vec::new();
    for (id, c) in &policy.static_sod {
        constraints.push(format!(
            "static-sod {id} roles {} max {}",
            join(c.roles.iter()),
            c.max_memberships
        ));
    }
    for (id, c) in &policy.dynamic_sod {
        let mut line = format!("dynamic-sod {id} transactions {}", join(c.transactions.iter()));
        if c.since > 0 {
            write!(line, " since {}", c.since).unwrap();
        }
        constraints.push(line);
    }
    sections.push(constraints);

    let mut restrictions = Vec::new();
    for (user, trans) in &policy.restrictions {
        if trans.is_empty() {
            restrictions.push(format!("restrict {user} to"));
        } else {
            restrictions.push(format!("restrict {user} to {}", join(trans.iter())));
        }
    }
    sections.push(restrictions);

    let access: Vec<String> = policy
        .access_table
        .iter()
        .map(|e| format!("access {} {} {} {}", e.role, e.tran, e.object, e.mode.as_str()))
        .collect();
    sections.push(access);

    for section in sections {
        if section.is_empty() {
            continue;
        }
        out.push('\n');
        for line in section {
            out.push_str(&line);
            out.push('\n');
        }
    }

    debug_assert!(
        parse_policy(&out).is_ok(),
        "canonical output failed to re-parse:\n{out}"
    );
    Ok(out)
}

fn mode_word(mode: PolicyMode) -> &'static str {
    match mode {
        PolicyMode::BoundTransaction => "bound",
        PolicyMode::Rule4 => "rule4",
    }
}

fn join<'a, T: std::fmt::Display + 'a>(items: impl Iterator<Item = &'a T>) -> String {
    items.map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}
