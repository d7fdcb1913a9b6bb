//! Test-only companions to `rolekit-core`: a deliberately naive reference
//! decision procedure ([`oracle_can_execute`]) and a seeded scenario
//! generator ([`generate`]), wired together by a [`harness`] that replays
//! scenarios against the real engine and compares verdicts step by step.
//!
//! The oracle shares nothing with the engine beyond the core data types.
//! It materializes every relation from scratch on every call and rescans
//! the full history linearly, trading speed for obviousness: two
//! implementations this different agreeing on every query is the evidence
//! the tests are after.

pub mod generator;
pub mod harness;

use std::collections::BTreeSet;

use rolekit_core::audit::{AuditEvent, EventKind};
use rolekit_core::model::{Policy, RoleId, Session, TranId};

pub use generator::{generate, GeneratedScenario, Step};

/// Literal evaluation of the execution rules over materialized sets.
///
/// Returns whether the session's subject may execute `tran` on `operand`
/// given `history`. Malformed queries (unknown transaction, unknown
/// subject, stale active role) are simply not permitted executions, so
/// the answer is `false` rather than an error.
pub fn oracle_can_execute(
    policy: &Policy,
    session: &Session,
    tran: &TranId,
    operand: Option<&str>,
    history: &[AuditEvent],
) -> bool {
    if !policy.transactions.contains_key(tran) {
        return false;
    }

    // Rule 1: the subject acts through some active role.
    if session.active_roles.is_empty() {
        return false;
    }

    // Rule 2: every active role is one the subject is authorized for,
    // re-established from the membership relation at call time.
    if !policy.users.contains(&session.subject) {
        return false;
    }
    for role in &session.active_roles {
        let authorized = policy
            .roles
            .get(role)
            .is_some_and(|r| r.members.contains(&session.subject));
        if !authorized {
            return false;
        }
    }

    // Rule 3: the transaction is authorized for some active role, where a
    // role's transactions include everything reachable through containment.
    let mut authorized_trans: BTreeSet<&TranId> = BTreeSet::new();
    for role in &session.active_roles {
        let mut seen: BTreeSet<&RoleId> = BTreeSet::new();
        let mut frontier: Vec<&RoleId> = vec![role];
        while let Some(current) = frontier.pop() {
            if !seen.insert(current) {
                continue;
            }
            let Some(r) = policy.roles.get(current) else {
                continue;
            };
            authorized_trans.extend(r.transactions.iter());
            frontier.extend(r.contains.iter());
        }
    }
    if !authorized_trans.contains(tran) {
        return false;
    }

    // Restriction: a per-user allow-list narrows the closure further.
    if let Some(allowed) = policy.restrictions.get(&session.subject) {
        if !allowed.contains(tran) {
            return false;
        }
    }

    // Dynamic separation of duty: the subject must not have executed a
    // conflicting transaction on the same operand. Full rescan per
    // constraint; no indexes, no early exits beyond the match itself.
    if let Some(key) = operand {
        for constraint in policy.dynamic_sod.values() {
            if !constraint.transactions.contains(tran) {
                continue;
            }
            for event in history {
                if event.ordinal < constraint.since {
                    continue;
                }
                if event.kind() != EventKind::Execution {
                    continue;
                }
                if event.actor != session.subject {
                    continue;
                }
                if event.operand() != Some(key) {
                    continue;
                }
                let Some(prior) = event.tran() else {
                    continue;
                };
                if prior != tran && constraint.transactions.contains(prior) {
                    return false;
                }
            }
        }
    }

    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rolekit_core::audit::test_support::execution_event;
    use rolekit_core::model::UserId;

    fn uid(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }
    fn rid(s: &str) -> RoleId {
        RoleId::new(s).unwrap()
    }
    fn tid(s: &str) -> TranId {
        TranId::new(s).unwrap()
    }

    fn sample_policy() -> Policy {
        rolekit_core::dsl::parse_policy(
            "\
policy clinic mode bound
user alice
user bob
object chart
transaction diagnose proc diagnose-tp binds chart:read,write
transaction review proc review-tp binds chart:read
role Doctor allocates diagnose contains Reviewer members alice
role Reviewer allocates review members bob
",
        )
        .unwrap()
    }

    #[test]
    fn empty_active_role_set_is_denied() {
        let p = sample_policy();
        let s = Session::new("s", uid("alice"));
        assert!(!oracle_can_execute(&p, &s, &tid("diagnose"), None, &[]));
    }

    #[test]
    fn containment_grants_transitively() {
        let p = sample_policy();
        let mut s = Session::new("s", uid("alice"));
        s.active_roles.insert(rid("Doctor"));
        assert!(oracle_can_execute(&p, &s, &tid("review"), None, &[]));
        assert!(oracle_can_execute(&p, &s, &tid("diagnose"), None, &[]));
    }

    #[test]
    fn non_member_is_denied_even_with_role_active() {
        let p = sample_policy();
        let mut s = Session::new("s", uid("bob"));
        s.active_roles.insert(rid("Doctor"));
        assert!(!oracle_can_execute(&p, &s, &tid("diagnose"), None, &[]));
    }

    #[test]
    fn history_conflict_denies_same_operand_only() {
        let mut p = sample_policy();
        let cid = rolekit_core::model::ConstraintId::new("split").unwrap();
        p.dynamic_sod.insert(
            cid.clone(),
            rolekit_core::sod::DynamicSodConstraint::new(
                cid,
                [tid("diagnose"), tid("review")],
            )
            .unwrap(),
        );
        let mut s = Session::new("s", uid("alice"));
        s.active_roles.insert(rid("Doctor"));
        let history = [execution_event(1, "alice", "diagnose", Some("case-9"))];
        assert!(!oracle_can_execute(&p, &s, &tid("review"), Some("case-9"), &history));
        assert!(oracle_can_execute(&p, &s, &tid("review"), Some("case-8"), &history));
        assert!(oracle_can_execute(&p, &s, &tid("diagnose"), Some("case-9"), &history));
    }
}
