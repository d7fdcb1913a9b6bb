//! The access decision engine.
//!
//! Evaluates execution requests against a policy snapshot in a fixed rule
//! order: R1 (some role is active), R2 (every active role is authorized,
//! re-checked on every call so revocation bites immediately), R3 (the
//! transaction is reachable from an active role through containment),
//! RESTRICTION (the subject's per-user narrowing), and DSOD (dynamic
//! separation of duty against the audit history). Rule-4 policies add an
//! object/mode table check after the pipeline.
//!
//! Every operation here is a pure function over immutable snapshots;
//! recording an execution is the audit store's job.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audit::AuditView;
use crate::model::{
    AccessEntry, AccessMode, ObjectId, Policy, PolicyMode, RoleId, Session, TranId, UserId,
};
use crate::sod::{check_dynamic, DynamicCheck};

/// Which check produced a trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    #[serde(rename = "RESTRICTION")]
    Restriction,
    #[serde(rename = "DSOD")]
    Dsod,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R1 => "R1",
            RuleId::R2 => "R2",
            RuleId::R3 => "R3",
            RuleId::R4 => "R4",
            RuleId::Restriction => "RESTRICTION",
            RuleId::Dsod => "DSOD",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleOutcome {
    Pass,
    Fail,
}

/// One evaluated rule with a human-readable explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub rule: RuleId,
    pub outcome: RuleOutcome,
    pub detail: String,
}

impl TraceEntry {
    fn pass(rule: RuleId, detail: impl Into<String>) -> TraceEntry {
        TraceEntry {
            rule,
            outcome: RuleOutcome::Pass,
            detail: detail.into(),
        }
    }

    fn fail(rule: RuleId, detail: impl Into<String>) -> TraceEntry {
        TraceEntry {
            rule,
            outcome: RuleOutcome::Fail,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == RuleOutcome::Pass
    }
}

/// The verdict for one request. Evaluation short-circuits at the first
/// failing rule, so a deny's trace ends with its failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub allowed: bool,
    pub rule_trace: Vec<TraceEntry>,
}

impl Decision {
    fn from_trace(rule_trace: Vec<TraceEntry>) -> Decision {
        debug_assert!(!rule_trace.is_empty());
        Decision {
            allowed: rule_trace.iter().all(TraceEntry::passed),
            rule_trace,
        }
    }

    /// The first failing entry, present iff the request was denied.
    pub fn first_failure(&self) -> Option<&TraceEntry> {
        self.rule_trace.iter().find(|e| !e.passed())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown role {0}")]
    UnknownRole(RoleId),
    #[error("unknown transaction {0}")]
    UnknownTran(TranId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("session subject {0} is not known to this policy or its history")]
    UnknownSessionSubject(UserId),
    #[error("role {role} is not authorized for {subject}")]
    RoleNotAuthorized { subject: UserId, role: RoleId },
    #[error("single-active-role policy: {subject} already has active role {active}")]
    CapExceeded { subject: UserId, active: RoleId },
    #[error("operation requires a rule-4 policy; this policy is in bound-transaction mode")]
    ModeMismatch,
    #[error("user {user} is a member of {count} roles; Clark-Wilson reduction requires exactly one")]
    NotOneToOne { user: UserId, count: usize },
    #[error("transaction {0} is under a dynamic separation-of-duty constraint; an operand key is required")]
    MissingOperand(TranId),
}

/// RA(s): the roles whose membership includes `user`. Containment does not
/// enlarge this set; it propagates transactions, not memberships.
pub fn authorized_roles(policy: &Policy, user: &UserId) -> Result<BTreeSet<RoleId>, EngineError> {
    if !policy.users.contains(user) {
        return Err(EngineError::UnknownUser(user.clone()));
    }
    Ok(policy
        .roles
        .iter()
        .filter(|(_, role)| role.members.contains(user))
        .map(|(id, _)| id.clone())
        .collect())
}

/// TA(r) closed over containment: the union of transactions of `role` and
/// of every role reachable from it.
pub fn effective_transactions(
    policy: &Policy,
    role: &RoleId,
) -> Result<BTreeSet<TranId>, EngineError> {
    if !policy.roles.contains_key(role) {
        return Err(EngineError::UnknownRole(role.clone()));
    }
    let mut out = BTreeSet::new();
    for reached in policy.reachable_roles(role) {
        if let Some(r) = policy.roles.get(&reached) {
            out.extend(r.transactions.iter().cloned());
        }
    }
    Ok(out)
}

/// Adds `role` to the session's active set after checking rule 2. The input
/// session is untouched; a new one is returned. Activating an already
/// active role is a no-op.
pub fn activate_role(
    policy: &Policy,
    session: &Session,
    role: &RoleId,
) -> Result<Session, EngineError> {
    if !policy.roles.contains_key(role) {
        return Err(EngineError::UnknownRole(role.clone()));
    }
    let authorized = authorized_roles(policy, &session.subject)?;
    if !authorized.contains(role) {
        return Err(EngineError::RoleNotAuthorized {
            subject: session.subject.clone(),
            role: role.clone(),
        });
    }
    if session.active_roles.contains(role) {
        return Ok(session.clone());
    }
    if policy.single_active_role {
        if let Some(active) = session.active_roles.iter().next() {
            return Err(EngineError::CapExceeded {
                subject: session.subject.clone(),
                active: active.clone(),
            });
        }
    }
    let mut next = session.clone();
    next.active_roles.insert(role.clone());
    Ok(next)
}

/// Drops `role` from the active set; dropping a non-active role is a no-op.
pub fn deactivate_role(session: &Session, role: &RoleId) -> Session {
    let mut next = session.clone();
    next.active_roles.remove(role);
    next
}

/// exec(s, t): may the session's subject execute `tran` right now?
///
/// `operand` names the business object the execution would act on and is
/// required whenever `tran` falls under a dynamic separation-of-duty
/// constraint. The decision is side-effect-free; use
/// [`crate::audit::AuditStore::record_execution`] to decide and record
/// atomically.
pub fn can_execute(
    policy: &Policy,
    session: &Session,
    tran: &TranId,
    operand: Option<&str>,
    history: &AuditView,
) -> Result<Decision, EngineError> {
    let trace = execute_trace(policy, session, tran, operand, Some(history))?;
    Ok(Decision::from_trace(trace))
}

/// Rule 4: `can_execute` plus an access-table check for (role, tran,
/// object, mode). Only valid on rule-4 policies.
///
/// Dynamic separation of duty is not evaluated here: this entry point
/// carries no operand key. Use [`can_execute`] for the history-dependent
/// check.
pub fn check_access(
    policy: &Policy,
    session: &Session,
    tran: &TranId,
    object: &ObjectId,
    mode: AccessMode,
) -> Result<Decision, EngineError> {
    if policy.mode != PolicyMode::Rule4 {
        return Err(EngineError::ModeMismatch);
    }
    if !policy.objects.contains(object) {
        return Err(EngineError::UnknownObject(object.clone()));
    }
    let mut trace = execute_trace(policy, session, tran, None, None)?;
    if trace.iter().all(TraceEntry::passed) {
        let granting = session.active_roles.iter().find(|role| {
            policy.access_table.contains(&AccessEntry {
                role: (*role).clone(),
                tran: tran.clone(),
                object: object.clone(),
                mode,
            })
        });
        trace.push(match granting {
            Some(role) => TraceEntry::pass(
                RuleId::R4,
                format!("({role}, {tran}, {object}, {mode}) in access table"),
            ),
            None => TraceEntry::fail(
                RuleId::R4,
                format!("no access entry for ({tran}, {object}, {mode}) under any active role"),
            ),
        });
    }
    Ok(Decision::from_trace(trace))
}

/// The Clark-Wilson triple as a special case: every user holds exactly one
/// role, which is auto-activated for the check.
pub fn clark_wilson_check(
    policy: &Policy,
    user: &UserId,
    tran: &TranId,
    object: &ObjectId,
    mode: AccessMode,
) -> Result<Decision, EngineError> {
    if policy.mode != PolicyMode::Rule4 {
        return Err(EngineError::ModeMismatch);
    }
    if !policy.users.contains(user) {
        return Err(EngineError::UnknownUser(user.clone()));
    }
    let mut unique_role = None;
    for candidate in policy.users.iter() {
        let held: Vec<&RoleId> = policy
            .roles
            .iter()
            .filter(|(_, role)| role.members.contains(candidate))
            .map(|(id, _)| id)
            .collect();
        if held.len() != 1 {
            return Err(EngineError::NotOneToOne {
                user: candidate.clone(),
                count: held.len(),
            });
        }
        if candidate == user {
            unique_role = Some(held[0].clone());
        }
    }
    let role = unique_role.expect("user checked against policy.users above");
    let mut session = Session::new("clark-wilson", user.clone());
    session.active_roles.insert(role);
    check_access(policy, &session, tran, object, mode)
}

/// Shared rule pipeline. `history` of `None` skips the DSOD step and its
/// operand requirement (the rule-4 table path).
fn execute_trace(
    policy: &Policy,
    session: &Session,
    tran: &TranId,
    operand: Option<&str>,
    history: Option<&AuditView>,
) -> Result<Vec<TraceEntry>, EngineError> {
    if !policy.transactions.contains_key(tran) {
        return Err(EngineError::UnknownTran(tran.clone()));
    }
    let constrained = policy
        .dynamic_sod
        .values()
        .any(|c| c.transactions.contains(tran));
    if history.is_some() && constrained && operand.is_none() {
        return Err(EngineError::MissingOperand(tran.clone()));
    }

    let mut trace = Vec::new();
    let subject = &session.subject;

    // R1: some role must be active.
    if session.active_roles.is_empty() {
        trace.push(TraceEntry::fail(RuleId::R1, "no active role in session"));
        return Ok(trace);
    }
    trace.push(TraceEntry::pass(
        RuleId::R1,
        format!("active roles: {}", join_roles(&session.active_roles)),
    ));

    // R2: active roles re-checked against current memberships, so stale
    // sessions deny here after a revocation or offboarding.
    let authorized = match authorized_roles(policy, subject) {
        Ok(set) => set,
        Err(EngineError::UnknownUser(_)) => {
            trace.push(TraceEntry::fail(
                RuleId::R2,
                format!("subject {subject} is not a known user"),
            ));
            return Ok(trace);
        }
        Err(other) => return Err(other),
    };
    let stale: BTreeSet<RoleId> = session
        .active_roles
        .difference(&authorized)
        .cloned()
        .collect();
    if !stale.is_empty() {
        trace.push(TraceEntry::fail(
            RuleId::R2,
            format!("active roles not authorized for {subject}: {}", join_roles(&stale)),
        ));
        return Ok(trace);
    }
    trace.push(TraceEntry::pass(
        RuleId::R2,
        format!("all active roles authorized for {subject}"),
    ));

    // R3: the transaction must be reachable from some active role.
    let granting = session.active_roles.iter().find(|role| {
        effective_transactions(policy, role)
            .map(|set| set.contains(tran))
            .unwrap_or(false)
    });
    match granting {
        Some(role) => trace.push(TraceEntry::pass(
            RuleId::R3,
            format!("{tran} reachable via active role {role}"),
        )),
        None => {
            trace.push(TraceEntry::fail(
                RuleId::R3,
                format!("{tran} is not allocated to any active role or contained role"),
            ));
            return Ok(trace);
        }
    }

    // RESTRICTION: a recorded per-user narrowing must include the
    // transaction; absence of an entry means unrestricted.
    match policy.restrictions.get(subject) {
        None => trace.push(TraceEntry::pass(
            RuleId::Restriction,
            format!("no restriction recorded for {subject}"),
        )),
        Some(allowed) if allowed.contains(tran) => trace.push(TraceEntry::pass(
            RuleId::Restriction,
            format!("{tran} permitted by restriction"),
        )),
        Some(_) => {
            trace.push(TraceEntry::fail(
                RuleId::Restriction,
                format!("{tran} excluded by restriction for {subject}"),
            ));
            return Ok(trace);
        }
    }

    // DSOD: only when an operand key accompanies the request.
    if let (Some(history), Some(operand)) = (history, operand) {
        let mut conflict = None;
        for constraint in policy.dynamic_sod.values() {
            match check_dynamic(constraint, history, subject, tran, operand) {
                DynamicCheck::Pass => {}
                DynamicCheck::Conflict {
                    constraint_id,
                    witness_ordinal,
                    prior_tran,
                } => {
                    conflict = Some((constraint_id, witness_ordinal, prior_tran));
                    break;
                }
            }
        }
        trace.push(match conflict {
            Some((constraint_id, witness_ordinal, prior_tran)) => TraceEntry::fail(
                RuleId::Dsod,
                format!(
                    "constraint {constraint_id}: {subject} already executed {prior_tran} \
                     on operand {operand} (audit ordinal {witness_ordinal})"
                ),
            ),
            None if constrained => TraceEntry::pass(
                RuleId::Dsod,
                format!("no conflicting execution on operand {operand}"),
            ),
            None => TraceEntry::pass(
                RuleId::Dsod,
                format!("{tran} is not under any dynamic constraint"),
            ),
        });
    }

    Ok(trace)
}

fn join_roles(roles: &BTreeSet<RoleId>) -> String {
    roles
        .iter()
        .map(RoleId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}
