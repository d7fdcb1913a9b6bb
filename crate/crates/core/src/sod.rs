//! Separation-of-duty constraints.
//!
//! Static constraints are checked at assignment time: no user may be a
//! member of more than `max_memberships` roles from the constrained set.
//! Dynamic constraints are checked at run time against the audit history:
//! no user may execute two distinct transactions from the constrained set
//! on the same operand key.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audit::{AuditView, EventBody};
use crate::model::{ConstraintId, Policy, RoleId, TranId, UserId};

/// Assignment-time constraint: membership in at most `max_memberships` of
/// `roles` per user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticSodConstraint {
    pub id: ConstraintId,
    pub roles: BTreeSet<RoleId>,
    pub max_memberships: u32,
}

impl StaticSodConstraint {
    /// Builds a constraint over at least two roles with `max_memberships`
    /// of 1, the strict pairwise form.
    pub fn new(id: ConstraintId, roles: impl IntoIterator<Item = RoleId>) -> Result<Self, SodError> {
        Self::with_max(id, roles, 1)
    }

    pub fn with_max(
        id: ConstraintId,
        roles: impl IntoIterator<Item = RoleId>,
        max_memberships: u32,
    ) -> Result<Self, SodError> {
        let roles: BTreeSet<RoleId> = roles.into_iter().collect();
        if roles.len() < 2 {
            return Err(SodError::TooFewRoles { id, got: roles.len() });
        }
        if max_memberships < 1 {
            return Err(SodError::BadMax { id });
        }
        Ok(StaticSodConstraint {
            id,
            roles,
            max_memberships,
        })
    }
}

/// Run-time constraint over a transaction set, scoped per operand key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicSodConstraint {
    pub id: ConstraintId,
    pub transactions: BTreeSet<TranId>,
    /// Audit ordinal from which the constraint applies. Executions recorded
    /// before this ordinal are grandfathered and never produce conflicts.
    pub since: u64,
}

impl DynamicSodConstraint {
    pub fn new(
        id: ConstraintId,
        transactions: impl IntoIterator<Item = TranId>,
    ) -> Result<Self, SodError> {
        Self::since(id, transactions, 0)
    }

    pub fn since(
        id: ConstraintId,
        transactions: impl IntoIterator<Item = TranId>,
        since: u64,
    ) -> Result<Self, SodError> {
        let transactions: BTreeSet<TranId> = transactions.into_iter().collect();
        if transactions.len() < 2 {
            return Err(SodError::TooFewTransactions {
                id,
                got: transactions.len(),
            });
        }
        Ok(DynamicSodConstraint {
            id,
            transactions,
            since,
        })
    }
}

/// One user exceeding a static constraint's membership cap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticSodViolation {
    pub constraint_id: ConstraintId,
    pub user: UserId,
    /// The user's memberships within the constrained role set.
    pub roles_held: BTreeSet<RoleId>,
    pub max_memberships: u32,
}

impl fmt::Display for StaticSodViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let roles = self
            .roles_held
            .iter()
            .map(RoleId::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        write!(
            f,
            "{}: {} holds {} of the constrained roles ({roles}), max {}",
            self.constraint_id,
            self.user,
            self.roles_held.len(),
            self.max_memberships
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SodError {
    #[error("constraint {0} references unknown role {1}")]
    UnknownRole(ConstraintId, RoleId),
    #[error("constraint {0} references unknown transaction {1}")]
    UnknownTran(ConstraintId, TranId),
    #[error("constraint id {0} is already in use")]
    DuplicateConstraint(ConstraintId),
    #[error("constraint {id} needs at least two roles, got {got}")]
    TooFewRoles { id: ConstraintId, got: usize },
    #[error("constraint {id} needs at least two transactions, got {got}")]
    TooFewTransactions { id: ConstraintId, got: usize },
    #[error("constraint {id}: max_memberships must be at least 1")]
    BadMax { id: ConstraintId },
    #[error("constraint {constraint} is already violated by current memberships: {}",
            .violators.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    RetroactiveStaticViolation {
        constraint: ConstraintId,
        violators: Vec<StaticSodViolation>,
    },
}

/// Scans every static constraint against current memberships. Empty result
/// iff all constraints hold.
pub fn check_static(policy: &Policy) -> Vec<StaticSodViolation> {
    let mut out = Vec::new();
    for constraint in policy.static_sod.values() {
        out.extend(violations_of(policy, constraint));
    }
    out
}

/// Violations of one constraint against `policy`'s current memberships,
/// whether or not the constraint is recorded in the policy.
pub fn violations_of(policy: &Policy, constraint: &StaticSodConstraint) -> Vec<StaticSodViolation> {
    let mut out = Vec::new();
    for user in &policy.users {
        let held: BTreeSet<RoleId> = constraint
            .roles
            .iter()
            .filter(|role_id| {
                policy
                    .roles
                    .get(*role_id)
                    .is_some_and(|role| role.members.contains(user))
            })
            .cloned()
            .collect();
        if held.len() as u32 > constraint.max_memberships {
            out.push(StaticSodViolation {
                constraint_id: constraint.id.clone(),
                user: user.clone(),
                roles_held: held,
                max_memberships: constraint.max_memberships,
            });
        }
    }
    out
}

/// Outcome of a dynamic separation-of-duty check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DynamicCheck {
    Pass,
    /// The user already executed a distinct constrained transaction on the
    /// same operand; the witness is that execution's audit ordinal.
    Conflict {
        constraint_id: ConstraintId,
        witness_ordinal: u64,
        prior_tran: TranId,
    },
}

impl DynamicCheck {
    pub fn passed(&self) -> bool {
        matches!(self, DynamicCheck::Pass)
    }
}

/// Checks whether `user` executing `tran` on `operand` would conflict with
/// a prior execution under `constraint`. Transactions outside the
/// constraint set trivially pass; so does re-executing the same
/// transaction on the same operand.
pub fn check_dynamic(
    constraint: &DynamicSodConstraint,
    history: &AuditView,
    user: &UserId,
    tran: &TranId,
    operand: &str,
) -> DynamicCheck {
    if !constraint.transactions.contains(tran) {
        return DynamicCheck::Pass;
    }
    for event in history.events() {
        if event.ordinal < constraint.since {
            continue;
        }
        let EventBody::Execution(exec) = &event.body else {
            continue;
        };
        if event.actor == *user
            && exec.operand.as_deref() == Some(operand)
            && exec.tran != *tran
            && constraint.transactions.contains(&exec.tran)
        {
            return DynamicCheck::Conflict {
                constraint_id: constraint.id.clone(),
                witness_ordinal: event.ordinal,
                prior_tran: exec.tran.clone(),
            };
        }
    }
    DynamicCheck::Pass
}

/// Records a static constraint after checking that every referenced role
/// exists and that current memberships already satisfy it.
pub fn add_static_constraint(
    policy: &Policy,
    constraint: StaticSodConstraint,
) -> Result<Policy, SodError> {
    for role in &constraint.roles {
        if !policy.roles.contains_key(role) {
            return Err(SodError::UnknownRole(constraint.id.clone(), role.clone()));
        }
    }
    if policy.constraint_id_taken(&constraint.id) {
        return Err(SodError::DuplicateConstraint(constraint.id));
    }
    let violators = violations_of(policy, &constraint);
    if !violators.is_empty() {
        return Err(SodError::RetroactiveStaticViolation {
            constraint: constraint.id,
            violators,
        });
    }
    let mut next = policy.clone();
    next.static_sod.insert(constraint.id.clone(), constraint);
    Ok(next)
}

/// Records a dynamic constraint after checking that every referenced
/// transaction exists. History predating `constraint.since` is never
/// consulted by later checks.
pub fn add_dynamic_constraint(
    policy: &Policy,
    constraint: DynamicSodConstraint,
) -> Result<Policy, SodError> {
    for tran in &constraint.transactions {
        if !policy.transactions.contains_key(tran) {
            return Err(SodError::UnknownTran(constraint.id.clone(), tran.clone()));
        }
    }
    if policy.constraint_id_taken(&constraint.id) {
        return Err(SodError::DuplicateConstraint(constraint.id));
    }
    let mut next = policy.clone();
    next.dynamic_sod.insert(constraint.id.clone(), constraint);
    Ok(next)
}
