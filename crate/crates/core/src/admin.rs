//! Administration of authorization data.
//!
//! Membership, allocation, containment, user lifecycle, restrictions, and
//! constraint registration. Every function here is pure — it takes a
//! policy snapshot and returns a new one or an error, never mutating its
//! input — and every function preserves well-formedness: applied to a
//! policy with no validation findings, the result has none either.
//!
//! [`Administrator`] layers auditing on top: each successful operation is
//! appended to the audit store *before* the mutated policy becomes
//! visible, and the log itself becomes an input to checks that need
//! history (user-identifier reuse, dynamic-constraint grandfathering).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audit::{AuditError, AuditStore, AuditView, EventBody};
use crate::model::{ConstraintId, Policy, RoleId, TranId, UserId};
use crate::sod::{DynamicSodConstraint, SodError, StaticSodConstraint};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdminError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown role {0}")]
    UnknownRole(RoleId),
    #[error("unknown transaction {0}")]
    UnknownTran(TranId),
    #[error("user identifier {0} is already in use or was used before")]
    DuplicateUser(UserId),
    #[error(
        "granting {role} to {user} violates static constraint {constraint}: \
         already a member of {}",
        join(.conflicting_roles)
    )]
    StaticSodViolation {
        constraint: ConstraintId,
        user: UserId,
        role: RoleId,
        conflicting_roles: BTreeSet<RoleId>,
    },
    #[error("containment cycle: {}", join_arrows(.path))]
    Cycle { path: Vec<RoleId> },
    #[error(
        "restriction for {user} would exceed what their roles reach: {}",
        join(.outside)
    )]
    RestrictionWidens {
        user: UserId,
        outside: BTreeSet<TranId>,
    },
    #[error(transparent)]
    Sod(#[from] SodError),
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|item| item.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_arrows(path: &[RoleId]) -> String {
    path.iter()
        .map(RoleId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Adds `user` to `role`'s membership. Granting an existing membership is
/// a no-op. The grant is refused when it would push the user past any
/// static separation-of-duty cap, naming the constraint and the
/// conflicting memberships.
pub fn grant_membership(
    policy: &Policy,
    user: &UserId,
    role: &RoleId,
) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    let Some(r) = policy.roles.get(role) else {
        return Err(AdminError::UnknownRole(role.clone()));
    };
    if r.members.contains(user) {
        return Ok(policy.clone());
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(role)
        .expect("role existence checked above")
        .members
        .insert(user.clone());
    for constraint in next.static_sod.values() {
        if !constraint.roles.contains(role) {
            continue;
        }
        let held: BTreeSet<RoleId> = constraint
            .roles
            .iter()
            .filter(|rid| {
                next.roles
                    .get(*rid)
                    .is_some_and(|r| r.members.contains(user))
            })
            .cloned()
            .collect();
        if held.len() as u32 > constraint.max_memberships {
            let mut conflicting = held;
            conflicting.remove(role);
            return Err(AdminError::StaticSodViolation {
                constraint: constraint.id.clone(),
                user: user.clone(),
                role: role.clone(),
                conflicting_roles: conflicting,
            });
        }
    }
    Ok(next)
}

/// Removes `user` from `role`'s membership; removing a non-membership is a
/// no-op. Existing sessions are not touched — rule 2 denies them on their
/// next request.
pub fn revoke_membership(
    policy: &Policy,
    user: &UserId,
    role: &RoleId,
) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    if !policy.roles.contains_key(role) {
        return Err(AdminError::UnknownRole(role.clone()));
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(role)
        .expect("role existence checked above")
        .members
        .remove(user);
    clamp_restrictions(&mut next);
    Ok(next)
}

/// Adds `tran` to the set a role may execute; idempotent.
pub fn allocate_transaction(
    policy: &Policy,
    role: &RoleId,
    tran: &TranId,
) -> Result<Policy, AdminError> {
    if !policy.roles.contains_key(role) {
        return Err(AdminError::UnknownRole(role.clone()));
    }
    if !policy.transactions.contains_key(tran) {
        return Err(AdminError::UnknownTran(tran.clone()));
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(role)
        .expect("role existence checked above")
        .transactions
        .insert(tran.clone());
    Ok(next)
}

/// Removes `tran` from a role's direct allocation; idempotent. The
/// transaction may remain reachable through containment.
pub fn deallocate_transaction(
    policy: &Policy,
    role: &RoleId,
    tran: &TranId,
) -> Result<Policy, AdminError> {
    if !policy.roles.contains_key(role) {
        return Err(AdminError::UnknownRole(role.clone()));
    }
    if !policy.transactions.contains_key(tran) {
        return Err(AdminError::UnknownTran(tran.clone()));
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(role)
        .expect("role existence checked above")
        .transactions
        .remove(tran);
    clamp_restrictions(&mut next);
    Ok(next)
}

/// Records that `parent` contains `child`, so the parent's members may
/// execute everything the child's members may. Refused with the full path
/// when the new edge would close a cycle.
pub fn add_containment(
    policy: &Policy,
    parent: &RoleId,
    child: &RoleId,
) -> Result<Policy, AdminError> {
    if !policy.roles.contains_key(parent) {
        return Err(AdminError::UnknownRole(parent.clone()));
    }
    if !policy.roles.contains_key(child) {
        return Err(AdminError::UnknownRole(child.clone()));
    }
    if policy.roles[parent].contains.contains(child) {
        return Ok(policy.clone());
    }
    if let Some(back_path) = containment_path(policy, child, parent) {
        let mut path = vec![parent.clone()];
        path.extend(back_path);
        return Err(AdminError::Cycle { path });
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(parent)
        .expect("role existence checked above")
        .contains
        .insert(child.clone());
    Ok(next)
}

/// Removes a direct containment edge; idempotent. Transitive reachability
/// through other edges is unaffected.
pub fn remove_containment(
    policy: &Policy,
    parent: &RoleId,
    child: &RoleId,
) -> Result<Policy, AdminError> {
    if !policy.roles.contains_key(parent) {
        return Err(AdminError::UnknownRole(parent.clone()));
    }
    if !policy.roles.contains_key(child) {
        return Err(AdminError::UnknownRole(child.clone()));
    }
    let mut next = policy.clone();
    next.roles
        .get_mut(parent)
        .expect("role existence checked above")
        .contains
        .remove(child);
    clamp_restrictions(&mut next);
    Ok(next)
}

/// Shrinking operations can leave a restriction referencing transactions
/// its user no longer reaches. Net access is unchanged — rule 3 already
/// denies anything outside the closure — so the restriction is clamped
/// back inside the ceiling to keep the policy well-formed.
fn clamp_restrictions(policy: &mut Policy) {
    let users: Vec<UserId> = policy.restrictions.keys().cloned().collect();
    for user in users {
        let ceiling = policy.reachable_transactions_of_user(&user);
        if let Some(allowed) = policy.restrictions.get_mut(&user) {
            allowed.retain(|t| ceiling.contains(t));
        }
    }
}

/// Shortest containment path `from → … → to`, if one exists. `from == to`
/// yields the single-element path.
fn containment_path(policy: &Policy, from: &RoleId, to: &RoleId) -> Option<Vec<RoleId>> {
    use std::collections::{BTreeMap, VecDeque};
    let mut prev: BTreeMap<RoleId, RoleId> = BTreeMap::new();
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(current) = queue.pop_front() {
        if &current == to {
            let mut path = vec![current.clone()];
            let mut node = current;
            while let Some(p) = prev.get(&node) {
                path.push(p.clone());
                node = p.clone();
            }
            path.reverse();
            return Some(path);
        }
        let children = policy.roles.get(&current).map(|r| &r.contains);
        for child in children.into_iter().flatten() {
            if seen.insert(child.clone()) {
                prev.insert(child.clone(), current.clone());
                queue.push_back(child.clone());
            }
        }
    }
    None
}

/// Declares a new user with no memberships. A user identifier already
/// present is refused; reuse of *retired* identifiers is refused by
/// [`Administrator::apply`], which can see the log.
pub fn onboard_user(policy: &Policy, user: &UserId) -> Result<Policy, AdminError> {
    if policy.users.contains(user) {
        return Err(AdminError::DuplicateUser(user.clone()));
    }
    let mut next = policy.clone();
    next.users.insert(user.clone());
    Ok(next)
}

/// Removes a user entirely: memberships, restriction, and the user record.
/// Their audit history remains, and any live session denies at rule 2.
pub fn offboard_user(policy: &Policy, user: &UserId) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    let mut next = policy.clone();
    next.users.remove(user);
    for role in next.roles.values_mut() {
        role.members.remove(user);
    }
    next.restrictions.remove(user);
    Ok(next)
}

/// Narrows `user` to `allowed` transactions. Every listed transaction must
/// exist and be reachable through the user's current memberships — a
/// restriction can only take away, never add. The empty set is a valid
/// restriction meaning "may execute nothing".
pub fn set_restriction(
    policy: &Policy,
    user: &UserId,
    allowed: &BTreeSet<TranId>,
) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    for tran in allowed {
        if !policy.transactions.contains_key(tran) {
            return Err(AdminError::UnknownTran(tran.clone()));
        }
    }
    let ceiling = policy.reachable_transactions_of_user(user);
    let outside: BTreeSet<TranId> = allowed.difference(&ceiling).cloned().collect();
    if !outside.is_empty() {
        return Err(AdminError::RestrictionWidens {
            user: user.clone(),
            outside,
        });
    }
    let mut next = policy.clone();
    next.restrictions.insert(user.clone(), allowed.clone());
    Ok(next)
}

/// Removes a user's restriction, returning them to everything their roles
/// reach; idempotent.
pub fn clear_restriction(policy: &Policy, user: &UserId) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    let mut next = policy.clone();
    next.restrictions.remove(user);
    Ok(next)
}

/// Moves a user to a new job function in one step: all current memberships
/// are revoked, any restriction (which was scoped to the old function) is
/// cleared, and the new roles are granted. Static constraints are checked
/// against the *final* membership picture, so swapping between two
/// mutually exclusive roles works without a privilege gap. On error the
/// input policy is unchanged.
pub fn change_function(
    policy: &Policy,
    user: &UserId,
    new_roles: &[RoleId],
) -> Result<Policy, AdminError> {
    if !policy.users.contains(user) {
        return Err(AdminError::UnknownUser(user.clone()));
    }
    for role in new_roles {
        if !policy.roles.contains_key(role) {
            return Err(AdminError::UnknownRole(role.clone()));
        }
    }
    let mut next = policy.clone();
    for role in next.roles.values_mut() {
        role.members.remove(user);
    }
    next.restrictions.remove(user);
    for role in new_roles {
        next = grant_membership(&next, user, role)?;
    }
    Ok(next)
}

/// One row of the least-privilege report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserPrivilege {
    pub user: UserId,
    /// What the user may execute now: the containment closure of their
    /// memberships, clamped by any restriction.
    pub granted: BTreeSet<TranId>,
    /// What the user actually executed within the window.
    pub exercised: BTreeSet<TranId>,
    /// granted − exercised: candidates for narrowing.
    pub surplus: BTreeSet<TranId>,
}

/// Compares granted privilege with exercised privilege over an inclusive
/// ordinal window of the history (`None` bounds are open). Rows are sorted
/// by surplus size descending, then user ascending, so the widest gap
/// comes first.
pub fn least_privilege_report(
    policy: &Policy,
    history: &AuditView,
    from_ordinal: Option<u64>,
    to_ordinal: Option<u64>,
) -> Vec<UserPrivilege> {
    let mut rows: Vec<UserPrivilege> = policy
        .users
        .iter()
        .map(|user| {
            let mut granted = policy.reachable_transactions_of_user(user);
            if let Some(allowed) = policy.restrictions.get(user) {
                granted = granted.intersection(allowed).cloned().collect();
            }
            let exercised: BTreeSet<TranId> = history
                .events()
                .iter()
                .filter(|e| from_ordinal.is_none_or(|f| e.ordinal >= f))
                .filter(|e| to_ordinal.is_none_or(|t| e.ordinal <= t))
                .filter(|e| &e.actor == user)
                .filter_map(|e| match &e.body {
                    EventBody::Execution(x) => Some(x.tran.clone()),
                    _ => None,
                })
                .collect();
            let surplus = granted.difference(&exercised).cloned().collect();
            UserPrivilege {
                user: user.clone(),
                granted,
                exercised,
                surplus,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.surplus
            .len()
            .cmp(&a.surplus.len())
            .then_with(|| a.user.cmp(&b.user))
    });
    rows
}

/// A loggable administrative operation. The serialized form (tagged by
/// `verb`) is the body of `admin` audit events, and
/// [`apply_op`] replays one deterministically against a policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verb", rename_all = "snake_case")]
pub enum AdminOp {
    Grant {
        user: UserId,
        role: RoleId,
    },
    Revoke {
        user: UserId,
        role: RoleId,
    },
    Allocate {
        role: RoleId,
        tran: TranId,
    },
    Deallocate {
        role: RoleId,
        tran: TranId,
    },
    Contain {
        parent: RoleId,
        child: RoleId,
    },
    Uncontain {
        parent: RoleId,
        child: RoleId,
    },
    Onboard {
        user: UserId,
    },
    Offboard {
        user: UserId,
    },
    Restrict {
        user: UserId,
        transactions: BTreeSet<TranId>,
    },
    ClearRestriction {
        user: UserId,
    },
    AddStaticSod {
        id: ConstraintId,
        roles: BTreeSet<RoleId>,
        max: u32,
    },
    AddDynamicSod {
        id: ConstraintId,
        transactions: BTreeSet<TranId>,
    },
}

impl AdminOp {
    /// The user an operation is *about*, when there is one; used to trace
    /// identifier reuse through the log.
    pub fn target_user(&self) -> Option<&UserId> {
        match self {
            AdminOp::Grant { user, .. }
            | AdminOp::Revoke { user, .. }
            | AdminOp::Onboard { user }
            | AdminOp::Offboard { user }
            | AdminOp::Restrict { user, .. }
            | AdminOp::ClearRestriction { user } => Some(user),
            _ => None,
        }
    }
}

/// Applies one logged operation to a policy.
///
/// `ordinal` is the audit ordinal of the operation's own event; it matters
/// only for `add_dynamic_sod`, whose constraint grandfathers all history
/// before that point. Replaying a log through this function reproduces the
/// exact policy the administrator ended with.
pub fn apply_op(policy: &Policy, op: &AdminOp, ordinal: u64) -> Result<Policy, AdminError> {
    match op {
        AdminOp::Grant { user, role } => grant_membership(policy, user, role),
        AdminOp::Revoke { user, role } => revoke_membership(policy, user, role),
        AdminOp::Allocate { role, tran } => allocate_transaction(policy, role, tran),
        AdminOp::Deallocate { role, tran } => deallocate_transaction(policy, role, tran),
        AdminOp::Contain { parent, child } => add_containment(policy, parent, child),
        AdminOp::Uncontain { parent, child } => remove_containment(policy, parent, child),
        AdminOp::Onboard { user } => onboard_user(policy, user),
        AdminOp::Offboard { user } => offboard_user(policy, user),
        AdminOp::Restrict { user, transactions } => set_restriction(policy, user, transactions),
        AdminOp::ClearRestriction { user } => clear_restriction(policy, user),
        AdminOp::AddStaticSod { id, roles, max } => {
            let constraint = StaticSodConstraint::with_max(id.clone(), roles.iter().cloned(), *max)?;
            Ok(crate::sod::add_static_constraint(policy, constraint)?)
        }
        AdminOp::AddDynamicSod { id, transactions } => {
            let constraint =
                DynamicSodConstraint::since(id.clone(), transactions.iter().cloned(), ordinal)?;
            Ok(crate::sod::add_dynamic_constraint(policy, constraint)?)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdminApplyError {
    #[error(transparent)]
    Admin(#[from] AdminError),
    #[error(transparent)]
    Store(#[from] AuditError),
}

/// Stateful administration with auditing.
///
/// Each [`apply`](Administrator::apply) first validates the operation
/// against the current policy, then appends the `admin` event, then
/// commits the new policy — so a policy state is never observable before
/// the log line that explains it is durable. Failed operations append
/// nothing and leave the policy untouched.
pub struct Administrator<'a> {
    policy: Policy,
    store: &'a AuditStore,
    actor: UserId,
}

impl<'a> Administrator<'a> {
    pub fn new(policy: Policy, store: &'a AuditStore, actor: UserId) -> Administrator<'a> {
        Administrator {
            policy,
            store,
            actor,
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn into_policy(self) -> Policy {
        self.policy
    }

    /// Validates, logs, and applies one operation, returning its audit
    /// ordinal.
    ///
    /// Onboarding consults the log as well as the policy: a user
    /// identifier that was ever onboarded or offboarded before may not be
    /// introduced again, so history attributed to the old holder can never
    /// be inherited.
    pub fn apply(&mut self, op: AdminOp) -> Result<u64, AdminApplyError> {
        if let AdminOp::Onboard { user } = &op {
            if self.identity_used(user) {
                return Err(AdminError::DuplicateUser(user.clone()).into());
            }
        }
        // Dry-run against the predicted ordinal so an invalid operation is
        // refused before anything reaches the log. Validity never depends
        // on the exact ordinal, so a concurrent append cannot invalidate
        // the check.
        apply_op(&self.policy, &op, self.store.high_water() + 1)?;
        let ordinal = self.store.append_admin(&self.actor, op.clone())?;
        self.policy = apply_op(&self.policy, &op, ordinal)?;
        Ok(ordinal)
    }

    /// The audited form of [`change_function`]: one revoke per current
    /// membership, a restriction clear when one is present, then one grant
    /// per new role — every step logged. The whole sequence is dry-run
    /// first, so it either happens completely or not at all.
    pub fn change_function(
        &mut self,
        user: &UserId,
        new_roles: &[RoleId],
    ) -> Result<Vec<u64>, AdminApplyError> {
        change_function(&self.policy, user, new_roles)?;
        let current: Vec<RoleId> = self
            .policy
            .roles
            .iter()
            .filter(|(_, role)| role.members.contains(user))
            .map(|(id, _)| id.clone())
            .collect();
        let mut ordinals = Vec::new();
        for role in current {
            ordinals.push(self.apply(AdminOp::Revoke {
                user: user.clone(),
                role,
            })?);
        }
        if self.policy.restrictions.contains_key(user) {
            ordinals.push(self.apply(AdminOp::ClearRestriction { user: user.clone() })?);
        }
        for role in new_roles {
            ordinals.push(self.apply(AdminOp::Grant {
                user: user.clone(),
                role: role.clone(),
            })?);
        }
        Ok(ordinals)
    }

    fn identity_used(&self, user: &UserId) -> bool {
        self.store.view().events().iter().any(|event| {
            matches!(
                &event.body,
                EventBody::Admin(AdminOp::Onboard { user: u })
                | EventBody::Admin(AdminOp::Offboard { user: u })
                    if u == user
            )
        })
    }
}
