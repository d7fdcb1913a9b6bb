//! Domain vocabulary for role-based policies: identifiers, transactions,
//! roles, sessions, the [`Policy`] relation set, and structural validation.
//!
//! Everything here is an immutable value type. Mutation happens in the
//! [`crate::admin`] module, which always produces a fresh `Policy`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sod::{check_static, DynamicSodConstraint, StaticSodConstraint};

/// Maximum identifier length, in characters.
pub const MAX_IDENT_LEN: usize = 128;

/// Words with fixed meaning in the policy language. Identifiers may not
/// collide with these, otherwise a serialized policy would not re-parse.
pub const RESERVED_WORDS: &[&str] = &[
    "access",
    "allocates",
    "binds",
    "bound",
    "contains",
    "dynamic-sod",
    "max",
    "members",
    "mode",
    "object",
    "policy",
    "proc",
    "restrict",
    "role",
    "roles",
    "rule4",
    "since",
    "single-active-role",
    "static-sod",
    "to",
    "transaction",
    "transactions",
    "user",
];

/// Reasons an identifier string is rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentifierError {
    #[error("identifier is empty")]
    Empty,
    #[error("identifier is {0} characters long, maximum is {MAX_IDENT_LEN}")]
    TooLong(usize),
    #[error("identifier contains forbidden character {0:?}")]
    BadChar(char),
    #[error("identifier {0:?} is a reserved word")]
    Reserved(String),
}

pub(crate) fn validate_identifier(raw: &str) -> Result<(), IdentifierError> {
    if raw.is_empty() {
        return Err(IdentifierError::Empty);
    }
    let len = raw.chars().count();
    if len > MAX_IDENT_LEN {
        return Err(IdentifierError::TooLong(len));
    }
    if let Some(c) = raw
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || *c == '-' || *c == '_'))
    {
        return Err(IdentifierError::BadChar(c));
    }
    if RESERVED_WORDS.contains(&raw) {
        return Err(IdentifierError::Reserved(raw.to_string()));
    }
    Ok(())
}

macro_rules! identifier_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            /// Validates the raw string against the identifier grammar:
            /// non-empty, at most [`MAX_IDENT_LEN`] characters, drawn from
            /// letters, digits, `-` and `_`, and not a reserved word.
            pub fn new(raw: impl Into<String>) -> Result<Self, IdentifierError> {
                let raw = raw.into();
                validate_identifier(&raw)?;
                Ok(Self(raw))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = IdentifierError;
            fn try_from(raw: String) -> Result<Self, IdentifierError> {
                Self::new(raw)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl FromStr for $name {
            type Err = IdentifierError;
            fn from_str(raw: &str) -> Result<Self, IdentifierError> {
                Self::new(raw)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

identifier_type!(
    /// Opaque, case-sensitive name of a user.
    UserId
);
identifier_type!(
    /// Opaque, case-sensitive name of a role.
    RoleId
);
identifier_type!(
    /// Opaque, case-sensitive name of a transaction.
    TranId
);
identifier_type!(
    /// Opaque, case-sensitive name of a protected object.
    ObjectId
);
identifier_type!(
    /// Opaque name of the transformation procedure behind a transaction.
    ProcId
);
identifier_type!(
    /// Name of a separation-of-duty constraint. Static and dynamic
    /// constraints share one namespace.
    ConstraintId
);

/// Access modes an object binding or access-table entry can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Read,
    Write,
    Append,
    Execute,
}

impl AccessMode {
    pub const ALL: [AccessMode; 4] = [
        AccessMode::Read,
        AccessMode::Write,
        AccessMode::Append,
        AccessMode::Execute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::Read => "read",
            AccessMode::Write => "write",
            AccessMode::Append => "append",
            AccessMode::Execute => "execute",
        }
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessMode {
    type Err = String;
    fn from_str(raw: &str) -> Result<Self, String> {
        match raw {
            "read" => Ok(AccessMode::Read),
            "write" => Ok(AccessMode::Write),
            "append" => Ok(AccessMode::Append),
            "execute" => Ok(AccessMode::Execute),
            other => Err(format!("unknown access mode {other:?}")),
        }
    }
}

/// One object a transaction touches, with the modes it uses.
///
/// Kept as a list entry rather than a map key so that a duplicate object
/// is representable and can be reported by [`Policy::validate`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ObjectBinding {
    pub object: ObjectId,
    pub modes: BTreeSet<AccessMode>,
}

/// A transformation procedure bound to the data items it accesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub id: TranId,
    pub procedure: ProcId,
    pub bindings: Vec<ObjectBinding>,
}

impl Transaction {
    pub fn new(id: TranId, procedure: ProcId) -> Self {
        Transaction {
            id,
            procedure,
            bindings: Vec::new(),
        }
    }

    pub fn bind(mut self, object: ObjectId, modes: impl IntoIterator<Item = AccessMode>) -> Self {
        self.bindings.push(ObjectBinding {
            object,
            modes: modes.into_iter().collect(),
        });
        self
    }
}

/// A named set of transactions with member users and directly contained roles.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Role {
    pub members: BTreeSet<UserId>,
    pub transactions: BTreeSet<TranId>,
    pub contains: BTreeSet<RoleId>,
}

/// Whether data bindings live inside transactions (rules 1-3 only) or in an
/// explicit role/transaction/object/mode access table (rule 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    BoundTransaction,
    Rule4,
}

/// One row of the rule-4 access table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AccessEntry {
    pub role: RoleId,
    pub tran: TranId,
    pub object: ObjectId,
    pub mode: AccessMode,
}

/// The complete relation set of one policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub name: String,
    pub mode: PolicyMode,
    /// Caps every session at one active role when set.
    pub single_active_role: bool,
    pub users: BTreeSet<UserId>,
    pub objects: BTreeSet<ObjectId>,
    pub transactions: BTreeMap<TranId, Transaction>,
    pub roles: BTreeMap<RoleId, Role>,
    /// Rule-4 access table; must stay empty in bound-transaction mode.
    pub access_table: BTreeSet<AccessEntry>,
    /// Per-user narrowing of the transactions reachable through memberships.
    /// An absent entry means unrestricted; an empty set denies everything.
    pub restrictions: BTreeMap<UserId, BTreeSet<TranId>>,
    pub static_sod: BTreeMap<ConstraintId, StaticSodConstraint>,
    pub dynamic_sod: BTreeMap<ConstraintId, DynamicSodConstraint>,
}

impl Policy {
    /// An empty policy in bound-transaction mode.
    pub fn new() -> Policy {
        Policy::named("default")
    }

    /// An empty bound-transaction policy with the given name.
    ///
    /// Panics if `name` is not a valid identifier; use [`Policy::try_named`]
    /// for caller-supplied names.
    pub fn named(name: &str) -> Policy {
        Policy::try_named(name).expect("invalid policy name")
    }

    pub fn try_named(name: &str) -> Result<Policy, IdentifierError> {
        validate_identifier(name)?;
        Ok(Policy {
            name: name.to_string(),
            mode: PolicyMode::BoundTransaction,
            single_active_role: false,
            users: BTreeSet::new(),
            objects: BTreeSet::new(),
            transactions: BTreeMap::new(),
            roles: BTreeMap::new(),
            access_table: BTreeSet::new(),
            restrictions: BTreeMap::new(),
            static_sod: BTreeMap::new(),
            dynamic_sod: BTreeMap::new(),
        })
    }

    /// True when `id` already names a static or dynamic constraint.
    /// Constraint ids share one namespace so violation reports stay
    /// unambiguous.
    pub fn constraint_id_taken(&self, id: &ConstraintId) -> bool {
        self.static_sod.contains_key(id) || self.dynamic_sod.contains_key(id)
    }

    /// Roles reachable from `start` by following `contains` edges, including
    /// `start` itself. Edges to undeclared roles are ignored; dangling edges
    /// are reported by [`Policy::validate`] instead.
    pub fn reachable_roles(&self, start: &RoleId) -> BTreeSet<RoleId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(role_id) = stack.pop() {
            if !seen.insert(role_id.clone()) {
                continue;
            }
            if let Some(role) = self.roles.get(&role_id) {
                for child in &role.contains {
                    if !seen.contains(child) {
                        stack.push(child.clone());
                    }
                }
            }
        }
        seen
    }

    /// Union of transactions over the containment closure of every role
    /// `user` is a member of. This is the ceiling a restriction may narrow.
    pub fn reachable_transactions_of_user(&self, user: &UserId) -> BTreeSet<TranId> {
        let mut out = BTreeSet::new();
        for (role_id, role) in &self.roles {
            if !role.members.contains(user) {
                continue;
            }
            for reachable in self.reachable_roles(role_id) {
                if let Some(r) = self.roles.get(&reachable) {
                    out.extend(r.transactions.iter().cloned());
                }
            }
        }
        out
    }

    /// Checks every structural invariant and returns the violations found.
    /// An empty result means the policy is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        validate_policy(self)
    }
}

impl Default for Policy {
    fn default() -> Policy {
        Policy::new()
    }
}

/// One subject's live context: identity plus the active role set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub subject: UserId,
    pub active_roles: BTreeSet<RoleId>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, subject: UserId) -> Session {
        Session {
            session_id: session_id.into(),
            subject,
            active_roles: BTreeSet::new(),
        }
    }
}

/// Machine-readable classification of a structural invariant violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DanglingUser,
    DanglingTran,
    DanglingRole,
    DanglingObject,
    Cycle,
    RestrictionWidens,
    StaticSod,
    DupBinding,
    EmptyBinding,
    ModeConflict,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DanglingUser => "DANGLING_USER",
            ViolationCode::DanglingTran => "DANGLING_TRAN",
            ViolationCode::DanglingRole => "DANGLING_ROLE",
            ViolationCode::DanglingObject => "DANGLING_OBJECT",
            ViolationCode::Cycle => "CYCLE",
            ViolationCode::RestrictionWidens => "RESTRICTION_WIDENS",
            ViolationCode::StaticSod => "STATIC_SOD",
            ViolationCode::DupBinding => "DUP_BINDING",
            ViolationCode::EmptyBinding => "EMPTY_BINDING",
            ViolationCode::ModeConflict => "MODE_CONFLICT",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single invariant violation with a human-readable explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Violation {
        Violation {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Checks every structural invariant of `policy`. Violations are data, not
/// errors: the result is empty iff the policy is well-formed.
pub fn validate_policy(policy: &Policy) -> Vec<Violation> {
    let mut out = Vec::new();

    for (role_id, role) in &policy.roles {
        for member in &role.members {
            if !policy.users.contains(member) {
                out.push(Violation::new(
                    ViolationCode::DanglingUser,
                    format!("role {role_id} lists member {member} who is not a declared user"),
                ));
            }
        }
        for tran in &role.transactions {
            if !policy.transactions.contains_key(tran) {
                out.push(Violation::new(
                    ViolationCode::DanglingTran,
                    format!("role {role_id} allocates undeclared transaction {tran}"),
                ));
            }
        }
        for child in &role.contains {
            if !policy.roles.contains_key(child) {
                out.push(Violation::new(
                    ViolationCode::DanglingRole,
                    format!("role {role_id} contains undeclared role {child}"),
                ));
            }
        }
    }

    for cycle in containment_cycles(policy) {
        let path = cycle
            .iter()
            .map(RoleId::as_str)
            .collect::<Vec<_>>()
            .join(" -> ");
        out.push(Violation::new(
            ViolationCode::Cycle,
            format!("role containment cycle: {path}"),
        ));
    }

    for (tran_id, tran) in &policy.transactions {
        let mut seen = BTreeSet::new();
        for binding in &tran.bindings {
            if !seen.insert(&binding.object) {
                out.push(Violation::new(
                    ViolationCode::DupBinding,
                    format!("transaction {tran_id} binds object {} twice", binding.object),
                ));
            }
            if !policy.objects.contains(&binding.object) {
                out.push(Violation::new(
                    ViolationCode::DanglingObject,
                    format!("transaction {tran_id} binds undeclared object {}", binding.object),
                ));
            }
        }
        if tran.bindings.is_empty() && policy.mode == PolicyMode::BoundTransaction {
            out.push(Violation::new(
                ViolationCode::EmptyBinding,
                format!(
                    "transaction {tran_id} has no object bindings; required in bound-transaction mode"
                ),
            ));
        }
    }

    if policy.mode == PolicyMode::BoundTransaction && !policy.access_table.is_empty() {
        out.push(Violation::new(
            ViolationCode::ModeConflict,
            "access table entries present in a bound-transaction policy".to_string(),
        ));
    }
    for entry in &policy.access_table {
        if !policy.roles.contains_key(&entry.role) {
            out.push(Violation::new(
                ViolationCode::DanglingRole,
                format!("access entry references undeclared role {}", entry.role),
            ));
        }
        if !policy.transactions.contains_key(&entry.tran) {
            out.push(Violation::new(
                ViolationCode::DanglingTran,
                format!("access entry references undeclared transaction {}", entry.tran),
            ));
        }
        if !policy.objects.contains(&entry.object) {
            out.push(Violation::new(
                ViolationCode::DanglingObject,
                format!("access entry references undeclared object {}", entry.object),
            ));
        }
    }

    for (user, allowed) in &policy.restrictions {
        if !policy.users.contains(user) {
            out.push(Violation::new(
                ViolationCode::DanglingUser,
                format!("restriction declared for unknown user {user}"),
            ));
            continue;
        }
        let ceiling = policy.reachable_transactions_of_user(user);
        for tran in allowed {
            if !policy.transactions.contains_key(tran) {
                out.push(Violation::new(
                    ViolationCode::DanglingTran,
                    format!("restriction for {user} names undeclared transaction {tran}"),
                ));
            } else if !ceiling.contains(tran) {
                out.push(Violation::new(
                    ViolationCode::RestrictionWidens,
                    format!(
                        "restriction for {user} includes {tran}, which none of their roles allocate"
                    ),
                ));
            }
        }
    }

    for (id, constraint) in &policy.static_sod {
        for role in &constraint.roles {
            if !policy.roles.contains_key(role) {
                out.push(Violation::new(
                    ViolationCode::DanglingRole,
                    format!("static constraint {id} references undeclared role {role}"),
                ));
            }
        }
    }
    for (id, constraint) in &policy.dynamic_sod {
        for tran in &constraint.transactions {
            if !policy.transactions.contains_key(tran) {
                out.push(Violation::new(
                    ViolationCode::DanglingTran,
                    format!("dynamic constraint {id} references undeclared transaction {tran}"),
                ));
            }
        }
    }

    for violation in check_static(policy) {
        let roles = violation
            .roles_held
            .iter()
            .map(RoleId::as_str)
            .collect::<Vec<_>>()
            .join(", ");
        out.push(Violation::new(
            ViolationCode::StaticSod,
            format!(
                "constraint {}: user {} holds {} conflicting roles ({roles}), max {}",
                violation.constraint_id,
                violation.user,
                violation.roles_held.len(),
                violation.max_memberships,
            ),
        ));
    }

    out
}

/// Finds every cycle in the containment graph, each reported once as the
/// path of roles closing back on the first entry.
pub(crate) fn containment_cycles(policy: &Policy) -> Vec<Vec<RoleId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }

    fn visit(
        policy: &Policy,
        node: &RoleId,
        colors: &mut BTreeMap<RoleId, Color>,
        path: &mut Vec<RoleId>,
        cycles: &mut Vec<Vec<RoleId>>,
    ) {
        colors.insert(node.clone(), Color::Gray);
        path.push(node.clone());
        if let Some(role) = policy.roles.get(node) {
            for child in &role.contains {
                if !policy.roles.contains_key(child) {
                    continue; // dangling edge, reported separately
                }
                match colors.get(child).copied().unwrap_or(Color::White) {
                    Color::White => visit(policy, child, colors, path, cycles),
                    Color::Gray => {
                        let start = path.iter().position(|r| r == child).unwrap_or(0);
                        let mut cycle: Vec<RoleId> = path[start..].to_vec();
                        cycle.push(child.clone());
                        cycles.push(cycle);
                    }
                    Color::Black => {}
                }
            }
        }
        path.pop();
        colors.insert(node.clone(), Color::Black);
    }

    let mut colors = BTreeMap::new();
    let mut cycles = Vec::new();
    let roots: Vec<RoleId> = policy.roles.keys().cloned().collect();
    for root in roots {
        if colors.get(&root).copied().unwrap_or(Color::White) == Color::White {
            let mut path = Vec::new();
            visit(policy, &root, &mut colors, &mut path, &mut cycles);
        }
    }
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uid(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }
    fn rid(s: &str) -> RoleId {
        RoleId::new(s).unwrap()
    }
    fn tid(s: &str) -> TranId {
        TranId::new(s).unwrap()
    }
    fn oid(s: &str) -> ObjectId {
        ObjectId::new(s).unwrap()
    }

    fn codes(policy: &Policy) -> Vec<ViolationCode> {
        policy.validate().into_iter().map(|v| v.code).collect()
    }

    /// Three-level containment chain with one transaction per level, as in a
    /// hospital hierarchy.
    fn chain_policy() -> Policy {
        let mut p = Policy::named("hospital");
        for u in ["alice", "dana", "heidi"] {
            p.users.insert(uid(u));
        }
        p.objects.insert(oid("chart"));
        for t in ["prescribe", "review-chart", "take-vitals"] {
            p.transactions.insert(
                tid(t),
                Transaction::new(tid(t), ProcId::new(format!("{t}-tp")).unwrap())
                    .bind(oid("chart"), [AccessMode::Read]),
            );
        }
        let mut healer = Role::default();
        healer.members.insert(uid("heidi"));
        healer.transactions.insert(tid("take-vitals"));
        let mut intern = Role::default();
        intern.members.insert(uid("dana"));
        intern.transactions.insert(tid("review-chart"));
        intern.contains.insert(rid("Healer"));
        let mut doctor = Role::default();
        doctor.members.insert(uid("alice"));
        doctor.transactions.insert(tid("prescribe"));
        doctor.contains.insert(rid("Intern"));
        p.roles.insert(rid("Healer"), healer);
        p.roles.insert(rid("Intern"), intern);
        p.roles.insert(rid("Doctor"), doctor);
        p
    }

    #[test]
    fn identifier_grammar() {
        assert!(UserId::new("alice").is_ok());
        assert!(UserId::new("A-1_b").is_ok());
        assert_eq!(UserId::new(""), Err(IdentifierError::Empty));
        assert_eq!(UserId::new("a b"), Err(IdentifierError::BadChar(' ')));
        assert_eq!(UserId::new("a:b"), Err(IdentifierError::BadChar(':')));
        assert_eq!(UserId::new("a#b"), Err(IdentifierError::BadChar('#')));
        assert_eq!(
            UserId::new("role"),
            Err(IdentifierError::Reserved("role".to_string()))
        );
        let long = "x".repeat(MAX_IDENT_LEN + 1);
        assert_eq!(UserId::new(long), Err(IdentifierError::TooLong(129)));
        assert!(UserId::new("x".repeat(MAX_IDENT_LEN)).is_ok());
    }

    #[test]
    fn empty_policy_is_well_formed() {
        let p = Policy::new();
        assert!(p.users.is_empty());
        assert!(p.roles.is_empty());
        assert_eq!(p.mode, PolicyMode::BoundTransaction);
        assert_eq!(p.validate(), Vec::new());
    }

    #[test]
    fn containment_chain_is_well_formed() {
        assert_eq!(chain_policy().validate(), Vec::new());
    }

    #[test]
    fn two_role_cycle_detected() {
        let mut p = Policy::new();
        let mut a = Role::default();
        a.contains.insert(rid("B"));
        let mut b = Role::default();
        b.contains.insert(rid("A"));
        p.roles.insert(rid("A"), a);
        p.roles.insert(rid("B"), b);
        assert_eq!(codes(&p), vec![ViolationCode::Cycle]);
    }

    #[test]
    fn self_containment_is_a_cycle() {
        let mut p = Policy::new();
        let mut a = Role::default();
        a.contains.insert(rid("A"));
        p.roles.insert(rid("A"), a);
        assert_eq!(codes(&p), vec![ViolationCode::Cycle]);
    }

    #[test]
    fn restriction_outside_role_closure_widens() {
        let mut p = chain_policy();
        // heidi is only a Healer; prescribe is Doctor-only.
        p.restrictions
            .insert(uid("heidi"), BTreeSet::from([tid("prescribe")]));
        assert_eq!(codes(&p), vec![ViolationCode::RestrictionWidens]);
    }

    #[test]
    fn restriction_within_closure_is_fine() {
        let mut p = chain_policy();
        // alice's Doctor role reaches take-vitals through the chain.
        p.restrictions
            .insert(uid("alice"), BTreeSet::from([tid("take-vitals")]));
        assert_eq!(p.validate(), Vec::new());
    }

    #[test]
    fn each_single_mutation_yields_its_code() {
        // Dangling member.
        let mut p = chain_policy();
        p.roles
            .get_mut(&rid("Doctor"))
            .unwrap()
            .members
            .insert(uid("ghost"));
        assert_eq!(codes(&p), vec![ViolationCode::DanglingUser]);

        // Dangling transaction allocation.
        let mut p = chain_policy();
        p.roles
            .get_mut(&rid("Doctor"))
            .unwrap()
            .transactions
            .insert(tid("missing"));
        assert_eq!(codes(&p), vec![ViolationCode::DanglingTran]);

        // Dangling containment edge.
        let mut p = chain_policy();
        p.roles
            .get_mut(&rid("Doctor"))
            .unwrap()
            .contains
            .insert(rid("Nowhere"));
        assert_eq!(codes(&p), vec![ViolationCode::DanglingRole]);

        // Duplicate object binding.
        let mut p = chain_policy();
        let tran = p.transactions.get_mut(&tid("prescribe")).unwrap();
        let dup = tran.bindings[0].clone();
        tran.bindings.push(dup);
        assert_eq!(codes(&p), vec![ViolationCode::DupBinding]);

        // Empty bindings in bound mode.
        let mut p = chain_policy();
        p.transactions.get_mut(&tid("prescribe")).unwrap().bindings.clear();
        assert_eq!(codes(&p), vec![ViolationCode::EmptyBinding]);

        // Access table in bound mode.
        let mut p = chain_policy();
        p.access_table.insert(AccessEntry {
            role: rid("Doctor"),
            tran: tid("prescribe"),
            object: oid("chart"),
            mode: AccessMode::Write,
        });
        assert_eq!(codes(&p), vec![ViolationCode::ModeConflict]);
    }

    #[test]
    fn empty_bindings_allowed_in_rule4_mode() {
        let mut p = chain_policy();
        p.mode = PolicyMode::Rule4;
        p.transactions.get_mut(&tid("prescribe")).unwrap().bindings.clear();
        assert_eq!(p.validate(), Vec::new());
    }

    #[test]
    fn reachable_roles_is_reflexive_transitive() {
        let p = chain_policy();
        assert_eq!(
            p.reachable_roles(&rid("Doctor")),
            BTreeSet::from([rid("Doctor"), rid("Intern"), rid("Healer")])
        );
        assert_eq!(
            p.reachable_roles(&rid("Healer")),
            BTreeSet::from([rid("Healer")])
        );
    }

    #[test]
    fn three_node_cycle_reported_once() {
        let mut p = Policy::new();
        for (from, to) in [("A", "B"), ("B", "C"), ("C", "A")] {
            let mut r = p.roles.remove(&rid(from)).unwrap_or_default();
            r.contains.insert(rid(to));
            p.roles.insert(rid(from), r);
        }
        let cycles: Vec<_> = p
            .validate()
            .into_iter()
            .filter(|v| v.code == ViolationCode::Cycle)
            .collect();
        assert_eq!(cycles.len(), 1);
        assert!(cycles[0].message.contains("A -> B -> C -> A"));
    }
}
