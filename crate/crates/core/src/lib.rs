//! Role-based access control with transactions as the unit of privilege.
//!
//! A [`Policy`] names users, objects, transactions (procedures bound to
//! the objects they touch), and roles; roles hold members, allocated
//! transactions, and `contains` edges through which a senior role inherits
//! a junior role's transactions. The [`engine`] answers "may this session
//! execute this transaction?" by evaluating a fixed rule pipeline — role
//! active, roles authorized, transaction reachable, per-user restriction,
//! dynamic separation of duty — and reports the full trace either way.
//!
//! Administration ([`admin`]) is pure policy-to-policy transformation with
//! an audited stateful wrapper; every decision and execution lands in the
//! append-only, checksummed [`audit`] log, which in turn feeds the
//! dynamic-separation checks ([`sod`]) and the least-privilege report.
//! Policies round-trip through a line-oriented text format ([`dsl`]) with
//! a canonical serializer.

pub mod admin;
pub mod audit;
pub mod dsl;
pub mod engine;
pub mod model;
pub mod sod;

pub use admin::{
    add_containment, allocate_transaction, apply_op, change_function, clear_restriction,
    deallocate_transaction, grant_membership, least_privilege_report, offboard_user, onboard_user,
    remove_containment, revoke_membership, set_restriction, AdminApplyError, AdminError, AdminOp,
    Administrator, UserPrivilege,
};
pub use audit::{
    query, AuditError, AuditEvent, AuditStore, AuditView, DecisionEventBody, EventBody,
    EventFilter, EventKind, ExecutionEventBody, OpenWarning, RecordError,
};
pub use dsl::{parse_policy, parse_policy_bytes, serialize_policy, ParseError, ParseErrorCode, SourceSpan};
pub use engine::{
    activate_role, authorized_roles, can_execute, check_access, clark_wilson_check,
    deactivate_role, effective_transactions, Decision, EngineError, RuleId, RuleOutcome,
    TraceEntry,
};
pub use model::{
    AccessEntry, AccessMode, ConstraintId, IdentifierError, ObjectBinding, ObjectId, Policy,
    PolicyMode, ProcId, Role, RoleId, Session, TranId, Transaction, UserId, Violation,
    ViolationCode,
};
pub use sod::{
    add_dynamic_constraint, add_static_constraint, check_dynamic, check_static, DynamicCheck,
    DynamicSodConstraint, SodError, StaticSodConstraint, StaticSodViolation,
};
