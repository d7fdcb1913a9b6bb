//! Python bindings for the rolekit core: policy parsing, the decision
//! engine, audited administration, and the append-only audit store.
//!
//! Decisions and audit events cross the boundary as plain dicts so Python
//! callers can treat them as data; policies, sessions, stores, and the
//! administrator are stateful handles.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use rolekit_core::admin::{self, AdminApplyError, AdminOp, Administrator as CoreAdministrator};
use rolekit_core::audit::{
    query as audit_query, AuditError, AuditStore as CoreStore, AuditView, EventFilter, EventKind,
    RecordError,
};
use rolekit_core::dsl::{parse_policy as core_parse, serialize_policy};
use rolekit_core::engine::{self, Decision, EngineError};
use rolekit_core::model::{
    AccessMode, ConstraintId, ObjectId, Policy as CorePolicy, PolicyMode, RoleId,
    Session as CoreSession, TranId, UserId,
};

// ------------------------------------------------------------- conversions

fn value_error(message: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(message.to_string())
}

fn engine_err(e: EngineError) -> PyErr {
    value_error(e)
}

fn store_err(e: AuditError) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn apply_err(e: AdminApplyError) -> PyErr {
    match e {
        AdminApplyError::Admin(inner) => value_error(format!("refused: {inner}")),
        AdminApplyError::Store(inner) => store_err(inner),
    }
}

fn user_id(s: &str) -> PyResult<UserId> {
    UserId::new(s).map_err(|e| value_error(format!("bad user {s:?}: {e}")))
}
fn role_id(s: &str) -> PyResult<RoleId> {
    RoleId::new(s).map_err(|e| value_error(format!("bad role {s:?}: {e}")))
}
fn tran_id(s: &str) -> PyResult<TranId> {
    TranId::new(s).map_err(|e| value_error(format!("bad transaction {s:?}: {e}")))
}
fn object_id(s: &str) -> PyResult<ObjectId> {
    ObjectId::new(s).map_err(|e| value_error(format!("bad object {s:?}: {e}")))
}
fn constraint_id(s: &str) -> PyResult<ConstraintId> {
    ConstraintId::new(s).map_err(|e| value_error(format!("bad constraint id {s:?}: {e}")))
}
fn access_mode(s: &str) -> PyResult<AccessMode> {
    match s {
        "read" => Ok(AccessMode::Read),
        "write" => Ok(AccessMode::Write),
        "append" => Ok(AccessMode::Append),
        "execute" => Ok(AccessMode::Execute),
        other => Err(value_error(format!(
            "bad access mode {other:?} (expected read/write/append/execute)"
        ))),
    }
}

/// serde_json::Value → Python object, the bridge for decision dicts and
/// audit events.
fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize_to_py<'py, T: serde::Serialize + ?Sized>(
    py: Python<'py>,
    value: &T,
) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(value_error)?;
    json_to_py(py, &json)
}

fn decision_to_py<'py>(py: Python<'py>, decision: &Decision) -> PyResult<Bound<'py, PyAny>> {
    serialize_to_py(py, decision)
}

fn ids<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|i| i.as_ref().to_string()).collect()
}

// ------------------------------------------------------------------ Policy

/// An immutable policy snapshot. Mutation happens through
/// [`Administrator`], which returns fresh snapshots.
#[pyclass(name = "Policy", skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    inner: CorePolicy,
}

#[pymethods]
impl PyPolicy {
    /// An empty bound-transaction policy with the given name.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        CorePolicy::try_named(name)
            .map(|inner| PyPolicy { inner })
            .map_err(|e| value_error(format!("bad policy name {name:?}: {e}")))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// "bound" or "rule4".
    #[getter]
    fn mode(&self) -> &'static str {
        match self.inner.mode {
            PolicyMode::BoundTransaction => "bound",
            PolicyMode::Rule4 => "rule4",
        }
    }

    fn users(&self) -> Vec<String> {
        ids(self.inner.users.iter().map(|u| u.as_str()))
    }

    fn roles(&self) -> Vec<String> {
        ids(self.inner.roles.keys().map(|r| r.as_str()))
    }

    fn transactions(&self) -> Vec<String> {
        ids(self.inner.transactions.keys().map(|t| t.as_str()))
    }

    fn objects(&self) -> Vec<String> {
        ids(self.inner.objects.iter().map(|o| o.as_str()))
    }

    /// Roles the user is a direct member of.
    fn authorized_roles(&self, user: &str) -> PyResult<Vec<String>> {
        let set = engine::authorized_roles(&self.inner, &user_id(user)?).map_err(engine_err)?;
        Ok(ids(set.iter().map(|r| r.as_str())))
    }

    /// Transactions reachable from the role through containment.
    fn effective_transactions(&self, role: &str) -> PyResult<Vec<String>> {
        let set = engine::effective_transactions(&self.inner, &role_id(role)?).map_err(engine_err)?;
        Ok(ids(set.iter().map(|t| t.as_str())))
    }

    /// Well-formedness findings as display strings; empty means valid.
    fn validate(&self) -> Vec<String> {
        rolekit_core::model::validate_policy(&self.inner)
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    /// The canonical text form: parseable, deterministic, diff-stable.
    fn canonical(&self) -> PyResult<String> {
        serialize_policy(&self.inner).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Policy(name={:?}, users={}, roles={}, transactions={})",
            self.inner.name,
            self.inner.users.len(),
            self.inner.roles.len(),
            self.inner.transactions.len()
        )
    }
}

/// Parse policy text; raises ValueError listing every diagnostic.
#[pyfunction]
fn parse_policy(text: &str) -> PyResult<PyPolicy> {
    core_parse(text)
        .map(|inner| PyPolicy { inner })
        .map_err(|errors| {
            let joined = errors
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("\n");
            value_error(joined)
        })
}

// ----------------------------------------------------------------- Session

/// A subject plus its active role set. Activation consults the policy;
/// deactivation is unconditional.
#[pyclass(name = "Session", skip_from_py_object)]
#[derive(Clone)]
struct PySession {
    inner: CoreSession,
}

#[pymethods]
impl PySession {
    #[new]
    fn new(session_id: &str, user: &str) -> PyResult<Self> {
        Ok(PySession {
            inner: CoreSession::new(session_id, user_id(user)?),
        })
    }

    #[getter]
    fn session_id(&self) -> String {
        self.inner.session_id.clone()
    }

    #[getter]
    fn subject(&self) -> String {
        self.inner.subject.as_str().to_string()
    }

    #[getter]
    fn active_roles(&self) -> Vec<String> {
        ids(self.inner.active_roles.iter().map(|r| r.as_str()))
    }

    /// Activate a role in place; raises ValueError if the policy refuses.
    fn activate(&mut self, policy: &PyPolicy, role: &str) -> PyResult<()> {
        self.inner =
            engine::activate_role(&policy.inner, &self.inner, &role_id(role)?).map_err(engine_err)?;
        Ok(())
    }

    fn deactivate(&mut self, role: &str) -> PyResult<()> {
        self.inner = engine::deactivate_role(&self.inner, &role_id(role)?);
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Session(id={:?}, subject={:?}, active_roles={:?})",
            self.inner.session_id,
            self.inner.subject.as_str(),
            self.active_roles()
        )
    }
}

// -------------------------------------------------------------- AuditStore

/// Append-only audit log handle; shared by the engine (history), the
/// administrator (event trail), and reports.
#[pyclass(name = "AuditStore")]
struct PyAuditStore {
    inner: Arc<CoreStore>,
    warnings: Vec<String>,
}

#[pymethods]
impl PyAuditStore {
    /// A store with no file backing.
    #[staticmethod]
    fn in_memory() -> PyAuditStore {
        PyAuditStore {
            inner: Arc::new(CoreStore::in_memory()),
            warnings: Vec::new(),
        }
    }

    /// Open (or create) a log file. Recovery warnings — e.g. a quarantined
    /// torn tail — are kept on `.warnings`.
    #[staticmethod]
    fn open(path: &str) -> PyResult<PyAuditStore> {
        let (store, warnings) = CoreStore::open(path).map_err(store_err)?;
        Ok(PyAuditStore {
            inner: Arc::new(store),
            warnings: warnings.iter().map(|w| w.to_string()).collect(),
        })
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }

    /// Highest ordinal in the log; 0 when empty.
    #[getter]
    fn high_water(&self) -> u64 {
        self.inner.high_water()
    }

    /// Decide and record in one serialized step: always appends the
    /// decision event, and an execution event iff allowed. Returns the
    /// decision dict.
    #[pyo3(signature = (policy, session, tran, operand=None))]
    fn record_execution<'py>(
        &self,
        py: Python<'py>,
        policy: &PyPolicy,
        session: &PySession,
        tran: &str,
        operand: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let decision = self
            .inner
            .record_execution(&policy.inner, &session.inner, &tran_id(tran)?, operand)
            .map_err(|e| match e {
                RecordError::Engine(inner) => engine_err(inner),
                RecordError::Store(inner) => store_err(inner),
            })?;
        decision_to_py(py, &decision)
    }

    /// All events as dicts, ascending ordinal.
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize_to_py(py, self.inner.view().events())
    }

    /// Filtered events; every supplied argument must match.
    #[pyo3(signature = (kind=None, actor=None, tran=None, operand=None, from_ordinal=None, to_ordinal=None))]
    #[allow(clippy::too_many_arguments)]
    fn query<'py>(
        &self,
        py: Python<'py>,
        kind: Option<&str>,
        actor: Option<&str>,
        tran: Option<&str>,
        operand: Option<&str>,
        from_ordinal: Option<u64>,
        to_ordinal: Option<u64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let filter = EventFilter {
            kind: kind
                .map(|k| k.parse::<EventKind>().map_err(value_error))
                .transpose()?,
            actor: actor.map(user_id).transpose()?,
            tran: tran.map(tran_id).transpose()?,
            operand: operand.map(str::to_string),
            from_ordinal,
            to_ordinal,
        };
        let view = self.inner.view();
        let events = audit_query(&view, &filter);
        serialize_to_py(py, &events)
    }

    fn __repr__(&self) -> String {
        format!("AuditStore(high_water={})", self.inner.high_water())
    }
}

// ------------------------------------------------------------------ engine

/// Evaluate the execution rules without recording anything. `history`
/// supplies the audit view consulted by dynamic separation of duty.
#[pyfunction]
#[pyo3(signature = (policy, session, tran, operand=None, history=None))]
fn can_execute<'py>(
    py: Python<'py>,
    policy: &PyPolicy,
    session: &PySession,
    tran: &str,
    operand: Option<&str>,
    history: Option<&PyAuditStore>,
) -> PyResult<Bound<'py, PyAny>> {
    let view = history.map(|s| s.inner.view()).unwrap_or_else(AuditView::empty);
    let decision = engine::can_execute(
        &policy.inner,
        &session.inner,
        &tran_id(tran)?,
        operand,
        &view,
    )
    .map_err(engine_err)?;
    decision_to_py(py, &decision)
}

/// The access-table check for rule-4 policies.
#[pyfunction]
fn check_access<'py>(
    py: Python<'py>,
    policy: &PyPolicy,
    session: &PySession,
    tran: &str,
    object: &str,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let decision = engine::check_access(
        &policy.inner,
        &session.inner,
        &tran_id(tran)?,
        &object_id(object)?,
        access_mode(mode)?,
    )
    .map_err(engine_err)?;
    decision_to_py(py, &decision)
}

/// The integrity-triple check: requires exactly one role per user, which
/// is auto-activated.
#[pyfunction]
fn clark_wilson_check<'py>(
    py: Python<'py>,
    policy: &PyPolicy,
    user: &str,
    tran: &str,
    object: &str,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let decision = engine::clark_wilson_check(
        &policy.inner,
        &user_id(user)?,
        &tran_id(tran)?,
        &object_id(object)?,
        access_mode(mode)?,
    )
    .map_err(engine_err)?;
    decision_to_py(py, &decision)
}

// ----------------------------------------------------------- Administrator

/// The audited mutation surface. Every accepted operation is appended to
/// the store before the new policy snapshot becomes visible; refusals
/// raise ValueError and change nothing.
#[pyclass(name = "Administrator")]
struct PyAdministrator {
    policy: CorePolicy,
    store: Arc<CoreStore>,
    actor: UserId,
}

impl PyAdministrator {
    fn run(&mut self, op: AdminOp) -> PyResult<u64> {
        let mut admin =
            CoreAdministrator::new(self.policy.clone(), &self.store, self.actor.clone());
        let ordinal = admin.apply(op).map_err(apply_err)?;
        self.policy = admin.into_policy();
        Ok(ordinal)
    }
}

#[pymethods]
impl PyAdministrator {
    #[new]
    #[pyo3(signature = (policy, store, actor="root"))]
    fn new(policy: &PyPolicy, store: &PyAuditStore, actor: &str) -> PyResult<Self> {
        Ok(PyAdministrator {
            policy: policy.inner.clone(),
            store: Arc::clone(&store.inner),
            actor: user_id(actor)?,
        })
    }

    /// The current policy snapshot (a copy; safe to hold across edits).
    #[getter]
    fn policy(&self) -> PyPolicy {
        PyPolicy {
            inner: self.policy.clone(),
        }
    }

    fn grant(&mut self, user: &str, role: &str) -> PyResult<u64> {
        self.run(AdminOp::Grant {
            user: user_id(user)?,
            role: role_id(role)?,
        })
    }

    fn revoke(&mut self, user: &str, role: &str) -> PyResult<u64> {
        self.run(AdminOp::Revoke {
            user: user_id(user)?,
            role: role_id(role)?,
        })
    }

    fn allocate(&mut self, role: &str, tran: &str) -> PyResult<u64> {
        self.run(AdminOp::Allocate {
            role: role_id(role)?,
            tran: tran_id(tran)?,
        })
    }

    fn deallocate(&mut self, role: &str, tran: &str) -> PyResult<u64> {
        self.run(AdminOp::Deallocate {
            role: role_id(role)?,
            tran: tran_id(tran)?,
        })
    }

    fn contain(&mut self, parent: &str, child: &str) -> PyResult<u64> {
        self.run(AdminOp::Contain {
            parent: role_id(parent)?,
            child: role_id(child)?,
        })
    }

    fn uncontain(&mut self, parent: &str, child: &str) -> PyResult<u64> {
        self.run(AdminOp::Uncontain {
            parent: role_id(parent)?,
            child: role_id(child)?,
        })
    }

    fn onboard(&mut self, user: &str) -> PyResult<u64> {
        self.run(AdminOp::Onboard {
            user: user_id(user)?,
        })
    }

    fn offboard(&mut self, user: &str) -> PyResult<u64> {
        self.run(AdminOp::Offboard {
            user: user_id(user)?,
        })
    }

    /// Narrow the user to exactly these transactions.
    fn restrict(&mut self, user: &str, transactions: Vec<String>) -> PyResult<u64> {
        self.run(AdminOp::Restrict {
            user: user_id(user)?,
            transactions: transactions
                .iter()
                .map(|t| tran_id(t))
                .collect::<PyResult<_>>()?,
        })
    }

    fn clear_restriction(&mut self, user: &str) -> PyResult<u64> {
        self.run(AdminOp::ClearRestriction {
            user: user_id(user)?,
        })
    }

    /// Replace the user's memberships (and drop any restriction) to match
    /// a new job function. Returns the ordinals of the audited steps.
    fn change_function(&mut self, user: &str, roles: Vec<String>) -> PyResult<Vec<u64>> {
        let roles: Vec<RoleId> = roles.iter().map(|r| role_id(r)).collect::<PyResult<_>>()?;
        let mut admin =
            CoreAdministrator::new(self.policy.clone(), &self.store, self.actor.clone());
        let ordinals = admin
            .change_function(&user_id(user)?, &roles)
            .map_err(apply_err)?;
        self.policy = admin.into_policy();
        Ok(ordinals)
    }

    #[pyo3(signature = (id, roles, max=1))]
    fn add_static_sod(&mut self, id: &str, roles: Vec<String>, max: u32) -> PyResult<u64> {
        self.run(AdminOp::AddStaticSod {
            id: constraint_id(id)?,
            roles: roles.iter().map(|r| role_id(r)).collect::<PyResult<_>>()?,
            max,
        })
    }

    fn add_dynamic_sod(&mut self, id: &str, transactions: Vec<String>) -> PyResult<u64> {
        self.run(AdminOp::AddDynamicSod {
            id: constraint_id(id)?,
            transactions: transactions
                .iter()
                .map(|t| tran_id(t))
                .collect::<PyResult<_>>()?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Administrator(actor={:?}, policy={:?})",
            self.actor.as_str(),
            self.policy.name
        )
    }
}

// ----------------------------------------------------------------- reports

/// Granted-versus-exercised transactions per user, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (policy, store, from_ordinal=None, to_ordinal=None))]
fn least_privilege_report<'py>(
    py: Python<'py>,
    policy: &PyPolicy,
    store: &PyAuditStore,
    from_ordinal: Option<u64>,
    to_ordinal: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let view = store.inner.view();
    let rows = admin::least_privilege_report(&policy.inner, &view, from_ordinal, to_ordinal);
    serialize_to_py(py, &rows)
}

// ------------------------------------------------------------------ module

#[pymodule]
fn rolekit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolicy>()?;
    m.add_class::<PySession>()?;
    m.add_class::<PyAuditStore>()?;
    m.add_class::<PyAdministrator>()?;
    m.add_function(wrap_pyfunction!(parse_policy, m)?)?;
    m.add_function(wrap_pyfunction!(can_execute, m)?)?;
    m.add_function(wrap_pyfunction!(check_access, m)?)?;
    m.add_function(wrap_pyfunction!(clark_wilson_check, m)?)?;
    m.add_function(wrap_pyfunction!(least_privilege_report, m)?)?;
    m.add("__all__", vec![
        "Policy",
        "Session",
        "AuditStore",
        "Administrator",
        "parse_policy",
        "can_execute",
        "check_access",
        "clark_wilson_check",
        "least_privilege_report",
    ])?;
    Ok(())
}
