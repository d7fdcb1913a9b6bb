//! Append-only audit log.
//!
//! Every administrative action, access decision, and executed transaction
//! becomes one line-delimited JSON record with a gapless ordinal and a
//! CRC-32 over the preceding bytes of its line. The log is the system of
//! record for dynamic separation of duty: the engine consults an immutable
//! [`AuditView`] snapshot, and [`AuditStore::record_execution`] serializes
//! check-then-record per operand key so two conflicting executions cannot
//! both slip past a constraint.
//!
//! On open, every line is re-verified. A torn final write (a crash mid
//! `write(2)`) is moved aside to `<path>.quarantine` and reported as a
//! warning; any other mismatch — a bad checksum mid-file, an ordinal gap —
//! is a hard error, because silently resuming such a log would launder
//! missing history.

use std::collections::HashMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::admin::AdminOp;
use crate::engine::{can_execute, Decision, EngineError, TraceEntry};
use crate::model::{Policy, RoleId, Session, TranId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Admin,
    Decision,
    Execution,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Admin => "admin",
            EventKind::Decision => "decision",
            EventKind::Execution => "execution",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "admin" => Ok(EventKind::Admin),
            "decision" => Ok(EventKind::Decision),
            "execution" => Ok(EventKind::Execution),
            other => Err(format!(
                "unknown event kind {other:?} (expected admin, decision, or execution)"
            )),
        }
    }
}

/// Body of a `decision` event: enough context to replay the verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionEventBody {
    pub tran: TranId,
    pub operand: Option<String>,
    pub active_roles: std::collections::BTreeSet<RoleId>,
    pub allowed: bool,
    pub trace: Vec<TraceEntry>,
}

/// Body of an `execution` event: an allowed request that was carried out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionEventBody {
    pub tran: TranId,
    pub operand: Option<String>,
    pub active_roles: std::collections::BTreeSet<RoleId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventBody {
    Admin(AdminOp),
    Decision(DecisionEventBody),
    Execution(ExecutionEventBody),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::Admin(_) => EventKind::Admin,
            EventBody::Decision(_) => EventKind::Decision,
            EventBody::Execution(_) => EventKind::Execution,
        }
    }
}

impl Serialize for EventBody {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            EventBody::Admin(op) => op.serialize(serializer),
            EventBody::Decision(body) => body.serialize(serializer),
            EventBody::Execution(body) => body.serialize(serializer),
        }
    }
}

/// One verified record of the log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEvent {
    /// 1-based, gapless position in the log.
    pub ordinal: u64,
    /// Who caused the event: the administrator for `admin` records, the
    /// session subject for `decision` and `execution` records.
    pub actor: UserId,
    /// RFC 3339 wall-clock time. Informational only — ordering and replay
    /// rest on ordinals, never on timestamps.
    pub ts: String,
    pub body: EventBody,
}

impl AuditEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    /// The transaction this event concerns, for decision/execution bodies.
    pub fn tran(&self) -> Option<&TranId> {
        match &self.body {
            EventBody::Decision(b) => Some(&b.tran),
            EventBody::Execution(b) => Some(&b.tran),
            EventBody::Admin(_) => None,
        }
    }

    /// The operand key this event concerns, for decision/execution bodies.
    pub fn operand(&self) -> Option<&str> {
        match &self.body {
            EventBody::Decision(b) => b.operand.as_deref(),
            EventBody::Execution(b) => b.operand.as_deref(),
            EventBody::Admin(_) => None,
        }
    }
}

impl Serialize for AuditEvent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("AuditEvent", 5)?;
        s.serialize_field("ord", &self.ordinal)?;
        s.serialize_field("kind", self.kind().as_str())?;
        s.serialize_field("actor", &self.actor)?;
        s.serialize_field("ts", &self.ts)?;
        s.serialize_field("body", &self.body)?;
        s.end()
    }
}

#[derive(Deserialize)]
struct WireEvent {
    ord: u64,
    kind: EventKind,
    actor: UserId,
    ts: String,
    body: serde_json::Value,
    #[serde(default)]
    #[allow(dead_code)]
    crc: u32,
}

/// Encodes one event as its on-disk line (without the trailing newline).
///
/// The line is the JSON record with the `crc` field appended last, so the
/// checksum covers every preceding byte of the line including the `"crc":`
/// key itself.
pub fn encode_line(event: &AuditEvent) -> String {
    let core = serde_json::to_string(event).expect("audit event serialization cannot fail");
    debug_assert!(core.ends_with('}'));
    let mut line = String::with_capacity(core.len() + 16);
    line.push_str(&core[..core.len() - 1]);
    line.push_str(",\"crc\":");
    let crc = crc32fast::hash(line.as_bytes());
    line.push_str(&crc.to_string());
    line.push('}');
    line
}

/// Verifies and decodes one line. Returns a human-readable reason on any
/// mismatch; the caller decides whether that means a torn tail or
/// corruption.
pub fn decode_line(raw: &[u8]) -> Result<AuditEvent, String> {
    let text = std::str::from_utf8(raw).map_err(|_| "line is not valid UTF-8".to_string())?;
    if !text.ends_with('}') {
        return Err("line does not end with '}'".to_string());
    }
    const CRC_KEY: &str = ",\"crc\":";
    let idx = text
        .rfind(CRC_KEY)
        .ok_or_else(|| "line has no crc field".to_string())?;
    let covered = &text[..idx + CRC_KEY.len()];
    let digits = &text[idx + CRC_KEY.len()..text.len() - 1];
    let stored: u32 = digits
        .parse()
        .map_err(|_| format!("crc field {digits:?} is not an unsigned integer"))?;
    let computed = crc32fast::hash(covered.as_bytes());
    if stored != computed {
        return Err(format!("crc mismatch: stored {stored}, computed {computed}"));
    }
    let wire: WireEvent =
        serde_json::from_str(text).map_err(|e| format!("record does not parse: {e}"))?;
    let body = match wire.kind {
        EventKind::Admin => EventBody::Admin(
            serde_json::from_value(wire.body).map_err(|e| format!("bad admin body: {e}"))?,
        ),
        EventKind::Decision => EventBody::Decision(
            serde_json::from_value(wire.body).map_err(|e| format!("bad decision body: {e}"))?,
        ),
        EventKind::Execution => EventBody::Execution(
            serde_json::from_value(wire.body).map_err(|e| format!("bad execution body: {e}"))?,
        ),
    };
    Ok(AuditEvent {
        ordinal: wire.ord,
        actor: wire.actor,
        ts: wire.ts,
        body,
    })
}

/// An immutable snapshot of the log, cheap to clone and safe to read while
/// other threads append. Decisions are made against a view, so a single
/// request sees one consistent history.
#[derive(Debug, Clone)]
pub struct AuditView {
    events: Arc<Vec<AuditEvent>>,
}

impl AuditView {
    pub fn empty() -> AuditView {
        AuditView {
            events: Arc::new(Vec::new()),
        }
    }

    /// Wraps a pre-built event list; used by tests and the replay path.
    pub fn from_events(events: Vec<AuditEvent>) -> AuditView {
        AuditView {
            events: Arc::new(events),
        }
    }

    /// All events in ordinal order.
    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    /// The highest ordinal in the snapshot, or 0 for an empty log.
    pub fn high_water(&self) -> u64 {
        self.events.last().map(|e| e.ordinal).unwrap_or(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("audit store {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("audit store {} is corrupt at line {line}: {reason}", path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// Raised by [`AuditStore::open`] when recovery changed the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenWarning {
    /// The final line(s) could not be verified and were moved to the
    /// quarantine file; the log resumes from the last verified record.
    TruncatedTail {
        first_bad_line: usize,
        quarantined_bytes: usize,
        reason: String,
    },
}

impl fmt::Display for OpenWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpenWarning::TruncatedTail {
                first_bad_line,
                quarantined_bytes,
                reason,
            } => write!(
                f,
                "OPEN_TRUNCATED: unverifiable tail from line {first_bad_line} \
                 ({quarantined_bytes} bytes) moved to quarantine: {reason}"
            ),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] AuditError),
}

#[derive(Debug)]
struct StoreInner {
    events: Vec<AuditEvent>,
    file: Option<std::fs::File>,
    path: Option<PathBuf>,
}

/// The append-only store. All mutation goes through [`AuditStore::append`]
/// (or the typed wrappers), which assigns the next ordinal, makes the line
/// durable, and only then exposes the event to new views.
#[derive(Debug)]
pub struct AuditStore {
    inner: Mutex<StoreInner>,
    operand_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AuditStore {
    /// A store with no file backing; ordinals and views behave identically.
    pub fn in_memory() -> AuditStore {
        AuditStore {
            inner: Mutex::new(StoreInner {
                events: Vec::new(),
                file: None,
                path: None,
            }),
            operand_locks: Mutex::new(HashMap::new()),
        }
    }

    /// Opens (creating if absent) a file-backed store, verifying every
    /// line's checksum and the gapless ordinal sequence.
    ///
    /// An unverifiable tail with nothing valid after it is moved to
    /// `<path>.quarantine` (appending, so earlier quarantined data is kept)
    /// and reported as a warning. Anything else unverifiable is a
    /// [`AuditError::Corrupt`] error.
    pub fn open(path: impl AsRef<Path>) -> Result<(AuditStore, Vec<OpenWarning>), AuditError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| AuditError::Io {
            path: path.clone(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(&io_err)?;
        let mut data = Vec::new();
        file.read_to_end(&mut data).map_err(&io_err)?;

        let mut lines: Vec<(usize, &[u8])> = Vec::new();
        let mut start = 0;
        for (i, byte) in data.iter().enumerate() {
            if *byte == b'\n' {
                lines.push((start, &data[start..i]));
                start = i + 1;
            }
        }
        let unterminated_tail = start < data.len();
        if unterminated_tail {
            lines.push((start, &data[start..]));
        }

        let mut events: Vec<AuditEvent> = Vec::with_capacity(lines.len());
        let mut warnings = Vec::new();
        let mut repair_newline = false;
        for (index, (offset, raw)) in lines.iter().enumerate() {
            match decode_line(raw) {
                Ok(event) => {
                    let expected = events.last().map(|e: &AuditEvent| e.ordinal).unwrap_or(0) + 1;
                    if event.ordinal != expected {
                        return Err(AuditError::Corrupt {
                            path: path.clone(),
                            line: index + 1,
                            reason: format!(
                                "ordinal {} where {} was expected",
                                event.ordinal, expected
                            ),
                        });
                    }
                    if index + 1 == lines.len() && unterminated_tail {
                        // Verified record that lost only its newline.
                        repair_newline = true;
                    }
                    events.push(event);
                }
                Err(reason) => {
                    let recoverable = lines[index + 1..]
                        .iter()
                        .all(|(_, later)| decode_line(later).is_err());
                    if !recoverable {
                        return Err(AuditError::Corrupt {
                            path: path.clone(),
                            line: index + 1,
                            reason,
                        });
                    }
                    let quarantined = &data[*offset..];
                    let mut qpath = path.clone().into_os_string();
                    qpath.push(".quarantine");
                    let mut qfile = OpenOptions::new()
                        .append(true)
                        .create(true)
                        .open(&qpath)
                        .map_err(&io_err)?;
                    qfile.write_all(quarantined).map_err(&io_err)?;
                    qfile.sync_data().map_err(&io_err)?;
                    file.set_len(*offset as u64).map_err(&io_err)?;
                    file.sync_data().map_err(&io_err)?;
                    warnings.push(OpenWarning::TruncatedTail {
                        first_bad_line: index + 1,
                        quarantined_bytes: quarantined.len(),
                        reason,
                    });
                    break;
                }
            }
        }
        if repair_newline {
            file.write_all(b"\n").map_err(&io_err)?;
            file.sync_data().map_err(&io_err)?;
        }

        Ok((
            AuditStore {
                inner: Mutex::new(StoreInner {
                    events,
                    file: Some(file),
                    path: Some(path),
                }),
                operand_locks: Mutex::new(HashMap::new()),
            },
            warnings,
        ))
    }

    /// The highest ordinal appended so far, or 0.
    pub fn high_water(&self) -> u64 {
        let inner = self.inner.lock().unwrap();
        inner.events.last().map(|e| e.ordinal).unwrap_or(0)
    }

    /// Takes an immutable snapshot of the current log.
    pub fn view(&self) -> AuditView {
        let inner = self.inner.lock().unwrap();
        AuditView {
            events: Arc::new(inner.events.clone()),
        }
    }

    /// Appends one event, assigning the next ordinal and the current
    /// timestamp. For file-backed stores the line is written and synced
    /// before the event becomes visible to new views; a failed write never
    /// surfaces a half-appended event.
    pub fn append(&self, actor: &UserId, body: EventBody) -> Result<u64, AuditError> {
        let mut guard = self.inner.lock().unwrap();
        let StoreInner { events, file, path } = &mut *guard;
        let ordinal = events.last().map(|e| e.ordinal).unwrap_or(0) + 1;
        let event = AuditEvent {
            ordinal,
            actor: actor.clone(),
            ts: now_rfc3339(),
            body,
        };
        if let Some(file) = file.as_mut() {
            let mut line = encode_line(&event).into_bytes();
            line.push(b'\n');
            let err_path = path.clone().unwrap_or_default();
            let io_err = |source| AuditError::Io {
                path: err_path.clone(),
                source,
            };
            file.write_all(&line).map_err(&io_err)?;
            file.sync_data().map_err(&io_err)?;
        }
        events.push(event);
        Ok(ordinal)
    }

    pub fn append_admin(&self, actor: &UserId, op: AdminOp) -> Result<u64, AuditError> {
        self.append(actor, EventBody::Admin(op))
    }

    /// Decides `can_execute` against a fresh snapshot and records the
    /// outcome: a `decision` event always, plus an `execution` event when
    /// allowed.
    ///
    /// When an operand key is supplied, the whole check-then-record is
    /// serialized per operand, so two racing executions on the same operand
    /// are ordered and the second one sees the first in its history.
    /// Requests from subjects that neither the policy nor the log has ever
    /// seen are refused outright rather than logged.
    pub fn record_execution(
        &self,
        policy: &Policy,
        session: &Session,
        tran: &TranId,
        operand: Option<&str>,
    ) -> Result<Decision, RecordError> {
        let operand_lock = operand.map(|key| self.operand_lock(key));
        let _guard = operand_lock.as_ref().map(|m| m.lock().unwrap());

        if !policy.users.contains(&session.subject) && !self.subject_traceable(&session.subject) {
            return Err(EngineError::UnknownSessionSubject(session.subject.clone()).into());
        }

        let view = self.view();
        let decision = can_execute(policy, session, tran, operand, &view)?;
        self.append(
            &session.subject,
            EventBody::Decision(DecisionEventBody {
                tran: tran.clone(),
                operand: operand.map(str::to_string),
                active_roles: session.active_roles.clone(),
                allowed: decision.allowed,
                trace: decision.rule_trace.clone(),
            }),
        )?;
        if decision.allowed {
            self.append(
                &session.subject,
                EventBody::Execution(ExecutionEventBody {
                    tran: tran.clone(),
                    operand: operand.map(str::to_string),
                    active_roles: session.active_roles.clone(),
                }),
            )?;
        }
        Ok(decision)
    }

    fn operand_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.operand_locks.lock().unwrap();
        locks.entry(key.to_string()).or_default().clone()
    }

    /// True when the log proves the subject existed at some point: they
    /// acted (any event) or an administrative action targeted them.
    fn subject_traceable(&self, subject: &UserId) -> bool {
        let inner = self.inner.lock().unwrap();
        inner.events.iter().any(|event| {
            if &event.actor == subject {
                return true;
            }
            match &event.body {
                EventBody::Admin(op) => op.target_user() == Some(subject),
                _ => false,
            }
        })
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Conjunctive event filter; `None` fields match everything. The `tran`
/// and `operand` filters match only decision and execution bodies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub kind: Option<EventKind>,
    pub actor: Option<UserId>,
    pub tran: Option<TranId>,
    pub operand: Option<String>,
    /// Inclusive lower ordinal bound.
    pub from_ordinal: Option<u64>,
    /// Inclusive upper ordinal bound.
    pub to_ordinal: Option<u64>,
}

impl EventFilter {
    pub fn matches(&self, event: &AuditEvent) -> bool {
        if let Some(kind) = self.kind {
            if event.kind() != kind {
                return false;
            }
        }
        if let Some(actor) = &self.actor {
            if &event.actor != actor {
                return false;
            }
        }
        if let Some(tran) = &self.tran {
            if event.tran() != Some(tran) {
                return false;
            }
        }
        if let Some(operand) = &self.operand {
            if event.operand() != Some(operand.as_str()) {
                return false;
            }
        }
        if let Some(from) = self.from_ordinal {
            if event.ordinal < from {
                return false;
            }
        }
        if let Some(to) = self.to_ordinal {
            if event.ordinal > to {
                return false;
            }
        }
        true
    }
}

/// Events of the snapshot matching the filter, in ordinal order. An
/// inverted ordinal range matches nothing.
pub fn query<'a>(view: &'a AuditView, filter: &EventFilter) -> Vec<&'a AuditEvent> {
    view.events().iter().filter(|e| filter.matches(e)).collect()
}

/// Builders for synthetic events in tests and harnesses.
pub mod test_support {
    use super::*;

    /// An execution event with a fixed timestamp and empty active-role set.
    pub fn execution_event(
        ordinal: u64,
        actor: &str,
        tran: &str,
        operand: Option<&str>,
    ) -> AuditEvent {
        AuditEvent {
            ordinal,
            actor: UserId::new(actor).expect("valid actor id"),
            ts: "1970-01-01T00:00:00.000Z".to_string(),
            body: EventBody::Execution(ExecutionEventBody {
                tran: TranId::new(tran).expect("valid transaction id"),
                operand: operand.map(str::to_string),
                active_roles: Default::default(),
            }),
        }
    }
}
