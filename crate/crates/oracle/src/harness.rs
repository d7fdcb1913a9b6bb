//! Replays generated scenarios against the real engine and audit store
//! while running the naive oracle beside it. The two verdict streams must
//! agree on every step; a divergence panics with the seed and step index
//! so the failure reproduces immediately.

use std::collections::BTreeMap;

use rolekit_core::admin::Administrator;
use rolekit_core::audit::AuditStore;
use rolekit_core::engine::{activate_role, deactivate_role, RuleId, RuleOutcome};
use rolekit_core::model::{Policy, Session, TranId, UserId};

use crate::generator::{GeneratedScenario, Step};
use crate::oracle_can_execute;

/// The verdict pair for one `Exec` step of a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub step_index: usize,
    pub user: UserId,
    pub tran: TranId,
    pub operand: Option<String>,
    pub engine_allowed: bool,
    pub oracle_allowed: bool,
    /// True when the engine denial came from the dynamic SoD rule.
    pub dsod_denial: bool,
}

/// Everything a replay produced, for assertions and golden files.
#[derive(Debug)]
pub struct Replay {
    pub outcomes: Vec<StepOutcome>,
    pub final_policy: Policy,
}

impl Replay {
    pub fn divergences(&self) -> Vec<&StepOutcome> {
        self.outcomes
            .iter()
            .filter(|o| o.engine_allowed != o.oracle_allowed)
            .collect()
    }

    pub fn dsod_denials(&self) -> usize {
        self.outcomes.iter().filter(|o| o.dsod_denial).count()
    }

    /// One line per exec step; the golden-file format.
    pub fn verdict_lines(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                o.step_index,
                o.user,
                o.tran,
                o.operand.as_deref().unwrap_or("-"),
                if o.engine_allowed { "allow" } else { "deny" },
            ));
        }
        out
    }
}

/// Replays `scenario` against an in-memory audit store.
pub fn replay(scenario: &GeneratedScenario) -> Replay {
    let store = AuditStore::in_memory();
    replay_with_store(scenario, &store)
}

/// Replays `scenario` against `store`, comparing engine and oracle on
/// every execution step. Administrative steps the policy rejects are
/// skipped, exactly as a real administrator's failed request would be.
pub fn replay_with_store(scenario: &GeneratedScenario, store: &AuditStore) -> Replay {
    let actor = UserId::new("root").unwrap();
    let mut admin = Administrator::new(scenario.policy.clone(), store, actor);
    let mut sessions: BTreeMap<UserId, Session> = BTreeMap::new();
    let mut outcomes = Vec::new();

    for (step_index, step) in scenario.trace.iter().enumerate() {
        match step {
            Step::Activate { user, role } => {
                let session = sessions
                    .entry(user.clone())
                    .or_insert_with(|| Session::new(format!("sess-{user}"), user.clone()));
                if let Ok(next) = activate_role(admin.policy(), session, role) {
                    *session = next;
                }
            }
            Step::Deactivate { user, role } => {
                if let Some(session) = sessions.get_mut(user) {
                    *session = deactivate_role(session, role);
                }
            }
            Step::Exec {
                user,
                tran,
                operand,
            } => {
                let session = sessions
                    .entry(user.clone())
                    .or_insert_with(|| Session::new(format!("sess-{user}"), user.clone()));
                let before = store.view();
                let oracle_allowed = oracle_can_execute(
                    admin.policy(),
                    session,
                    tran,
                    operand.as_deref(),
                    before.events(),
                );
                let decision = store
                    .record_execution(admin.policy(), session, tran, operand.as_deref())
                    .unwrap_or_else(|e| {
                        panic!(
                            "seed {} step {step_index}: engine refused the query: {e}",
                            scenario.seed
                        )
                    });
                let dsod_denial = decision
                    .first_failure()
                    .is_some_and(|t| t.rule == RuleId::Dsod && t.outcome == RuleOutcome::Fail);
                outcomes.push(StepOutcome {
                    step_index,
                    user: user.clone(),
                    tran: tran.clone(),
                    operand: operand.clone(),
                    engine_allowed: decision.allowed,
                    oracle_allowed,
                    dsod_denial,
                });
            }
            Step::Admin(op) => {
                let _ = admin.apply(op.clone());
            }
        }
    }

    Replay {
        outcomes,
        final_policy: admin.into_policy(),
    }
}

/// Replays and asserts agreement, panicking with a reproducible report.
pub fn assert_agreement(scenario: &GeneratedScenario) -> Replay {
    let replay = replay(scenario);
    let diverged = replay.divergences();
    assert!(
        diverged.is_empty(),
        "seed {} diverged at steps {:?}",
        scenario.seed,
        diverged
            .iter()
            .map(|o| (o.step_index, o.engine_allowed, o.oracle_allowed))
            .collect::<Vec<_>>()
    );
    replay
}
