//! Differential tests: the engine and the naive oracle must return the
//! same verdict for every query, over fixtures and bulk random scenarios.

use rolekit_core::audit::AuditView;
use rolekit_core::dsl::parse_policy;
use rolekit_core::engine::{activate_role, can_execute};
use rolekit_core::model::{Policy, Session, UserId};
use rolekit_oracle::harness::assert_agreement;
use rolekit_oracle::{generate, oracle_can_execute};

const HOSPITAL: &str = "\
policy hospital mode bound

user alice
user bob
user dana
user heidi

object medicine-cabinet
object patient-record
object prescription-log
object vitals-sheet

transaction add-treatment-entry proc treatment-tp binds patient-record:read,append
transaction dispense-drug proc dispense-tp binds medicine-cabinet:read,write prescription-log:read
transaction enter-diagnosis proc enter-diagnosis-tp binds patient-record:read,write
transaction prescribe-medication proc prescribe-tp binds patient-record:read prescription-log:read,write
transaction review-chart proc review-tp binds patient-record:read
transaction take-vitals proc vitals-tp binds vitals-sheet:read,append

role Doctor allocates add-treatment-entry,enter-diagnosis,prescribe-medication contains Intern members alice
role Healer allocates take-vitals members heidi
role Intern allocates review-chart contains Healer members dana
role Pharmacist allocates dispense-drug members bob
";

fn hospital() -> Policy {
    parse_policy(HOSPITAL).expect("fixture parses")
}

/// Every (user, activation shape, transaction) combination agrees.
#[test]
fn hospital_fixture_agrees_on_every_pair() {
    let policy = hospital();
    let empty = AuditView::empty();
    let mut compared = 0usize;
    for user in &policy.users {
        let authorized: Vec<_> = policy
            .roles
            .iter()
            .filter(|(_, r)| r.members.contains(user))
            .map(|(id, _)| id.clone())
            .collect();

        let mut shapes = vec![Session::new("probe", user.clone())];
        for role in &authorized {
            let s = activate_role(&policy, &Session::new("probe", user.clone()), role).unwrap();
            shapes.push(s);
        }
        // All authorized roles at once, when there are several.
        if authorized.len() > 1 {
            let mut s = Session::new("probe", user.clone());
            for role in &authorized {
                s = activate_role(&policy, &s, role).unwrap();
            }
            shapes.push(s);
        }

        for session in &shapes {
            for tran in policy.transactions.keys() {
                let engine = can_execute(&policy, session, tran, None, &empty)
                    .expect("well-formed query")
                    .allowed;
                let oracle = oracle_can_execute(&policy, session, tran, None, empty.events());
                assert_eq!(
                    engine, oracle,
                    "divergence: user={user} active={:?} tran={tran}",
                    session.active_roles
                );
                compared += 1;
            }
        }
    }
    assert!(compared >= 4 * 6, "should cover all pairs, got {compared}");
}

/// A subject the policy does not know is denied by both sides.
#[test]
fn unknown_subject_is_denied_by_both() {
    let policy = hospital();
    let empty = AuditView::empty();
    let mut session = Session::new("probe", UserId::new("mallory").unwrap());
    session
        .active_roles
        .insert(rolekit_core::model::RoleId::new("Doctor").unwrap());
    for tran in policy.transactions.keys() {
        let engine = can_execute(&policy, &session, tran, None, &empty)
            .unwrap()
            .allowed;
        assert!(!engine);
        assert!(!oracle_can_execute(&policy, &session, tran, None, empty.events()));
    }
}

/// Bulk agreement across seeds; the thousand-scenario run lives in the
/// acceptance suite, this keeps the tight loop honest.
#[test]
fn engine_matches_oracle_across_seeds() {
    for seed in 0..250 {
        assert_agreement(&generate(seed));
    }
}

/// The generator is tuned so dynamic-SoD collisions actually occur: at
/// least one denial per ten seeds on average.
#[test]
fn dsod_collisions_are_frequent_enough() {
    let seeds = 100u64;
    let mut denials = 0usize;
    for seed in 0..seeds {
        denials += assert_agreement(&generate(seed)).dsod_denials();
    }
    assert!(
        denials * 10 >= seeds as usize,
        "only {denials} dynamic-SoD denials across {seeds} seeds"
    );
}
