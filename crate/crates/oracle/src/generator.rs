//! Seeded scenario generator. `generate(seed)` is a pure function: the
//! same seed always yields the same policy and trace, so failures found
//! in bulk runs reproduce from the seed alone.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use rolekit_core::admin::AdminOp;
use rolekit_core::model::{
    validate_policy, AccessMode, ConstraintId, ObjectId, Policy, ProcId, Role, RoleId, TranId,
    Transaction, UserId,
};
use rolekit_core::sod::{DynamicSodConstraint, StaticSodConstraint};

/// Upper bounds the generator stays within.
pub const MAX_USERS: usize = 10;
pub const MAX_ROLES: usize = 8;
pub const MAX_TRANS: usize = 20;
pub const MAX_OBJECTS: usize = 6;
pub const MAX_CONSTRAINTS: usize = 3;
pub const MAX_STEPS: usize = 200;

/// One step of a generated trace, interpreted by the test harness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Activate { user: UserId, role: RoleId },
    Deactivate { user: UserId, role: RoleId },
    Exec {
        user: UserId,
        tran: TranId,
        operand: Option<String>,
    },
    Admin(AdminOp),
}

/// A well-formed random policy plus a trace to replay against it.
#[derive(Debug, Clone)]
pub struct GeneratedScenario {
    pub seed: u64,
    pub policy: Policy,
    pub trace: Vec<Step>,
}

fn uid(i: usize) -> UserId {
    UserId::new(format!("user-{i}")).unwrap()
}
fn rid(i: usize) -> RoleId {
    RoleId::new(format!("role-{i}")).unwrap()
}
fn tid(i: usize) -> TranId {
    TranId::new(format!("tran-{i}")).unwrap()
}
fn oid(i: usize) -> ObjectId {
    ObjectId::new(format!("obj-{i}")).unwrap()
}

const MODES: [AccessMode; 4] = [
    AccessMode::Read,
    AccessMode::Write,
    AccessMode::Append,
    AccessMode::Execute,
];

/// Builds a scenario from `seed`. The policy passes validation by
/// construction; the trace may contain steps the engine rejects (that is
/// deliberate — rejections are outcomes worth comparing too).
pub fn generate(seed: u64) -> GeneratedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_users = rng.gen_range(2..=MAX_USERS);
    let n_roles = rng.gen_range(2..=MAX_ROLES);
    let n_trans = rng.gen_range(3..=MAX_TRANS);
    let n_objects = rng.gen_range(2..=MAX_OBJECTS);

    let mut policy = Policy::named("generated");
    for i in 0..n_users {
        policy.users.insert(uid(i));
    }
    for i in 0..n_objects {
        policy.objects.insert(oid(i));
    }

    for i in 0..n_trans {
        let mut tran = Transaction::new(tid(i), ProcId::new(format!("tp-{i}")).unwrap());
        let n_binds = rng.gen_range(1..=3.min(n_objects));
        let mut objects: Vec<usize> = (0..n_objects).collect();
        objects.shuffle(&mut rng);
        for &o in objects.iter().take(n_binds) {
            let n_modes = rng.gen_range(1..=MODES.len());
            let mut modes = MODES;
            modes.shuffle(&mut rng);
            tran = tran.bind(oid(o), modes.into_iter().take(n_modes));
        }
        policy.transactions.insert(tid(i), tran);
    }

    for i in 0..n_roles {
        policy.roles.insert(rid(i), Role::default());
    }
    // Every transaction lands somewhere; some roles pick up extras.
    for t in 0..n_trans {
        let r = rng.gen_range(0..n_roles);
        policy.roles.get_mut(&rid(r)).unwrap().transactions.insert(tid(t));
    }
    for r in 0..n_roles {
        if rng.gen_bool(0.4) {
            let t = rng.gen_range(0..n_trans);
            policy.roles.get_mut(&rid(r)).unwrap().transactions.insert(tid(t));
        }
    }
    // Containment edges only point from lower to higher index, which rules
    // out cycles without any checking.
    for parent in 0..n_roles {
        for child in (parent + 1)..n_roles {
            if rng.gen_bool(1.5 / n_roles as f64) {
                policy
                    .roles
                    .get_mut(&rid(parent))
                    .unwrap()
                    .contains
                    .insert(rid(child));
            }
        }
    }
    for u in 0..n_users {
        let n_memberships = rng.gen_range(1..=3.min(n_roles));
        let mut roles: Vec<usize> = (0..n_roles).collect();
        roles.shuffle(&mut rng);
        for &r in roles.iter().take(n_memberships) {
            policy.roles.get_mut(&rid(r)).unwrap().members.insert(uid(u));
        }
    }

    // Constraints: dynamic ones drive the interesting history checks, the
    // static one is sized to fit the memberships that already exist.
    let n_dynamic = rng.gen_range(0..=2);
    for c in 0..n_dynamic {
        let span = rng.gen_range(2..=3.min(n_trans));
        let mut trans: Vec<usize> = (0..n_trans).collect();
        trans.shuffle(&mut rng);
        let id = ConstraintId::new(format!("dsod-{c}")).unwrap();
        let constraint =
            DynamicSodConstraint::new(id.clone(), trans.into_iter().take(span).map(tid)).unwrap();
        policy.dynamic_sod.insert(id, constraint);
    }
    if rng.gen_bool(0.6) && n_roles >= 2 {
        let mut roles: Vec<usize> = (0..n_roles).collect();
        roles.shuffle(&mut rng);
        let pair: BTreeSet<RoleId> = roles.iter().take(2).map(|&r| rid(r)).collect();
        let worst = policy
            .users
            .iter()
            .map(|u| {
                pair.iter()
                    .filter(|r| policy.roles[*r].members.contains(u))
                    .count()
            })
            .max()
            .unwrap_or(0);
        let max = (worst as u32).max(1);
        let id = ConstraintId::new("ssod-0").unwrap();
        let constraint = StaticSodConstraint::with_max(id.clone(), pair, max).unwrap();
        policy.static_sod.insert(id, constraint);
    }

    // Restrictions: always a subset of what the user can already reach, so
    // the policy stays well-formed.
    for u in 0..n_users {
        if rng.gen_bool(0.25) {
            let ceiling: Vec<TranId> = policy
                .reachable_transactions_of_user(&uid(u))
                .into_iter()
                .collect();
            let kept: BTreeSet<TranId> = ceiling
                .into_iter()
                .filter(|_| rng.gen_bool(0.7))
                .collect();
            policy.restrictions.insert(uid(u), kept);
        }
    }

    debug_assert!(validate_policy(&policy).is_empty());

    let constrained: Vec<TranId> = policy
        .dynamic_sod
        .values()
        .flat_map(|c| c.transactions.iter().cloned())
        .collect();

    let n_steps = rng.gen_range(MAX_STEPS / 2..=MAX_STEPS);
    let mut trace = Vec::with_capacity(n_steps);
    let mut fresh = 0usize;
    for _ in 0..n_steps {
        let roll: f64 = rng.gen();
        let step = if roll < 0.25 {
            let u = rng.gen_range(0..n_users);
            // Mostly roles the user actually holds, so activations stick;
            // sometimes any role, so refusals get exercised.
            let role = if rng.gen_bool(0.8) {
                let held: Vec<RoleId> = policy
                    .roles
                    .iter()
                    .filter(|(_, r)| r.members.contains(&uid(u)))
                    .map(|(id, _)| id.clone())
                    .collect();
                held.choose(&mut rng).cloned().unwrap_or_else(|| rid(0))
            } else {
                rid(rng.gen_range(0..n_roles))
            };
            Step::Activate { user: uid(u), role }
        } else if roll < 0.80 {
            let u = rng.gen_range(0..n_users);
            let tran = if !constrained.is_empty() && rng.gen_bool(0.6) {
                constrained.choose(&mut rng).unwrap().clone()
            } else {
                tid(rng.gen_range(0..n_trans))
            };
            // Constrained transactions always get an operand, drawn from a
            // two-key pool so history collisions actually happen.
            let operand = if constrained.contains(&tran) {
                Some(format!("k-{}", rng.gen_range(0..2)))
            } else if rng.gen_bool(0.7) {
                Some(format!("op-{}", rng.gen_range(0..6)))
            } else {
                None
            };
            Step::Exec {
                user: uid(u),
                tran,
                operand,
            }
        } else if roll < 0.95 {
            let op = match rng.gen_range(0..8) {
                0 => AdminOp::Grant {
                    user: uid(rng.gen_range(0..n_users)),
                    role: rid(rng.gen_range(0..n_roles)),
                },
                1 => AdminOp::Revoke {
                    user: uid(rng.gen_range(0..n_users)),
                    role: rid(rng.gen_range(0..n_roles)),
                },
                2 => AdminOp::Allocate {
                    role: rid(rng.gen_range(0..n_roles)),
                    tran: tid(rng.gen_range(0..n_trans)),
                },
                3 => AdminOp::Deallocate {
                    role: rid(rng.gen_range(0..n_roles)),
                    tran: tid(rng.gen_range(0..n_trans)),
                },
                4 => AdminOp::Restrict {
                    user: uid(rng.gen_range(0..n_users)),
                    transactions: {
                        let n = rng.gen_range(0..=3);
                        (0..n).map(|_| tid(rng.gen_range(0..n_trans))).collect()
                    },
                },
                5 => AdminOp::ClearRestriction {
                    user: uid(rng.gen_range(0..n_users)),
                },
                6 => {
                    fresh += 1;
                    AdminOp::Onboard {
                        user: UserId::new(format!("user-x{fresh}")).unwrap(),
                    }
                }
                _ => AdminOp::Contain {
                    parent: rid(rng.gen_range(0..n_roles)),
                    child: rid(rng.gen_range(0..n_roles)),
                },
            };
            Step::Admin(op)
        } else {
            Step::Deactivate {
                user: uid(rng.gen_range(0..n_users)),
                role: rid(rng.gen_range(0..n_roles)),
            }
        };
        trace.push(step);
    }

    GeneratedScenario {
        seed,
        policy,
        trace,
    }
}
