use std::collections::HashMap;

use forage_core::engine::{Event, EventRecord, Trial, TrialConfig};
use forage_core::layout::Distribution;
use forage_core::policy::{
    DecisionEvent, DecisionSource, EventType, PolicyKind, PolicyProvider, PolicyReply, TacticalAction,
    TacticalPolicy,
};
use forage_core::{run_trial, run_trial_with, Error, FsmState, Vec2};

const DISTS: [Distribution; 3] = [Distribution::Clustered, Distribution::Powerlaw, Distribution::Random];

fn config(i: u64, duration: f64) -> TrialConfig {
    let team = [4, 6, 8, 10][(i % 4) as usize];
    let (side, count) = [(6.0, 64), (8.0, 128), (10.0, 256)][(i / 4 % 3) as usize];
    let dist = DISTS[(i % 3) as usize];
    let policy = [PolicyKind::Cascade, PolicyKind::Scripted, PolicyKind::Uninformed][(i / 3 % 3) as usize];
    let mut cfg = TrialConfig::new(team, side, dist, count, policy, 1000 + i);
    cfg.duration_secs = duration;
    cfg
}

fn for_each_step(cfg: TrialConfig, mut check: impl FnMut(&Trial)) -> Trial {
    let mut trial = Trial::new(cfg).unwrap();
    check(&trial);
    while !trial.is_finished() {
        trial.step().unwrap();
        check(&trial);
    }
    trial
}

#[test]
fn resources_are_conserved_every_step() {
    for i in 0..50 {
        let cfg = config(i, 300.0);
        let trial = for_each_step(cfg, |t| {
            let env = t.env();
            let carried = t.robots().iter().filter(|r| r.carrying).count();
            assert_eq!(env.deposits + carried + env.field.remaining(), env.field.len());
        });
        assert!(trial.env().deposits > 0 || trial.config().team_size < 6, "trial {i} collected nothing");
    }
}

#[test]
fn same_seed_gives_identical_logs() {
    for i in 0..20 {
        let mut cfg = config(i, 240.0);
        cfg.policy = if i % 2 == 0 { PolicyKind::Cascade } else { PolicyKind::Scripted };
        let a = run_trial(cfg.clone()).unwrap();
        let b = run_trial(cfg).unwrap();
        assert_eq!(a.event_log_jsonl(), b.event_log_jsonl());
        assert!(!a.event_log.is_empty());
    }
}

#[test]
fn different_behavior_seed_changes_log() {
    let cfg = config(0, 120.0);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(
        run_trial(cfg).unwrap().event_log_jsonl(),
        run_trial(other).unwrap().event_log_jsonl()
    );
}

#[test]
fn zero_duration_is_empty() {
    let cfg = config(3, 0.0);
    let r = run_trial(cfg).unwrap();
    assert_eq!(r.deposits, 0);
    assert_eq!(r.steps, 0);
    assert!(r.event_log.is_empty());
    assert_eq!(r.remaining_resources, r.initial_resources);
}

#[test]
fn robots_never_teleport() {
    for i in 0..12 {
        let cfg = config(i, 300.0);
        let max_step = cfg.limits.linear_speed * cfg.limits.dt + 1e-9;
        let mut last: Vec<Vec2> = Vec::new();
        for_each_step(cfg, |t| {
            let now: Vec<Vec2> = t.robots().iter().map(|r| r.pose.position).collect();
            for (a, b) in last.iter().zip(&now) {
                assert!(a.dist(*b) <= max_step, "moved {} in one step", a.dist(*b));
            }
            for r in t.robots() {
                assert!(t.env().arena.contains(r.pose.position));
            }
            last = now;
        });
    }
}

#[test]
fn yield_keeps_robots_apart() {
    for seed in 0..100u64 {
        let mut cfg = TrialConfig::new(
            [6, 8, 10][(seed % 3) as usize],
            6.0,
            DISTS[(seed % 3) as usize],
            64,
            PolicyKind::Cascade,
            seed,
        );
        cfg.duration_secs = 120.0;
        let floor = cfg.limits.min_separation() - 1e-9;
        for_each_step(cfg, |t| {
            let ps: Vec<Vec2> = t.robots().iter().map(|r| r.pose.position).collect();
            for i in 0..ps.len() {
                for j in (i + 1)..ps.len() {
                    assert!(ps[i].dist(ps[j]) >= floor, "seed {seed}: {} apart", ps[i].dist(ps[j]));
                }
            }
        });
    }
}

#[test]
fn deposits_match_deposit_events() {
    for i in 0..12 {
        let r = run_trial(config(i, 600.0)).unwrap();
        assert_eq!(r.deposits, r.count_kind("deposit"));
        assert_eq!(r.deposits + r.carrying_at_end + r.remaining_resources, r.initial_resources);
        let last_total = r.event_log.iter().rev().find_map(|e| match e.event {
            Event::Deposit { total } => Some(total),
            _ => None,
        });
        assert_eq!(last_total.unwrap_or(0), r.deposits);
    }
}

fn by_robot(log: &[EventRecord]) -> HashMap<&str, Vec<&EventRecord>> {
    let mut out: HashMap<&str, Vec<&EventRecord>> = HashMap::new();
    for e in log {
        out.entry(e.robot.as_str()).or_default().push(e);
    }
    out
}

#[test]
fn post_deposit_follows_its_deposit() {
    for i in 0..12 {
        let r = run_trial(config(i, 600.0)).unwrap();
        let mut seen = 0;
        for events in by_robot(&r.event_log).values() {
            for (k, e) in events.iter().enumerate() {
                let Some(d) = e.decision() else { continue };
                if d.event.event_type != EventType::PostDepositDecision {
                    continue;
                }
                seen += 1;
                let prior = events[..k]
                    .iter()
                    .rev()
                    .find(|p| matches!(p.event, Event::Deposit { .. } | Event::Decision(_)))
                    .expect("a post-deposit decision without any deposit");
                assert!(matches!(prior.event, Event::Deposit { .. }));
                assert_eq!(prior.t, e.t);
                assert_eq!(d.event.current_state, FsmState::ReturningWithResource);
            }
        }
        assert_eq!(seen, r.deposits);
    }
}

#[test]
fn give_up_mechanisms_are_exclusive() {
    let mut cascade_give_ups = 0;
    for i in 0..8 {
        let mut cfg = config(i, 900.0);
        cfg.policy = PolicyKind::Cascade;
        let r = run_trial(cfg).unwrap();
        for e in &r.event_log {
            if let Some(d) = e.decision() {
                assert_ne!(d.event.event_type, EventType::SearchStarvation);
            }
            if let Event::Transition { from, to: FsmState::ReturningEmpty } = e.event {
                assert!(from.is_searching());
                cascade_give_ups += 1;
            }
        }

        let mut cfg = config(i, 900.0);
        cfg.policy = PolicyKind::Scripted;
        let r = run_trial(cfg).unwrap();
        for events in by_robot(&r.event_log).values() {
            for (k, e) in events.iter().enumerate() {
                if let Event::Transition { to: FsmState::ReturningEmpty, .. } = e.event {
                    let d = events[k - 1].decision().expect("give-up without a starvation decision");
                    assert_eq!(d.event.event_type, EventType::SearchStarvation);
                    assert_eq!(d.action, TacticalAction::ReturnForInfo);
                }
            }
        }
    }
    assert!(cascade_give_ups > 0);
}

#[test]
fn travel_targets_are_exact() {
    for i in 0..12 {
        let mut cfg = config(i, 900.0);
        cfg.policy = if i % 2 == 0 { PolicyKind::Cascade } else { PolicyKind::Scripted };
        let mut site_trips = 0;
        let mut last_states: Vec<FsmState> = Vec::new();
        for_each_step(cfg, |t| {
            let laid: Vec<Vec2> = t
                .env()
                .log
                .iter()
                .filter_map(|e| match e.event {
                    Event::PheromoneLaid { location } => Some(location),
                    _ => None,
                })
                .collect();
            for (k, r) in t.robots().iter().enumerate() {
                let entered = last_states.get(k) != Some(&r.state);
                match r.state {
                    FsmState::TravelingToSite => {
                        assert_eq!(Some(r.target()), r.memory.last_pickup);
                        site_trips += entered as usize;
                    }
                    FsmState::TravelingToPheromone if entered => {
                        assert!(laid.contains(&r.target()));
                        let live = t.env().pheromones.waypoints().iter().any(|w| w.location == r.target());
                        assert!(live);
                    }
                    FsmState::ReturningEmpty => assert!(!r.memory.fidelity),
                    _ => {}
                }
            }
            last_states = t.robots().iter().map(|r| r.state).collect();
        });
        assert!(site_trips > 0, "trial {i} never used site fidelity");
    }
}

/// Always keeps searching; counts the events it saw.
struct KeepSearching;

impl TacticalPolicy for KeepSearching {
    fn uses_starvation(&self) -> bool {
        true
    }

    fn decide(&mut self, event: &DecisionEvent) -> Result<PolicyReply, Error> {
        let action = if event.event_type == EventType::SearchStarvation {
            TacticalAction::ContinueSearch
        } else {
            TacticalAction::UninformedSearch
        };
        Ok(PolicyReply::action(action, None, DecisionSource::Scripted))
    }
}

struct KeepSearchingProvider;

impl PolicyProvider for KeepSearchingProvider {
    fn create(&self, _kind: PolicyKind, _robot: &str) -> Result<Box<dyn TacticalPolicy>, Error> {
        Ok(Box::new(KeepSearching))
    }
}

#[test]
fn starvation_fires_on_schedule() {
    let mut cfg = TrialConfig::new(4, 6.0, Distribution::Random, 0, PolicyKind::Scripted, 7);
    cfg.duration_secs = 400.0;
    let dt = cfg.limits.dt;
    let r = run_trial_with(cfg, &KeepSearchingProvider).unwrap();
    for (robot, events) in by_robot(&r.event_log) {
        let start = events
            .iter()
            .find(|e| matches!(e.event, Event::Transition { to: FsmState::SearchingUninformed, .. }))
            .expect("robot never searched")
            .t;
        let fired: Vec<f64> = events
            .iter()
            .filter_map(|e| e.decision())
            .filter(|d| d.event.event_type == EventType::SearchStarvation)
            .map(|d| d.event.sim_time_sec - start)
            .collect();
        assert!(fired.len() >= 5, "{robot}: {fired:?}");
        assert!((fired[0] - 60.0).abs() <= dt + 1e-9, "{robot}: first at {}", fired[0]);
        for w in fired.windows(2) {
            assert!((w[1] - w[0] - 30.0).abs() <= dt + 1e-9, "{robot}: {fired:?}");
        }
    }
}

#[test]
fn log_round_trips_through_jsonl() {
    let r = run_trial(config(5, 300.0)).unwrap();
    let text = r.event_log_jsonl();
    let back = forage_core::engine::events::parse_jsonl(&text).unwrap();
    assert_eq!(back, r.event_log);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(0, 10.0);
    cfg.team_size = 0;
    assert!(run_trial(cfg).is_err());
    let mut cfg = config(0, 10.0);
    cfg.duration_secs = -1.0;
    assert!(run_trial(cfg).is_err());
    let mut cfg = config(0, 10.0);
    cfg.params.p_s = 2.0;
    assert!(run_trial(cfg).is_err());
    let cfg = config(0, 10.0);
    let llm = TrialConfig { policy: PolicyKind::Llm, ..cfg };
    assert!(run_trial(llm).is_err());
}
