use std::sync::Arc;

use bomai_core::Percept;
use bomai_envs::BoxedWorld;
use bomai_harness::runner::{stream, ENV_STREAM};
use bomai_harness::session::{ClientMessage, ServerBody, ServerMessage, Session, Waiting};
use bomai_harness::verify::{verify_lemma1, verify_martingale};
use bomai_harness::{Experiment, ExperimentConfig};

fn experiment(eta: f64, m: usize, episodes: usize) -> Arc<Experiment> {
    let mut c = ExperimentConfig::acceptance();
    c.env = "boxed-room-console".into();
    c.eta = eta;
    c.spaces.m = m;
    c.episodes = episodes;
    if m > 2 {
        c.caps.tv_horizon = 1;
    }
    Arc::new(Experiment::build(&c).unwrap())
}

fn obs(text: &str, reward: &str) -> ClientMessage {
    ClientMessage::Observation { text: text.into(), reward: reward.into() }
}

fn last(msgs: &[ServerMessage]) -> &ServerMessage {
    msgs.last().expect("at least one message")
}

#[test]
fn exploit_episode_prompts_for_percepts_only() {
    let mut s = Session::new(experiment(1e-12, 2, 10), 0);
    let first = s.resume().unwrap();
    assert_eq!(first.len(), 1);
    let m = &first[0];
    assert_eq!((m.i, m.j), (0, 0));
    assert!(m.history.is_empty());
    assert!(matches!(&m.body, ServerBody::NeedObservation { explore: false, .. }));
    let reply = s.handle(obs("o0", "1")).unwrap();
    assert_eq!((last(&reply).i, last(&reply).j), (0, 1));
    assert_eq!(last(&reply).history.len(), 1);
    let reply = s.handle(obs("o1", "1/2")).unwrap();
    assert_eq!(reply.len(), 2);
    match &reply[0].body {
        ServerBody::EpisodeClosed { e, steps, episode_reward, .. } => {
            assert!(!e);
            assert_eq!(steps.len(), 2);
            assert_eq!(*episode_reward, 1.5);
        }
        other => panic!("expected episode_closed, got {other:?}"),
    }
    assert_eq!((reply[1].i, reply[1].j), (1, 0));
    assert_eq!(s.episodes_done(), 1);
}

#[test]
fn exploratory_episode_asks_for_mentor_actions() {
    let mut s = Session::new(experiment(1e6, 2, 10), 0);
    let first = s.resume().unwrap();
    assert!(matches!(last(&first).body, ServerBody::NeedMentorAction { ref actions } if actions.len() == 2));
    assert_eq!(s.waiting(), Waiting::MentorAction);
    let reply = s.handle(ClientMessage::MentorAction { action: "a0".into() }).unwrap();
    match &last(&reply).body {
        ServerBody::NeedObservation { action, explore } => {
            assert_eq!(action, "a0");
            assert!(explore);
        }
        other => panic!("{other:?}"),
    }
    s.handle(obs("o0", "1")).unwrap();
    s.handle(ClientMessage::MentorAction { action: "a0".into() }).unwrap();
    let reply = s.handle(obs("o0", "1")).unwrap();
    assert!(matches!(reply[0].body, ServerBody::EpisodeClosed { e: true, .. }));
    assert!(s.record().rows[0].e);
    assert_eq!(s.record().rows[0].p_exp, 1.0);
}

#[test]
fn door_at_first_step_pads_the_rest_of_the_episode() {
    let mut s = Session::new(experiment(1e-12, 3, 4), 0);
    s.resume().unwrap();
    let reply = s.handle(ClientMessage::OpenDoor).unwrap();
    assert_eq!(reply.len(), 2);
    assert!(matches!(reply[0].body, ServerBody::EpisodeClosed { .. }));
    assert_eq!((reply[1].i, reply[1].j), (1, 0));
    let steps = s.agent().history.episode_block(0).to_vec();
    assert_eq!(steps.len(), 3);
    assert!(steps.iter().all(|st| st.percept == Percept::null()));
}

#[test]
fn door_mid_episode_keeps_earlier_percepts() {
    let mut s = Session::new(experiment(1e-12, 3, 4), 0);
    s.resume().unwrap();
    s.handle(obs("o1", "1")).unwrap();
    let reply = s.handle(ClientMessage::OpenDoor).unwrap();
    assert!(matches!(reply[0].body, ServerBody::EpisodeClosed { .. }));
    let steps = s.agent().history.episode_block(0).to_vec();
    assert_ne!(steps[0].percept, Percept::null());
    assert_eq!(steps[1].percept, Percept::null());
    assert_eq!(steps[2].percept, Percept::null());
}

#[test]
fn door_in_exploratory_episode_still_takes_mentor_actions() {
    let mut s = Session::new(experiment(1e6, 3, 4), 0);
    s.resume().unwrap();
    s.handle(ClientMessage::MentorAction { action: "a1".into() }).unwrap();
    let reply = s.handle(ClientMessage::OpenDoor).unwrap();
    assert_eq!(reply.len(), 1);
    assert!(matches!(reply[0].body, ServerBody::NeedMentorAction { .. }));
    assert_eq!((reply[0].i, reply[0].j), (0, 1));
    let reply = s.handle(ClientMessage::MentorAction { action: "a0".into() }).unwrap();
    assert!(matches!(reply[0].body, ServerBody::NeedMentorAction { .. }));
    assert_eq!(reply[0].j, 2);
    let reply = s.handle(ClientMessage::MentorAction { action: "a1".into() }).unwrap();
    assert!(matches!(reply[0].body, ServerBody::EpisodeClosed { e: true, .. }));
    let steps = s.agent().history.episode_block(0).to_vec();
    let names: Vec<&str> = steps.iter().map(|st| s.agent().experiment().spaces.action_name(st.action)).collect();
    assert_eq!(names, ["a1", "a0", "a1"]);
    assert!(steps.iter().all(|st| st.percept == Percept::null()));
}

#[test]
fn invalid_input_is_refused_without_changing_state() {
    let mut s = Session::new(experiment(1e-12, 2, 4), 0);
    s.resume().unwrap();
    for msg in [
        obs("o0", "1/3"),
        obs("o0", "2"),
        obs("o0", "half"),
        obs("nothing", "1"),
        obs("∅", "0"),
        ClientMessage::MentorAction { action: "a0".into() },
    ] {
        let reply = s.handle(msg.clone()).unwrap();
        assert_eq!(reply.len(), 1, "{msg:?}");
        assert!(matches!(reply[0].body, ServerBody::Error { .. }), "{msg:?}");
        assert_eq!((reply[0].i, reply[0].j), (0, 0));
    }
    assert!(s.agent().history.is_empty());
    let reply = s.handle_json("{\"type\":\"dance\"}").unwrap();
    assert!(matches!(reply[0].body, ServerBody::Error { .. }));
    assert!(matches!(s.handle(ClientMessage::State).unwrap()[0].body, ServerBody::State { waiting_for: Waiting::Observation, .. }));
}

#[test]
fn door_refused_while_waiting_for_mentor() {
    let mut s = Session::new(experiment(1e6, 2, 4), 0);
    s.resume().unwrap();
    let reply = s.handle(ClientMessage::OpenDoor).unwrap();
    assert!(matches!(reply[0].body, ServerBody::Error { .. }));
}

#[test]
fn json_wire_format() {
    let msg: ClientMessage = serde_json::from_str(r#"{"type":"observation","text":"o1","reward":"1/2"}"#).unwrap();
    assert_eq!(msg, obs("o1", "1/2"));
    let msg: ClientMessage = serde_json::from_str(r#"{"type":"open_door"}"#).unwrap();
    assert_eq!(msg, ClientMessage::OpenDoor);
    let mut s = Session::new(experiment(1e-12, 2, 4), 0);
    let first = s.resume().unwrap();
    let v: serde_json::Value = serde_json::to_value(&first[0]).unwrap();
    assert_eq!(v["type"], "need_observation");
    assert_eq!(v["i"], 0);
    assert_eq!(v["j"], 0);
    assert!(v["history"].as_array().unwrap().is_empty());
}

#[test]
fn abort_rolls_back_to_the_boundary() {
    let mut s = Session::new(experiment(1.0, 2, 10), 3);
    let mut sim = Sim::new(&s);
    drive(&mut s, &mut sim, 2);
    let before = s.agent().history.steps().to_vec();
    let prompt = s.resume().unwrap();
    let first = prompt.last().unwrap().clone();
    step_once(&mut s, &mut sim, &first);
    assert_eq!(s.agent().history.len(), 5);
    s.abort("gone");
    assert_eq!(s.agent().history.steps(), &before[..]);
    assert_eq!(s.agent().history.flags().len(), 2);
    let rec = s.record();
    assert_eq!(rec.rows.len(), 2);
    assert_eq!(rec.aborted.len(), 1);
    assert_eq!(rec.aborted[0].episode, 2);
    assert_eq!(rec.aborted[0].steps_taken, 1);
    let again = s.resume().unwrap();
    assert_eq!(again.last().unwrap(), &first);
}

#[test]
fn finished_session_reports_finished() {
    let mut s = Session::new(experiment(1.0, 2, 2), 0);
    let mut sim = Sim::new(&s);
    drive(&mut s, &mut sim, 2);
    assert!(s.finished());
    assert!(matches!(s.resume().unwrap()[0].body, ServerBody::Finished { episodes: 2 }));
}

/// Plays operator and mentor from the simulator.
struct Sim {
    world: BoxedWorld,
    rng: rand_chacha::ChaCha8Rng,
}

impl Sim {
    fn new(s: &Session) -> Sim {
        Sim { world: BoxedWorld::new(s.agent().experiment().env.clone()), rng: stream(0, ENV_STREAM) }
    }
}

/// Answers prompts until `episodes` more episodes close.
fn drive(s: &mut Session, sim: &mut Sim, episodes: usize) {
    let target = s.episodes_done() + episodes;
    let mut msgs = s.resume().unwrap();
    while s.episodes_done() < target {
        let m = msgs.last().unwrap().clone();
        msgs = step_once(s, sim, &m);
    }
}

fn step_once(s: &mut Session, sim: &mut Sim, prompt: &ServerMessage) -> Vec<ServerMessage> {
    let exp = s.agent().experiment().clone();
    match &prompt.body {
        ServerBody::NeedMentorAction { .. } => {
            let a = *exp.policies.get(exp.mentor).act(&s.agent().history).sample(&mut sim.rng);
            s.handle(ClientMessage::MentorAction { action: exp.spaces.action_name(a).into() }).unwrap()
        }
        ServerBody::NeedObservation { action, .. } => {
            let a = exp.spaces.action_by_name(action).unwrap();
            let m = exp.spaces.m() as u64;
            let done = s.agent().history.len() as u64;
            // catch up over steps the session padded on its own
            while sim.world.time().episode * m + u64::from(sim.world.time().step) < done {
                sim.world.step(a, &mut sim.rng);
            }
            let step = sim.world.step(a, &mut sim.rng).step;
            if step.percept == Percept::null() {
                return s.handle(ClientMessage::OpenDoor).unwrap();
            }
            let text = exp.spaces.observation_name(step.percept.obs).to_string();
            s.handle(obs(&text, &step.percept.reward.to_string())).unwrap()
        }
        other => panic!("unexpected prompt {other:?}"),
    }
}

#[test]
fn simulated_console_record_passes_oracle_checks() {
    let mut s = Session::new(experiment(1.0, 2, 40), 5);
    let mut sim = Sim::new(&s);
    drive(&mut s, &mut sim, 40);
    let rec = s.record();
    assert_eq!(rec.rows.len(), 40);
    assert!(rec.rows.iter().any(|r| r.e));
    assert!(rec.rows.iter().any(|r| r.steps.iter().any(|st| st.contains('∅'))));
    let runs = [rec];
    assert!(verify_lemma1(&runs).pass, "{}", verify_lemma1(&runs).line());
    assert!(verify_martingale(&runs).pass, "{}", verify_martingale(&runs).line());
}

#[test]
fn console_room_admits_the_door_everywhere() {
    let exp = experiment(1.0, 2, 1);
    for nu in exp.models.models() {
        let ctx = nu.initial_context();
        for a in exp.spaces.actions() {
            assert!(nu.percept_prob(&ctx, a, &Percept::null()) > 0.0, "{}", nu.descriptor());
        }
    }
}

#[test]
fn door_refused_where_no_model_admits_it() {
    let mut c = ExperimentConfig::acceptance();
    c.eta = 1e-12;
    let exp = Arc::new(Experiment::build(&c).unwrap());
    let mut s = Session::new(exp, 0);
    s.resume().unwrap();
    let reply = s.handle(ClientMessage::OpenDoor).unwrap();
    assert!(matches!(&reply[0].body, ServerBody::Error { message } if message.contains("admits")));
    assert!(s.agent().history.is_empty());
    assert_eq!(s.waiting(), Waiting::Observation);
}

#[test]
fn percepts_outside_every_model_refused() {
    let mut s = Session::new(experiment(1e-12, 2, 4), 0);
    let first = s.resume().unwrap();
    let ServerBody::NeedObservation { action, .. } = &first[0].body else { panic!() };
    // from the greeting every model pays 1 or 1/2 for a0 and 0 for a1
    let bad = if action == "a0" { "0" } else { "1" };
    let reply = s.handle(obs("o0", bad)).unwrap();
    assert!(matches!(reply[0].body, ServerBody::Error { .. }));
    assert!(s.agent().history.is_empty());
}

