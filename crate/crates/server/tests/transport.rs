use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use gridqa_core::harness::{
    compute_metrics, episode_seed, replay, run_direct_episode, run_episode, EpisodeLog,
    EpisodeRecord, RunConfig, Slice,
};
use gridqa_core::planner::{
    Episode, EpisodeConfig, PlannerAction, PlannerAgent, PrimitiveCommand, ScriptedSequence,
    NUM_ACTIONS,
};
use gridqa_core::questions::{DatasetItem, Split};
use gridqa_core::world::RoomSpec;
use gridqa_server::protocol::{ReplayChunk, ResultView, StateView};
use gridqa_server::{
    http_call, http_raw, spawn, AgentTag, Control, ErrorCode, FramedClient, Request, Response,
    RunningServer, Service, ServiceOptions,
};

const SEED: u64 = 9;

struct Fixture {
    rooms: Vec<RoomSpec>,
    items: Vec<DatasetItem>,
    cfg: EpisodeConfig,
    _dir: tempfile::TempDir,
    server: RunningServer,
}

fn fixture() -> Fixture {
    let run = RunConfig::default();
    let (rooms, split) = run.rooms().unwrap();
    let ds = run.dataset(&rooms, &split).unwrap();
    let items: Vec<_> = ds
        .items
        .into_iter()
        .filter(|i| i.split != Split::Train)
        .collect();
    // the noisy detector makes the episode seed matter
    let cfg = run.episode_config();
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("index.html"),
        "<!doctype html><title>gridqa</title>",
    )
    .unwrap();
    let opts = ServiceOptions {
        seed: SEED,
        log_dir: Some(dir.path().join("logs")),
        records_path: Some(dir.path().join("records.jsonl")),
        static_dir: Some(dir.path().to_path_buf()),
    };
    let service = Service::new(rooms.clone(), items.clone(), cfg.clone(), opts);
    let server = spawn(Arc::new(service), "127.0.0.1:0").unwrap();
    Fixture {
        rooms,
        items,
        cfg,
        _dir: dir,
        server,
    }
}

impl Fixture {
    fn room(&self, item: &DatasetItem) -> &RoomSpec {
        self.rooms
            .iter()
            .find(|r| r.room_id == item.config.room_id)
            .unwrap()
    }

    fn in_process(&self, item: &DatasetItem, agent: &mut dyn PlannerAgent) -> EpisodeRecord {
        let seed = episode_seed(SEED, item, 0);
        run_episode("external", self.room(item), item, &self.cfg, agent, seed)
            .unwrap()
            .record
    }
}

fn reset(item: &DatasetItem, control: Control, agent: AgentTag) -> Request {
    Request::Reset {
        item_id: item.item_id.clone(),
        control,
        agent,
        seed: None,
    }
}

fn step(action: usize) -> Request {
    Request::Step {
        action: json!(action),
    }
}

fn expect_state(r: Response) -> StateView {
    match r {
        Response::State(s) => s,
        other => panic!("expected state, got {other:?}"),
    }
}

fn random_commands(r: &mut ChaCha8Rng, n: usize) -> Vec<PlannerAction> {
    (0..n)
        .map(|_| PlannerAction::from_index(r.random_range(0..NUM_ACTIONS - 1)).unwrap())
        .collect()
}

/// Drive one planner episode over frames; returns the final result.
fn play_framed(
    client: &mut FramedClient,
    item: &DatasetItem,
    commands: &[PlannerAction],
) -> ResultView {
    let s = expect_state(
        client
            .request(&reset(item, Control::Planner, AgentTag::External))
            .unwrap(),
    );
    assert!(!s.done);
    for a in commands
        .iter()
        .copied()
        .chain(std::iter::repeat(PlannerAction::Answer))
    {
        match client.request(&step(a.index())).unwrap() {
            Response::State(_) => continue,
            Response::Result(r) => return *r,
            other => panic!("{other:?}"),
        }
    }
    unreachable!()
}

#[test]
fn framed_planner_episodes_match_in_process_runs() {
    let fx = fixture();
    let mut client = FramedClient::connect(fx.server.addr).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for item in fx.items.iter().step_by(5).take(16) {
        let n = r.random_range(0..12);
        let commands = random_commands(&mut r, n);
        let wire = play_framed(&mut client, item, &commands);
        let local = fx.in_process(item, &mut ScriptedSequence::new(commands));
        assert_eq!(wire.record, local, "{}", item.item_id);
        assert_eq!(wire.correct, local.correct);
        assert_eq!(wire.metrics.total_reward, local.total_reward);
    }
}

/// Picks the k-th executable command, k cycling with the step count, and
/// answers after a fixed number of steps. Sees only what the wire shows.
fn reactive_choice(valid: &[bool], planner_steps: usize) -> usize {
    if planner_steps >= 10 {
        return PlannerAction::Answer.index();
    }
    let options: Vec<usize> = (0..NUM_ACTIONS - 1).filter(|&i| valid[i]).collect();
    options[(planner_steps * 7) % options.len()]
}

struct Reactive;

impl PlannerAgent for Reactive {
    fn act(&mut self, ep: &Episode) -> PlannerAction {
        PlannerAction::from_index(reactive_choice(&ep.valid_actions(), ep.planner_steps())).unwrap()
    }
}

#[test]
fn http_reactive_agent_matches_in_process_runs() {
    let fx = fixture();
    for item in fx.items.iter().step_by(7).take(10) {
        let reply = http_call(
            fx.server.addr,
            &json!({"type": "reset", "item_id": item.item_id, "control": "planner"}),
        )
        .unwrap();
        let mut state: StateView = serde_json::from_value(reply).unwrap();
        let session = state.session.clone().expect("http mode names the session");
        let result: ResultView = loop {
            let a = reactive_choice(&state.valid_actions, state.step_counters.planner_steps);
            let reply = http_call(
                fx.server.addr,
                &json!({"type": "step", "action": a, "session": session}),
            )
            .unwrap();
            match serde_json::from_value::<Response>(reply).unwrap() {
                Response::State(s) => state = s,
                Response::Result(r) => break *r,
                other => panic!("{other:?}"),
            }
        };
        assert_eq!(result.session.as_deref(), Some(session.as_str()));
        assert_eq!(
            result.record,
            fx.in_process(item, &mut Reactive),
            "{}",
            item.item_id
        );
    }
}

#[test]
fn primitive_control_matches_direct_runs_and_is_tagged_human() {
    let fx = fixture();
    let mut client = FramedClient::connect(fx.server.addr).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for item in fx.items.iter().step_by(9).take(8) {
        let choices = item.question.qtype.num_choices();
        let mut commands: Vec<PrimitiveCommand> = (0..r.random_range(5..60))
            .map(|_| PrimitiveCommand::from_index(r.random_range(0..PrimitiveCommand::ANSWER_BASE)))
            .collect();
        commands.push(PrimitiveCommand::Answer(r.random_range(0..choices)));

        let s = expect_state(
            client
                .request(&reset(item, Control::Primitive, AgentTag::Human))
                .unwrap(),
        );
        assert_eq!(
            s.valid_actions.len(),
            PrimitiveCommand::ANSWER_BASE + choices
        );
        assert_eq!(s.action_names.len(), s.valid_actions.len());
        let mut result = None;
        for c in &commands {
            match client.request(&step(c.index())).unwrap() {
                Response::State(s) => assert_eq!(
                    s.step_counters.primitive_steps,
                    s.step_counters.planner_steps
                ),
                Response::Result(r) => result = Some(*r),
                other => panic!("{other:?}"),
            }
        }
        let wire = result.expect("answer ends the episode");
        let seed = episode_seed(SEED, item, 0);
        let local =
            run_direct_episode("human", fx.room(item), item, &fx.cfg, &commands, seed).unwrap();
        assert_eq!(wire.record, local.record);
        assert_eq!(wire.record.agent, "human");

        // the log written for the session replays to the same record
        let log_id = wire.log_id.unwrap();
        let chunk = match client
            .request(&Request::GetReplay {
                log_id,
                from: 0,
                count: Some(1000),
            })
            .unwrap()
        {
            Response::Replay(c) => c,
            other => panic!("{other:?}"),
        };
        assert_eq!(chunk.total, commands.len());
        assert!(chunk.steps.iter().all(|s| s.step.direct));
    }
    // human records aggregate like any other agent
    let records = fx.server.shared.service.records();
    let m = compute_metrics(&records);
    assert_eq!(m.get("human", Slice::All, None).unwrap().episodes, 8);
}

#[test]
fn reset_starts_clean_and_bad_input_keeps_the_session() {
    let fx = fixture();
    let item = &fx.items[0];
    let mut client = FramedClient::connect(fx.server.addr).unwrap();

    let early = client.request(&step(0)).unwrap();
    assert_eq!(early.error_code(), Some(ErrorCode::NoEpisode));

    let s = expect_state(
        client
            .request(&reset(item, Control::Planner, AgentTag::External))
            .unwrap(),
    );
    assert!(!s.done);
    assert_eq!(s.step_counters.planner_steps, 0);
    assert_eq!(s.step_counters.primitive_steps, 0);
    assert_eq!(s.step_counters.invalid, 0);
    assert_eq!(s.step_counters.total_reward, 0.0);
    assert_eq!(s.valid_actions.len(), NUM_ACTIONS);
    assert!(
        s.topdown_map.rows.iter().any(|row| row.contains('.')),
        "the first look reveals cells"
    );
    assert!(
        s.topdown_map.rows.iter().any(|row| row.contains('~')),
        "most of the room is still fogged"
    );

    for bad in [json!(NUM_ACTIONS), json!(-1), json!("north"), json!(1.5)] {
        let reply = client
            .send_raw(
                json!({"type": "step", "action": bad})
                    .to_string()
                    .as_bytes(),
            )
            .unwrap();
        let r: Response = serde_json::from_slice(&reply).unwrap();
        assert_eq!(r.error_code(), Some(ErrorCode::BadAction), "{bad}");
    }
    for junk in [&b"{not json"[..], br#"{"type": "teleport"}"#, br#"[1, 2]"#] {
        let r: Response = serde_json::from_slice(&client.send_raw(junk).unwrap()).unwrap();
        assert_eq!(r.error_code(), Some(ErrorCode::BadRequest));
    }
    let r: Response = serde_json::from_slice(
        &client
            .send_raw(
                json!({"type": "reset", "item_id": "nowhere/0", "control": "planner"})
                    .to_string()
                    .as_bytes(),
            )
            .unwrap(),
    )
    .unwrap();
    assert_eq!(r.error_code(), Some(ErrorCode::UnknownItem));

    // still the same live episode, and extra fields are ignored
    let left = PlannerAction::from_index(gridqa_core::planner::SCAN_BASE + 2).unwrap();
    let reply = client
        .send_raw(
            json!({"type": "step", "action": left.index(), "note": "extra", "v": [1]})
                .to_string()
                .as_bytes(),
        )
        .unwrap();
    let s = expect_state(serde_json::from_slice(&reply).unwrap());
    assert_eq!(s.step_counters.planner_steps, 1);

    let done = client
        .request(&step(PlannerAction::Answer.index()))
        .unwrap();
    assert!(matches!(done, Response::Result(_)));
    let after = client.request(&step(0)).unwrap();
    assert_eq!(after.error_code(), Some(ErrorCode::EpisodeFinished));
}

#[test]
fn oversized_frames_are_rejected_without_dropping_the_connection() {
    let fx = fixture();
    let mut client = FramedClient::connect(fx.server.addr).unwrap();
    let big = vec![b' '; gridqa_server::MAX_FRAME + 1];
    let r: Response = serde_json::from_slice(&client.send_raw(&big).unwrap()).unwrap();
    assert_eq!(r.error_code(), Some(ErrorCode::BadRequest));
    let s = client
        .request(&reset(&fx.items[0], Control::Planner, AgentTag::External))
        .unwrap();
    assert!(matches!(s, Response::State(_)));
}

#[test]
fn concurrent_sessions_are_isolated() {
    let fx = fixture();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let jobs: Vec<(DatasetItem, Vec<PlannerAction>)> = fx
        .items
        .iter()
        .step_by(11)
        .take(6)
        .map(|it| (it.clone(), random_commands(&mut r, 8)))
        .collect();
    let addr = fx.server.addr;
    // all sessions step in lockstep on separate connections
    let mut clients: Vec<FramedClient> = jobs
        .iter()
        .map(|_| FramedClient::connect(addr).unwrap())
        .collect();
    for ((item, _), c) in jobs.iter().zip(&mut clients) {
        expect_state(
            c.request(&reset(item, Control::Planner, AgentTag::External))
                .unwrap(),
        );
    }
    let mut results: Vec<Option<ResultView>> = vec![None; jobs.len()];
    for k in 0.. {
        if results.iter().all(Option::is_some) {
            break;
        }
        for (j, ((_, cmds), c)) in jobs.iter().zip(&mut clients).enumerate() {
            if results[j].is_some() {
                continue;
            }
            let a = cmds.get(k).copied().unwrap_or(PlannerAction::Answer);
            if let Response::Result(res) = c.request(&step(a.index())).unwrap() {
                results[j] = Some(*res);
            }
        }
    }
    let handles: Vec<_> = jobs
        .iter()
        .cloned()
        .map(|(item, cmds)| {
            std::thread::spawn(move || {
                let mut c = FramedClient::connect(addr).unwrap();
                play_framed(&mut c, &item, &cmds).record
            })
        })
        .collect();
    for (((item, cmds), lockstep), h) in jobs.iter().zip(results).zip(handles) {
        let local = fx.in_process(item, &mut ScriptedSequence::new(cmds.clone()));
        assert_eq!(lockstep.unwrap().record, local);
        assert_eq!(h.join().unwrap(), local);
    }
}

#[test]
fn replay_pages_reassemble_the_log() {
    let fx = fixture();
    let mut client = FramedClient::connect(fx.server.addr).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let item = &fx.items[3];
    let result = play_framed(&mut client, item, &random_commands(&mut r, 9));
    let log_id = result.log_id.clone().unwrap();

    let mut pages: Vec<ReplayChunk> = Vec::new();
    let mut from = 0;
    loop {
        let reply = http_call(
            fx.server.addr,
            &json!({"type": "get_replay", "log_id": log_id, "from": from, "count": 3}),
        )
        .unwrap();
        let chunk = match serde_json::from_value::<Response>(reply).unwrap() {
            Response::Replay(c) => c,
            other => panic!("{other:?}"),
        };
        assert!(chunk.steps.len() <= 3);
        let next = chunk.next();
        pages.push(chunk);
        match next {
            Some(n) => from = n,
            None => break,
        }
    }
    let path = fx
        .server
        .shared
        .service
        .options()
        .log_dir
        .as_ref()
        .unwrap()
        .join(format!("{log_id}.jsonl.gz"));
    let log = EpisodeLog::read(&path).unwrap();
    assert!(replay(&log).unwrap().ok());
    let steps: Vec<_> = pages
        .iter()
        .flat_map(|p| {
            p.steps
                .iter()
                .map(|s| (s.step.clone(), s.primitives.clone()))
        })
        .collect();
    assert_eq!(steps, log.steps);
    assert_eq!(pages[0].record, result.record);
    assert_eq!(pages[0].start, item.config.start);

    for bad in ["../etc/passwd", "", "missing"] {
        let r = client
            .request(&Request::GetReplay {
                log_id: bad.into(),
                from: 0,
                count: None,
            })
            .unwrap();
        assert_eq!(r.error_code(), Some(ErrorCode::UnknownLog));
    }
}

#[test]
fn http_serves_static_assets_and_rejects_unknown_sessions() {
    let fx = fixture();
    let (status, body) = http_raw(fx.server.addr, "GET", "/", b"").unwrap();
    assert_eq!(status, 200);
    assert!(String::from_utf8(body).unwrap().contains("gridqa"));
    assert_eq!(
        http_raw(fx.server.addr, "GET", "/../Cargo.toml", b"")
            .unwrap()
            .0,
        404
    );
    assert_eq!(
        http_raw(fx.server.addr, "GET", "/nope.js", b"").unwrap().0,
        404
    );

    let reply = http_call(
        fx.server.addr,
        &json!({"type": "step", "action": 0, "session": "s999"}),
    )
    .unwrap();
    assert_eq!(reply["type"], "error");
    assert_eq!(reply["code"], "no_episode");
    let reply = http_call(fx.server.addr, &json!({"type": "step", "action": 0})).unwrap();
    assert_eq!(reply["code"], "no_episode");
}
