mod common;

use std::collections::BTreeMap;

use rand::Rng;

use gridqa_core::classes::{ObjectClass, ReceptacleClass};
use gridqa_core::controllers::{DetectorModel, Manipulation};
use gridqa_core::geom::{Cell, Heading, Pitch};
use gridqa_core::harness::{
    compute_metrics, mla_records, replay, run_direct_episode, run_episode, run_episodes,
    EpisodeLog, EpisodeRecord, MetricsReport, Slice,
};
use gridqa_core::planner::{
    EpisodeConfig, PlannerAction, PlannerAgent, PrimitiveCommand, ScriptedExplorer,
    ScriptedSequence, NUM_ACTIONS,
};
use gridqa_core::questions::{
    generate_dataset, DatasetItem, DatasetOptions, Question, QuestionType, Split, NO, YES,
};
use gridqa_core::rooms::{kitchen_suite, small_suite};
use gridqa_core::world::{
    AgentState, Location, LowLevelAction, Placement, ReceptacleSpec, RoomSpec, SceneConfig,
};

fn dataset(scale: f64) -> (Vec<RoomSpec>, Vec<DatasetItem>) {
    let (rooms, split) = small_suite(1);
    let ds = generate_dataset(
        &rooms,
        &split,
        &DatasetOptions {
            seed: 5,
            scale,
            seen_split: true,
        },
    )
    .unwrap();
    (rooms, ds.items)
}

/// Picks uniformly among all commands, answering with small probability.
struct RandomAgent(rand_chacha::ChaCha8Rng);

impl PlannerAgent for RandomAgent {
    fn act(&mut self, _: &gridqa_core::planner::Episode) -> PlannerAction {
        if self.0.random_bool(0.05) {
            return PlannerAction::Answer;
        }
        PlannerAction::from_index(self.0.random_range(0..NUM_ACTIONS - 1)).unwrap()
    }
}

#[test]
fn most_likely_answer_baseline_scores_chance_exactly() {
    let (_, split) = kitchen_suite(1);
    let (rooms, _) = kitchen_suite(1);
    let ds = generate_dataset(
        &rooms,
        &split,
        &DatasetOptions {
            seed: 8,
            scale: 1.0 / 64.0,
            seen_split: false,
        },
    )
    .unwrap();
    let test: Vec<_> = ds
        .items
        .iter()
        .filter(|i| i.split == Split::Test)
        .cloned()
        .collect();
    let m = compute_metrics(&mla_records(&test));
    assert_eq!(
        m.accuracy("mla", Slice::Unseen, Some(QuestionType::Existence)),
        0.5
    );
    assert_eq!(
        m.accuracy("mla", Slice::Unseen, Some(QuestionType::Counting)),
        0.25
    );
    assert_eq!(
        m.accuracy(
            "mla",
            Slice::Unseen,
            Some(QuestionType::SpatialRelationship)
        ),
        0.5
    );
}

/// Aggregate the records by hand, separately from the library.
fn hand_metrics(
    records: &[EpisodeRecord],
) -> BTreeMap<(String, &'static str, Option<QuestionType>), (usize, usize, usize)> {
    let mut out: BTreeMap<_, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let slice = if r.split == Split::Test {
            "unseen"
        } else {
            "seen"
        };
        for s in ["all", slice] {
            for q in [None, Some(r.qtype)] {
                let e = out.entry((r.agent.clone(), s, q)).or_default();
                e.0 += 1;
                e.1 += usize::from(r.correct);
                e.2 += r.primitive_steps;
            }
        }
    }
    out
}

fn check_metrics(m: &MetricsReport, records: &[EpisodeRecord]) {
    for ((agent, slice, q), (n, correct, prims)) in hand_metrics(records) {
        let slice = match slice {
            "all" => Slice::All,
            "seen" => Slice::Seen,
            _ => Slice::Unseen,
        };
        let cell = m.get(&agent, slice, q).unwrap();
        assert_eq!(
            (cell.episodes, cell.correct, cell.primitive_steps),
            (n, correct, prims)
        );
    }
}

#[test]
fn logs_round_trip_replay_and_reproduce_metrics() {
    let (rooms, items) = dataset(1.0 / 64.0);
    let items: Vec<_> = items.into_iter().step_by(3).take(40).collect();
    let mut cfg = EpisodeConfig::default();
    cfg.controllers.detector = DetectorModel::noisy(0.8, 0.02, 0.1);
    let runs = run_episodes(
        "random",
        &rooms,
        &items,
        &cfg,
        |_, s| Box::new(RandomAgent(common::rng(s))),
        3,
        2,
    )
    .unwrap();
    assert_eq!(runs.len(), 2 * items.len());
    let dir = tempfile::tempdir().unwrap();
    let mut reloaded = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let log = EpisodeLog::from_run(run);
        let path = dir.path().join(format!("{k}.jsonl.gz"));
        log.write(&path).unwrap();
        let back = EpisodeLog::read(&path).unwrap();
        assert_eq!(back, log);
        let report = replay(&back).unwrap();
        assert!(report.ok(), "{}: {report:?}", run.record.item_id);
        assert_eq!(report.primitive_steps, run.primitives.len());
        reloaded.push(back.record);
    }
    let direct: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    assert_eq!(compute_metrics(&reloaded), compute_metrics(&direct));
    check_metrics(&compute_metrics(&reloaded), &reloaded);
}

#[test]
fn tampered_logs_fail_replay() {
    let (rooms, items) = dataset(1.0 / 64.0);
    let cfg = EpisodeConfig::default();
    let item = &items[0];
    let room = rooms
        .iter()
        .find(|r| r.room_id == item.config.room_id)
        .unwrap();
    let run = run_episode(
        "scripted",
        room,
        item,
        &cfg,
        &mut ScriptedExplorer::new(),
        1,
    )
    .unwrap();
    let log = EpisodeLog::from_run(&run);
    assert!(replay(&log).unwrap().ok());

    let mut moved = log.clone();
    let (_, prims) = moved.steps.iter_mut().find(|(_, p)| !p.is_empty()).unwrap();
    prims[0].agent.heading = prims[0].agent.heading.left().left();
    assert_eq!(replay(&moved).unwrap().first_divergence, Some(0));

    let mut other_seed = log.clone();
    other_seed.record.correct = !other_seed.record.correct;
    assert!(!replay(&other_seed).unwrap().record_matches);
}

#[test]
fn runs_are_ordered_and_independent_of_item_order() {
    let (rooms, items) = dataset(1.0 / 64.0);
    let items: Vec<_> = items.into_iter().take(24).collect();
    let cfg = EpisodeConfig::default();
    let make = |_: &DatasetItem, s: u64| -> Box<dyn PlannerAgent> {
        Box::new(RandomAgent(common::rng(s)))
    };
    let a = run_episodes("r", &rooms, &items, &cfg, make, 7, 3).unwrap();
    let ids: Vec<_> = a.iter().map(|r| r.record.item_id.clone()).collect();
    let want: Vec<_> = items
        .iter()
        .flat_map(|i| std::iter::repeat_n(i.item_id.clone(), 3))
        .collect();
    assert_eq!(ids, want);

    let mut reversed = items.clone();
    reversed.reverse();
    let b = run_episodes("r", &rooms, &reversed, &cfg, make, 7, 3).unwrap();
    let by_id =
        |runs: &[gridqa_core::harness::EpisodeRun]| -> BTreeMap<(String, u64), EpisodeRecord> {
            runs.iter()
                .map(|r| ((r.record.item_id.clone(), r.record.seed), r.record.clone()))
                .collect()
        };
    assert_eq!(by_id(&a), by_id(&b));
}

/// A fridge against the north wall with one apple inside, the agent three
/// cells south of it.
fn fridge_room() -> (RoomSpec, SceneConfig) {
    let mut room = RoomSpec::empty("keystone", 7, 7);
    room.receptacles.push(ReceptacleSpec {
        class: ReceptacleClass::Fridge,
        cell: Cell::new(3, 1),
        height_band: None,
        open: false,
    });
    let config = SceneConfig {
        room_id: room.room_id.clone(),
        seed: 0,
        start: AgentState::new(Cell::new(3, 4), Heading::N, Pitch::Level),
        placements: vec![Placement {
            instance_id: 1,
            class: ObjectClass::Apple,
            location: Location::Inside(0),
        }],
    };
    (room, config)
}

fn keystone_item(config: &SceneConfig, q: Question, answer: usize) -> DatasetItem {
    DatasetItem {
        item_id: "keystone/0".into(),
        question: q,
        text: q.text(),
        config: config.clone(),
        answer,
        split: Split::Test,
    }
}

#[test]
fn opening_the_fridge_reveals_the_apple() {
    let (room, config) = fridge_room();
    // ground-truth detector: a single sighting is certain
    let mut cfg = EpisodeConfig::default();
    cfg.controllers.memory.alpha = 1.0;
    let q = Question::existence(ObjectClass::Apple);
    let item = keystone_item(&config, q, YES);
    // three cells away: within reach, and far enough to see at level pitch
    let open = PlannerAction::Manipulate(Manipulation::Open);

    let mut agent = ScriptedSequence::new(vec![open]);
    let run = run_episode("keystone", &room, &item, &cfg, &mut agent, 0).unwrap();
    let r = &run.record;
    assert_eq!(r.answer, Some(YES));
    assert!(r.correct && r.invalid == 0 && r.planner_steps == 2);
    assert_eq!(r.final_state.as_ref().unwrap().open, vec![true]);
    assert!(replay(&EpisodeLog::from_run(&run)).unwrap().ok());

    // without opening, the closed fridge hides the apple
    let mut agent = ScriptedSequence::new(vec![PlannerAction::navigate(1, 0)]);
    let run = run_episode("keystone", &room, &item, &cfg, &mut agent, 0).unwrap();
    assert_eq!(run.record.answer, Some(NO));
    assert!(!run.record.correct);

    let spatial = keystone_item(
        &config,
        Question::spatial(ObjectClass::Apple, ReceptacleClass::Fridge),
        YES,
    );
    let mut agent = ScriptedSequence::new(vec![open]);
    let run = run_episode("keystone", &room, &spatial, &cfg, &mut agent, 0).unwrap();
    assert!(run.record.correct);

    let counting = keystone_item(&config, Question::counting(ObjectClass::Apple), 1);
    let mut agent = ScriptedExplorer::new();
    let run = run_episode("scripted", &room, &counting, &cfg, &mut agent, 0).unwrap();
    assert!(
        run.record.correct,
        "{:?}",
        run.record
            .steps
            .iter()
            .map(|s| s.action)
            .collect::<Vec<_>>()
    );
}

#[test]
fn direct_control_rewards_records_and_replay() {
    let (room, config) = fridge_room();
    let mut cfg = EpisodeConfig::default();
    cfg.controllers.memory.alpha = 1.0;
    cfg.reward.c_coverage = 0.0;
    let item = keystone_item(&config, Question::existence(ObjectClass::Apple), YES);

    let mut ep = gridqa_core::planner::Episode::new(&room, &item, &cfg, 0).unwrap();
    // the fridge is three cells north: two moves, then blocked
    let rewards: Vec<f64> = [
        PrimitiveCommand::Act(LowLevelAction::MoveAhead),
        PrimitiveCommand::Act(LowLevelAction::MoveAhead),
        PrimitiveCommand::Act(LowLevelAction::MoveAhead),
    ]
    .into_iter()
    .map(|c| ep.step_primitive(c).unwrap().reward)
    .collect();
    assert_eq!(rewards, vec![-0.01, -0.01, -1.01]);
    assert_eq!(ep.primitive_steps(), 3);
    assert!(ep.step_primitive(PrimitiveCommand::Answer(2)).is_err());
    assert!(!ep.done());

    let commands = vec![
        PrimitiveCommand::Act(LowLevelAction::Open),
        PrimitiveCommand::Act(LowLevelAction::RotateLeft),
        PrimitiveCommand::Answer(YES),
    ];
    let run = run_direct_episode("human", &room, &item, &cfg, &commands, 3).unwrap();
    let r = &run.record;
    assert!(r.correct && r.invalid == 0);
    assert_eq!((r.planner_steps, r.primitive_steps), (3, 3));
    assert!((r.total_reward - (10.0 - 0.03)).abs() < 1e-12);
    assert!(r.steps.iter().all(|s| s.direct));
    assert_eq!(
        PrimitiveCommand::from_index(r.steps[2].action),
        PrimitiveCommand::Answer(YES)
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("direct.jsonl.gz");
    EpisodeLog::from_run(&run).write(&path).unwrap();
    let back = EpisodeLog::read(&path).unwrap();
    assert!(replay(&back).unwrap().ok());
    let mut tampered = back.clone();
    tampered.steps[0].0.action = LowLevelAction::Close.index();
    assert!(!replay(&tampered).unwrap().record_matches);
}
