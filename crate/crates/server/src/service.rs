//! Transport-independent request handling: one state machine per session
//! over shared, immutable rooms, items and episode configuration.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use gridqa_core::classes::ObjectClass;
use gridqa_core::harness::{episode_seed, log_file_name, EpisodeLog, EpisodeRecord, EpisodeRun};
use gridqa_core::memory::{COVERAGE, FREE};
use gridqa_core::planner::{Episode, EpisodeConfig, PlannerAction, PrimitiveCommand, NUM_ACTIONS};
use gridqa_core::questions::DatasetItem;
use gridqa_core::world::{LowLevelAction, RoomSpec};

use crate::protocol::{
    AgentTag, BeliefObject, Control, EgocentricView, ErrorCode, QuestionView, ReplayChunk,
    ReplayStep, Request, Response, ResultMetrics, ResultView, StateView, StepCounters, TopDownMap,
    ViewCell, ViewObject,
};

/// Steps returned by `get_replay` when the client gives no count.
pub const DEFAULT_REPLAY_CHUNK: usize = 16;

#[derive(Clone, Debug, Default)]
pub struct ServiceOptions {
    /// Seed from which default episode seeds derive.
    pub seed: u64,
    /// Completed episodes are logged here and served by `get_replay`.
    pub log_dir: Option<PathBuf>,
    /// Completed records are appended here, one JSON object per line.
    pub records_path: Option<PathBuf>,
    /// Static assets served over HTTP.
    pub static_dir: Option<PathBuf>,
}

struct Live {
    ep: Episode,
    item: DatasetItem,
    control: Control,
    agent: AgentTag,
    last_reward: f64,
}

/// Per-connection (or per-handle) state. Holds at most one episode.
#[derive(Default)]
pub struct Session {
    live: Option<Live>,
}

pub struct Service {
    rooms: BTreeMap<String, RoomSpec>,
    items: HashMap<String, DatasetItem>,
    cfg: EpisodeConfig,
    opts: ServiceOptions,
    records: Mutex<Vec<EpisodeRecord>>,
}

impl Service {
    pub fn new(
        rooms: Vec<RoomSpec>,
        items: Vec<DatasetItem>,
        cfg: EpisodeConfig,
        opts: ServiceOptions,
    ) -> Self {
        Service {
            rooms: rooms.into_iter().map(|r| (r.room_id.clone(), r)).collect(),
            items: items.into_iter().map(|i| (i.item_id.clone(), i)).collect(),
            cfg,
            opts,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.opts
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    /// Records of every episode completed on this service, in completion order.
    pub fn records(&self) -> Vec<EpisodeRecord> {
        self.records.lock().expect("records lock").clone()
    }

    /// Parse and answer one raw request. Malformed input yields an error
    /// response; the session is left as it was.
    pub fn handle_bytes(&self, session: &mut Session, bytes: &[u8]) -> Response {
        let value: serde_json::Value = match serde_json::from_slice(bytes) {
            Ok(v) => v,
            Err(e) => {
                return Response::error(ErrorCode::BadRequest, format!("malformed JSON: {e}"))
            }
        };
        match serde_json::from_value::<Request>(value) {
            Ok(req) => self.handle(session, req),
            Err(e) => Response::error(ErrorCode::BadRequest, e.to_string()),
        }
    }

    pub fn handle(&self, session: &mut Session, req: Request) -> Response {
        match req {
            Request::Reset {
                item_id,
                control,
                agent,
                seed,
            } => self.reset(session, &item_id, control, agent, seed),
            Request::Step { action } => self.step(session, &action),
            Request::GetReplay {
                log_id,
                from,
                count,
            } => self.replay_chunk(&log_id, from, count),
        }
    }

    fn reset(
        &self,
        session: &mut Session,
        item_id: &str,
        control: Control,
        agent: AgentTag,
        seed: Option<u64>,
    ) -> Response {
        let Some(item) = self.items.get(item_id) else {
            return Response::error(ErrorCode::UnknownItem, format!("no item {item_id:?}"));
        };
        let Some(room) = self.rooms.get(&item.config.room_id) else {
            return Response::error(
                ErrorCode::Internal,
                format!("item {item_id} references a missing room"),
            );
        };
        let seed = seed.unwrap_or_else(|| episode_seed(self.opts.seed, item, 0));
        let ep = match Episode::new(room, item, &self.cfg, seed) {
            Ok(ep) => ep,
            Err(e) => return Response::error(ErrorCode::Internal, e.to_string()),
        };
        let live = Live {
            ep,
            item: item.clone(),
            control,
            agent,
            last_reward: 0.0,
        };
        let state = state_view(&live);
        session.live = Some(live);
        Response::State(state)
    }

    fn step(&self, session: &mut Session, action: &serde_json::Value) -> Response {
        let Some(live) = session.live.as_mut() else {
            return Response::error(ErrorCode::NoEpisode, "reset before stepping");
        };
        if live.ep.done() {
            return Response::error(
                ErrorCode::EpisodeFinished,
                "episode finished; reset to start another",
            );
        }
        let n = action_count(live);
        let Some(index) = action.as_u64().map(|i| i as usize).filter(|&i| i < n) else {
            return Response::error(
                ErrorCode::BadAction,
                format!("action must be an integer in 0..{n}, got {action}"),
            );
        };
        let info = match live.control {
            Control::Planner => live
                .ep
                .step_planner(PlannerAction::from_index(index).expect("index checked")),
            Control::Primitive => live.ep.step_primitive(PrimitiveCommand::from_index(index)),
        };
        let info = match info {
            Ok(info) => info,
            Err(e) => return Response::error(ErrorCode::Internal, e.to_string()),
        };
        live.last_reward = info.reward;
        if !info.done {
            return Response::State(state_view(live));
        }
        match self.finish(live) {
            Ok(result) => Response::Result(Box::new(result)),
            Err(e) => Response::error(ErrorCode::Internal, e),
        }
    }

    fn finish(&self, live: &Live) -> Result<ResultView, String> {
        let record = EpisodeRecord::from_episode(live.agent.name(), &live.item, &live.ep);
        // held across the file writes so concurrent sessions get distinct log ids
        let mut records = self.records.lock().expect("records lock");
        let mut log_id = None;
        if let Some(dir) = &self.opts.log_dir {
            let run = EpisodeRun {
                record: record.clone(),
                room: self.rooms[&live.item.config.room_id].clone(),
                item: live.item.clone(),
                cfg: self.cfg.clone(),
                primitives: live.ep.emb.trace.clone(),
            };
            std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
            let base = log_file_name(&record, record.seed);
            let base = base.trim_end_matches(".jsonl.gz");
            let id = (0..)
                .map(|k| {
                    if k == 0 {
                        base.to_string()
                    } else {
                        format!("{base}-{k}")
                    }
                })
                .find(|id| !dir.join(format!("{id}.jsonl.gz")).exists())
                .expect("unbounded search");
            EpisodeLog::from_run(&run)
                .write(&dir.join(format!("{id}.jsonl.gz")))
                .map_err(|e| e.to_string())?;
            log_id = Some(id);
        }
        if let Some(path) = &self.opts.records_path {
            let line = serde_json::to_string(&record).map_err(|e| e.to_string())?;
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| e.to_string())?;
            writeln!(f, "{line}").map_err(|e| e.to_string())?;
        }
        records.push(record.clone());
        Ok(ResultView {
            session: None,
            correct: record.correct,
            metrics: ResultMetrics {
                answer: record.answer,
                truth: record.truth,
                planner_steps: record.planner_steps,
                primitive_steps: record.primitive_steps,
                invalid: record.invalid,
                total_reward: record.total_reward,
                forced_end: record.forced_end,
            },
            record,
            log_id,
            state: state_view(live),
        })
    }

    fn replay_chunk(&self, log_id: &str, from: usize, count: Option<usize>) -> Response {
        let Some(dir) = &self.opts.log_dir else {
            return Response::error(ErrorCode::UnknownLog, "this server keeps no logs");
        };
        let safe = !log_id.is_empty()
            && log_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !safe {
            return Response::error(ErrorCode::UnknownLog, format!("bad log id {log_id:?}"));
        }
        let path = dir.join(format!("{log_id}.jsonl.gz"));
        if !path.exists() {
            return Response::error(ErrorCode::UnknownLog, format!("no log {log_id:?}"));
        }
        let log = match EpisodeLog::read(&path) {
            Ok(log) => log,
            Err(e) => return Response::error(ErrorCode::Internal, e.to_string()),
        };
        let total = log.steps.len();
        let from = from.min(total);
        let count = count.unwrap_or(DEFAULT_REPLAY_CHUNK).max(1);
        let steps = log.steps[from..(from + count).min(total)]
            .iter()
            .map(|(s, p)| ReplayStep {
                step: s.clone(),
                primitives: p.clone(),
            })
            .collect();
        Response::Replay(ReplayChunk {
            log_id: log_id.to_string(),
            start: log.item.config.start,
            record: log.record,
            from,
            total,
            steps,
        })
    }
}

fn action_count(live: &Live) -> usize {
    match live.control {
        Control::Planner => NUM_ACTIONS,
        Control::Primitive => PrimitiveCommand::ANSWER_BASE + live.ep.question.qtype.num_choices(),
    }
}

fn action_names(live: &Live) -> Vec<String> {
    match live.control {
        Control::Planner => PlannerAction::all().map(|a| a.to_string()).collect(),
        Control::Primitive => LowLevelAction::ALL
            .iter()
            .map(|a| a.name().to_string())
            .chain(
                live.ep
                    .question
                    .choices()
                    .iter()
                    .map(|c| format!("answer: {c}")),
            )
            .collect(),
    }
}

fn valid_actions(live: &Live) -> Vec<bool> {
    match live.control {
        Control::Planner => live.ep.valid_actions().to_vec(),
        Control::Primitive => {
            let mut v = live.ep.emb.world.valid_low_level().to_vec();
            v.extend(std::iter::repeat_n(
                true,
                live.ep.question.qtype.num_choices(),
            ));
            v
        }
    }
}

fn egocentric_view(ep: &Episode) -> EgocentricView {
    let det = &ep.emb.last_detections;
    EgocentricView {
        pose: ep.emb.agent(),
        cells: det
            .visible_cells
            .iter()
            .map(|v| ViewCell {
                x: v.cell.x,
                y: v.cell.y,
                free: v.is_free,
            })
            .collect(),
        receptacles: det.visible_receptacles.clone(),
        objects: det
            .visible_objects
            .iter()
            .map(|o| ViewObject {
                class: o.class,
                x: o.cell.x,
                y: o.cell.y,
            })
            .collect(),
    }
}

fn topdown_map(ep: &Episode) -> TopDownMap {
    let tau = ep.cfg.controllers.answer.tau;
    let mem = &ep.emb.memory;
    let covered = |c| mem.get(c, COVERAGE) > 0.0;
    let rows = (0..mem.height() as i32)
        .map(|y| {
            (0..mem.width() as i32)
                .map(|x| {
                    let c = gridqa_core::geom::Cell::new(x, y);
                    let f = mem.get(c, FREE);
                    if !covered(c) {
                        '~'
                    } else if f > 0.5 {
                        '.'
                    } else if f < 0.5 {
                        '#'
                    } else {
                        '?'
                    }
                })
                .collect()
        })
        .collect();
    let mut objects = Vec::new();
    for c in mem.cells().filter(|&c| covered(c)) {
        for class in ObjectClass::ALL {
            let belief = mem.get(c, class.channel());
            if belief > tau {
                objects.push(BeliefObject {
                    class,
                    x: c.x,
                    y: c.y,
                    belief,
                });
            }
        }
    }
    TopDownMap {
        width: mem.width(),
        height: mem.height(),
        rows,
        agent: ep.emb.agent(),
        receptacles: ep.emb.receptacles.values().copied().collect(),
        objects,
    }
}

fn state_view(live: &Live) -> StateView {
    let ep = &live.ep;
    StateView {
        session: None,
        control: live.control,
        item_id: live.item.item_id.clone(),
        question: QuestionView {
            text: live.item.text.clone(),
            qtype: ep.question.qtype,
            choices: ep
                .question
                .choices()
                .iter()
                .map(|c| c.to_string())
                .collect(),
        },
        egocentric_view: egocentric_view(ep),
        topdown_map: topdown_map(ep),
        last_reward: live.last_reward,
        last_valid: ep.last_valid(),
        done: ep.done(),
        action_names: action_names(live),
        valid_actions: valid_actions(live),
        step_counters: StepCounters {
            planner_steps: ep.planner_steps(),
            primitive_steps: ep.primitive_steps(),
            invalid: ep.invalid_count(),
            total_reward: ep.total_reward(),
            coverage: ep.coverage(),
        },
    }
}
