//! Browser demo. One episode in a freshly generated small room: the page
//! either plays it with primitive actions or lets the scripted explorer
//! drive the planner, and redraws from the JSON frame after every call.

use gridqa_core::classes::ObjectClass;
use gridqa_core::geom::Cell;
use gridqa_core::memory::{COVERAGE, FREE};
use gridqa_core::planner::{Episode, EpisodeConfig, PrimitiveCommand, ScriptedExplorer};
use gridqa_core::questions::{
    answer_of, constraints_for, generate_configuration, question_pool, DatasetItem, QuestionType,
    Split,
};
use gridqa_core::rooms::{generate_room, RoomGenParams};
use gridqa_core::world::{AgentState, LowLevelAction, SeenReceptacle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Retries before giving up on a room that cannot host the drawn question.
const ATTEMPTS: usize = 16;

#[derive(Serialize)]
struct Placed {
    class: &'static str,
    x: i32,
    y: i32,
}

#[derive(Serialize)]
struct Truth {
    blocked: Vec<(i32, i32)>,
    receptacles: Vec<SeenReceptacle>,
    objects: Vec<Placed>,
}

#[derive(Serialize)]
struct Frame<'a> {
    question: &'a str,
    choices: Vec<String>,
    width: usize,
    height: usize,
    /// Memory rows: '~' unseen, '.' free, '#' blocked, '?' undecided.
    rows: Vec<String>,
    agent: AgentState,
    visible: Vec<(i32, i32)>,
    receptacles: Vec<SeenReceptacle>,
    beliefs: Vec<Placed>,
    actions: Vec<String>,
    valid: Vec<bool>,
    last_reward: f64,
    total_reward: f64,
    planner_steps: usize,
    primitive_steps: usize,
    coverage: f32,
    done: bool,
    answer: Option<usize>,
    correct: bool,
    /// The full scene, only once the episode is over.
    truth: Option<Truth>,
}

/// Episode state behind the exported handle; usable natively.
pub struct Demo {
    item: DatasetItem,
    ep: Episode,
    explorer: ScriptedExplorer,
    last_reward: f64,
}

fn qtype_named(name: &str) -> Result<QuestionType, String> {
    QuestionType::ALL
        .into_iter()
        .find(|q| q.name() == name)
        .ok_or_else(|| format!("unknown question type {name:?}"))
}

impl Demo {
    /// A small room and one question of `qtype` drawn from `seed`, with the
    /// answer uniform over the choices.
    pub fn create(seed: u64, qtype: &str) -> Result<Demo, String> {
        let qtype = qtype_named(qtype)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = EpisodeConfig::default();
        let mut last = String::from("no attempt made");
        for attempt in 0..ATTEMPTS {
            let room = generate_room(
                &format!("demo-{seed}-{attempt}"),
                &RoomGenParams::small(),
                rng.random(),
            );
            let pool = question_pool(&room, qtype);
            if pool.is_empty() {
                last = format!("room supports no {qtype} questions");
                continue;
            }
            let question = pool[rng.random_range(0..pool.len())];
            let answer = rng.random_range(0..qtype.num_choices());
            let cons = constraints_for(&room, &question, answer, &mut rng);
            let config = match generate_configuration(&room, &cons, &mut rng) {
                Ok(c) => c,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let answer = answer_of(&room, &config, &question);
            let item = DatasetItem {
                item_id: format!("demo/{}/{qtype}", room.room_id),
                text: question.text(),
                question,
                config,
                answer,
                split: Split::Test,
            };
            let ep = Episode::new(&room, &item, &cfg, rng.random()).map_err(|e| e.to_string())?;
            return Ok(Demo {
                item,
                ep,
                explorer: ScriptedExplorer::new(),
                last_reward: 0.0,
            });
        }
        Err(last)
    }

    pub fn episode(&self) -> &Episode {
        &self.ep
    }

    /// Primitive control: indices below 7 are low-level actions, the rest
    /// answer the question.
    pub fn act(&mut self, index: usize) -> Result<(), String> {
        if self.ep.done() {
            return Err("episode finished".into());
        }
        let info = self
            .ep
            .step_primitive(PrimitiveCommand::from_index(index))
            .map_err(|e| e.to_string())?;
        self.last_reward = info.reward;
        Ok(())
    }

    /// One planner command chosen by the scripted explorer.
    pub fn explore(&mut self) -> Result<(), String> {
        if self.ep.done() {
            return Err("episode finished".into());
        }
        let action = self.explorer.act(&self.ep);
        let info = self.ep.step_planner(action).map_err(|e| e.to_string())?;
        self.last_reward = info.reward;
        Ok(())
    }

    pub fn frame(&self) -> String {
        let ep = &self.ep;
        let mem = &ep.emb.memory;
        let tau = ep.cfg.controllers.answer.tau;
        let covered = |c: Cell| mem.get(c, COVERAGE) > 0.0;
        let rows = (0..mem.height() as i32)
            .map(|y| {
                (0..mem.width() as i32)
                    .map(|x| {
                        let c = Cell::new(x, y);
                        let f = mem.get(c, FREE);
                        match () {
                            _ if !covered(c) => '~',
                            _ if f > 0.5 => '.',
                            _ if f < 0.5 => '#',
                            _ => '?',
                        }
                    })
                    .collect()
            })
            .collect();
        let beliefs = mem
            .cells()
            .filter(|&c| covered(c))
            .flat_map(|c| {
                ObjectClass::ALL
                    .into_iter()
                    .filter(move |k| mem.get(c, k.channel()) > tau)
                    .map(move |k| Placed {
                        class: k.name(),
                        x: c.x,
                        y: c.y,
                    })
            })
            .collect();
        let choices = ep.question.choices();
        let actions = LowLevelAction::ALL
            .iter()
            .map(|a| a.name().to_string())
            .chain(choices.iter().map(|c| format!("answer: {c}")))
            .collect();
        let mut valid = ep.emb.world.valid_low_level().to_vec();
        valid.extend(std::iter::repeat_n(true, choices.len()));
        let done = ep.done();
        let frame = Frame {
            question: &self.item.text,
            choices: choices.iter().map(|c| c.to_string()).collect(),
            width: mem.width(),
            height: mem.height(),
            rows,
            agent: ep.emb.agent(),
            visible: ep
                .emb
                .last_detections
                .visible_cells
                .iter()
                .map(|v| (v.cell.x, v.cell.y))
                .collect(),
            receptacles: ep.emb.receptacles.values().copied().collect(),
            beliefs,
            actions,
            valid: if done {
                vec![false; PrimitiveCommand::ANSWER_BASE + choices.len()]
            } else {
                valid
            },
            last_reward: self.last_reward,
            total_reward: ep.total_reward(),
            planner_steps: ep.planner_steps(),
            primitive_steps: ep.primitive_steps(),
            coverage: ep.coverage(),
            done,
            answer: ep.answer_given(),
            correct: ep.correct(),
            truth: done.then(|| self.truth()),
        };
        serde_json::to_string(&frame).expect("frames serialize")
    }

    fn truth(&self) -> Truth {
        let scene = &self.ep.emb.world.scene;
        Truth {
            blocked: scene
                .cells()
                .filter(|&c| scene.is_blocked(c) && scene.receptacle_at(c).is_none())
                .map(|c| (c.x, c.y))
                .collect(),
            receptacles: scene
                .receptacles
                .iter()
                .enumerate()
                .map(|(i, r)| SeenReceptacle {
                    receptacle: i,
                    class: r.class,
                    cell: r.cell,
                    is_open: r.is_open,
                    height_band: r.height_band,
                })
                .collect(),
            objects: scene
                .all_objects()
                .into_iter()
                .map(|(c, o, _)| Placed {
                    class: o.class.name(),
                    x: c.x,
                    y: c.y,
                })
                .collect(),
        }
    }
}

/// Handle exported to JavaScript. Every call returns the new frame as JSON.
#[wasm_bindgen]
pub struct DemoEpisode(Demo);

#[wasm_bindgen]
impl DemoEpisode {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, qtype: &str) -> Result<DemoEpisode, JsError> {
        Demo::create(seed, qtype)
            .map(DemoEpisode)
            .map_err(|e| JsError::new(&e))
    }

    pub fn frame(&self) -> String {
        self.0.frame()
    }

    pub fn act(&mut self, index: usize) -> Result<String, JsError> {
        self.0.act(index).map_err(|e| JsError::new(&e))?;
        Ok(self.0.frame())
    }

    pub fn explore(&mut self) -> Result<String, JsError> {
        self.0.explore().map_err(|e| JsError::new(&e))?;
        Ok(self.0.frame())
    }
}
