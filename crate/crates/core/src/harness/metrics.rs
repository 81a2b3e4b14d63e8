use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::questions::{QuestionType, Split};

use super::runner::EpisodeRecord;

/// Which rooms a record was evaluated in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    All,
    Seen,
    Unseen,
}

impl Slice {
    pub fn of(split: Split) -> Slice {
        match split {
            Split::Test => Slice::Unseen,
            Split::Train | Split::Seen => Slice::Seen,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Slice::All => "all",
            Slice::Seen => "seen",
            Slice::Unseen => "unseen",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsCell {
    pub episodes: usize,
    pub correct: usize,
    pub primitive_steps: usize,
    pub planner_steps: usize,
    pub invalid: usize,
}

impl MetricsCell {
    fn add(&mut self, r: &EpisodeRecord) {
        self.episodes += 1;
        self.correct += usize::from(r.correct);
        self.primitive_steps += r.primitive_steps;
        self.planner_steps += r.planner_steps;
        self.invalid += r.invalid;
    }

    pub fn accuracy(&self) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        self.correct as f64 / self.episodes as f64
    }

    pub fn mean_length(&self) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        self.primitive_steps as f64 / self.episodes as f64
    }

    pub fn mean_planner_length(&self) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        self.planner_steps as f64 / self.episodes as f64
    }

    /// Invalid commands as a percentage of planner commands.
    pub fn invalid_pct(&self) -> f64 {
        if self.planner_steps == 0 {
            return 0.0;
        }
        100.0 * self.invalid as f64 / self.planner_steps as f64
    }
}

/// Per agent, room slice and question type (`None` = all types).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: BTreeMap<String, BTreeMap<Slice, BTreeMap<Option<QuestionType>, MetricsCell>>>,
}

impl MetricsReport {
    pub fn get(
        &self,
        agent: &str,
        slice: Slice,
        qtype: Option<QuestionType>,
    ) -> Option<&MetricsCell> {
        self.cells.get(agent)?.get(&slice)?.get(&qtype)
    }

    pub fn accuracy(&self, agent: &str, slice: Slice, qtype: Option<QuestionType>) -> f64 {
        self.get(agent, slice, qtype)
            .map_or(0.0, MetricsCell::accuracy)
    }

    pub fn agents(&self) -> impl Iterator<Item = &str> {
        self.cells.keys().map(String::as_str)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "agent,slice,qtype,episodes,accuracy,mean_length,mean_planner_length,invalid_pct\n",
        );
        for (agent, slices) in &self.cells {
            for (slice, types) in slices {
                for (q, c) in types {
                    let _ = writeln!(
                        out,
                        "{agent},{},{},{},{:.6},{:.3},{:.3},{:.4}",
                        slice.name(),
                        q.map_or("all", |q| q.name()),
                        c.episodes,
                        c.accuracy(),
                        c.mean_length(),
                        c.mean_planner_length(),
                        c.invalid_pct()
                    );
                }
            }
        }
        out
    }

    /// Accuracy per question type plus length and invalid rate, one row
    /// per agent, for the given slice.
    pub fn table(&self, slice: Slice) -> String {
        let agents: Vec<&str> = self.agents().collect();
        self.table_for(slice, &agents)
    }

    /// Like [`MetricsReport::table`], with rows in the given agent order.
    pub fn table_for(&self, slice: Slice, agents: &[&str]) -> String {
        let mut out = format!(
            "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "agent", "exist", "count", "spatial", "all", "length", "invalid%"
        );
        for &agent in agents {
            let Some(types) = self.cells.get(agent).and_then(|s| s.get(&slice)) else {
                continue;
            };
            let acc = |q: Option<QuestionType>| {
                types
                    .get(&q)
                    .map_or("-".to_string(), |c| format!("{:.2}", 100.0 * c.accuracy()))
            };
            let all = types.get(&None).cloned().unwrap_or_default();
            let _ = writeln!(
                out,
                "{:<28} {:>9} {:>9} {:>9} {:>9} {:>9.1} {:>9.2}",
                agent,
                acc(Some(QuestionType::Existence)),
                acc(Some(QuestionType::Counting)),
                acc(Some(QuestionType::SpatialRelationship)),
                acc(None),
                all.mean_length(),
                all.invalid_pct()
            );
        }
        out
    }
}

pub fn compute_metrics(records: &[EpisodeRecord]) -> MetricsReport {
    let mut report = MetricsReport::default();
    for r in records {
        let slices = report.cells.entry(r.agent.clone()).or_default();
        for slice in [Slice::All, Slice::of(r.split)] {
            let types = slices.entry(slice).or_default();
            types.entry(Some(r.qtype)).or_default().add(r);
            types.entry(None).or_default().add(r);
        }
    }
    report
}
