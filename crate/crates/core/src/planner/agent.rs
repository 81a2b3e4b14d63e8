use super::action::PlannerAction;
use super::episode::Episode;
use super::explorer::ScriptedExplorer;

/// Anything that picks planner commands for a live episode.
pub trait PlannerAgent {
    fn act(&mut self, ep: &Episode) -> PlannerAction;
}

impl PlannerAgent for ScriptedExplorer {
    fn act(&mut self, ep: &Episode) -> PlannerAction {
        ScriptedExplorer::act(self, ep)
    }
}

/// Replays a fixed command sequence, answering once it runs out.
#[derive(Clone, Debug)]
pub struct ScriptedSequence {
    actions: Vec<PlannerAction>,
    next: usize,
}

impl ScriptedSequence {
    pub fn new(actions: Vec<PlannerAction>) -> Self {
        ScriptedSequence { actions, next: 0 }
    }
}

impl PlannerAgent for ScriptedSequence {
    fn act(&mut self, _ep: &Episode) -> PlannerAction {
        let a = self
            .actions
            .get(self.next)
            .copied()
            .unwrap_or(PlannerAction::Answer);
        self.next += 1;
        a
    }
}
