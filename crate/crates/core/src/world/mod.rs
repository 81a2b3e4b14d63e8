//! Deterministic grid-house environment: scene state, low-level actions,
//! the symbolic visibility model and ground-truth affordances.
//!
//! The world is a 2-D grid of 25 cm cells. The agent has a 4-way heading and
//! a 3-way camera pitch. What it sees is decided by a 90 degree frustum, a
//! pitch-dependent distance window, Bresenham occlusion and height bands:
//! receptacle contents and surfaces only show up when the camera pitch
//! matches the receptacle's band.

mod action;
mod observe;
mod scene;

pub use action::{
    apply_action, interaction_target, valid_low_level, ActionOutcome, InvalidReason,
    LowLevelAction, World,
};
pub use observe::{
    cell_visible, in_view_cone, in_view_window, line_of_sight, observe, visible_cells, Observation,
    SeenObject, SeenReceptacle, VisibleCell,
};
pub use scene::{
    load_scene, load_scene_with, AgentState, FloorObject, Location, ObjectInstance, Placement,
    Receptacle, ReceptacleSpec, RoomSpec, Scene, SceneConfig, SceneDocument, SceneError,
    ViewParams, SCHEMA_VERSION,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{HeightBand, ObjectClass, ReceptacleClass};
    use crate::geom::{Cell, Heading, Pitch};

    fn fridge_room(band: HeightBand) -> (RoomSpec, SceneConfig) {
        let mut room = RoomSpec::empty("k", 10, 10);
        room.receptacles.push(ReceptacleSpec {
            class: ReceptacleClass::Fridge,
            cell: Cell::new(5, 2),
            height_band: Some(band),
            open: false,
        });
        let mut cfg = SceneConfig::empty(&room);
        cfg.placements.push(Placement {
            instance_id: 1,
            class: ObjectClass::Apple,
            location: Location::Inside(0),
        });
        (room, cfg)
    }

    #[test]
    fn rotate_left_from_north_faces_west() {
        let room = RoomSpec::empty("r", 11, 11);
        let mut scene = load_scene(&room, &SceneConfig::empty(&room)).unwrap();
        let agent = AgentState::new(Cell::new(5, 5), Heading::N, Pitch::Level);
        let (next, out) = apply_action(&mut scene, agent, LowLevelAction::RotateLeft);
        assert_eq!(next.heading, Heading::W);
        assert_eq!(out, ActionOutcome::Success);
    }

    #[test]
    fn move_into_wall_is_blocked_no_op() {
        let room = RoomSpec::empty("r", 5, 5);
        let mut scene = load_scene(&room, &SceneConfig::empty(&room)).unwrap();
        let agent = AgentState::new(Cell::new(1, 1), Heading::N, Pitch::Level);
        let (next, out) = apply_action(&mut scene, agent, LowLevelAction::MoveAhead);
        assert_eq!(next, agent);
        assert_eq!(out, ActionOutcome::Invalid(InvalidReason::Blocked));
        let mask = valid_low_level(&scene, &agent);
        assert!(!mask[0] && mask[1] && mask[2]);
    }

    #[test]
    fn pitch_clamps_at_bounds() {
        let room = RoomSpec::empty("r", 5, 5);
        let mut scene = load_scene(&room, &SceneConfig::empty(&room)).unwrap();
        let agent = AgentState::new(Cell::new(2, 2), Heading::N, Pitch::Up);
        let (next, out) = apply_action(&mut scene, agent, LowLevelAction::LookUp);
        assert_eq!(next.pitch, Pitch::Up);
        assert_eq!(out, ActionOutcome::Invalid(InvalidReason::PitchLimit));
    }

    #[test]
    fn open_beyond_one_metre_is_out_of_range() {
        let (room, cfg) = fridge_room(HeightBand::Mid);
        let mut scene = load_scene(&room, &cfg).unwrap();
        // fridge at (5,2); agent 5 cells south facing it (1.25 m)
        let agent = AgentState::new(Cell::new(5, 7), Heading::N, Pitch::Level);
        let (_, out) = apply_action(&mut scene, agent, LowLevelAction::Open);
        assert_eq!(out, ActionOutcome::Invalid(InvalidReason::OutOfRange));
        let mask = valid_low_level(&scene, &agent);
        assert!(!mask[5] && !mask[6]);
    }

    #[test]
    fn open_prefers_receptacle_nearest_view_axis() {
        let mut room = RoomSpec::empty("two", 12, 12);
        // agent at (5,9) facing N; cabinet A at forward 3 lateral 1 (18.4 deg),
        // cabinet B at forward 2 lateral -1 (26.6 deg)
        for cell in [Cell::new(6, 6), Cell::new(4, 7)] {
            room.receptacles.push(ReceptacleSpec {
                class: ReceptacleClass::Cabinet,
                cell,
                height_band: Some(HeightBand::Mid),
                open: false,
            });
        }
        let mut scene = load_scene(&room, &SceneConfig::empty(&room)).unwrap();
        let agent = AgentState::new(Cell::new(5, 9), Heading::N, Pitch::Level);
        assert!(cell_visible(&scene, &agent, Cell::new(6, 6)));
        assert!(cell_visible(&scene, &agent, Cell::new(4, 7)));
        let (_, out) = apply_action(&mut scene, agent, LowLevelAction::Open);
        assert!(out.is_success());
        assert!(scene.receptacles[0].is_open);
        assert!(!scene.receptacles[1].is_open);
        // second open takes the remaining closed one
        let (_, out) = apply_action(&mut scene, agent, LowLevelAction::Open);
        assert!(out.is_success());
        assert!(scene.receptacles[1].is_open);
        let (_, out) = apply_action(&mut scene, agent, LowLevelAction::Open);
        assert_eq!(out, ActionOutcome::Invalid(InvalidReason::AlreadyOpen));
    }

    #[test]
    fn closed_fridge_hides_apple_until_opened() {
        let (room, cfg) = fridge_room(HeightBand::Low);
        let mut scene = load_scene(&room, &cfg).unwrap();
        let agent = AgentState::new(Cell::new(5, 3), Heading::N, Pitch::Down);
        let obs = observe(&scene, &agent);
        assert!(obs
            .visible_receptacles
            .iter()
            .any(|r| r.class == ReceptacleClass::Fridge));
        assert!(obs.visible_objects.is_empty());

        let (agent, out) = apply_action(&mut scene, agent, LowLevelAction::Open);
        assert!(out.is_success());
        let opened = observe(&scene, &agent);
        assert_eq!(
            opened.visible_objects,
            vec![SeenObject {
                class: ObjectClass::Apple,
                cell: Cell::new(5, 2),
                receptacle: Some(0)
            }]
        );

        let (agent, out) = apply_action(&mut scene, agent, LowLevelAction::Close);
        assert!(out.is_success());
        assert_eq!(observe(&scene, &agent), obs);
    }

    #[test]
    fn contents_need_matching_pitch() {
        let (room, mut cfg) = fridge_room(HeightBand::High);
        cfg.placements[0].location = Location::Inside(0);
        let mut scene = load_scene(&room, &cfg).unwrap();
        scene.receptacles[0].is_open = true;
        // 4 cells straight ahead: visible at every pitch
        for (pitch, expect) in [(Pitch::Down, 0), (Pitch::Level, 0), (Pitch::Up, 1)] {
            let agent = AgentState::new(Cell::new(5, 6), Heading::N, pitch);
            let obs = observe(&scene, &agent);
            assert!(obs.sees(Cell::new(5, 2)));
            assert_eq!(obs.visible_objects.len(), expect, "pitch {pitch:?}");
        }
    }
}
