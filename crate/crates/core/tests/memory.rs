mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use gridqa_core::controllers::{detect, DetectorModel};
use gridqa_core::geom::{Cell, Heading, Pose};
use gridqa_core::memory::{
    coverage_fraction, integrate_observation, read_window, write_window, MemoryConfig,
    SpatialMemory, COVERAGE, NUM_CHANNELS,
};
use gridqa_core::world::observe;

use common::{changed_cells, footprint, random_pose, random_scene, rng};

fn arb_memory() -> impl Strategy<Value = SpatialMemory> {
    (3usize..21, 3usize..21).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f32..=1.0, h * w * NUM_CHANNELS)
            .prop_map(move |data| SpatialMemory::from_raw(h, w, data))
    })
}

fn arb_pose(h: usize, w: usize) -> impl Strategy<Value = Pose> {
    (-2..w as i32 + 2, -2..h as i32 + 2, 0usize..4)
        .prop_map(|(x, y, k)| Pose::new(Cell::new(x, y), Heading::ALL[k]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn window_writes_stay_inside_footprint(
        (mem, pose, size, values) in arb_memory().prop_flat_map(|m| {
            let (h, w) = (m.height(), m.width());
            (Just(m), arb_pose(h, w), (0usize..5).prop_map(|k| 2 * k + 1))
                .prop_flat_map(|(m, p, s)| {
                    (Just(m), Just(p), Just(s), prop::collection::vec(-0.5f32..1.5, s * s * NUM_CHANNELS))
                })
        })
    ) {
        let mut window = read_window(&mem, pose, size);
        window.values = values;
        let mut after = mem.clone();
        write_window(&mut after, &window);
        let fp = footprint(pose, size);
        for c in changed_cells(&mem, &after) {
            prop_assert!(fp.contains(&c), "{c:?} changed outside the window");
        }
        prop_assert!(after.raw().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unchanged_window_round_trips(
        (mem, pose, size) in arb_memory().prop_flat_map(|m| {
            let (h, w) = (m.height(), m.width());
            (Just(m), arb_pose(h, w), (0usize..5).prop_map(|k| 2 * k + 1))
        })
    ) {
        let window = read_window(&mem, pose, size);
        let mut after = mem.clone();
        write_window(&mut after, &window);
        prop_assert_eq!(after.raw(), mem.raw());
    }
}

#[test]
fn twenty_by_twenty_write_changes_at_most_25_cells() {
    let mem = SpatialMemory::new(20, 20);
    let pose = Pose::new(Cell::new(9, 9), Heading::E);
    let mut w = read_window(&mem, pose, 5);
    w.values.iter_mut().for_each(|v| *v = 1.0);
    let mut after = mem.clone();
    write_window(&mut after, &w);
    let changed = changed_cells(&mem, &after);
    assert_eq!(changed.len(), 25);
    assert!(after.cells().count() - changed.len() >= 375);
}

#[test]
fn observations_are_local_bounded_order_free_and_coverage_monotone() {
    let mut r = rng(31);
    let cfg = MemoryConfig::default();
    let noisy = DetectorModel::noisy(0.8, 0.05, 0.2);
    for _ in 0..40 {
        let (_, _, scene) = random_scene(&mut r);
        let mut mem = SpatialMemory::with_coverage_mask(
            scene.height as usize,
            scene.width as usize,
            scene.free_mask(),
        );
        let mut last_cov = 0.0;
        for _ in 0..30 {
            let pose = random_pose(&scene, &mut r);
            let obs = detect(&observe(&scene, &pose), &noisy, &scene, &mut r);
            let before = mem.clone();
            integrate_observation(&mut mem, &obs, &cfg);

            let fp = footprint(pose.pose(), cfg.integration_window);
            for c in changed_cells(&before, &mem) {
                assert!(fp.contains(&c));
            }
            assert!(mem.raw().iter().all(|v| (0.0..=1.0).contains(v)));
            for c in mem.cells() {
                assert!(mem.get(c, COVERAGE) >= before.get(c, COVERAGE));
            }
            let cov = coverage_fraction(&mem);
            assert!(cov >= last_cov);
            last_cov = cov;

            let mut shuffled = obs.clone();
            shuffled.visible_cells.shuffle(&mut r);
            shuffled.visible_objects.shuffle(&mut r);
            shuffled.visible_receptacles.shuffle(&mut r);
            let mut other = before.clone();
            integrate_observation(&mut other, &shuffled, &cfg);
            assert_eq!(other.raw(), mem.raw());
        }
    }
}
