mod common;

use std::collections::BTreeMap;

use gridqa_core::classes::ObjectClass;
use gridqa_core::questions::{
    answer_of, eligible_sites, generate_configuration, generate_dataset, items_per_room,
    verify_balance, Constraints, Dataset, DatasetOptions, QuestionType, Split,
};
use gridqa_core::rooms::{kitchen_suite, small_suite};
use gridqa_core::world::{load_scene, Location};

use common::{placement_answer, rng};

#[test]
fn full_scale_dataset_has_the_expected_counts_and_balance() {
    let (rooms, split) = kitchen_suite(1);
    assert_eq!((split.train.len(), split.test.len()), (25, 5));
    let started = std::time::Instant::now();
    let ds = generate_dataset(
        &rooms,
        &split,
        &DatasetOptions {
            seed: 7,
            scale: 1.0,
            seen_split: false,
        },
    )
    .unwrap();
    let report = verify_balance(&ds.items).unwrap();
    for q in QuestionType::ALL {
        assert_eq!(report.count(Split::Train, q), 25_600, "{q}");
        assert_eq!(report.count(Split::Test, q), 640, "{q}");
    }
    assert_eq!(report.split_total(Split::Train), 76_800);
    assert_eq!(report.split_total(Split::Test), 1_920);
    eprintln!(
        "generated {} items in {:.1?}",
        ds.items.len(),
        started.elapsed()
    );
}

#[test]
fn every_item_answer_is_confirmed_by_an_independent_count() {
    for (rooms, split) in [kitchen_suite(3), small_suite(3)] {
        let ds = generate_dataset(
            &rooms,
            &split,
            &DatasetOptions {
                seed: 11,
                scale: 1.0 / 16.0,
                seen_split: true,
            },
        )
        .unwrap();
        let by_id: BTreeMap<_, _> = rooms.iter().map(|r| (r.room_id.as_str(), r)).collect();
        for it in &ds.items {
            let room = by_id[it.config.room_id.as_str()];
            load_scene(room, &it.config).unwrap();
            assert_eq!(
                placement_answer(room, &it.config, &it.question),
                it.answer,
                "{}",
                it.item_id
            );
            assert_eq!(answer_of(room, &it.config, &it.question), it.answer);
            assert!(room.free_cells().contains(&it.config.start.cell));
        }
        verify_balance(&ds.items).unwrap();
    }
}

#[test]
fn scaled_counts_round_up_to_balanced_blocks() {
    for scale in [1.0, 0.5, 1.0 / 16.0, 1.0 / 64.0, 1e-4] {
        for q in QuestionType::ALL {
            let n = items_per_room(1024, scale, q);
            assert_eq!(n % q.num_choices(), 0);
            assert!(n as f64 >= 1024.0 * scale);
            assert!(n as f64 - 1024.0 * scale < (q.num_choices() + 1) as f64);
        }
    }
    assert_eq!(items_per_room(128, 1.0 / 64.0, QuestionType::Counting), 4);
    assert_eq!(items_per_room(128, 1.0 / 64.0, QuestionType::Existence), 2);
}

#[test]
fn generation_is_deterministic_and_survives_a_disk_round_trip() {
    let (rooms, split) = small_suite(5);
    let opts = DatasetOptions {
        seed: 3,
        scale: 1.0 / 32.0,
        seen_split: true,
    };
    let a = generate_dataset(&rooms, &split, &opts).unwrap();
    let b = generate_dataset(&rooms, &split, &opts).unwrap();
    assert_eq!(a, b);
    let other = generate_dataset(&rooms, &split, &DatasetOptions { seed: 4, ..opts }).unwrap();
    assert_ne!(a.items, other.items);

    let dir = tempfile::tempdir().unwrap();
    let manifest = a.write_dir(dir.path()).unwrap();
    assert_eq!(manifest.counts, verify_balance(&a.items).unwrap().counts);
    assert_eq!(Dataset::read_dir(dir.path()).unwrap(), a);
}

#[test]
fn splits_use_their_own_rooms() {
    let (rooms, split) = small_suite(6);
    let ds = generate_dataset(
        &rooms,
        &split,
        &DatasetOptions {
            seed: 1,
            scale: 1.0 / 64.0,
            seen_split: true,
        },
    )
    .unwrap();
    for it in &ds.items {
        let id = &it.config.room_id;
        match it.split {
            Split::Train | Split::Seen => assert!(split.train.contains(id)),
            Split::Test => assert!(split.test.contains(id)),
        }
    }
    let train: Vec<_> = ds.split(Split::Train).map(|i| &i.config).collect();
    assert!(ds.split(Split::Seen).all(|i| !train.contains(&&i.config)));
}

/// Chi-square statistic of `counts` against a uniform expectation.
fn chi_square(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Upper 0.1% quantile of chi-square with `df` degrees of freedom
/// (Wilson-Hilferty).
fn chi_square_critical(df: usize) -> f64 {
    let k = df as f64;
    let z = 3.09;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

#[test]
fn single_objects_land_uniformly_over_eligible_sites() {
    let (rooms, _) = kitchen_suite(2);
    let mut r = rng(51);
    for room in rooms.iter().take(5) {
        let sites = eligible_sites(room);
        let locations: Vec<Location> = sites.iter().map(|s| s.location(room)).collect();
        let mut counts = vec![0usize; sites.len()];
        let draws = 400 * sites.len();
        for _ in 0..draws {
            let cfg =
                generate_configuration(room, &Constraints::exactly(ObjectClass::Apple, 1), &mut r)
                    .unwrap();
            assert_eq!(cfg.placements.len(), 1);
            let i = locations
                .iter()
                .position(|&l| l == cfg.placements[0].location)
                .unwrap();
            counts[i] += 1;
        }
        let stat = chi_square(&counts);
        assert!(
            stat < chi_square_critical(sites.len() - 1),
            "{}: chi2 {stat:.1} {counts:?}",
            room.room_id
        );
    }
}

#[test]
fn start_poses_are_uniform_over_free_cells() {
    let (rooms, _) = small_suite(2);
    let room = &rooms[0];
    let free = room.free_cells();
    let mut r = rng(52);
    let mut counts = vec![0usize; free.len()];
    for _ in 0..200 * free.len() {
        let cfg = generate_configuration(room, &Constraints::default(), &mut r).unwrap();
        counts[free.iter().position(|&c| c == cfg.start.cell).unwrap()] += 1;
    }
    assert!(chi_square(&counts) < chi_square_critical(free.len() - 1));
}
