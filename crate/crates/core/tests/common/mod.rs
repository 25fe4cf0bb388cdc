//! Seeded random instances shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use mapf_core::{Agent, Cell, GridMap, Instance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `w × h` map with each cell blocked with probability `density`.
pub fn random_map(rng: &mut ChaCha8Rng, w: u32, h: u32, density: f64) -> GridMap {
    let mut map = GridMap::open(w, h);
    for y in 0..h {
        for x in 0..w {
            if rng.gen_bool(density) {
                map.set_blocked(Cell::new(x, y), true);
            }
        }
    }
    map
}

/// `k` agents with distinct starts and distinct goals, each goal reachable
/// from its start. Retries fresh draws until the instance is valid.
pub fn random_agents(rng: &mut ChaCha8Rng, map: &GridMap, k: usize) -> Option<Instance> {
    let cells: Vec<Cell> = map.passable_cells().collect();
    if cells.len() < k {
        return None;
    }
    for _ in 0..200 {
        let starts: Vec<Cell> = cells.choose_multiple(rng, k).copied().collect();
        let goals: Vec<Cell> = cells.choose_multiple(rng, k).copied().collect();
        let agents = starts
            .into_iter()
            .zip(goals)
            .map(|(start, goal)| Agent { start, goal })
            .collect();
        if let Ok(i) = Instance::new(map.clone(), agents) {
            return Some(i);
        }
    }
    None
}

pub fn random_instance(seed: u64, w: u32, h: u32, density: f64, k: usize) -> Instance {
    let mut r = rng(seed);
    loop {
        let map = random_map(&mut r, w, h, density);
        if let Some(i) = random_agents(&mut r, &map, k) {
            return i;
        }
    }
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}
