//! Shared fixtures for the benchmarks in `benches/`.

use sat_core::world::GridMap;

/// 50×50 map with a ring wall and four doorways.
pub fn ring_map() -> GridMap {
    let n = 50;
    let mut obstacle = vec![false; n * n];
    for k in 10..40 {
        for (r, c) in [(10, k), (39, k), (k, 10), (k, 39)] {
            let door = (23..27).contains(&k);
            if !door {
                obstacle[r * n + c] = true;
            }
        }
    }
    GridMap::new(n, n, 1.0, obstacle).expect("valid map")
}
