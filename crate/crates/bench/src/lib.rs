//! Fixtures shared by the benchmarks in `benches/`.

use crswf_core::sim::{generate, synthesize, Profile, SensorConfig, TrajectoryConfig};
use crswf_core::solver::BlockSparse;
use crswf_core::state::NODE_DOF;
use crswf_core::Measurement;
use nalgebra::DMatrix;

/// Default sensor stream over `duration` seconds of a named profile.
pub fn measurements(profile: &str, duration: f64, seed: u64) -> Vec<Measurement> {
    let cfg = TrajectoryConfig {
        duration,
        profile: Profile::named(profile).expect("known profile"),
        seed,
        ..Default::default()
    };
    let gt = generate(&cfg).expect("trajectory");
    synthesize(&gt, &SensorConfig::default(), seed).expect("measurements")
}

/// An SPD system with the block pattern of a window: `slices × nodes`
/// blocks, coupled along the rod and to the same node in the next slice.
pub fn window_system(slices: usize, nodes: usize) -> BlockSparse {
    let n = slices * nodes;
    let mut a = BlockSparse::new(n, NODE_DOF);
    let coupling = DMatrix::from_fn(NODE_DOF, NODE_DOF, |r, c| 0.02 / (1.0 + (r + c) as f64));
    let diag = DMatrix::identity(NODE_DOF, NODE_DOF) * 4.0;
    for i in 0..n {
        a.add_block(i, i, &diag);
        let neighbors = [
            (i % nodes + 1 < nodes).then_some(i + 1),
            (i + nodes < n).then_some(i + nodes),
        ];
        for j in neighbors.into_iter().flatten() {
            a.add_block(j, i, &coupling);
        }
    }
    a
}
