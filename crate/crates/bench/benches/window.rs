use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use crswf_bench::measurements;
use crswf_core::window::{bin_by_interval, slice_count, RobotModel};
use crswf_core::{PriorPowerSpectra, SlidingWindow, StateConfig, SwfConfig};

/// One window step (expand, solve, marginalize, extract) in steady state.
fn step(c: &mut Criterion) {
    let duration = 2.0;
    let ms = measurements("fast-contact", duration, 0);
    let mut group = c.benchmark_group("window_step");
    for w in [0.0, 0.1, 0.5] {
        let cfg = SwfConfig {
            window_seconds: w,
            ..Default::default()
        };
        let slices = slice_count(duration, cfg.dt);
        let (bins, _) = bin_by_interval(&ms, |m| m.timestamp, 0.0, cfg.dt, slices);
        // Fill the window first so the timed step includes marginalization.
        let warm = cfg.window_slices() + 2;
        let next = &bins[warm];
        group.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, _| {
            b.iter_batched(
                || {
                    let model = RobotModel::new(StateConfig::default(), PriorPowerSpectra::default());
                    let (mut win, _) = SlidingWindow::new(model, cfg, 0.0).expect("window");
                    for bin in &bins[..warm] {
                        win.step(win.next_timestamp(), bin).expect("step");
                    }
                    win
                },
                |mut win| black_box(win.step(win.next_timestamp(), next).expect("step")),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = step
}
criterion_main!(benches);
