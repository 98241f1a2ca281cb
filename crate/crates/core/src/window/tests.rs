use super::*;
use crate::factors::PriorPowerSpectra;
use crate::lie::{self, Twist};
use crate::solver::LinearFactor;
use crate::state::{NodeState, NodeVector, StateConfig, VectorState};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let l = random_matrix(rng, dim, dim) * 0.3;
    &l * l.transpose() + DMatrix::identity(dim, dim)
}

fn factor(rng: &mut ChaCha8Rng, keys: Vec<GridIndex>, dim: usize) -> LinearFactor {
    LinearFactor {
        a: keys.iter().map(|_| random_matrix(rng, dim, NODE_DOF)).collect(),
        keys,
        z: DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
        info: random_spd(rng, dim),
    }
}

fn random_chain(seed: u64, slices: usize, nodes: usize) -> TabulatedModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = nodes * NODE_DOF;
    let prior_information = random_spd(&mut rng, dim);
    let prior_vector = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let mut slice_factors = Vec::new();
    let mut interval_factors = Vec::new();
    for i in 0..slices {
        let within = (1..nodes)
            .map(|j| factor(&mut rng, vec![GridIndex::new(i, j - 1), GridIndex::new(i, j)], NODE_DOF))
            .collect();
        slice_factors.push(within);
        if i + 1 < slices {
            let mut between: Vec<LinearFactor> = (0..nodes)
                .map(|j| factor(&mut rng, vec![GridIndex::new(i, j), GridIndex::new(i + 1, j)], NODE_DOF))
                .collect();
            let j = rng.random_range(0..nodes);
            between.push(factor(&mut rng, vec![GridIndex::new(i + 1, j)], 6));
            interval_factors.push(between);
        }
    }
    TabulatedModel {
        nodes,
        prior_information,
        prior_vector,
        slice_factors,
        interval_factors,
    }
}

/// Dense information form over slices `0..horizon`, assembled directly.
fn dense_posterior(model: &TabulatedModel, horizon: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = model.nodes;
    let dim = horizon * n * NODE_DOF;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    let p = n * NODE_DOF;
    a.view_mut((0, 0), (p, p)).copy_from(&model.prior_information);
    b.rows_mut(0, p).copy_from(&model.prior_vector);
    let within = model.slice_factors[..horizon].iter().flatten();
    let between = model.interval_factors[..horizon - 1].iter().flatten();
    for f in within.chain(between) {
        let mut h = DMatrix::zeros(f.z.len(), dim);
        for (k, ak) in f.keys.iter().zip(&f.a) {
            let off = (k.time * n + k.node) * NODE_DOF;
            h.view_mut((0, off), (f.z.len(), NODE_DOF)).copy_from(ak);
        }
        a += h.transpose() * &f.info * &h;
        b += h.transpose() * &f.info * &f.z;
    }
    let cov = a.try_inverse().unwrap();
    (&cov * b, cov)
}

fn state_vec(s: &SliceEstimate<VectorState>) -> DVector<f64> {
    DVector::from_iterator(
        s.nodes.len() * NODE_DOF,
        s.nodes.iter().flat_map(|x| x.0.iter().copied()),
    )
}

fn cfg(k: usize) -> SwfConfig {
    SwfConfig {
        window_seconds: (k - 1) as f64 * 0.1,
        dt: 0.1,
        ..Default::default()
    }
}

#[test]
fn window_slices_mapping() {
    let mut c = SwfConfig::default();
    assert_eq!(c.window_slices(), 4);
    c.window_seconds = 0.0;
    assert_eq!(c.window_slices(), 1);
    c.window_seconds = -1.0;
    assert!(c.validate().is_err());
}

#[test]
fn schur_with_zero_coupling_keeps_retained_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = DMatrix::zeros(8, 8);
    a.view_mut((0, 0), (3, 3)).copy_from(&random_spd(&mut rng, 3));
    let arr = random_spd(&mut rng, 5);
    a.view_mut((3, 3), (5, 5)).copy_from(&arr);
    let b = DVector::from_fn(8, |i, _| i as f64);
    let (h, g) = schur_complement(&a, &b, 3).unwrap();
    assert_relative_eq!(h, arr, epsilon = 1e-14);
    assert_relative_eq!(g, b.rows(3, 5).into_owned(), epsilon = 1e-14);
}

#[test]
fn schur_matches_dense_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_spd(&mut rng, 10);
    let b = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
    let (h, g) = schur_complement(&a, &b, 4).unwrap();
    let full_cov = a.clone().try_inverse().unwrap();
    let full_mean = &full_cov * &b;
    let cov_r = h.clone().try_inverse().unwrap();
    assert_relative_eq!(cov_r, full_cov.view((4, 4), (6, 6)).into_owned(), epsilon = 1e-10);
    assert_relative_eq!(&cov_r * g, full_mean.rows(4, 6).into_owned(), epsilon = 1e-10);
}

#[test]
fn schur_rejects_unconstrained_block() {
    let mut a = DMatrix::identity(4, 4);
    a[(0, 0)] = 0.0;
    assert_eq!(
        schur_complement(&a, &DVector::zeros(4), 2).unwrap_err(),
        Error::SingularHmm
    );
}

#[test]
fn marginal_prior_reproduces_quadratic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_spd(&mut rng, 36);
    let g = DVector::from_fn(36, |_, _| rng.random_range(-1.0..1.0));
    let anchor = vec![VectorState::default(); 2];
    let prior = MarginalPrior::new(4, anchor, h.clone(), g.clone()).unwrap();
    let quad = |x: &DVector<f64>| 0.5 * x.dot(&(&h * x)) - g.dot(x);
    let cost = |x: &DVector<f64>| {
        let a = VectorState(NodeVector::from_iterator(x.rows(0, 18).iter().copied()));
        let b = VectorState(NodeVector::from_iterator(x.rows(18, 18).iter().copied()));
        let e = prior.error(&[&a, &b]).unwrap();
        0.5 * e.norm_squared()
    };
    let x1 = DVector::from_fn(36, |_, _| rng.random_range(-1.0..1.0));
    let x2 = DVector::from_fn(36, |_, _| rng.random_range(-1.0..1.0));
    assert_relative_eq!(cost(&x1) - cost(&x2), quad(&x1) - quad(&x2), epsilon = 1e-9);
    assert_eq!(prior.keys()[1], GridIndex::new(4, 1));
}

#[test]
fn semidefinite_prior_uses_spectral_square_root() {
    let mut h = DMatrix::zeros(18, 18);
    h[(0, 0)] = 4.0;
    let mut g = DVector::zeros(18);
    g[0] = 2.0;
    let prior = MarginalPrior::new(0, vec![VectorState::default()], h, g).unwrap();
    let mut x = NodeVector::zeros();
    x[0] = 0.5;
    // Minimum at H⁻¹g = 0.5 along the constrained direction.
    assert!(prior.error(&[&VectorState(x)]).unwrap().norm() < 1e-12);
}

#[test]
fn three_slice_marginalization_matches_dense_marginal() {
    for seed in 0..5 {
        let model = random_chain(seed, 3, 3);
        let (mut w, _) = SlidingWindow::new(model.clone(), cfg(3), 0.0).unwrap();
        w.step(0.1, &[]).unwrap();
        w.step(0.2, &[]).unwrap();
        w.marginalize_oldest().unwrap();
        // Move away from the optimum so the re-solve has work to do.
        let moved: Vec<TimeSlice<VectorState>> = w
            .slices()
            .iter()
            .map(|s| TimeSlice {
                nodes: s.nodes.iter().map(|x| VectorState(x.0.add_scalar(0.3))).collect(),
                ..s.clone()
            })
            .collect();
        w.set_slices(moved).unwrap();
        w.solve().unwrap();
        let (mean, cov) = dense_posterior(&model, 3);
        let p = 3 * NODE_DOF;
        for (k, time) in [1usize, 2].iter().enumerate() {
            let est = w.estimate(*time).unwrap();
            assert_relative_eq!(state_vec(&est), mean.rows(p * (k + 1), p).into_owned(), epsilon = 1e-10);
            for j in 0..3 {
                let off = p * (k + 1) + j * NODE_DOF;
                let dense = cov.view((off, off), (NODE_DOF, NODE_DOF)).into_owned();
                assert_relative_eq!(
                    DMatrix::from_column_slice(18, 18, est.covariances[j].as_slice()),
                    dense,
                    epsilon = 1e-10
                );
            }
        }
    }
}

fn run_linear(model: &TabulatedModel, k: usize, policy: ExtractionPolicy) -> Vec<(usize, SliceEstimate<VectorState>)> {
    let mut c = cfg(k);
    c.policy = policy;
    let (mut w, first) = SlidingWindow::new(model.clone(), c, 0.0).unwrap();
    let mut out: Vec<_> = first.emitted.into_iter().map(|e| (0, e)).collect();
    for i in 1..model.slices() {
        let step = w.step(w.next_timestamp(), &[]).unwrap();
        assert!(w.slices().len() <= k);
        out.extend(step.emitted.into_iter().map(|e| (i, e)));
    }
    let last = model.slices() - 1;
    out.extend(w.finish().unwrap().into_iter().map(|e| (last, e)));
    out
}

#[test]
fn back_extraction_equals_batch_at_that_time() {
    let model = random_chain(11, 7, 2);
    for k in [1, 2, 3, 7, 9] {
        let out = run_linear(&model, k, ExtractionPolicy::Back);
        let indices: Vec<usize> = out.iter().map(|(_, e)| e.index).collect();
        assert_eq!(
            indices,
            (0..7).collect::<Vec<_>>(),
            "every slice reported once, K = {k}"
        );
        for (newest, est) in &out {
            let (mean, cov) = dense_posterior(&model, newest + 1);
            let p = 2 * NODE_DOF;
            assert_relative_eq!(state_vec(est), mean.rows(p * est.index, p).into_owned(), epsilon = 1e-9);
            let off = p * est.index;
            let dense = cov.view((off, off), (NODE_DOF, NODE_DOF)).into_owned();
            assert_relative_eq!(
                DMatrix::from_column_slice(18, 18, est.covariances[0].as_slice()),
                dense,
                epsilon = 1e-9
            );
            if k < 7 && *newest < 6 {
                assert_eq!(newest - est.index, k - 1, "latency is the window length");
            }
        }
    }
}

#[test]
fn full_window_equals_batch() {
    let model = random_chain(12, 6, 2);
    let out = run_linear(&model, 6, ExtractionPolicy::Back);
    let (mean, _) = dense_posterior(&model, 6);
    let bins = vec![Vec::new(); 5];
    let batch = batch_solve(&model, 0.0, 0.1, &bins, None, &GaussNewtonOptions::default()).unwrap();
    for ((_, e), b) in out.iter().zip(&batch.estimates) {
        let p = 2 * NODE_DOF;
        assert_relative_eq!(state_vec(e), mean.rows(p * e.index, p).into_owned(), epsilon = 1e-10);
        assert_relative_eq!(state_vec(e), state_vec(b), epsilon = 1e-10);
        assert_relative_eq!(e.covariances[1], b.covariances[1], epsilon = 1e-10);
    }
}

#[test]
fn filter_window_reports_every_step_and_policies_agree() {
    let model = random_chain(13, 5, 2);
    let back = run_linear(&model, 1, ExtractionPolicy::Back);
    let front = run_linear(&model, 1, ExtractionPolicy::Front);
    assert_eq!(back.len(), 5);
    for ((nb, b), (nf, f)) in back.iter().zip(&front) {
        assert_eq!((nb, b.index), (nf, f.index));
        assert_eq!(b.nodes, f.nodes);
        assert!(b.joint_prev.is_none());
    }
}

#[test]
fn front_policy_reports_newest_with_joint() {
    let model = random_chain(14, 5, 2);
    let front = run_linear(&model, 3, ExtractionPolicy::Front);
    assert_eq!(front.len(), 5);
    for (newest, e) in &front {
        assert_eq!(*newest, e.index);
        assert_eq!(e.joint_prev.is_some(), e.index > 0);
    }
}

#[test]
fn rejects_wrong_timestamp() {
    let model = random_chain(15, 3, 2);
    let (mut w, _) = SlidingWindow::new(model, cfg(2), 0.0).unwrap();
    assert!(matches!(w.step(0.25, &[]), Err(Error::NonMonotonicTimestamp { .. })));
    assert!(w.step(0.1 + 5e-10, &[]).is_ok());
}

#[test]
fn binning_uses_half_open_intervals() {
    let dt = 1.0 / 30.0;
    let stamps = [0.0, 1e-6, dt, dt + 1e-9, 2.0 * dt, 3.0 * dt, 10.0];
    let (bins, dropped) = bin_by_interval(&stamps, |t| *t, 0.0, dt, 4);
    assert_eq!(dropped, 2);
    assert_eq!(bins[0], vec![1e-6, dt]);
    assert_eq!(bins[1], vec![dt + 1e-9, 2.0 * dt]);
    assert_eq!(bins[2], vec![3.0 * dt]);
}

fn robot() -> RobotModel {
    RobotModel::new(StateConfig::default(), PriorPowerSpectra::default())
}

#[test]
fn prediction_of_stationary_slice_is_unchanged() {
    let m = robot();
    let boot = m.bootstrap(0.0).unwrap();
    let prev = TimeSlice {
        index: 0,
        timestamp: 0.0,
        nodes: boot.nodes.clone(),
    };
    let next = m.predict(&prev, 1, 1.0 / 30.0).unwrap();
    for (a, b) in next.iter().zip(&boot.nodes) {
        assert_relative_eq!(a.pose.to_matrix(), b.pose.to_matrix(), epsilon = 1e-14);
    }
}

#[test]
fn prediction_of_rigid_constant_twist_is_consistent() {
    // A rod translating and spinning rigidly: each node moves by its own
    // body twist, and the strain field is unchanged.
    let m = robot();
    let cfg = m.state;
    let base_twist = Twist::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let strain = Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.3);
    let nodes: Vec<NodeState> = (0..cfg.nodes)
        .map(|j| NodeState::new(lie::exp(&(strain * cfg.arc_length(j))), base_twist, strain))
        .collect();
    let prev = TimeSlice {
        index: 0,
        timestamp: 0.0,
        nodes: nodes.clone(),
    };
    let next = m.predict(&prev, 1, cfg.dt).unwrap();
    for (a, b) in next.iter().zip(&nodes) {
        assert_relative_eq!(a.pose.to_matrix(), b.pose.to_matrix(), epsilon = 1e-10);
    }
}

#[test]
fn covariance_grows_without_measurements() {
    let c = SwfConfig {
        window_seconds: 0.1,
        policy: ExtractionPolicy::Front,
        ..Default::default()
    };
    let (mut w, _) = SlidingWindow::new(robot(), c, 0.0).unwrap();
    let mut last = 0.0;
    for _ in 0..6 {
        let out = w.step(w.next_timestamp(), &[]).unwrap();
        let tip = &out.emitted[0].covariances[4];
        let trace = tip.fixed_view::<6, 6>(0, 0).trace();
        assert!(trace > last);
        last = trace;
    }
}

#[test]
fn filter_mode_covariance_query_is_unavailable() {
    let c = SwfConfig {
        window_seconds: 0.0,
        ..Default::default()
    };
    let (mut w, first) = SlidingWindow::new(robot(), c, 0.0).unwrap();
    let mut records = first.emitted;
    for _ in 0..3 {
        records.extend(w.step(w.next_timestamp(), &[]).unwrap().emitted);
    }
    let qc = PriorPowerSpectra::default().time;
    let tau = 0.5 / 30.0;
    assert!(query_mean(&records, tau).is_ok());
    assert!(matches!(
        query_covariance(&records, tau, &qc),
        Err(Error::MissingJointCovariance { .. })
    ));
    // At a slice time the record's own covariance is returned.
    let at = query_covariance(&records, 1.0 / 30.0, &qc).unwrap();
    assert_eq!(at[4], records[1].covariances[4].fixed_view::<12, 12>(0, 0).into_owned());
    assert!(matches!(
        query_mean(&records, 1.0),
        Err(Error::TimestampOutsideInterval { .. })
    ));
    assert_eq!(query_mean(&[], 0.0).unwrap_err(), Error::EmptyOverlap);
}
