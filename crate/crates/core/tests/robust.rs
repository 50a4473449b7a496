mod common;

use common::*;
use nalgebra::Vector2;
use rand::Rng;
use rsstitch_core::robust::{fit_candidates, refit, trial_sample, Model};
use rsstitch_core::solvers::KRange;
use rsstitch_core::{ransac, Correspondence, Pixel, RansacParams, RsParams, SolverKind};

fn mixture(seed: u64, inliers: usize, outliers: usize) -> (Vec<Correspondence>, Vec<usize>, f64) {
    let mut r = rng(seed);
    let h = random_h(&mut r, 3.0, 0.03);
    let k = r.random_range(-1.0..1.0);
    let mut corrs = exact_set(&mut r, &h, k, 1.0, inliers);
    for _ in 0..outliers {
        let p1 = random_pixel(&mut r);
        let p2 = random_pixel(&mut r);
        corrs.push(Correspondence::from_points(p1, p2));
    }
    // shuffle deterministically so inliers are not a prefix
    let mut order: Vec<usize> = (0..corrs.len()).collect();
    for i in (1..order.len()).rev() {
        let j = r.random_range(0..=i);
        order.swap(i, j);
    }
    let shuffled: Vec<_> = order.iter().map(|&i| corrs[i]).collect();
    let mut truth: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|(_, &o)| o < inliers)
        .map(|(i, _)| i)
        .collect();
    truth.sort();
    (shuffled, truth, k)
}

#[test]
fn recovers_inliers_from_half_outliers() {
    let rs = RsParams::new(1.0, H).unwrap();
    for seed in 0..5 {
        let (corrs, truth, k) = mixture(100 + seed, 100, 100);
        let params = RansacParams::new(SolverKind::RsConstAcc)
            .with_threshold(0.5)
            .with_seed(seed);
        let est = ransac(&corrs, SolverKind::RsConstAcc, &params, rs).unwrap();
        assert_eq!(est.inliers, truth);
        assert!((est.model.acceleration().unwrap() - k).abs() < 1e-6);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let rs = RsParams::new(1.0, H).unwrap();
    let (corrs, _, _) = mixture(7, 60, 40);
    let params = RansacParams::new(SolverKind::RsConstAcc)
        .with_threshold(0.5)
        .with_seed(42)
        .with_trials(200);
    let a = ransac(&corrs, SolverKind::RsConstAcc, &params, rs).unwrap();
    let b = ransac(&corrs, SolverKind::RsConstAcc, &params, rs).unwrap();
    assert_eq!(a, b);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = serial.install(|| ransac(&corrs, SolverKind::RsConstAcc, &params, rs).unwrap());
    assert_eq!(a, c);
}

#[test]
fn per_trial_samples_depend_only_on_seed_and_index() {
    assert_eq!(trial_sample(3, 17, 100, 5), trial_sample(3, 17, 100, 5));
    assert_ne!(trial_sample(3, 17, 100, 5), trial_sample(3, 18, 100, 5));
    let s = trial_sample(9, 0, 10, 10);
    let mut sorted = s.clone();
    sorted.sort();
    assert_eq!(sorted, (0..10).collect::<Vec<_>>());
}

fn discrete_scene(r: &mut rand_chacha::ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    let k = intrinsics();
    let rot = nalgebra::Rotation3::new(unit(r) * 4f64.to_radians()).into_inner();
    let t = unit(r) * 0.05;
    let n = nalgebra::Vector3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), 1.0).normalize();
    k * (rot + t * n.transpose()) * k.try_inverse().unwrap()
}

fn map(h: &nalgebra::Matrix3<f64>, p: Pixel) -> Pixel {
    let q = h * p.homogeneous();
    Pixel::new(q.x / q.z, q.y / q.z)
}

#[test]
fn exact_discrete_data_is_all_consensus() {
    let mut r = rng(11);
    let h = discrete_scene(&mut r);
    let corrs: Vec<_> = (0..80)
        .map(|_| {
            let p = random_pixel(&mut r);
            Correspondence::from_points(p, map(&h, p))
        })
        .collect();
    let rs = RsParams::global(H);
    let est = ransac(&corrs, SolverKind::GsDiscrete, &RansacParams::new(SolverKind::GsDiscrete), rs)
        .unwrap();
    assert_eq!(est.inliers.len(), 80);
    for (i, c) in corrs.iter().enumerate() {
        assert_eq!(est.residuals[i], est.model.residual(c));
        assert!(est.residuals[i] <= 1e-9);
    }
}

#[test]
fn consensus_dominance_on_clean_scenes() {
    let rs = RsParams::global(H);
    for scene in 0..100u64 {
        let mut r = rng(1000 + scene);
        let h = discrete_scene(&mut r);
        let n_in = r.random_range(50..80);
        let mut corrs: Vec<_> = (0..n_in)
            .map(|_| {
                let p = random_pixel(&mut r);
                Correspondence::from_points(p, map(&h, p))
            })
            .collect();
        for _ in 0..(100 - n_in) {
            let p = random_pixel(&mut r);
            corrs.push(Correspondence::new(
                p,
                Vector2::new(r.random_range(-80.0..80.0), r.random_range(-80.0..80.0)),
            ));
        }
        let params = RansacParams::new(SolverKind::GsDiscrete).with_seed(scene);
        let est = ransac(&corrs, SolverKind::GsDiscrete, &params, rs).unwrap();
        let expected: Vec<usize> = (0..corrs.len())
            .filter(|&i| i < n_in || est.model.residual(&corrs[i]) <= params.threshold)
            .collect();
        assert!(est.inliers.len() >= n_in, "scene {scene}");
        assert_eq!(est.inliers, expected);
        for &i in &est.inliers {
            assert!(est.model.residual(&corrs[i]) <= params.threshold);
        }
    }
}

#[test]
fn variants_and_refit() {
    let rs = RsParams::new(1.0, H).unwrap();
    let (corrs, truth, k) = mixture(21, 80, 20);
    let more = RansacParams::<f64>::new(SolverKind::GsDiscrete).more_trials();
    assert_eq!(more.trials, 1250);
    let five = RansacParams::new(SolverKind::GsDiscrete).with_sample_size(5);
    assert!(ransac(&corrs, SolverKind::GsDiscrete, &five, rs).is_ok());
    assert!(RansacParams::<f64>::new(SolverKind::RsConstAcc)
        .with_sample_size(4)
        .validate(SolverKind::RsConstAcc)
        .is_err());

    let inl: Vec<_> = truth.iter().map(|&i| corrs[i]).collect();
    let params = RansacParams::new(SolverKind::RsConstAcc).with_threshold(0.5);
    let est = ransac(&corrs, SolverKind::RsConstAcc, &params, rs).unwrap();
    let m = refit(SolverKind::RsConstAcc, &est.model, &inl, rs, KRange::default()).unwrap();
    assert!((m.acceleration().unwrap() - k).abs() < 1e-6);
    for c in &inl {
        assert!(m.residual(c) <= 1e-8);
    }
    let cands = fit_candidates(SolverKind::GsDiff, &inl[..4], rs, KRange::default()).unwrap();
    assert!(matches!(cands[0], Model::Differential(d) if d.rs.gamma == 0.0));
}

#[test]
fn failure_is_reported() {
    let rs = RsParams::new(1.0, H).unwrap();
    let same: Vec<_> = (0..10)
        .map(|_| Correspondence::new(Pixel::new(5.0, 5.0), Vector2::new(1.0, 1.0)))
        .collect();
    let params = RansacParams::new(SolverKind::RsConstAcc).with_trials(10);
    assert!(ransac(&same, SolverKind::RsConstAcc, &params, rs).is_err());
    assert!(ransac(&same[..3], SolverKind::GsDiff, &RansacParams::new(SolverKind::GsDiff), rs).is_err());
}
