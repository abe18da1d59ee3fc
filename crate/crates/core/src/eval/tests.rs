use super::*;
use crate::datagen::{gen_moving_block, random_orthonormal, simulate, BlockSupportConfig, Scenario};
use ndarray::{array, concatenate, s, Array2, Axis};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn seq(m: Array2<f64>) -> FrameSequence {
    FrameSequence::new(m)
}

#[test]
fn nmse_trivial_cases() {
    let s = seq(array![[1.0, 0.0], [2.0, 3.0]]);
    let zero = seq(Array2::zeros((2, 2)));
    let double = seq(s.matrix().mapv(|x| 2.0 * x));
    assert_eq!(nmse_matrix(std::slice::from_ref(&s), std::slice::from_ref(&s)).unwrap(), 0.0);
    assert_eq!(nmse_matrix(std::slice::from_ref(&s), std::slice::from_ref(&zero)).unwrap(), 1.0);
    assert_eq!(nmse_matrix(std::slice::from_ref(&s), std::slice::from_ref(&double)).unwrap(), 1.0);
    assert!(matches!(nmse_matrix(std::slice::from_ref(&zero), std::slice::from_ref(&s)), Err(Error::ZeroEnergy)));
    assert!(nmse_matrix(std::slice::from_ref(&s), &[]).is_err());
    assert!(nmse_matrix(std::slice::from_ref(&s), &[seq(Array2::zeros((2, 3)))]).is_err());
}

#[test]
fn nmse_pools_energy_across_realizations() {
    let a = seq(array![[1.0]]);
    let b = seq(array![[3.0]]);
    let v = nmse_matrix(&[a.clone(), b.clone()], &[seq(array![[0.0]]), b]).unwrap();
    assert_eq!(v, 1.0 / 10.0);
}

#[test]
fn nmse_per_frame_cases() {
    let s = seq(array![[1.0, 0.0, 2.0], [1.0, 0.0, 0.0]]);
    let same = nmse_per_frame(&s, &s).unwrap();
    assert_eq!(same.per_frame, vec![0.0, 0.0, 0.0]);
    let zero = nmse_per_frame(&s, &seq(Array2::zeros((2, 3)))).unwrap();
    assert_eq!(zero.per_frame, vec![1.0, 0.0, 1.0]);
    let double = nmse_per_frame(&s, &seq(s.matrix().mapv(|x| 2.0 * x))).unwrap();
    assert_eq!(double.per_frame, vec![1.0, 0.0, 1.0]);
    assert!((double.aggregate - 2.0 / 3.0).abs() < 1e-15);
    // A spurious detection on a sparse-free frame has infinite relative error.
    let spurious = nmse_per_frame(&s, &seq(array![[1.0, 1.0, 2.0], [1.0, 0.0, 0.0]])).unwrap();
    assert!(spurious.per_frame[1].is_infinite());
}

#[test]
fn constant_sequence_has_zero_change_ratio() {
    let mut m = Array2::zeros((4, 10));
    m.row_mut(2).fill(3.0);
    let r = verify_slow_subspace_change(&seq(m), 3, 95.0).unwrap();
    assert_eq!(r.start, 3);
    assert_eq!(r.len(), 7);
    assert!(r.per_frame.iter().all(|&v| v < 1e-15), "{:?}", r.per_frame);
}

#[test]
fn orthogonal_second_window_has_unit_ratio() {
    let mut m = Array2::zeros((3, 8));
    for t in 0..4 {
        m[[0, t]] = 1.0 + t as f64;
        m[[1, t + 4]] = 2.0 - t as f64 * 0.1;
    }
    let r = verify_slow_subspace_change(&seq(m), 4, 95.0).unwrap();
    for v in &r.per_frame {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn change_ratio_needs_two_windows() {
    assert!(verify_slow_subspace_change(&seq(Array2::ones((2, 5))), 3, 95.0).is_err());
    assert!(verify_slow_subspace_change(&seq(Array2::ones((2, 5))), 0, 95.0).is_err());
}

#[test]
fn change_ratio_matches_true_subspace_on_generated_data() {
    // At b = 99.99 the pre-change window basis spans exactly the true P_0, so
    // the series must equal the projection residual computed with P_0 itself.
    let data = simulate(Scenario::Table1 { support_len: 9, magnitude: 100.0 }, 3, 220).unwrap();
    let all = concatenate(Axis(1), &[data.train.matrix(), data.l_true.matrix()]).unwrap();
    let tau = 200;
    let t1 = data.t_change - 1;
    let start = t1 - tau - 10;
    let l = seq(all.slice(s![.., start..start + 2 * tau]).to_owned());
    let r = verify_slow_subspace_change(&l, tau, 99.99).unwrap();
    let p0 = data.p0.matrix();
    for (i, &v) in r.per_frame.iter().enumerate() {
        let x = l.frame(tau + i);
        let resid = &x - &p0.dot(&p0.t().dot(&x));
        let oracle = (resid.dot(&resid) / x.dot(&x)).sqrt();
        assert!((v - oracle).abs() < 1e-8, "frame {i}: {v} vs {oracle}");
    }
    // Before the change the residual is round-off; after it, the new directions show.
    assert!(r.per_frame[..10].iter().all(|&v| v < 1e-10));
    assert!(r.per_frame[10..].iter().all(|&v| v > 1e-3));
}

#[test]
fn denseness_trivial_cases() {
    let e1 = BasisMatrix::new(array![[1.0], [0.0], [0.0]]).unwrap();
    let r = verify_denseness(&e1, &[SupportSet::block(0, 1), SupportSet::block(1, 2)]).unwrap();
    assert_eq!(r.per_frame, vec![1.0, 0.0]);

    let n = 16;
    let dense = BasisMatrix::new(Array2::from_elem((n, 1), 1.0 / (n as f64).sqrt())).unwrap();
    let r = verify_denseness(&dense, &[SupportSet::block(3, 4)]).unwrap();
    assert!((r.per_frame[0] - (4.0f64 / 16.0).sqrt()).abs() < 1e-15);
    assert!(verify_denseness(&dense, &[SupportSet::block(15, 2)]).is_err());
}

#[test]
fn denseness_of_random_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = BasisMatrix::new(random_orthonormal(100, 20, &mut rng)).unwrap();
    let supports: Vec<SupportSet> = (0..50).map(|k| SupportSet::block(k, 9)).collect();
    let r = verify_denseness(&p, &supports).unwrap();
    for (t, v) in r.iter() {
        let oracle = (0..20)
            .map(|i| (t..t + 9).map(|j| p.matrix()[[j, i]].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert_eq!(v, oracle);
        assert!(v <= 1.0);
    }
}

#[test]
fn windowed_denseness_uses_window_basis() {
    let a = BasisMatrix::new(array![[1.0], [0.0]]).unwrap();
    let b = BasisMatrix::new(array![[0.0], [1.0]]).unwrap();
    let supports = vec![SupportSet::block(0, 1); 5];
    let r = verify_denseness_windows(&[a, b], 2, &supports).unwrap();
    assert_eq!(r.per_frame, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn support_dynamics_cases() {
    let stat = vec![SupportSet::block(2, 3); 4];
    let d = verify_support_dynamics(&stat, 10).unwrap();
    assert_eq!(d.size.per_frame, vec![0.3; 4]);
    assert_eq!(d.added.per_frame, vec![0.0; 3]);
    assert_eq!(d.removed.per_frame, vec![0.0; 3]);
    assert_eq!(d.added.start, 1);

    let disjoint = vec![SupportSet::block(0, 2), SupportSet::block(2, 2), SupportSet::block(4, 2)];
    let d = verify_support_dynamics(&disjoint, 6).unwrap();
    assert_eq!(d.added.per_frame, vec![1.0, 1.0]);
    assert_eq!(d.removed.per_frame, vec![1.0, 1.0]);

    assert!(verify_support_dynamics(&stat[..1], 10).is_err());
}

#[test]
fn block_generator_changes_at_most_one_entry_each_way() {
    let out = gen_moving_block(&BlockSupportConfig::default(), 500).unwrap();
    let d = verify_support_dynamics(&out.supports, 100).unwrap();
    for (t, (a, r)) in d.added.per_frame.iter().zip(&d.removed.per_frame).enumerate() {
        let len = out.supports[t + 1].len() as f64;
        assert!(a * len <= 1.0 + 1e-12 && r * len <= 1.0 + 1e-12);
    }
}

#[test]
fn reports_csv_aligns_on_frame_index() {
    let a = MetricReport::mean_of("a", 0, vec![1.0, 2.0]);
    let b = MetricReport::mean_of("b", 1, vec![0.5]);
    let mut out = Vec::new();
    write_reports_csv(&mut out, &[&a, &b]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "t,a,b\n0,1,\n1,2,0.5\n");
    assert_eq!(a.aggregate, 1.5);
}

#[test]
fn interval_means_cover_finished_steps() {
    // Frames 11..=20 follow a 10-frame training prefix; intervals of 3 from t̂ = 10.
    let beta: Vec<f64> = (11..=20).map(|t| t as f64).collect();
    let m = interval_means(&beta, 10, 10, 3, None);
    assert_eq!(m, vec![11.5, 14.0, 17.0]);
    assert_eq!(interval_means(&beta, 10, 10, 3, Some(2)), vec![11.5, 14.0]);
    assert!(interval_means(&beta, 10, 25, 3, None).is_empty());
}

#[test]
fn benchmark_is_ordered_and_thread_independent() {
    let mut cfg = BenchConfig::new(Scenario::Table1 { support_len: 9, magnitude: 100.0 });
    cfg.realizations = 3;
    cfg.post_frames = 25;
    cfg.seed = 11;
    cfg.threads = Some(1);
    let one = run_benchmark(&cfg).unwrap();
    cfg.threads = Some(3);
    let three = run_benchmark(&cfg).unwrap();
    assert_eq!(one.nmse, three.nmse);
    for (i, (a, b)) in one.results.iter().zip(&three.results).enumerate() {
        assert_eq!(a.index, i);
        assert_eq!(a.seed, 11 + i as u64);
        assert_eq!(a.nmse_per_frame, b.nmse_per_frame);
        assert_eq!(a.beta, b.beta);
    }
    let err: f64 = one.results.iter().map(|r| r.err_energy).sum();
    let energy: f64 = one.results.iter().map(|r| r.signal_energy).sum();
    assert_eq!(one.nmse, err / energy);

    let mut csv = Vec::new();
    one.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("scenario,realization,seed,nmse"));
    let mut frames = Vec::new();
    one.write_frames_csv(&mut frames).unwrap();
    assert_eq!(String::from_utf8(frames).unwrap().lines().count(), 1 + 3 * 25);
    assert!(one.table_row().starts_with("table1-9-large realizations=3"));
}

#[test]
fn benchmark_matches_direct_run() {
    let scenario = Scenario::Table1 { support_len: 27, magnitude: 100.0 };
    let mut cfg = BenchConfig::new(scenario);
    cfg.realizations = 1;
    cfg.post_frames = 10;
    cfg.seed = 5;
    let report = run_benchmark(&cfg).unwrap();
    let data = simulate(scenario, 5, 10).unwrap();
    let run = separate_simulated(&data, cfg.engine_params(), cfg.mode, None).unwrap();
    assert_eq!(report.nmse, nmse_matrix(&[data.s_true], &[run.s_hat]).unwrap());
}

#[test]
fn benchmark_rejects_bad_config() {
    let mut cfg = BenchConfig::new(Scenario::LakeLikeMotion);
    cfg.realizations = 0;
    assert!(run_benchmark(&cfg).is_err());
    cfg.realizations = 1;
    cfg.compression = Some(1.5);
    assert!(run_benchmark(&cfg).is_err());
}

proptest! {
    #[test]
    fn support_dynamics_partition(
        sets in proptest::collection::vec(proptest::collection::btree_set(0usize..30, 0..12), 2..8)
    ) {
        let supports: Vec<SupportSet> = sets
            .iter()
            .map(|s| SupportSet::new(s.iter().copied().collect(), 30).unwrap())
            .collect();
        let d = verify_support_dynamics(&supports, 30).unwrap();
        for t in 1..supports.len() {
            let (cur, prev) = (&supports[t], &supports[t - 1]);
            let added = cur.difference_len(prev);
            prop_assert_eq!(added + cur.intersection_len(prev), cur.len());
            if !cur.is_empty() {
                prop_assert!((d.added.per_frame[t - 1] * cur.len() as f64 - added as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn nmse_of_scaled_estimate(scale in -3.0f64..3.0, vals in proptest::collection::vec(-5.0f64..5.0, 6)) {
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
        let s = seq(Array2::from_shape_vec((3, 2), vals).unwrap());
        let est = seq(s.matrix().mapv(|x| scale * x));
        let v = nmse_matrix(&[s], &[est]).unwrap();
        prop_assert!((v - (1.0 - scale).powi(2)).abs() < 1e-9);
    }
}
