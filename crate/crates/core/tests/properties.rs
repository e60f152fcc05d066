use proptest::prelude::*;
use rustfft::num_complex::Complex64;
use speckle_monitor::ablation::{
    ablated_volume, crater_geometry, groove_depth, MaterialSpec, ProcessConstants, ProcessParams, VolumeLabelGrid,
};
use speckle_monitor::dataset::{
    downsample_box, normalize01, one_hot, split_dataset, Image, LabeledSample, NetInput,
};
use speckle_monitor::harness::HarnessConfig;
use speckle_monitor::net::{build_network, logit_lp, NetworkSpec, ConvLayerSpec, PROB_CLAMP};
use speckle_monitor::optics::{
    aperture_field, carve_crater, far_field_intensity, propagate_far_field, synthesize_rough_surface, HeightMap,
    OpticalConfig, RoughnessSpec,
};
use speckle_monitor::tensor::{softmax, softmax_xent, MaxPool2d, Tensor};

const N: usize = 64;
const PITCH: f64 = 0.25;

fn small_optics() -> OpticalConfig {
    OpticalConfig { grid_n: N, beam_waist_um: 3.0, ..OpticalConfig::default() }
}

fn surface(ra_um: f64, corr_len_um: f64, seed: u64) -> HeightMap {
    synthesize_rough_surface(&RoughnessSpec { ra_um, corr_len_um, seed }, N, N, PITCH).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn grid_strategy() -> impl Strategy<Value = VolumeLabelGrid> {
    (2usize..6, 2usize..6)
        .prop_flat_map(|(ne, nn)| {
            (
                prop::collection::vec(0.1f64..3.0, ne),
                prop::collection::vec(1u32..60, nn),
                prop::collection::vec(0.0f64..500.0, ne * nn),
            )
        })
        .prop_map(|(de, dn, vols)| {
            let energies = de.iter().scan(0.5, |acc, d| {
                *acc += d;
                Some(*acc)
            });
            let pulses = dn.iter().scan(0u32, |acc, d| {
                *acc += d;
                Some(*acc)
            });
            VolumeLabelGrid::new(energies.collect(), pulses.collect(), vols).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds_for_any_surface(ra in 0.0f64..2.0, corr in 1.0f64..4.0, seed: u64, cx in -3.0f64..3.0) {
        let cfg = small_optics();
        let field = aperture_field(&surface(ra, corr, seed), &cfg, [cx, 0.5]).unwrap();
        let near: f64 = field.iter().map(|a| a.norm_sqr()).sum();
        let far: f64 = far_field_intensity(&field, N).iter().sum();
        prop_assert!((far - near).abs() <= 1e-6 * near);
    }

    #[test]
    fn constant_offset_leaves_frames_unchanged(seed: u64, c in -20.0f64..20.0) {
        let cfg = small_optics();
        let h = surface(1.0, 2.0, seed);
        let a = propagate_far_field(&h, &cfg, [0.0, 0.0]).unwrap();
        let b = propagate_far_field(&h.offset(c), &cfg, [0.0, 0.0]).unwrap();
        let peak = max_abs(a.grid.data());
        for (x, y) in a.grid.data().iter().zip(b.grid.data()) {
            prop_assert!((x - y).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn circular_shift_keeps_far_field_magnitude(seed: u64, dx in 0usize..N, dy in 0usize..N) {
        let cfg = small_optics();
        let field = aperture_field(&surface(1.0, 2.0, seed), &cfg, [0.0, 0.0]).unwrap();
        let mut shifted = vec![Complex64::new(0.0, 0.0); N * N];
        for r in 0..N {
            for c in 0..N {
                shifted[((r + dy) % N) * N + (c + dx) % N] = field[r * N + c];
            }
        }
        let a = far_field_intensity(&field, N);
        let b = far_field_intensity(&shifted, N);
        let peak = max_abs(&a);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn surfaces_are_seed_deterministic_with_exact_ra(ra in 0.01f64..3.0, corr in 1.0f64..5.0, seed: u64) {
        let a = surface(ra, corr, seed);
        let b = surface(ra, corr, seed);
        prop_assert_eq!(a.grid.data(), b.grid.data());
        prop_assert!((a.ra() - ra).abs() <= 0.02 * ra);
        prop_assert!(a.grid.mean().abs() <= 3.0 * ra);
    }

    #[test]
    fn groove_depth_rises_with_energy_and_falls_with_speed(
        e in 10.0f64..59.0, de in 0.01f64..1.0, v in 1.0f64..3.4, dv in 0.01f64..0.1, m in 0usize..3,
    ) {
        let mat = &HarnessConfig::default().materials[m];
        let consts = ProcessConstants::default();
        let d = |e, v| groove_depth(&ProcessParams::grooving(e, v, 0), mat, &consts).unwrap();
        prop_assert!(d(e + de, v) > d(e, v));
        prop_assert!(d(e, v + dv) < d(e, v));
    }

    #[test]
    fn crater_depth_is_linear_in_pulses(e in 0.6f64..10.0, n in 1u32..400) {
        let si = MaterialSpec::silicon();
        let consts = ProcessConstants::default();
        let one = crater_geometry(&ProcessParams::drilling(e, 1, 0), &si, &consts).unwrap();
        let many = crater_geometry(&ProcessParams::drilling(e, n, 0), &si, &consts).unwrap();
        prop_assert_eq!(many.depth_um, f64::from(n) * one.depth_um);
    }

    #[test]
    fn carved_volume_is_nonnegative(seed: u64, depth in 0.0f64..3.0, radius in 0.5f64..6.0, cx in -20.0f64..20.0) {
        let before = surface(0.5, 2.0, seed);
        let after = carve_crater(&before, depth, radius, [cx, 0.0]).unwrap();
        prop_assert!(ablated_volume(&before, &after).unwrap() >= 0.0);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_bounded(grid in grid_strategy(), u in 0.0f64..1.0, w in 0.0f64..1.0) {
        for (i, &e) in grid.energies().iter().enumerate() {
            for (j, &n) in grid.pulse_counts().iter().enumerate() {
                prop_assert_eq!(grid.interpolate(e, f64::from(n)).unwrap(), grid.volume_at(i, j));
            }
        }
        let es = grid.energies();
        let ns = grid.pulse_counts();
        let e = es[0] + u * (es[es.len() - 1] - es[0]);
        let n = f64::from(ns[0]) + w * f64::from(ns[ns.len() - 1] - ns[0]);
        let v = grid.interpolate(e, n).unwrap();
        let lo = (0..es.len()).flat_map(|i| (0..ns.len()).map(move |j| (i, j))).map(|(i, j)| grid.volume_at(i, j));
        let (min, max) = lo.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        prop_assert!(v >= min - 1e-9 && v <= max + 1e-9);
        prop_assert!(grid.interpolate(es[0] - 0.01, n).is_err());
    }

    #[test]
    fn refining_the_axes_preserves_interpolation(grid in grid_strategy(), u in 0.0f64..1.0, w in 0.0f64..1.0) {
        // Insert energy midpoints whose volumes come from the coarse grid itself.
        let es = grid.energies().to_vec();
        let ns = grid.pulse_counts().to_vec();
        let mut fine_e = Vec::new();
        for k in 0..es.len() {
            fine_e.push(es[k]);
            if k + 1 < es.len() {
                fine_e.push(0.5 * (es[k] + es[k + 1]));
            }
        }
        let mut vols = Vec::new();
        for &e in &fine_e {
            for &n in &ns {
                vols.push(grid.interpolate(e, f64::from(n)).unwrap());
            }
        }
        let fine = VolumeLabelGrid::new(fine_e, ns.clone(), vols).unwrap();
        let e = es[0] + u * (es[es.len() - 1] - es[0]);
        let n = f64::from(ns[0]) + w * f64::from(ns[ns.len() - 1] - ns[0]);
        let (a, b) = (grid.interpolate(e, n).unwrap(), fine.interpolate(e, n).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn normalized_images_lie_in_unit_interval(data in prop::collection::vec(-1e3f64..1e3, 12)) {
        let img = normalize01(&Image::new(4, 3, data).unwrap());
        prop_assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn box_average_keeps_the_mean(data in prop::collection::vec(0.0f64..10.0, 8 * 12)) {
        let img = Image::new(12, 8, data).unwrap();
        let small = downsample_box(&img, 4, 2).unwrap();
        prop_assert!((small.mean() - img.mean()).abs() <= 1e-12 * (1.0 + img.mean()));
    }

    #[test]
    fn one_hot_has_a_single_unit(k in 1usize..8, seed in 0usize..1000) {
        let v = one_hot(seed % k, k).unwrap();
        prop_assert_eq!(v.iter().sum::<f32>(), 1.0);
        prop_assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
    }

    #[test]
    fn split_never_shares_a_run(runs in 2u32..20, per_run in 1usize..5, seed: u64) {
        let samples: Vec<LabeledSample> = (0..runs)
            .flat_map(|r| {
                (0..per_run).map(move |i| LabeledSample {
                    run_id: r,
                    input: NetInput::from_raw(1, 1, vec![0.0; 3]).unwrap(),
                    target_value: i as f32,
                    material_onehot: vec![1.0],
                })
            })
            .collect();
        let (train, val) = split_dataset(samples, 0.8, seed).unwrap();
        prop_assert!(!train.is_empty() && !val.is_empty());
        prop_assert_eq!(train.len() + val.len(), runs as usize * per_run);
        prop_assert!(train.iter().all(|t| val.iter().all(|v| v.run_id != t.run_id)));
    }

    #[test]
    fn softmax_rows_are_distributions(logits in prop::collection::vec(-30.0f64..30.0, 12), class in 0usize..4) {
        let t = Tensor::new(vec![3, 4], logits).unwrap();
        let p = softmax(&t).unwrap();
        for row in p.data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut onehot = vec![0.0; 12];
        for r in 0..3 {
            onehot[r * 4 + class] = 1.0;
        }
        let (xent, _) = softmax_xent(&t, &Tensor::new(vec![3, 4], onehot).unwrap()).unwrap();
        prop_assert!(xent >= 0.0);
    }

    #[test]
    fn maxpool_never_exceeds_its_window(data in prop::collection::vec(-5.0f64..5.0, 2 * 6 * 6)) {
        let x = Tensor::new(vec![1, 2, 6, 6], data).unwrap();
        let y = MaxPool2d::new(2).forward(&x).unwrap();
        let xs = x.data();
        for c in 0..2 {
            for r in 0..3 {
                for q in 0..3 {
                    let win = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .map(|(a, b)| xs[c * 36 + (2 * r + a) * 6 + 2 * q + b]);
                    let m = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert_eq!(y.data()[c * 9 + r * 3 + q], m);
                }
            }
        }
    }

    #[test]
    fn logit_lp_is_strictly_increasing(a in PROB_CLAMP..0.5, d in 1e-4f64..0.49) {
        prop_assert!(logit_lp(a + d) > logit_lp(a));
    }

    #[test]
    fn forward_is_pure(seed: u64, data in prop::collection::vec(0.0f32..1.0, 3 * 8 * 10)) {
        let spec = NetworkSpec {
            input_height: 8,
            input_width: 10,
            stem: vec![ConvLayerSpec::same3(3, 1), ConvLayerSpec::same3(4, 1)],
            head: vec![ConvLayerSpec::same3(3, 1), ConvLayerSpec::same3(2, 1)],
            hidden_units: 5,
            n_classes: 3,
            ..NetworkSpec::default()
        };
        let net = build_network::<f32>(&spec, seed).unwrap();
        let x = Tensor::new(vec![1, 3, 8, 10], data).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        prop_assert_eq!(a.value.data(), b.value.data());
        prop_assert_eq!(a.logits.data(), b.logits.data());
    }
}
