//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (`cargo test --test acceptance --
//! --nocapture` to see them).

use ndarray::{Array2, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddasr_core::btas::{
    btas_peak_activation_estimate, coverage_map, make_schedule, peak_activation_estimate,
    run_btas, ShiftOracleLvn,
};
use ddasr_core::disentangle::{afe_spec, efe_spec, gradient_mask, receptive_field_mask, sfe_spec, ConvSpec, EfeOrientation};
use ddasr_core::lf::{
    constant_disparity_residual, extract_epi, estimate_epi_disparity, generate_constant_disparity_lf,
    macpi_from_sai, sai_from_macpi, sparse_sample_corners, EpiOrientation, LightField,
    SyntheticSceneSpec, Texture,
};
use ddasr_core::metrics::{
    badpix, evaluate_scene, mse100, psnr, rgb_to_y, ssim, AsrTask, DisparityMap,
};
use ddasr_core::net::{
    ddasr_forward, l1_training_loss, l1_training_loss_and_grads, param_count, ModelState,
    NetworkConfig,
};
use ddasr_core::train::{train, PatchSet, Task, TrainConfig};

fn random_lf(rng: &mut ChaCha8Rng, u: usize, v: usize, h: usize, w: usize) -> LightField {
    LightField::from_fn(u, v, h, w, |_, _, _, _| rng.gen_range(0.0..=1.0)).unwrap()
}

/// Criterion 1 — layout suite: exact SAI↔MacPI round-trips and the
/// interleaving law on 200 random fields across A ∈ {2, 3, 5, 7}.
#[test]
fn criterion_01_layout_suite() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut fields = 0;
    for &a in &[2usize, 3, 5, 7] {
        for _ in 0..50 {
            let h = rng.gen_range(3..14);
            let w = rng.gen_range(3..14);
            let lf = random_lf(&mut rng, a, a, h, w);
            let m = macpi_from_sai(&lf).unwrap();
            // layout law on random probes
            for _ in 0..20 {
                let (u, v) = (rng.gen_range(0..a), rng.gen_range(0..a));
                let (hh, ww) = (rng.gen_range(0..h), rng.gen_range(0..w));
                assert_eq!(m.pixels()[[hh * a + u, ww * a + v]], lf.views()[[u, v, hh, ww]]);
            }
            // exact round-trip
            assert_eq!(sai_from_macpi(&m).views(), lf.views());
            fields += 1;
        }
    }
    assert_eq!(fields, 200);
    let dt = started.elapsed();
    assert!(dt.as_secs() < 10, "layout suite took {dt:?}, budget 10 s");
    println!("ACCEPTANCE 1 layout: PASS ({fields} fields, {dt:?})");
}

/// Criterion 2 — geometry suite: the macro-pixel offset law holds exactly
/// for integer disparities 0..2 on A=3 scenes, and EPI slope regression
/// recovers fractional disparities within ±0.05 px/view.
#[test]
fn criterion_02_geometry_suite() {
    let started = std::time::Instant::now();
    // integer-disparity offset law, exact sample equality
    for d in [0i64, 1, 2] {
        let spec = SyntheticSceneSpec {
            texture: Texture::SeededUniform { seed: 200 + d as u64 },
            disparity: d as f64,
            a: 3,
            h: 16,
            w: 16,
        };
        let lf = generate_constant_disparity_lf(&spec).unwrap();
        assert_eq!(
            constant_disparity_residual(&lf, d as f64),
            0.0,
            "offset law violated at d={d}"
        );
        // displaced macro-pixel correspondence against the rendered texture
        let m = macpi_from_sai(&lf).unwrap();
        let tex = spec.texture.render(16, 16);
        for h0 in 0..16i64 {
            for w0 in 0..16i64 {
                for u in 0..3i64 {
                    for v in 0..3i64 {
                        let dh = d * (1 - u);
                        let dw = d * (1 - v);
                        let hr = (h0 + dh).rem_euclid(16) as usize;
                        let wr = (w0 + dw).rem_euclid(16) as usize;
                        assert_eq!(
                            m.pixels()[[hr * 3 + u as usize, wr * 3 + v as usize]],
                            tex[[h0 as usize, w0 as usize]]
                        );
                    }
                }
            }
        }
    }
    // EPI slope for fractional disparities
    let mut worst: f64 = 0.0;
    for (i, &d) in [0.5f64, 1.5].iter().enumerate() {
        let lf = generate_constant_disparity_lf(&SyntheticSceneSpec {
            texture: Texture::SmoothNoise { seed: 210 + i as u64, harmonics: 6 },
            disparity: d,
            a: 7,
            h: 64,
            w: 64,
        })
        .unwrap();
        for (orient, fixed_spatial) in [(EpiOrientation::Horizontal, 20), (EpiOrientation::Vertical, 40)] {
            let epi = extract_epi(&lf, orient, 3, fixed_spatial).unwrap();
            let slope = estimate_epi_disparity(&epi);
            worst = worst.max((slope - d).abs());
            assert!(
                (slope - d).abs() <= 0.05,
                "slope {slope} vs d={d} ({orient:?})"
            );
        }
    }
    let dt = started.elapsed();
    assert!(dt.as_secs() < 30, "geometry suite took {dt:?}, budget 30 s");
    println!("ACCEPTANCE 2 geometry: PASS (worst slope error {worst:.4} px/view, {dt:?})");
}

/// Criterion 3 — disentangling suite: analytic receptive-field masks agree
/// exactly with autodiff gradient masks on random weights, 50 probes per
/// extractor.
#[test]
fn criterion_03_disentangling_suite() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let mut randn = |shape: &[usize], rng: &mut ChaCha8Rng| -> ArrayD<f32> {
        ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-1.0f32..1.0))
    };

    let mut probe = |spec: &ConvSpec, in_size: (usize, usize), probes: usize, rng: &mut ChaCha8Rng, label: &str| {
        let w = randn(&spec.weight_shape(), rng);
        let b = randn(&[spec.out_channels], rng);
        let x = randn(&[1, spec.in_channels, in_size.0, in_size.1], rng);
        let (h_out, w_out) = spec.out_shape(in_size.0, in_size.1);
        for _ in 0..probes {
            let pos = (rng.gen_range(0..h_out), rng.gen_range(0..w_out));
            let analytic = receptive_field_mask(spec, pos, in_size).unwrap();
            let probed = gradient_mask(spec, &w, &b, &x, pos);
            assert_eq!(analytic, probed, "{label} at {pos:?}");
        }
    };

    // SFE: same-view 3×3 dilated neighborhood, A ∈ {2, 3}
    probe(&sfe_spec(2, 2, 3), (32, 32), 25, &mut rng, "sfe A=2");
    probe(&sfe_spec(3, 2, 3), (33, 33), 25, &mut rng, "sfe A=3");
    // AFE: one macro-pixel per output position
    probe(&afe_spec(2, 2, 3).unwrap(), (32, 32), 25, &mut rng, "afe A=2");
    probe(&afe_spec(3, 2, 3).unwrap(), (33, 33), 25, &mut rng, "afe A=3");
    // EFE: one horizontal EPI window (pre-restore)
    let efe2 = efe_spec(2, 2, 3, EfeOrientation::Horizontal, false).unwrap();
    probe(&efe2.conv, (16, 32), 25, &mut rng, "efe A=2");
    let efe3 = efe_spec(3, 2, 3, EfeOrientation::Horizontal, false).unwrap();
    probe(&efe3.conv, (18, 33), 25, &mut rng, "efe A=3");

    // locality statements behind the masks
    let a = 3usize;
    let sfe = sfe_spec(a, 1, 1);
    let mask = receptive_field_mask(&sfe, (10, 13), (33, 33)).unwrap();
    assert!(mask.iter().all(|&(r, c)| (r % a, c % a) == (10 % a, 13 % a)), "SFE mixes views");
    let afe = afe_spec(a, 1, 1).unwrap();
    let mask = receptive_field_mask(&afe, (4, 6), (33, 33)).unwrap();
    assert!(mask.iter().all(|&(r, c)| (r / a, c / a) == (4, 6)), "AFE leaves its macro-pixel");
    let mask = receptive_field_mask(&efe3.conv, (7, 5), (18, 33)).unwrap();
    assert!(mask.iter().all(|&(r, _)| r == 7), "EFE window leaves its row");
    assert!(mask.len() <= a * a, "EFE window wider than A²");

    let dt = started.elapsed();
    assert!(dt.as_secs() < 120, "disentangling suite took {dt:?}, budget 2 min");
    println!("ACCEPTANCE 3 disentangling: PASS (150 probes, exact agreement, {dt:?})");
}

/// Criterion 4 — shape/architecture suite: the full-size forward shapes,
/// the parameter count against the reported 32.09M ± 10%, and the
/// dense-connection ablation ordering.
#[test]
fn criterion_04_shape_architecture_suite() {
    let started = std::time::Instant::now();

    let count = param_count(&NetworkConfig::ddasr()).unwrap();
    let target = 32_090_000f64;
    assert!(
        (count as f64 - target).abs() <= 0.10 * target,
        "parameter count {count} outside ±10% of 32.09M"
    );
    let dense = param_count(&NetworkConfig { dense_connections: true, ..NetworkConfig::ddasr() })
        .unwrap();
    assert!(dense > count, "dense ablation ({dense}) must exceed layer-by-layer ({count})");

    // full-size 2×2 → 7×7 forward at 64×64
    let model = ModelState::<f32>::init(&NetworkConfig::ddasr(), 401).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let lf = random_lf(&mut rng, 2, 2, 64, 64);
    let out = ddasr_forward(&lf, &model).unwrap();
    assert_eq!(
        (out.num_u(), out.num_v(), out.height(), out.width()),
        (7, 7, 64, 64),
        "full-size forward shape"
    );
    assert!(out.views().iter().all(|v| v.is_finite()));

    // DDASR-S: stage counts [1,1,3,1], 2×2 → 3×3
    let s_config = NetworkConfig::ddasr_s();
    assert_eq!(s_config.stage_counts, vec![1, 1, 3, 1]);
    let model_s = ModelState::<f32>::init(&s_config, 403).unwrap();
    let lf_s = random_lf(&mut rng, 2, 2, 32, 32);
    let out_s = ddasr_forward(&lf_s, &model_s).unwrap();
    assert_eq!(
        (out_s.num_u(), out_s.num_v(), out_s.height(), out_s.width()),
        (3, 3, 32, 32)
    );

    let dt = started.elapsed();
    assert!(dt.as_secs() < 60, "shape suite took {dt:?}, budget 1 min");
    println!(
        "ACCEPTANCE 4 shape/architecture: PASS (params {count} = {:.2}M, dense {:.2}M, {dt:?})",
        count as f64 / 1e6,
        dense as f64 / 1e6
    );
}

/// Criterion 5 — gradient suite: tape gradients match central finite
/// differences within 1e-3 relative at a 1e-3 step, on 24 probe weights of
/// a C=8 reduced model (f64 evaluation).
#[test]
fn criterion_05_gradient_suite() {
    let started = std::time::Instant::now();
    let config = NetworkConfig::reduced(8, vec![1, 1], 2, 3);
    let model = ModelState::<f64>::init(&config, 501).unwrap();

    // smooth synthetic input and a displaced target keep the L1 kinks away
    // from the probe neighbourhood
    let scene = generate_constant_disparity_lf(&SyntheticSceneSpec {
        texture: Texture::SmoothNoise { seed: 502, harmonics: 5 },
        disparity: 0.5,
        a: 3,
        h: 12,
        w: 12,
    })
    .unwrap();
    let input_lf = sparse_sample_corners(&scene, 2).unwrap();
    let to_array = |lf: &LightField| -> ArrayD<f64> {
        let m = macpi_from_sai(lf).unwrap();
        let (r, c) = m.pixels().dim();
        let mut out = ArrayD::zeros(IxDyn(&[1, 1, r, c]));
        for ((i, j), &v) in m.pixels().indexed_iter() {
            out[[0, 0, i, j]] = v as f64;
        }
        out
    };
    let x = to_array(&input_lf);
    let t = to_array(&scene);

    let (base_loss, grads) = l1_training_loss_and_grads(&model, &x, &t).unwrap();

    // A finite difference is only a derivative oracle where the loss is
    // differentiable across the whole ±ε interval; the L1 loss and the
    // rectifier kinks make that a real concern at ε = 1e-3. A probe whose
    // interval straddles a kink shows a large second difference
    // |L₊ − 2L₀ + L₋| (a slope jump instead of the O(ε²) curvature of a
    // smooth region), and is rejected as an invalid oracle point. Accepted
    // probes must still agree within the stated 1e-3 relative tolerance.
    let paths: Vec<String> = model.params.iter().map(|(p, _)| p.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(503);
    let eps = 1e-3;
    let mut checked = 0;
    let mut skipped = 0;
    let mut attempts = 0;
    let mut worst_rel: f64 = 0.0;
    while checked < 24 {
        attempts += 1;
        assert!(attempts < 300, "could not find 24 kink-free probe points");
        let path = &paths[rng.gen_range(0..paths.len())];
        let shape = model.params.get(path).unwrap().shape().to_vec();
        let idx: Vec<usize> = shape.iter().map(|&s| rng.gen_range(0..s)).collect();
        let ad = grads.get(path).unwrap()[IxDyn(&idx)];

        let mut plus = model.clone();
        plus.params.get_mut(path).unwrap()[IxDyn(&idx)] += eps;
        let mut minus = model.clone();
        minus.params.get_mut(path).unwrap()[IxDyn(&idx)] -= eps;
        let l_plus = l1_training_loss(&plus, &x, &t).unwrap();
        let l_minus = l1_training_loss(&minus, &x, &t).unwrap();
        let fd = (l_plus - l_minus) / (2.0 * eps);

        let kink_signal = (l_plus - 2.0 * base_loss + l_minus).abs() / (2.0 * eps);
        if kink_signal > 1e-4 * ad.abs().max(fd.abs()).max(1e-6) {
            skipped += 1;
            continue;
        }

        let denom = ad.abs().max(fd.abs()).max(1e-9);
        let rel = (ad - fd).abs() / denom;
        worst_rel = worst_rel.max(rel);
        assert!(
            rel <= 1e-3,
            "probe {path}[{idx:?}]: autodiff {ad:e} vs finite difference {fd:e} (rel {rel:e})"
        );
        checked += 1;
    }

    let dt = started.elapsed();
    assert!(dt.as_secs() < 120, "gradient suite took {dt:?}, budget 2 min");
    println!(
        "ACCEPTANCE 5 gradients: PASS ({checked} probes within 1e-3, worst relative error {worst_rel:.2e}, {skipped} kink-straddling points rejected, {dt:?})"
    );
}

/// Criterion 6 — overfit smoke: a reduced model driven 500 steps over four
/// fixed patches reaches ≤ 10% of its initial loss, with a non-increasing
/// 50-step moving average after step 100.
#[test]
fn criterion_06_overfit_smoke() {
    let started = std::time::Instant::now();
    // four fixed synthetic patches at mixed disparities
    let mut scenes = Vec::new();
    for (i, d) in [(0usize, 0.5f64), (1, 1.0), (2, 1.5), (3, 0.0)] {
        scenes.push((
            format!("patch{i}"),
            generate_constant_disparity_lf(&SyntheticSceneSpec {
                texture: Texture::SmoothNoise { seed: 600 + i as u64, harmonics: 5 },
                disparity: d,
                a: 7,
                h: 64,
                w: 64,
            })
            .unwrap(),
        ));
    }
    let set = PatchSet::build(scenes, Task::Gvn, 64, 64).unwrap();
    assert_eq!(set.len(), 4);

    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 4,
        lr0: 1e-3,
        lr_half_period: 1_000_000, // constant rate for the smoke test
        augment: false,
        seed: 601,
        ..TrainConfig::gvn()
    };
    let net = NetworkConfig::reduced(8, vec![1, 1, 1, 1], 2, 7);
    let mut model = ModelState::<f32>::init(&net, 602).unwrap();
    let log = train(&mut model, &set, &cfg, None).unwrap();
    assert_eq!(log.steps.len(), 500);

    let losses: Vec<f64> = log.steps.iter().map(|s| s.loss).collect();
    let initial = losses[0];
    let final_loss = *losses.last().unwrap();
    assert!(
        final_loss <= 0.1 * initial,
        "final loss {final_loss} above 10% of initial {initial}"
    );

    // 50-step moving average, non-increasing after step 100
    let ma: Vec<f64> = (49..losses.len())
        .map(|i| losses[i - 49..=i].iter().sum::<f64>() / 50.0)
        .collect();
    for i in 100 - 49 + 1..ma.len() {
        assert!(
            ma[i] <= ma[i - 1] + 1e-9,
            "moving average rose at step {}: {} -> {}",
            i + 49,
            ma[i - 1],
            ma[i]
        );
    }

    let dt = started.elapsed();
    assert!(dt.as_secs() < 3600, "smoke took {dt:?}, budget 60 min CPU");
    println!(
        "ACCEPTANCE 6 overfit smoke: PASS (loss {initial:.4} -> {final_loss:.4} in 500 steps, {dt:?})"
    );
}

/// Criterion 7 — traversal suite: the 5×5→9×9 schedule, the analytic-
/// oracle reconstruction, and bitwise parallel/serial agreement.
#[test]
fn criterion_07_btas_suite() {
    let started = std::time::Instant::now();
    let sched = make_schedule(5, 2, 3, 9).unwrap();
    assert_eq!(sched.blocks.len(), 16);
    let cov = coverage_map(&sched);
    assert!(cov.iter().all(|&c| c >= 1), "full coverage required");
    let mut vals: Vec<u32> = cov.iter().copied().collect();
    vals.sort_unstable();
    vals.dedup();
    assert_eq!(vals, vec![1, 2, 4]);

    // analytic oracle vs dense ground truth
    let gt = generate_constant_disparity_lf(&SyntheticSceneSpec {
        texture: Texture::SeededUniform { seed: 700 },
        disparity: 1.0,
        a: 9,
        h: 24,
        w: 24,
    })
    .unwrap();
    let input = sparse_sample_corners(&gt, 5).unwrap();
    let lvn = ShiftOracleLvn { disparity: 1.0 };
    let out = run_btas(&input, &lvn, &sched).unwrap();
    let worst = out
        .views()
        .iter()
        .zip(gt.views().iter())
        .fold(0.0f32, |m, (&a, &b)| m.max((a - b).abs()));
    assert!(worst <= 1e-6, "oracle reconstruction off by {worst}");

    // parallel vs serial bit-identity
    ddasr_core::runtime::set_deterministic(false);
    let par = run_btas(&input, &lvn, &sched).unwrap();
    ddasr_core::runtime::set_deterministic(true);
    let ser = run_btas(&input, &lvn, &sched).unwrap();
    ddasr_core::runtime::set_deterministic(false);
    assert_eq!(par.views(), ser.views(), "parallel vs serial blend differs");

    let dt = started.elapsed();
    assert!(dt.as_secs() < 60, "traversal suite took {dt:?}, budget 1 min");
    println!("ACCEPTANCE 7 traversal: PASS (16 blocks, worst oracle error {worst:e}, {dt:?})");
}

/// Criterion 8 — memory model: the full-grid activation estimate grows
/// like the view count (5×5 ≈ 6× the 2×2 footprint) while the per-block
/// estimate never depends on the traversed grid.
#[test]
fn criterion_08_memory_model() {
    let started = std::time::Instant::now();
    let gvn = |a_in: usize, a_out: usize| NetworkConfig { a_in, a_out, ..NetworkConfig::ddasr() };
    let e2 = peak_activation_estimate(&gvn(2, 7), 64, 64).unwrap() as f64;
    let e5 = peak_activation_estimate(&gvn(5, 9), 64, 64).unwrap() as f64;
    let ratio = e5 / e2;
    assert!(
        (ratio - 6.0).abs() <= 0.2 * 6.0,
        "5x5/2x2 activation ratio {ratio} outside 6 ± 20%"
    );

    let lvn = NetworkConfig::ddasr_s();
    let per_block = btas_peak_activation_estimate(&lvn, 64, 64).unwrap();
    for grid in [3usize, 5, 9, 17] {
        let _ = grid; // the estimate is a function of the local network only
        assert_eq!(btas_peak_activation_estimate(&lvn, 64, 64).unwrap(), per_block);
    }
    // while the full-grid footprint keeps growing
    let e3 = peak_activation_estimate(&gvn(3, 9), 64, 64).unwrap();
    let e9 = peak_activation_estimate(&gvn(9, 17), 64, 64).unwrap();
    assert!((e3 as f64) < e5 && e5 < e9 as f64);
    assert!((per_block as f64) < e5);

    let dt = started.elapsed();
    assert!(dt.as_millis() < 1000, "memory check took {dt:?}, budget 1 s");
    println!(
        "ACCEPTANCE 8 memory model: PASS (ratio {ratio:.2}, per-block {:.1} MiB, {dt:?})",
        per_block as f64 / (1024.0 * 1024.0)
    );
}

/// Criterion 9 — metrics suite: analytic PSNR/SSIM/bad-pixel values,
/// threshold monotonicity, and the input-view exclusion metamorphic test.
#[test]
fn criterion_09_metrics_suite() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(901);

    // luminance
    assert!((rgb_to_y(1.0, 1.0, 1.0) - 1.0).abs() < 1e-6);
    assert!((rgb_to_y(0.0, 1.0, 0.0) - 0.587).abs() < 1e-6);

    // PSNR
    let a = Array2::from_elem((16, 16), 0.4f32);
    assert_eq!(psnr(&a.view(), &a.view()).unwrap(), f64::INFINITY);
    let b = a.mapv(|v| v + 0.1);
    assert!((psnr(&a.view(), &b.view()).unwrap() - 20.0).abs() < 1e-4);

    // SSIM
    let img = Array2::from_shape_fn((16, 16), |_| rng.gen_range(0.0f32..1.0));
    assert!((ssim(&img.view(), &img.view()).unwrap() - 1.0).abs() < 1e-9);
    let (ma, mb) = (0.25f64, 0.65f64);
    let ca = Array2::from_elem((16, 16), ma as f32);
    let cb = Array2::from_elem((16, 16), mb as f32);
    let c1 = 0.0001f64;
    let closed = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    assert!((ssim(&ca.view(), &cb.view()).unwrap() - closed).abs() < 1e-6);

    // bad-pixel ratios and monotonicity in τ
    let gt = DisparityMap::new(Array2::zeros((10, 10))).unwrap();
    let off = DisparityMap::new(Array2::from_elem((10, 10), 0.09f32)).unwrap();
    assert_eq!(badpix(&off, &gt, 0.1).unwrap(), 0.0);
    assert_eq!(badpix(&off, &gt, 0.07).unwrap(), 100.0);
    let noisy = DisparityMap::new(Array2::from_shape_fn((16, 16), |_| rng.gen_range(-1.0f32..1.0))).unwrap();
    let mut prev = f64::INFINITY;
    for tau in [0.01, 0.05, 0.07, 0.1, 0.2, 0.5, 1.0, 2.0] {
        let bp = badpix(&noisy, &gt_like(&noisy), tau).unwrap();
        assert!(bp <= prev);
        prev = bp;
    }
    assert!((mse100(&off, &gt).unwrap() - 0.81).abs() < 1e-4);

    // novel-view handling
    let gt_lf = random_lf(&mut rng, 7, 7, 16, 16);
    let report = evaluate_scene(&gt_lf, &gt_lf, AsrTask::new(2, 7), "self").unwrap();
    assert_eq!(report.views.len(), 45);
    assert_eq!(AsrTask::new(5, 9).novel_count(), 56);
    // corrupting an input view leaves the report unchanged
    let mut views = gt_lf.views().clone();
    for h in 0..16 {
        for w in 0..16 {
            views[[6, 0, h, w]] = 1.0 - views[[6, 0, h, w]];
        }
    }
    let corrupted = LightField::new(views).unwrap();
    let dirty = evaluate_scene(&corrupted, &gt_lf, AsrTask::new(2, 7), "self").unwrap();
    assert_eq!(report, dirty, "input-view corruption leaked into the metrics");

    let dt = started.elapsed();
    assert!(dt.as_secs() < 30, "metrics suite took {dt:?}, budget 30 s");
    println!("ACCEPTANCE 9 metrics: PASS ({dt:?})");
}

fn gt_like(d: &DisparityMap) -> DisparityMap {
    DisparityMap::new(Array2::zeros(d.values.dim())).unwrap()
}

/// Criterion 10 — reduced-scale training (optional, hours on CPU): a C=32
/// model trained 10 epochs must beat the angular-nearest-view baseline by
/// ≥ 2 dB PSNR on the novel views of a held-out scene.
///
/// Run with `cargo test --test acceptance -- --ignored criterion_10`.
/// Training scenes come from `DDASR_TRAIN_SCENES` (a directory of scene
/// directories) and the held-out scene from `DDASR_EVAL_SCENE`; without
/// them, synthetic mid-disparity scenes are generated.
#[test]
#[ignore = "hours-scale reduced training run; see doc comment"]
fn criterion_10_reduced_training() {
    let started = std::time::Instant::now();
    let (train_scenes, eval_scene): (Vec<(String, LightField)>, LightField) =
        match (std::env::var("DDASR_TRAIN_SCENES"), std::env::var("DDASR_EVAL_SCENE")) {
            (Ok(train_dir), Ok(eval_dir)) => {
                let mut scenes = Vec::new();
                for entry in std::fs::read_dir(&train_dir).unwrap() {
                    let path = entry.unwrap().path();
                    if path.join("scene.meta").exists() {
                        let name = path.file_name().unwrap().to_string_lossy().into_owned();
                        scenes.push((name, ddasr_core::lf::io::read_scene_y(&path).unwrap()));
                    }
                }
                let eval = ddasr_core::lf::io::read_scene_y(std::path::Path::new(&eval_dir)).unwrap();
                (scenes, eval)
            }
            _ => {
                let make = |seed: u64, d: f64| {
                    generate_constant_disparity_lf(&SyntheticSceneSpec {
                        texture: Texture::SmoothNoise { seed, harmonics: 8 },
                        disparity: d,
                        a: 7,
                        h: 128,
                        w: 128,
                    })
                    .unwrap()
                };
                let scenes = (0..6)
                    .map(|i| (format!("s{i}"), make(1000 + i, 0.5 + 0.25 * i as f64)))
                    .collect();
                (scenes, make(2000, 1.1))
            }
        };

    let set = PatchSet::build(train_scenes, Task::Gvn, 64, 64).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 8,
        seed: 1001,
        ..TrainConfig::gvn()
    };
    let net = NetworkConfig::reduced(32, vec![1, 1, 2, 1], 2, 7);
    let mut model = ModelState::<f32>::init(&net, 1002).unwrap();
    train(&mut model, &set, &cfg, None).unwrap();

    let gt = ddasr_core::lf::center_crop_angular(&eval_scene, 7).unwrap();
    let input = sparse_sample_corners(&gt, 2).unwrap();
    let pred = ddasr_forward(&input, &model).unwrap();
    let task = AsrTask::new(2, 7);
    let ours = evaluate_scene(&pred, &gt, task, "model").unwrap();

    // angular-nearest-view baseline: copy the nearest input view
    let idx = ddasr_core::lf::evenly_spaced_indices(7, 2).unwrap();
    let nearest = |x: usize| -> usize {
        (0..idx.len()).min_by_key(|&i| (idx[i] as i64 - x as i64).unsigned_abs()).unwrap()
    };
    let baseline_views = ndarray::Array4::from_shape_fn(
        (7, 7, gt.height(), gt.width()),
        |(u, v, h, w)| input.views()[[nearest(u), nearest(v), h, w]],
    );
    let baseline = LightField::new(baseline_views).unwrap();
    let base = evaluate_scene(&baseline, &gt, task, "baseline").unwrap();

    println!(
        "reduced training: model {:.2} dB vs nearest-view baseline {:.2} dB ({:?})",
        ours.mean_psnr,
        base.mean_psnr,
        started.elapsed()
    );
    assert!(
        ours.mean_psnr >= base.mean_psnr + 2.0,
        "model {:.2} dB must beat baseline {:.2} dB by ≥ 2 dB",
        ours.mean_psnr,
        base.mean_psnr
    );
}
