//! Cross-module integration: generator truth through detection, regression,
//! and the warp engine.

use poresim::{
    datapipe, deform, poreseg, rfregress, synth, DetectionConfig, ForestConfig, SheetSpec,
    TimeWindow,
};

/// Forest that always predicts `value` regardless of features (trained on
/// constant targets, which collapse every tree to a single exact leaf for
/// dyadic values).
fn constant_model(value: f64) -> poresim::RandomForest {
    let samples: Vec<rfregress::RegressionSample> = (1..=3)
        .flat_map(|tw| {
            (0..4).map(move |_| rfregress::RegressionSample {
                features: rfregress::window_features(
                    match tw {
                        1 => TimeWindow::Tw10,
                        2 => TimeWindow::Tw20,
                        _ => TimeWindow::Tw30,
                    },
                    1.0,
                    1.0,
                ),
                target: value,
            })
        })
        .collect();
    rfregress::fit_forest(&samples, &ForestConfig::default()).unwrap()
}

#[test]
fn detector_matches_generator_truth() {
    let spec = SheetSpec {
        n_pores: 10,
        width: 384,
        height: 384,
        contrast_min: 0.3,
        contrast_max: 0.3,
        rng_seed: 11,
        ..SheetSpec::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &DetectionConfig::default()).unwrap();
    assert_eq!(comps.len(), 10);
    for truth in &sheet.pores {
        let nearest = comps
            .iter()
            .map(|c| (c.centroid.0 - truth.center.0).hypot(c.centroid.1 - truth.center.1))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1.5, "planted pore missed by {nearest:.2} px");
    }
}

#[test]
fn thin_line_artifact_is_rejected_by_shape_filter() {
    let spec = SheetSpec {
        n_pores: 10,
        width: 384,
        height: 384,
        contrast_min: 0.3,
        contrast_max: 0.3,
        rng_seed: 11,
        ..SheetSpec::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();

    // Paint an 80 px long, 4 px wide dark line into a clear corner. The
    // area filter is lifted so only the aspect filter can reject it.
    let mut tampered = sheet.image.clone();
    for x in 20..100usize {
        for y in 20..24usize {
            let v = tampered.get(x, y, 0) - 0.3;
            tampered.set(x, y, 0, v);
        }
    }
    let cfg = DetectionConfig {
        max_area_px: usize::MAX,
        ..DetectionConfig::default()
    };
    let (_, comps) = poreseg::detect_pores(&tampered, &cfg).unwrap();
    assert_eq!(comps.len(), 10, "the line must not survive the shape filter");
    for c in &comps {
        assert!(
            c.centroid.1 > 30.0,
            "unexpected component at {:?}",
            c.centroid
        );
    }
}

#[test]
fn detected_total_area_tracks_planted_areas() {
    let spec = SheetSpec {
        n_pores: 10,
        width: 384,
        height: 384,
        radius_min: 4.0,
        radius_max: 6.0,
        contrast_min: 0.3,
        contrast_max: 0.3,
        rng_seed: 3,
        ..SheetSpec::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &DetectionConfig::default()).unwrap();
    let stats = poreseg::pore_stats(&comps);
    let analytic: f64 = sheet.pores.iter().map(synth::PlantedPore::area).sum();
    assert!(
        (stats.pore_area_total - analytic).abs() <= 0.1 * analytic,
        "detected {} vs analytic {analytic}",
        stats.pore_area_total
    );
    assert_eq!(stats.pore_count, 10);
}

#[test]
fn simulate_with_unit_ratio_is_bit_exact() {
    let spec = SheetSpec {
        n_pores: 8,
        width: 256,
        height: 256,
        rng_seed: 21,
        ..SheetSpec::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &DetectionConfig::default()).unwrap();
    assert!(!comps.is_empty());
    let model = constant_model(1.0);
    let out = deform::simulate(&sheet.image, &comps, &model, TimeWindow::Tw10, 1.5).unwrap();
    assert_eq!(out, sheet.image);
}

#[test]
fn simulate_redetect_hits_the_target_area_band() {
    let spec = SheetSpec {
        n_pores: 12,
        width: 384,
        height: 384,
        radius_min: 5.0,
        radius_max: 6.0,
        contrast_min: 0.3,
        contrast_max: 0.3,
        rng_seed: 5,
        ..SheetSpec::default()
    };
    let cfg = DetectionConfig {
        response_threshold: 0.03,
        ..DetectionConfig::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();
    let planted: f64 = sheet.pores.iter().map(synth::PlantedPore::area).sum();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &cfg).unwrap();

    let model = constant_model(0.5);
    let warped = deform::simulate(&sheet.image, &comps, &model, TimeWindow::Tw20, 1.5).unwrap();
    let (_, after) = poreseg::detect_pores(&warped, &cfg).unwrap();
    let measured = poreseg::pore_stats(&after).pore_area_total;
    let ratio = measured / planted;
    assert!(
        (0.425..=0.575).contains(&ratio),
        "re-detected/planted = {ratio:.3} for target 0.5"
    );
}

#[test]
fn simulate_leaves_pixels_outside_margin_circles_untouched() {
    let spec = SheetSpec {
        n_pores: 10,
        width: 256,
        height: 256,
        rng_seed: 9,
        ..SheetSpec::default()
    };
    let beta = 1.5;
    let sheet = synth::gen_sheet(&spec).unwrap();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &DetectionConfig::default()).unwrap();
    let model = constant_model(0.6);
    let out = deform::simulate(&sheet.image, &comps, &model, TimeWindow::Tw30, beta).unwrap();

    let mut changed = 0usize;
    for y in 0..256usize {
        for x in 0..256usize {
            let outside = comps.iter().all(|c| {
                let d = (x as f64 - c.enclosing_circle.center.0)
                    .hypot(y as f64 - c.enclosing_circle.center.1);
                d >= beta * c.enclosing_circle.radius.max(0.5)
            });
            let identical =
                out.get(x, y, 0).to_bits() == sheet.image.get(x, y, 0).to_bits();
            if outside {
                assert!(identical, "pixel ({x},{y}) outside all circles changed");
            } else if !identical {
                changed += 1;
            }
        }
    }
    assert!(changed > 0, "the warp must actually move pore content");
}

#[test]
fn simulation_plan_validates_and_matches_direct_calls() {
    let spec = SheetSpec {
        n_pores: 6,
        width: 256,
        height: 256,
        rng_seed: 2,
        ..SheetSpec::default()
    };
    let sheet = synth::gen_sheet(&spec).unwrap();
    let (_, comps) = poreseg::detect_pores(&sheet.image, &DetectionConfig::default()).unwrap();

    let model = constant_model(0.8);
    let plan = deform::SimulationPlan::from_model(comps.clone(), &model, 1.5).unwrap();
    assert_eq!(plan.ratios.len(), 3);
    for window in TimeWindow::ALL {
        let via_plan = plan.simulate(&sheet.image, window).unwrap();
        let direct = deform::simulate(&sheet.image, &comps, &model, window, 1.5).unwrap();
        assert_eq!(via_plan, direct);
    }

    // A ratio far outside the solvable range fails plan construction.
    let bad = constant_model(0.01);
    assert!(deform::SimulationPlan::from_model(comps, &bad, 1.5).is_err());
}

#[test]
fn cleaned_cohort_feeds_a_decreasing_forest() {
    let cohort = synth::gen_cohort(&synth::CohortSpec {
        n_subjects: 40,
        trend_per_day: -0.01,
        noise_sigma: 0.0125,
        outlier_rate: 0.05,
        rng_seed: 1,
        ..synth::CohortSpec::default()
    })
    .unwrap();
    let normalized = datapipe::normalize_cohort(&cohort.samples).unwrap();
    let daily = datapipe::daily_mean(&normalized);
    let outcome = datapipe::sliding_window_clean(&daily, &datapipe::CleanConfig::default()).unwrap();
    let samples = rfregress::build_training_samples(&outcome.kept, "Pore_Area_total");
    let forest = rfregress::fit_forest(&samples, &ForestConfig::default()).unwrap();

    let rho = |w: TimeWindow| {
        forest
            .predict(&rfregress::window_features(w, 1.0, 1.0))
            .unwrap()
    };
    let (r1, r2, r3) = (
        rho(TimeWindow::Tw10),
        rho(TimeWindow::Tw20),
        rho(TimeWindow::Tw30),
    );
    assert!(r1 > r2 && r2 > r3, "expected decreasing ratios: {r1} {r2} {r3}");
    assert!(r1 < 1.0 && r3 > 0.6);
}
