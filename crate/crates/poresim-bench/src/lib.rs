//! Shared fixtures for the pipeline benchmarks.

use poresim::{deform, poreseg, synth, DetectionConfig, PoreComponent, Raster, SheetSpec};

/// Full-frame sheet matching the capture resolution, with a dense pore set.
pub fn full_frame_sheet(n_pores: usize) -> Raster {
    synth::gen_sheet(&SheetSpec {
        width: 1920,
        height: 1080,
        n_pores,
        rng_seed: 42,
        ..SheetSpec::default()
    })
    .expect("full frame fixture")
    .image
}

/// Standard evaluation sheet (512x512, 30 pores).
pub fn eval_sheet(seed: u64) -> Raster {
    synth::gen_sheet(&SheetSpec {
        rng_seed: seed,
        ..SheetSpec::default()
    })
    .expect("eval fixture")
    .image
}

pub fn detect(img: &Raster) -> Vec<PoreComponent> {
    poreseg::detect_pores(img, &DetectionConfig::default())
        .expect("detection fixture")
        .1
}

/// Warp circles for a 25% area reduction at the default margin.
pub fn shrink_circles(components: &[PoreComponent]) -> Vec<deform::WarpCircle> {
    let strength = deform::solve_warp_strength(0.75, deform::DEFAULT_BETA).expect("solvable");
    deform::circles_for_components(components, deform::DEFAULT_BETA, strength).expect("circles")
}
