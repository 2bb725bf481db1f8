//! Deterministic synthetic data generators.
//!
//! Real clinical images and index series are not shippable, so tests and
//! evaluation run against these: a pore sheet (textured background plus
//! anti-aliased dark ellipses with exact ground truth) and an index cohort
//! (per-subject multiplicative baselines, a shared relative trend, session
//! noise, and planted day-level outliers recorded in a sidecar).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datapipe::{IndexSample, Session};
use crate::error::{Error, Result};
use crate::imagecore::Raster;
use crate::poreseg::Mask;

/// Parameters of a synthetic pore sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SheetSpec {
    pub width: usize,
    pub height: usize,
    pub n_pores: usize,
    /// Major semi-axis range in pixels.
    pub radius_min: f64,
    pub radius_max: f64,
    /// Pore darkness below the local background.
    pub contrast_min: f64,
    pub contrast_max: f64,
    /// Peak amplitude of the low-frequency background texture.
    pub texture_amplitude: f64,
    pub rng_seed: u64,
}

impl Default for SheetSpec {
    fn default() -> SheetSpec {
        SheetSpec {
            width: 512,
            height: 512,
            n_pores: 30,
            radius_min: 2.0,
            radius_max: 6.0,
            contrast_min: 0.25,
            contrast_max: 0.4,
            texture_amplitude: 0.03,
            rng_seed: 0,
        }
    }
}

impl SheetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter(
                "sheet dimensions must be positive".to_string(),
            ));
        }
        if !(self.radius_min >= 1.0 && self.radius_min <= self.radius_max) {
            return Err(Error::InvalidParameter(format!(
                "pore radii must satisfy 1 <= min <= max, got {}..{}",
                self.radius_min, self.radius_max
            )));
        }
        if !(self.contrast_min > 0.0
            && self.contrast_min <= self.contrast_max
            && self.contrast_max < 1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "contrast range must lie in (0, 1), got {}..{}",
                self.contrast_min, self.contrast_max
            )));
        }
        if !(0.0..0.5).contains(&self.texture_amplitude) {
            return Err(Error::InvalidParameter(
                "texture amplitude must be in [0, 0.5)".to_string(),
            ));
        }
        Ok(())
    }
}

/// One planted pore: an anti-aliased dark ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPore {
    pub center: (f64, f64),
    /// Semi-axes in pixels; `radius_x` is the major axis before rotation.
    pub radius_x: f64,
    pub radius_y: f64,
    pub angle_rad: f64,
    pub contrast: f64,
}

impl PlantedPore {
    /// Analytic ellipse area.
    pub fn area(&self) -> f64 {
        PI * self.radius_x * self.radius_y
    }
}

/// Generated sheet with exact ground truth.
#[derive(Debug, Clone)]
pub struct SheetTruth {
    pub image: Raster,
    pub mask: Mask,
    pub pores: Vec<PlantedPore>,
}

const SHEET_BASE: f64 = 0.65;

/// Generate a sheet: low-frequency textured background plus `n_pores`
/// anti-aliased dark ellipses at non-overlapping positions. Deterministic
/// per seed; errors when the pores cannot be packed after bounded retries.
pub fn gen_sheet(spec: &SheetSpec) -> Result<SheetTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    // Background texture: a few smooth waves, wavelengths 64-256 px, far
    // below the DoG passband.
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            let angle = rng.gen_range(0.0..PI);
            let freq = 1.0 / rng.gen_range(64.0..256.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (freq * angle.cos(), freq * angle.sin(), phase)
        })
        .collect();
    let amp = spec.texture_amplitude;
    let background = |x: f64, y: f64| {
        let t: f64 = waves
            .iter()
            .map(|&(fx, fy, ph)| (2.0 * PI * (fx * x + fy * y) + ph).sin())
            .sum();
        SHEET_BASE + amp * t / waves.len() as f64
    };

    // Place pores with margins: away from borders so filters and warps see
    // full neighborhoods, and apart from each other so components stay
    // separate through morphology.
    let mut pores: Vec<PlantedPore> = Vec::with_capacity(spec.n_pores);
    let max_attempts = 200 * spec.n_pores.max(1);
    let mut attempts = 0;
    while pores.len() < spec.n_pores {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidInput(format!(
                "cannot pack {} pores of radius {}..{} into {}x{} after {max_attempts} attempts",
                spec.n_pores, spec.radius_min, spec.radius_max, spec.width, spec.height
            )));
        }
        let rx = rng.gen_range(spec.radius_min..=spec.radius_max);
        let ry = rx * rng.gen_range(0.65..=1.0);
        let border = 4.0 * rx + 12.0;
        if spec.width as f64 <= 2.0 * border || spec.height as f64 <= 2.0 * border {
            return Err(Error::InvalidInput(format!(
                "sheet {}x{} too small for pores of radius {} (needs margin {border})",
                spec.width, spec.height, spec.radius_max
            )));
        }
        let center = (
            rng.gen_range(border..spec.width as f64 - border),
            rng.gen_range(border..spec.height as f64 - border),
        );
        let candidate = PlantedPore {
            center,
            radius_x: rx,
            radius_y: ry,
            angle_rad: rng.gen_range(0.0..PI),
            contrast: rng.gen_range(spec.contrast_min..=spec.contrast_max),
        };
        let clear = pores.iter().all(|p| {
            let d = (p.center.0 - center.0).hypot(p.center.1 - center.1);
            d >= 2.0 * (p.radius_x + rx) + 8.0
        });
        if clear {
            pores.push(candidate);
        }
    }

    let mut image = Raster::from_fn(spec.width, spec.height, |x, y| {
        background(x as f64, y as f64)
    });
    let mut mask = Mask::new(spec.width, spec.height);

    for p in &pores {
        let (sin, cos) = p.angle_rad.sin_cos();
        let reach = p.radius_x.max(p.radius_y) + 2.0;
        let x_lo = (p.center.0 - reach).floor().max(0.0) as usize;
        let x_hi = (p.center.0 + reach).ceil().min((spec.width - 1) as f64) as usize;
        let y_lo = (p.center.1 - reach).floor().max(0.0) as usize;
        let y_hi = (p.center.1 + reach).ceil().min((spec.height - 1) as f64) as usize;
        let edge = p.radius_x.min(p.radius_y);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let dx = x as f64 - p.center.0;
                let dy = y as f64 - p.center.1;
                let u = (dx * cos + dy * sin) / p.radius_x;
                let v = (-dx * sin + dy * cos) / p.radius_y;
                let rho = (u * u + v * v).sqrt();
                // ~1 px anti-aliased edge in pixel units.
                let coverage = (0.5 - (rho - 1.0) * edge).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    let val = image.get(x, y, 0) - p.contrast * coverage;
                    image.set(x, y, 0, val);
                }
                if rho <= 1.0 {
                    mask.set(x, y, true);
                }
            }
        }
    }

    Ok(SheetTruth { image, mask, pores })
}

/// Parameters of a synthetic index cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_subjects: usize,
    /// Last observation day; samples cover days `0..=days`.
    pub days: u32,
    /// Shared relative change per day: day d sits at `(1 + trend)^d` of
    /// baseline (e.g. -0.01 loses 1% of the current value per day).
    pub trend_per_day: f64,
    /// Multiplicative log-normal session noise sigma.
    pub noise_sigma: f64,
    /// Fraction of a subject's days that get a planted outlier.
    pub outlier_rate: f64,
    /// Outlier amplitude in units of `noise_sigma`.
    pub outlier_sigma: f64,
    pub rng_seed: u64,
    pub index_name: String,
}

impl Default for CohortSpec {
    fn default() -> CohortSpec {
        CohortSpec {
            n_subjects: 60,
            days: 30,
            trend_per_day: -0.01,
            noise_sigma: 0.01,
            outlier_rate: 0.0,
            outlier_sigma: 5.0,
            rng_seed: 0,
            index_name: "Pore_Area_total".to_string(),
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::InvalidParameter(
                "cohort needs at least one subject".to_string(),
            ));
        }
        if self.days == 0 || self.days > 30 {
            return Err(Error::InvalidParameter(format!(
                "days must be in 1..=30, got {}",
                self.days
            )));
        }
        if self.trend_per_day <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "relative trend must be > -1, got {}",
                self.trend_per_day
            )));
        }
        if self.noise_sigma < 0.0 || !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidParameter(
                "noise must be >= 0 and outlier rate in [0, 1)".to_string(),
            ));
        }
        if !(self.outlier_sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "outlier amplitude must be > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Sidecar record of one planted outlier day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedOutlier {
    pub subject_id: String,
    pub day: u32,
    pub index_name: String,
    pub factor: f64,
}

/// Generated cohort with its outlier sidecar.
#[derive(Debug, Clone)]
pub struct CohortTruth {
    pub samples: Vec<IndexSample>,
    pub outliers: Vec<PlantedOutlier>,
}

const SESSIONS: [Session; 3] = [
    Session::MorningWake,
    Session::MorningWash,
    Session::EveningWash,
];

/// Generate the cohort: per-subject baselines in [2, 10], the shared linear
/// relative trend, three sessions per day with multiplicative noise, and
/// `round(rate * (days+1))` outlier days per subject. Outliers scale the
/// whole day (all sessions), sit away from the series edges, and keep at
/// least two clean days between each other so a centered 3-day window always
/// sees them against clean neighbors.
pub fn gen_cohort(spec: &CohortSpec) -> Result<CohortTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let per_subject_outliers = (spec.outlier_rate * (spec.days + 1) as f64).round() as usize;

    let mut samples = Vec::new();
    let mut outliers = Vec::new();
    for s in 0..spec.n_subjects {
        let subject_id = format!("s{s:03}");
        let baseline = rng.gen_range(2.0..10.0);

        let mut outlier_days: Vec<u32> = Vec::new();
        if per_subject_outliers > 0 && spec.days >= 2 {
            let mut interior: Vec<u32> = (1..spec.days).collect();
            for i in (1..interior.len()).rev() {
                interior.swap(i, rng.gen_range(0..=i));
            }
            for d in interior {
                if outlier_days.len() >= per_subject_outliers {
                    break;
                }
                if outlier_days.iter().all(|&o| o.abs_diff(d) >= 3) {
                    outlier_days.push(d);
                }
            }
            outlier_days.sort_unstable();
        }

        for day in 0..=spec.days {
            let mut value = baseline * (1.0 + spec.trend_per_day).powi(day as i32);
            if outlier_days.contains(&day) {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let factor = (1.0 + sign * spec.outlier_sigma * spec.noise_sigma).max(0.05);
                value *= factor;
                outliers.push(PlantedOutlier {
                    subject_id: subject_id.clone(),
                    day,
                    index_name: spec.index_name.clone(),
                    factor,
                });
            }
            for session in SESSIONS {
                let eps: f64 = noise.sample(&mut rng);
                samples.push(IndexSample {
                    subject_id: subject_id.clone(),
                    day,
                    session,
                    index_name: spec.index_name.clone(),
                    value: value * (spec.noise_sigma * eps).exp(),
                });
            }
        }
    }
    Ok(CohortTruth { samples, outliers })
}
