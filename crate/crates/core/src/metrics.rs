//! Contrast and histogram-overlap metrics over circular regions.
//!
//! A region pairs a target disk with a concentric background annulus. Lesion
//! contrast compares mean envelope levels in dB; gCNR measures how separable
//! the two pixel populations are, via one minus the overlap of their
//! histograms on shared bin edges spanning [0, pooled max].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::beamform::{BeamGrid, EnvelopeImage};
use crate::error::{Error, Result};

pub const DEFAULT_HISTOGRAM_BINS: usize = 256;

/// Target disk plus background annulus around the same center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub center_x: f64,
    pub center_z: f64,
    pub target_radius: f64,
    /// Inner annulus radius; at least the target radius, leaving room for a
    /// guard gap against boundary bleed.
    pub background_inner_radius: f64,
    pub background_outer_radius: f64,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_x.is_finite() && self.center_z.is_finite()) {
            return Err(Error::Validation("region center must be finite".into()));
        }
        if !(self.target_radius.is_finite() && self.target_radius > 0.0) {
            return Err(Error::Validation(format!(
                "target radius must be finite and positive, got {}",
                self.target_radius
            )));
        }
        if !(self.background_inner_radius.is_finite()
            && self.background_inner_radius >= self.target_radius)
        {
            return Err(Error::Validation(format!(
                "background inner radius {} must be at least the target radius {}",
                self.background_inner_radius, self.target_radius
            )));
        }
        if !(self.background_outer_radius.is_finite()
            && self.background_outer_radius >= self.background_inner_radius)
        {
            return Err(Error::Validation(format!(
                "background outer radius {} must be at least the inner radius {}",
                self.background_outer_radius, self.background_inner_radius
            )));
        }
        Ok(())
    }
}

/// Region with a stable name for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRegion {
    pub name: String,
    #[serde(flatten)]
    pub region: RegionSpec,
}

/// Boolean masks for the target disk and background annulus on a grid.
///
/// A pixel belongs to a disk when its center satisfies d^2 <= r^2; the
/// annulus is inside the outer disk and not inside the inner one.
pub fn region_mask(region: &RegionSpec, grid: &BeamGrid) -> Result<(Array2<bool>, Array2<bool>)> {
    region.validate()?;
    grid.validate()?;
    let t2 = region.target_radius * region.target_radius;
    let i2 = region.background_inner_radius * region.background_inner_radius;
    let o2 = region.background_outer_radius * region.background_outer_radius;
    let mut target = Array2::from_elem((grid.num_depth_samples, grid.num_lines), false);
    let mut background = target.clone();
    for k in 0..grid.num_depth_samples {
        let dz = grid.depth(k) - region.center_z;
        for j in 0..grid.num_lines {
            let dx = grid.lateral_position(j) - region.center_x;
            let d2 = dx * dx + dz * dz;
            target[[k, j]] = d2 <= t2;
            background[[k, j]] = d2 <= o2 && !(d2 <= i2);
        }
    }
    Ok((target, background))
}

fn masked_values(image: &EnvelopeImage, mask: &Array2<bool>, label: &str) -> Result<Vec<f64>> {
    if mask.dim() != image.magnitude().dim() {
        return Err(Error::Validation(format!(
            "{label} mask shape {:?} does not match the image {:?}",
            mask.dim(),
            image.magnitude().dim()
        )));
    }
    let values: Vec<f64> = image
        .magnitude()
        .iter()
        .zip(mask.iter())
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .collect();
    if values.is_empty() {
        return Err(Error::Validation(format!("{label} region contains no pixels")));
    }
    Ok(values)
}

/// Lesion contrast in dB: `-20 log10(mean_target / mean_background)`.
///
/// A perfectly dark target returns positive infinity; a zero background mean
/// leaves the ratio undefined and is an error.
pub fn contrast(
    image: &EnvelopeImage,
    target: &Array2<bool>,
    background: &Array2<bool>,
) -> Result<f64> {
    let t = masked_values(image, target, "target")?;
    let b = masked_values(image, background, "background")?;
    let mean_t = t.iter().sum::<f64>() / t.len() as f64;
    let mean_b = b.iter().sum::<f64>() / b.len() as f64;
    if mean_b == 0.0 {
        return Err(Error::Validation("background mean is zero; contrast is undefined".into()));
    }
    if mean_t == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-20.0 * (mean_t / mean_b).log10())
}

/// gCNR outcome; `degenerate` marks an all-equal pixel population where the
/// overlap carries no information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnrEstimate {
    pub value: f64,
    pub degenerate: bool,
}

/// Generalized contrast-to-noise ratio: 1 minus the histogram overlap of the
/// two regions, on `num_bins` shared bins spanning [0, pooled max].
pub fn gcnr(
    image: &EnvelopeImage,
    target: &Array2<bool>,
    background: &Array2<bool>,
    num_bins: usize,
) -> Result<GcnrEstimate> {
    if num_bins < 2 {
        return Err(Error::Validation(format!(
            "histogram needs at least 2 bins, got {num_bins}"
        )));
    }
    let t = masked_values(image, target, "target")?;
    let b = masked_values(image, background, "background")?;

    let pooled_max = t.iter().chain(b.iter()).fold(0.0_f64, |a, &v| a.max(v));
    let pooled_min = t.iter().chain(b.iter()).fold(f64::INFINITY, |a, &v| a.min(v));
    if pooled_min == pooled_max {
        return Ok(GcnrEstimate {
            value: 0.0,
            degenerate: true,
        });
    }

    let histogram = |values: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; num_bins];
        for &v in values {
            let idx = ((v / pooled_max) * num_bins as f64) as usize;
            h[idx.min(num_bins - 1)] += 1.0;
        }
        let n = values.len() as f64;
        h.iter_mut().for_each(|x| *x /= n);
        h
    };
    let ht = histogram(&t);
    let hb = histogram(&b);
    let overlap: f64 = ht.iter().zip(hb.iter()).map(|(a, b)| a.min(*b)).sum();
    Ok(GcnrEstimate {
        value: (1.0 - overlap).clamp(0.0, 1.0),
        degenerate: false,
    })
}

// --- reporting ---

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub name: String,
    /// Lesion contrast in dB; serialized as null when infinite.
    pub contrast_db: f64,
    pub gcnr: f64,
    pub target_pixels: usize,
    pub background_pixels: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub regions: Vec<RegionReport>,
    pub mean_contrast_db: f64,
    pub mean_gcnr: f64,
    /// Histogram resolution used for every gCNR entry.
    pub histogram_bins: usize,
}

impl MetricsReport {
    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("metrics report serializes");
        text.push('\n');
        text
    }
}

/// Evaluate every named region against one image.
pub fn evaluate_regions(
    image: &EnvelopeImage,
    regions: &[NamedRegion],
    num_bins: usize,
) -> Result<MetricsReport> {
    if regions.is_empty() {
        return Err(Error::Validation("no evaluation regions given".into()));
    }
    let mut reports = Vec::with_capacity(regions.len());
    for named in regions {
        let (target, background) = region_mask(&named.region, image.grid())?;
        let contrast_db = contrast(image, &target, &background)?;
        let estimate = gcnr(image, &target, &background, num_bins)?;
        let mut flags = Vec::new();
        if contrast_db.is_infinite() {
            flags.push("infinite_contrast".to_string());
        }
        if estimate.degenerate {
            flags.push("degenerate_histogram".to_string());
        }
        reports.push(RegionReport {
            name: named.name.clone(),
            contrast_db,
            gcnr: estimate.value,
            target_pixels: target.iter().filter(|m| **m).count(),
            background_pixels: background.iter().filter(|m| **m).count(),
            flags,
        });
    }
    let n = reports.len() as f64;
    let mean_contrast_db = reports.iter().map(|r| r.contrast_db).sum::<f64>() / n;
    let mean_gcnr = reports.iter().map(|r| r.gcnr).sum::<f64>() / n;
    Ok(MetricsReport {
        regions: reports,
        mean_contrast_db,
        mean_gcnr,
        histogram_bins: num_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine_grid(n: usize, spacing: f64) -> BeamGrid {
        BeamGrid {
            num_lines: n,
            lateral_spacing: spacing,
            depth_start: 0.0,
            axial_spacing: spacing,
            num_depth_samples: n,
        }
    }

    fn image_from(values: Array2<f64>, grid: BeamGrid) -> EnvelopeImage {
        EnvelopeImage::new(values, grid, 1540.0, 5.208e6).unwrap()
    }

    fn region() -> RegionSpec {
        RegionSpec {
            center_x: 0.0,
            center_z: 10e-3,
            target_radius: 3e-3,
            background_inner_radius: 3.3e-3,
            background_outer_radius: 4.5e-3,
        }
    }

    fn uniform(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 11) as f64 / (1u64 << 53) as f64
    }

    // --- masks ---

    #[test]
    fn mask_areas_match_circle_geometry() {
        // 0.05 mm cells over a 20 x 20 mm patch centered on the region.
        let grid = fine_grid(400, 0.05e-3);
        let r = region();
        let (target, background) = region_mask(&r, &grid).unwrap();
        let cell = 0.05e-3 * 0.05e-3;
        let t_count = target.iter().filter(|m| **m).count() as f64;
        let b_count = background.iter().filter(|m| **m).count() as f64;
        let t_expect = std::f64::consts::PI * r.target_radius.powi(2) / cell;
        let b_expect = std::f64::consts::PI
            * (r.background_outer_radius.powi(2) - r.background_inner_radius.powi(2))
            / cell;
        assert!((t_count - t_expect).abs() / t_expect < 0.02, "target {t_count} vs {t_expect}");
        assert!((b_count - b_expect).abs() / b_expect < 0.02, "annulus {b_count} vs {b_expect}");
    }

    #[test]
    fn masks_are_disjoint() {
        let grid = fine_grid(200, 0.1e-3);
        let (target, background) = region_mask(&region(), &grid).unwrap();
        for (t, b) in target.iter().zip(background.iter()) {
            assert!(!(*t && *b));
        }
    }

    #[test]
    fn region_validation_orders_radii() {
        let mut r = region();
        r.background_inner_radius = 2e-3;
        assert!(r.validate().is_err(), "inner inside target");
        let mut r = region();
        r.background_outer_radius = 3e-3;
        assert!(r.validate().is_err(), "outer inside inner");
        let mut r = region();
        r.target_radius = 0.0;
        assert!(r.validate().is_err());
        assert!(region().validate().is_ok());
    }

    #[test]
    fn empty_masks_error_at_evaluation() {
        // Inner radius equal to outer leaves an empty annulus.
        let mut r = region();
        r.background_inner_radius = 4.5e-3;
        let grid = fine_grid(200, 0.1e-3);
        let (target, background) = region_mask(&r, &grid).unwrap();
        let img = image_from(Array2::from_elem((200, 200), 1.0), grid);
        assert!(contrast(&img, &target, &background).is_err());
    }

    // --- contrast ---

    /// Image whose left half is `target_level` and right half `bg_level`,
    /// with masks selecting the two halves.
    fn split_image(
        n: usize,
        target_level: impl Fn(&mut u64) -> f64,
        bg_level: impl Fn(&mut u64) -> f64,
    ) -> (EnvelopeImage, Array2<bool>, Array2<bool>) {
        let grid = fine_grid(n, 0.1e-3);
        let mut values = Array2::zeros((n, n));
        let mut target = Array2::from_elem((n, n), false);
        let mut background = Array2::from_elem((n, n), false);
        let mut seed = 0xfeed5eed;
        for k in 0..n {
            for j in 0..n {
                if j < n / 2 {
                    values[[k, j]] = target_level(&mut seed);
                    target[[k, j]] = true;
                } else {
                    values[[k, j]] = bg_level(&mut seed);
                    background[[k, j]] = true;
                }
            }
        }
        (image_from(values, grid), target, background)
    }

    #[test]
    fn contrast_of_known_ratios() {
        let (img, t, b) = split_image(32, |_| 1.0, |_| 1.0);
        assert!(contrast(&img, &t, &b).unwrap().abs() < 1e-12);

        // Target one decade below the background: +20 dB.
        let (img, t, b) = split_image(32, |_| 0.1, |_| 1.0);
        assert!((contrast(&img, &t, &b).unwrap() - 20.0).abs() < 1e-12);

        // Target twice the background: -20 log10(2) = -6.0206 dB.
        let (img, t, b) = split_image(32, |_| 2.0, |_| 1.0);
        let expect = -20.0 * 2.0_f64.log10();
        assert!((contrast(&img, &t, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn contrast_edge_cases() {
        let (img, t, b) = split_image(16, |_| 0.0, |_| 1.0);
        assert_eq!(contrast(&img, &t, &b).unwrap(), f64::INFINITY);

        let (img, t, b) = split_image(16, |_| 1.0, |_| 0.0);
        assert!(contrast(&img, &t, &b).is_err(), "zero background mean");

        let empty = Array2::from_elem((16, 16), false);
        let (img, t, _) = split_image(16, |_| 1.0, |_| 1.0);
        assert!(contrast(&img, &t, &empty).is_err());
    }

    #[test]
    fn contrast_is_scale_invariant() {
        let (img, t, b) = split_image(64, |s| 0.2 + uniform(s), |s| 0.9 + uniform(s));
        let base = contrast(&img, &t, &b).unwrap();
        // Power-of-two scaling is exact in floating point.
        let scaled_values = img.magnitude().mapv(|v| v * 1024.0);
        let scaled = image_from(scaled_values, img.grid().clone());
        assert_eq!(contrast(&scaled, &t, &b).unwrap(), base);
        // Arbitrary scaling agrees to rounding error.
        let scaled_values = img.magnitude().mapv(|v| v * 3.7);
        let scaled = image_from(scaled_values, img.grid().clone());
        assert!((contrast(&scaled, &t, &b).unwrap() - base).abs() < 1e-12);
    }

    // --- gcnr ---

    #[test]
    fn gcnr_of_identical_distributions_is_near_zero() {
        let (img, t, b) = split_image(400, |s| uniform(s), |s| uniform(s));
        let g = gcnr(&img, &t, &b, 256).unwrap();
        assert!(!g.degenerate);
        // 80 000 samples per side over 256 bins: the expected histogram
        // sampling noise is sqrt(bins / (pi * n)) = 0.032.
        assert!(g.value < 0.05, "gcnr {}", g.value);
    }

    #[test]
    fn gcnr_of_disjoint_distributions_is_one() {
        let (img, t, b) = split_image(64, |s| 0.1 * uniform(s), |s| 0.9 + 0.1 * uniform(s));
        let g = gcnr(&img, &t, &b, 256).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gcnr_of_half_overlapping_uniforms_is_half() {
        // U[0,1] against U[0.5,1.5]: continuous overlap is exactly 0.5.
        let (img, t, b) = split_image(200, |s| uniform(s), |s| 0.5 + uniform(s));
        let g = gcnr(&img, &t, &b, 256).unwrap();
        assert!((g.value - 0.5).abs() < 0.05, "gcnr {}", g.value);
    }

    #[test]
    fn gcnr_scale_invariance_and_degeneracy() {
        let (img, t, b) = split_image(64, |s| uniform(s), |s| 0.3 + uniform(s));
        let base = gcnr(&img, &t, &b, 128).unwrap().value;
        let scaled = image_from(img.magnitude().mapv(|v| v * 512.0), img.grid().clone());
        assert_eq!(gcnr(&scaled, &t, &b, 128).unwrap().value, base);

        let (img, t, b) = split_image(16, |_| 0.7, |_| 0.7);
        let g = gcnr(&img, &t, &b, 64).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.degenerate);

        let (img, t, b) = split_image(16, |_| 0.0, |_| 0.0);
        let g = gcnr(&img, &t, &b, 64).unwrap();
        assert!(g.degenerate);

        assert!(gcnr(&img, &t, &b, 1).is_err());
    }

    // --- reports ---

    #[test]
    fn evaluate_regions_summarizes_and_serializes() {
        // Disk of low amplitude inside a bright field.
        let grid = fine_grid(200, 0.1e-3);
        let r = RegionSpec {
            center_x: 0.0,
            center_z: 10e-3,
            target_radius: 2e-3,
            background_inner_radius: 2.5e-3,
            background_outer_radius: 5e-3,
        };
        let mut values = Array2::from_elem((200, 200), 1.0);
        let mut seed = 99u64;
        for k in 0..200 {
            for j in 0..200 {
                let dx = grid.lateral_position(j) - r.center_x;
                let dz = grid.depth(k) - r.center_z;
                let v = 0.5 + uniform(&mut seed);
                values[[k, j]] = if dx * dx + dz * dz <= r.target_radius * r.target_radius {
                    0.1 * v
                } else {
                    v
                };
            }
        }
        let img = image_from(values, grid);
        let regions = vec![
            NamedRegion { name: "cyst".into(), region: r.clone() },
            NamedRegion { name: "same".into(), region: r },
        ];
        let report = evaluate_regions(&img, &regions, 256).unwrap();
        assert_eq!(report.regions.len(), 2);
        assert!(report.regions[0].contrast_db > 15.0);
        assert!(report.regions[0].gcnr > 0.9);
        assert!(report.regions[0].target_pixels > 100);
        assert!(report.regions[0].background_pixels > 100);
        assert!((report.mean_contrast_db
            - (report.regions[0].contrast_db + report.regions[1].contrast_db) / 2.0)
            .abs()
            < 1e-12);
        let json = report.to_json_pretty();
        for key in ["regions", "contrast_db", "gcnr", "mean_contrast_db", "mean_gcnr", "target_pixels"] {
            assert!(json.contains(key), "missing {key}");
        }
        assert!(!json.contains("flags"), "no flags expected on a clean run");
    }

    #[test]
    fn infinite_contrast_serializes_as_null_and_flags() {
        let grid = fine_grid(100, 0.2e-3);
        let r = RegionSpec {
            center_x: 0.0,
            center_z: 10e-3,
            target_radius: 2e-3,
            background_inner_radius: 2.5e-3,
            background_outer_radius: 5e-3,
        };
        let mut values = Array2::from_elem((100, 100), 1.0);
        for k in 0..100 {
            for j in 0..100 {
                let dx = grid.lateral_position(j) - r.center_x;
                let dz = grid.depth(k) - r.center_z;
                if dx * dx + dz * dz <= r.target_radius * r.target_radius {
                    values[[k, j]] = 0.0;
                }
            }
        }
        let img = image_from(values, grid);
        let regions = vec![NamedRegion { name: "void".into(), region: r }];
        let report = evaluate_regions(&img, &regions, 256).unwrap();
        assert_eq!(report.regions[0].contrast_db, f64::INFINITY);
        assert_eq!(report.regions[0].flags, vec!["infinite_contrast".to_string()]);
        let json = report.to_json_pretty();
        assert!(json.contains("\"contrast_db\": null"), "json was {json}");
        assert!(json.contains("infinite_contrast"));
    }

    #[test]
    fn evaluate_rejects_empty_region_list() {
        let grid = fine_grid(10, 1e-3);
        let img = image_from(Array2::zeros((10, 10)), grid);
        assert!(evaluate_regions(&img, &[], 256).is_err());
    }
}
