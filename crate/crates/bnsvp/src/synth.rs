//! Seeded synthetic video datasets: planted scene/component structure with
//! contiguous anomaly blocks, outlier injection, and multimodal bag
//! construction.
//!
//! Features live in a split space: anomaly modes occupy their own
//! nonnegative directions on a reserved block of coordinates while normal
//! scene components stay on the complementary coordinates, so anomalies are
//! linearly detectable yet mode-specific.

use nalgebra::{DMatrix, DVector};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{segment_labels, segment_video, Bag, BagLabel, Dataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Scene self-transition probability of generated bags.
const SCENE_STAY_PROBABILITY: f64 = 0.92;

/// Shape of a generated dataset.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_bags_pos: usize,
    pub n_bags_neg: usize,
    pub n_segments: usize,
    pub dim: usize,
    pub n_scenes: usize,
    pub components_per_scene: usize,
    pub anomaly_modes: usize,
    /// Fraction of a positive bag's segments that are anomalous.
    pub anomaly_fraction: f64,
    /// Distance between cluster means, in units of the emission standard
    /// deviation.
    pub mean_separation: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_bags_pos: 20,
            n_bags_neg: 20,
            n_segments: 32,
            dim: 8,
            n_scenes: 3,
            components_per_scene: 2,
            anomaly_modes: 1,
            anomaly_fraction: 0.25,
            mean_separation: 4.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Total anomalous segments per positive bag.
    fn anomaly_total(&self) -> usize {
        (self.anomaly_fraction * self.n_segments as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("n_segments", self.n_segments),
            ("dim", self.dim),
            ("n_scenes", self.n_scenes),
            ("components_per_scene", self.components_per_scene),
            ("anomaly_modes", self.anomaly_modes),
        ] {
            if value == 0 {
                return Err(Error::Argument(format!("{name} must be at least 1")));
            }
        }
        if !(self.anomaly_fraction > 0.0 && self.anomaly_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "anomaly_fraction must lie in (0, 1), got {}",
                self.anomaly_fraction
            )));
        }
        if !(self.mean_separation >= 0.0) || !self.mean_separation.is_finite() {
            return Err(Error::Argument(format!(
                "mean_separation must be non-negative and finite, got {}",
                self.mean_separation
            )));
        }
        if self.n_bags_pos > 0 {
            if self.anomaly_fraction * (self.n_segments as f64) < 1.0 {
                return Err(Error::Argument(format!(
                    "anomaly_fraction {} leaves no anomalous segment in {} segments",
                    self.anomaly_fraction, self.n_segments
                )));
            }
            let total = self.anomaly_total();
            if total < self.anomaly_modes {
                return Err(Error::Argument(format!(
                    "{total} anomalous segments cannot host {} anomaly modes",
                    self.anomaly_modes
                )));
            }
            if total + (self.anomaly_modes - 1) > self.n_segments {
                return Err(Error::Argument(format!(
                    "{total} anomalous segments in {} anomaly modes do not fit {} segments",
                    self.anomaly_modes, self.n_segments
                )));
            }
            if self.dim < self.anomaly_modes + 1 {
                return Err(Error::Argument(format!(
                    "dim {} cannot hold {} anomaly directions plus normal structure",
                    self.dim, self.anomaly_modes
                )));
            }
        }
        Ok(())
    }
}

/// Unit vector with nonnegative entries on `support`, zero elsewhere.
fn nonnegative_direction(rng: &mut Rng, dim: usize, support: &[usize]) -> DVector<f64> {
    let mut direction = DVector::zeros(dim);
    for &coord in support {
        let draw: f64 = StandardNormal.sample(rng);
        direction[coord] = draw.abs();
    }
    let norm = direction.norm();
    if norm > 0.0 {
        direction /= norm;
    } else {
        direction[support[0]] = 1.0;
    }
    direction
}

/// Signed unit vector on `support`, zero elsewhere.
fn signed_direction(rng: &mut Rng, dim: usize, support: &[usize]) -> DVector<f64> {
    let mut direction = DVector::zeros(dim);
    for &coord in support {
        direction[coord] = StandardNormal.sample(rng);
    }
    let norm = direction.norm();
    if norm > 0.0 {
        direction /= norm;
    } else {
        direction[support[0]] = 1.0;
    }
    direction
}

fn min_distance(candidate: &DVector<f64>, accepted: &[DVector<f64>]) -> f64 {
    accepted
        .iter()
        .map(|m| (candidate - m).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Anomaly-mode means and normal scene-component means, mutually separated
/// by at least `mean_separation`.
fn place_means(config: &ScenarioConfig, rng: &mut Rng) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let separation = config.mean_separation;
    let anomaly_support: Vec<usize> = (1..=config.anomaly_modes).collect();
    let normal_support: Vec<usize> = std::iter::once(0)
        .chain(config.anomaly_modes + 1..config.dim)
        .collect();

    let mut modes: Vec<DVector<f64>> = Vec::with_capacity(config.anomaly_modes);
    for m in 0..config.anomaly_modes {
        let mut placed = None;
        for _ in 0..200 {
            let candidate = nonnegative_direction(rng, config.dim, &anomaly_support) * separation;
            if min_distance(&candidate, &modes) >= separation {
                placed = Some(candidate);
                break;
            }
        }
        modes.push(placed.unwrap_or_else(|| {
            let mut axis = DVector::zeros(config.dim);
            axis[anomaly_support[m % anomaly_support.len()]] = separation;
            axis
        }));
    }

    let n_normals = config.n_scenes * config.components_per_scene;
    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(n_normals);
    for idx in 0..n_normals {
        let mut placed = None;
        for _ in 0..200 {
            let scale = 1.0 + rng.random::<f64>();
            let candidate = signed_direction(rng, config.dim, &normal_support) * separation * scale;
            if min_distance(&candidate, &normals) >= separation {
                placed = Some(candidate);
                break;
            }
        }
        normals.push(placed.unwrap_or_else(|| {
            let mut axis = DVector::zeros(config.dim);
            let magnitude = (idx / 2 + 1) as f64 * separation;
            axis[0] = if idx % 2 == 0 { magnitude } else { -magnitude };
            axis
        }));
    }
    (modes, normals)
}

fn sample_scene_sequence(config: &ScenarioConfig, rng: &mut Rng) -> Vec<usize> {
    let n_scenes = config.n_scenes;
    let mut scenes = Vec::with_capacity(config.n_segments);
    let mut current = rng.random_range(0..n_scenes);
    for _ in 0..config.n_segments {
        scenes.push(current);
        if n_scenes > 1 && rng.random::<f64>() >= SCENE_STAY_PROBABILITY {
            let jump = rng.random_range(0..n_scenes - 1);
            current = if jump >= current { jump + 1 } else { jump };
        }
    }
    scenes
}

/// Splits `total` into `parts` nonnegative integers, summing exactly.
fn random_composition(rng: &mut Rng, total: usize, parts: usize) -> Vec<usize> {
    let draws: Vec<f64> = (0..parts).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let sum: f64 = draws.iter().sum();
    if sum == 0.0 {
        let mut out = vec![0; parts];
        out[0] = total;
        return out;
    }
    let mut out = Vec::with_capacity(parts);
    let mut acc = 0.0;
    let mut previous = 0;
    for draw in draws {
        acc += draw;
        let upto = ((total as f64) * (acc / sum)).floor() as usize;
        let upto = upto.min(total);
        out.push(upto - previous);
        previous = upto;
    }
    let assigned: usize = out.iter().sum();
    out[parts - 1] += total - assigned;
    out
}

/// Disjoint anomaly blocks, one per mode, separated by at least one normal
/// segment; returns `(start, length, mode)` triples.
fn place_anomaly_blocks(config: &ScenarioConfig, rng: &mut Rng) -> Vec<(usize, usize, usize)> {
    let modes = config.anomaly_modes;
    let total = config.anomaly_total();
    let base = total / modes;
    let remainder = total % modes;
    let lengths: Vec<usize> = (0..modes)
        .map(|m| base + usize::from(m < remainder))
        .collect();

    let free = config.n_segments - total - (modes - 1);
    let extra_gaps = random_composition(rng, free, modes + 1);
    let mut mode_order: Vec<usize> = (0..modes).collect();
    mode_order.shuffle(rng);

    let mut blocks = Vec::with_capacity(modes);
    let mut cursor = 0;
    for (slot, &mode) in mode_order.iter().enumerate() {
        cursor += extra_gaps[slot] + usize::from(slot > 0);
        blocks.push((cursor, lengths[slot], mode));
        cursor += lengths[slot];
    }
    blocks
}

/// Generates a planted dataset: negative bags follow a sticky Markov chain
/// over Gaussian scene components; positive bags additionally carry one
/// contiguous anomaly block per mode, drawn around that mode's mean.
pub fn generate_planted(config: &ScenarioConfig) -> Result<Dataset> {
    config.validate()?;
    if config.n_bags_pos + config.n_bags_neg == 0 {
        return Err(Error::Argument("dataset needs at least one bag".into()));
    }
    let mut rng = rng_from_seed(config.seed);
    let (mode_means, normal_means) = place_means(config, &mut rng);

    let mut bags = Vec::with_capacity(config.n_bags_pos + config.n_bags_neg);
    for bag_idx in 0..config.n_bags_pos + config.n_bags_neg {
        let positive = bag_idx < config.n_bags_pos;
        let scenes = sample_scene_sequence(config, &mut rng);
        let mut features = DMatrix::zeros(config.n_segments, config.dim);
        for (i, &scene) in scenes.iter().enumerate() {
            let component = rng.random_range(0..config.components_per_scene);
            let mean = &normal_means[scene * config.components_per_scene + component];
            for d in 0..config.dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features[(i, d)] = mean[d] + noise;
            }
        }

        let mut labels = vec![false; config.n_segments];
        if positive {
            for (start, length, mode) in place_anomaly_blocks(config, &mut rng) {
                for i in start..start + length {
                    labels[i] = true;
                    for d in 0..config.dim {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        features[(i, d)] = mode_means[mode][d] + noise;
                    }
                }
            }
        }

        let (id, label) = if positive {
            (format!("pos_{bag_idx:03}"), BagLabel::Abnormal)
        } else {
            (
                format!("neg_{:03}", bag_idx - config.n_bags_pos),
                BagLabel::Normal,
            )
        };
        bags.push(Bag::new(id, features, label, Some(labels))?);
    }
    Dataset::new("planted", bags)
}

/// Replaces `count` uniformly chosen segments of abnormal bags with draws
/// from a standard Gaussian; labels and normal bags are untouched.
pub fn inject_outliers(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for (bag_idx, bag) in dataset.bags.iter().enumerate() {
        if bag.label.is_abnormal() {
            slots.extend((0..bag.n_segments()).map(|i| (bag_idx, i)));
        }
    }
    if count > slots.len() {
        return Err(Error::Argument(format!(
            "cannot replace {count} segments; abnormal bags hold only {}",
            slots.len()
        )));
    }
    let mut corrupted = dataset.clone();
    if count == 0 {
        return Ok(corrupted);
    }
    let mut rng = rng_from_seed(seed);
    let (chosen, _) = slots.partial_shuffle(&mut rng, count);
    for &(bag_idx, segment) in chosen.iter() {
        let bag = &mut corrupted.bags[bag_idx];
        for d in 0..bag.features.ncols() {
            bag.features[(segment, d)] = StandardNormal.sample(&mut rng);
        }
    }
    Ok(corrupted)
}

/// Generates one single-mode planted dataset per anomaly mode, with the
/// modes rotated onto mutually orthogonal feature axes so that a mixture of
/// them (see [`make_multimodal_bags`]) carries genuinely distinct anomaly
/// directions.
pub fn generate_mode_datasets(base: &ScenarioConfig, n_modes: usize) -> Result<Vec<Dataset>> {
    if n_modes == 0 {
        return Err(Error::Argument("n_modes must be at least 1".into()));
    }
    if base.dim < n_modes + 1 {
        return Err(Error::Argument(format!(
            "dim {} cannot hold {n_modes} orthogonal anomaly directions",
            base.dim
        )));
    }
    (0..n_modes)
        .map(|mode| {
            let config = ScenarioConfig {
                anomaly_modes: 1,
                seed: derive_seed(base.seed, mode as u64),
                ..base.clone()
            };
            let mut dataset = generate_planted(&config)?;
            dataset.name = format!("mode_{mode}");
            if mode > 0 {
                for bag in &mut dataset.bags {
                    bag.features.swap_columns(1, 1 + mode);
                }
            }
            Ok(dataset)
        })
        .collect()
}

/// Builds bags that mix anomaly modes: each positive bag concatenates one
/// abnormal video from each of three distinct randomly chosen modes (each
/// negative bag, three normal videos), then re-segmentizes to the source
/// segment count with label pooling.
pub fn make_multimodal_bags(
    mode_datasets: &[Dataset],
    bags_pos: usize,
    bags_neg: usize,
    seed: u64,
) -> Result<Dataset> {
    if mode_datasets.len() < 3 {
        return Err(Error::Argument(format!(
            "multimodal bags need at least 3 mode datasets, got {}",
            mode_datasets.len()
        )));
    }
    if bags_pos + bags_neg == 0 {
        return Err(Error::Argument("dataset needs at least one bag".into()));
    }
    let dim = mode_datasets[0].dim();
    let n_segments = mode_datasets[0].bags[0].n_segments();
    for dataset in mode_datasets {
        if dataset.dim() != dim {
            return Err(Error::Argument(format!(
                "mode datasets disagree on dimension: {} vs {dim}",
                dataset.dim()
            )));
        }
        if dataset.bags.iter().any(|b| b.n_segments() != n_segments) {
            return Err(Error::Argument(
                "mode dataset bags must share one segment count".into(),
            ));
        }
        if bags_pos > 0 && dataset.abnormal_bags().next().is_none() {
            return Err(Error::Argument(format!(
                "mode dataset '{}' has no abnormal bags to draw from",
                dataset.name
            )));
        }
        if bags_neg > 0 && dataset.normal_bags().next().is_none() {
            return Err(Error::Argument(format!(
                "mode dataset '{}' has no normal bags to draw from",
                dataset.name
            )));
        }
    }

    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let mode_indices: Vec<usize> = (0..mode_datasets.len()).collect();
    let mut bags = Vec::with_capacity(bags_pos + bags_neg);
    for bag_idx in 0..bags_pos + bags_neg {
        let positive = bag_idx < bags_pos;
        let chosen: Vec<usize> = mode_indices.choose_multiple(&mut rng, 3).copied().collect();

        let mut clips = DMatrix::zeros(3 * n_segments, dim);
        let mut clip_labels = Vec::with_capacity(3 * n_segments);
        for (part, &mode) in chosen.iter().enumerate() {
            let pool: Vec<&Bag> = if positive {
                mode_datasets[mode].abnormal_bags().collect()
            } else {
                mode_datasets[mode].normal_bags().collect()
            };
            let source = pool[rng.random_range(0..pool.len())];
            clips
                .view_mut((part * n_segments, 0), (n_segments, dim))
                .copy_from(&source.features);
            match &source.segment_labels {
                Some(labels) => clip_labels.extend(labels.iter().copied()),
                None => clip_labels.extend(std::iter::repeat_n(false, n_segments)),
            }
        }

        let features = segment_video(&clips, n_segments)?;
        let labels = segment_labels(&clip_labels, n_segments)?;
        let (id, label) = if positive {
            (format!("pos_{bag_idx:03}"), BagLabel::Abnormal)
        } else {
            (format!("neg_{:03}", bag_idx - bags_pos), BagLabel::Normal)
        };
        bags.push(Bag::new(id, features, label, Some(labels))?);
    }
    Dataset::new("multimodal", bags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn datasets_equal(a: &Dataset, b: &Dataset) -> bool {
        a.bags.len() == b.bags.len()
            && a.bags.iter().zip(&b.bags).all(|(x, y)| {
                x.id == y.id
                    && x.label == y.label
                    && x.features == y.features
                    && x.segment_labels == y.segment_labels
            })
    }

    fn small_config(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_bags_pos: 3,
            n_bags_neg: 3,
            n_segments: 16,
            dim: 5,
            n_scenes: 2,
            components_per_scene: 2,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn negative_only_datasets_carry_no_anomaly_labels() {
        let config = ScenarioConfig {
            n_bags_pos: 0,
            n_bags_neg: 4,
            ..small_config(1)
        };
        let dataset = generate_planted(&config).unwrap();
        assert_eq!(dataset.bags.len(), 4);
        for bag in &dataset.bags {
            assert_eq!(bag.label, BagLabel::Normal);
            assert!(bag.segment_labels.as_ref().unwrap().iter().all(|&l| !l));
        }
    }

    #[test]
    fn positive_bags_carry_one_block_per_mode() {
        let config = ScenarioConfig {
            anomaly_modes: 3,
            anomaly_fraction: 0.3,
            n_segments: 32,
            dim: 8,
            ..small_config(2)
        };
        let dataset = generate_planted(&config).unwrap();
        for bag in dataset.abnormal_bags() {
            let labels = bag.segment_labels.as_ref().unwrap();
            let mut runs = 0;
            let mut previous = false;
            for &label in labels {
                if label && !previous {
                    runs += 1;
                }
                previous = label;
            }
            assert_eq!(runs, 3, "labels {labels:?}");
            let total = labels.iter().filter(|&&l| l).count();
            assert_eq!(total, (0.3_f64 * 32.0).round() as usize);
        }
    }

    #[test]
    fn labels_follow_the_mil_assumption() {
        let dataset = generate_planted(&small_config(3)).unwrap();
        for bag in &dataset.bags {
            let any = bag.segment_labels.as_ref().unwrap().iter().any(|&l| l);
            assert_eq!(any, bag.label.is_abnormal());
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let a = generate_planted(&small_config(7)).unwrap();
        let b = generate_planted(&small_config(7)).unwrap();
        assert!(datasets_equal(&a, &b));
        for pair in 0..10u64 {
            let left = generate_planted(&small_config(pair)).unwrap();
            let right = generate_planted(&small_config(pair + 1)).unwrap();
            assert!(!datasets_equal(&left, &right), "seeds {pair} collide");
        }
    }

    #[test]
    fn anomaly_means_sit_apart_from_normal_features() {
        // With a large separation, anomalous rows land far from every
        // normal row of the same dataset.
        let config = ScenarioConfig {
            mean_separation: 8.0,
            ..small_config(4)
        };
        let dataset = generate_planted(&config).unwrap();
        let mut normal_rows = Vec::new();
        let mut anomaly_rows = Vec::new();
        for bag in &dataset.bags {
            let labels = bag.segment_labels.as_ref().unwrap();
            for (i, &anomalous) in labels.iter().enumerate() {
                let row = bag.features.row(i).transpose();
                if anomalous {
                    anomaly_rows.push(row);
                } else {
                    normal_rows.push(row);
                }
            }
        }
        assert!(!anomaly_rows.is_empty());
        for anomaly in &anomaly_rows {
            let nearest = normal_rows
                .iter()
                .map(|n| (anomaly - n).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest > 3.0, "anomaly within {nearest} of a normal row");
        }
    }

    #[test]
    fn zero_separation_is_allowed() {
        let config = ScenarioConfig {
            mean_separation: 0.0,
            ..small_config(5)
        };
        let dataset = generate_planted(&config).unwrap();
        assert_eq!(dataset.bags.len(), 6);
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let base = small_config(6);
        assert!(generate_planted(&ScenarioConfig {
            anomaly_fraction: 0.01,
            ..base.clone()
        })
        .is_err());
        assert!(generate_planted(&ScenarioConfig {
            anomaly_modes: 5,
            dim: 5,
            ..base.clone()
        })
        .is_err());
        assert!(generate_planted(&ScenarioConfig {
            anomaly_fraction: 0.99,
            anomaly_modes: 8,
            ..base.clone()
        })
        .is_err());
        assert!(generate_planted(&ScenarioConfig {
            n_bags_pos: 0,
            n_bags_neg: 0,
            ..base
        })
        .is_err());
    }

    #[test]
    fn outlier_injection_replaces_exactly_count_rows() {
        let dataset = generate_planted(&small_config(8)).unwrap();
        let corrupted = inject_outliers(&dataset, 7, 99).unwrap();
        let mut differing = 0;
        for (before, after) in dataset.bags.iter().zip(&corrupted.bags) {
            assert_eq!(before.label, after.label);
            assert_eq!(before.segment_labels, after.segment_labels);
            if !before.label.is_abnormal() {
                assert_eq!(before.features, after.features);
                continue;
            }
            for i in 0..before.n_segments() {
                if before.features.row(i) != after.features.row(i) {
                    differing += 1;
                }
            }
        }
        assert_eq!(differing, 7);
    }

    #[test]
    fn outlier_injection_edge_counts() {
        let dataset = generate_planted(&small_config(9)).unwrap();
        let untouched = inject_outliers(&dataset, 0, 5).unwrap();
        assert!(datasets_equal(&dataset, &untouched));

        let total_abnormal = 3 * 16;
        let saturated = inject_outliers(&dataset, total_abnormal, 5).unwrap();
        for (before, after) in dataset.bags.iter().zip(&saturated.bags) {
            if before.label.is_abnormal() {
                for i in 0..before.n_segments() {
                    assert_ne!(before.features.row(i), after.features.row(i));
                }
            }
        }
        assert!(inject_outliers(&dataset, total_abnormal + 1, 5).is_err());
    }

    #[test]
    fn outlier_injection_is_deterministic() {
        let dataset = generate_planted(&small_config(10)).unwrap();
        let a = inject_outliers(&dataset, 5, 42).unwrap();
        let b = inject_outliers(&dataset, 5, 42).unwrap();
        assert!(datasets_equal(&a, &b));
        let c = inject_outliers(&dataset, 5, 43).unwrap();
        assert!(!datasets_equal(&a, &c));
    }

    fn mode_datasets(seed: u64) -> Vec<Dataset> {
        (0..3)
            .map(|m| {
                generate_planted(&ScenarioConfig {
                    n_bags_pos: 2,
                    n_bags_neg: 2,
                    seed: derive_seed(seed, m),
                    ..small_config(0)
                })
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn multimodal_bags_pool_labels_and_counts() {
        let modes = mode_datasets(11);
        let dataset = make_multimodal_bags(&modes, 5, 4, 1).unwrap();
        assert_eq!(dataset.bags.len(), 9);
        assert_eq!(dataset.abnormal_bags().count(), 5);
        for bag in &dataset.bags {
            assert_eq!(bag.n_segments(), 16);
            assert_eq!(bag.dim(), 5);
            let any = bag.segment_labels.as_ref().unwrap().iter().any(|&l| l);
            assert_eq!(any, bag.label.is_abnormal());
        }
    }

    #[test]
    fn multimodal_bags_are_deterministic() {
        let modes = mode_datasets(12);
        let a = make_multimodal_bags(&modes, 4, 4, 7).unwrap();
        let b = make_multimodal_bags(&modes, 4, 4, 7).unwrap();
        assert!(datasets_equal(&a, &b));
        let c = make_multimodal_bags(&modes, 4, 4, 8).unwrap();
        assert!(!datasets_equal(&a, &c));
    }

    #[test]
    fn mode_datasets_use_orthogonal_anomaly_axes() {
        let base = ScenarioConfig {
            mean_separation: 6.0,
            dim: 6,
            ..small_config(14)
        };
        let modes = generate_mode_datasets(&base, 3).unwrap();
        assert_eq!(modes.len(), 3);
        // Anomalous rows of mode m load on axis 1+m and nowhere else among
        // the anomaly axes.
        for (m, dataset) in modes.iter().enumerate() {
            for bag in dataset.abnormal_bags() {
                let labels = bag.segment_labels.as_ref().unwrap();
                for (i, &anomalous) in labels.iter().enumerate() {
                    if !anomalous {
                        continue;
                    }
                    for axis in 1..=3 {
                        let value = bag.features[(i, axis)];
                        if axis == 1 + m {
                            assert!(value > 3.0, "mode {m} axis {axis} value {value}");
                        } else {
                            assert!(value.abs() < 3.0, "mode {m} axis {axis} value {value}");
                        }
                    }
                }
            }
        }
        assert!(generate_mode_datasets(&base, 6).is_err());
    }

    #[test]
    fn multimodal_bags_reject_thin_inputs() {
        let modes = mode_datasets(13);
        assert!(make_multimodal_bags(&modes[..2], 2, 2, 0).is_err());

        let normal_only: Vec<Dataset> = (0..3)
            .map(|m| {
                generate_planted(&ScenarioConfig {
                    n_bags_pos: 0,
                    n_bags_neg: 2,
                    seed: m,
                    ..small_config(0)
                })
                .unwrap()
            })
            .collect();
        assert!(make_multimodal_bags(&normal_only, 2, 2, 0).is_err());
        assert!(make_multimodal_bags(&normal_only, 0, 2, 0).is_ok());
    }
}
