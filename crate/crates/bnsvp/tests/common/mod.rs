//! Shared fixtures for the integration suites: planted scene sequences with
//! known assignments, a clustering-agreement score, and block-structured
//! similarity instances.

// Each test binary pulls in this whole module but uses its own subset.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use bnsvp::partition::{Emission, PartitionResult};
use bnsvp::rng::rng_from_seed;
use bnsvp::submodular::SimilarityMatrix;

/// A feature sequence together with the scene and component ids that
/// generated each segment.
pub struct PlantedSequence {
    pub features: DMatrix<f64>,
    pub scenes: Vec<usize>,
    pub components: Vec<usize>,
}

impl PlantedSequence {
    /// Scene and component ids flattened into one label per segment.
    pub fn joint_labels(&self) -> Vec<usize> {
        let width = self.components.iter().max().copied().unwrap_or(0) + 1;
        self.scenes
            .iter()
            .zip(&self.components)
            .map(|(&z, &s)| z * width + s)
            .collect()
    }

    /// Count of positions where consecutive segments change scene.
    pub fn scene_boundaries(&self) -> usize {
        boundary_count(&self.scenes)
    }
}

/// Number of adjacent pairs with different labels.
pub fn boundary_count(labels: &[usize]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Samples a sticky Markov chain over `n_scenes` scenes, each scene owning
/// `components_per_scene` unit-variance Gaussian clusters. Cluster means sit
/// on distinct coordinate axes at `separation` from the origin, so every
/// pair of means is at least `separation` apart.
pub fn planted_sequence(
    n_segments: usize,
    n_scenes: usize,
    components_per_scene: usize,
    dim: usize,
    separation: f64,
    stay_probability: f64,
    seed: u64,
) -> PlantedSequence {
    let n_clusters = n_scenes * components_per_scene;
    assert!(dim >= n_clusters, "need one coordinate axis per cluster");
    assert!(n_segments > 0 && n_scenes > 0 && components_per_scene > 0);

    let mut rng = rng_from_seed(seed);
    let mut scenes = Vec::with_capacity(n_segments);
    let mut current = rng.random_range(0..n_scenes);
    for _ in 0..n_segments {
        scenes.push(current);
        if n_scenes > 1 && rng.random::<f64>() >= stay_probability {
            let step = rng.random_range(1..n_scenes);
            current = (current + step) % n_scenes;
        }
    }

    let components: Vec<usize> = (0..n_segments)
        .map(|_| rng.random_range(0..components_per_scene))
        .collect();

    let mut features = DMatrix::zeros(n_segments, dim);
    for i in 0..n_segments {
        let axis = scenes[i] * components_per_scene + components[i];
        for j in 0..dim {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features[(i, j)] = noise + if j == axis { separation } else { 0.0 };
        }
    }

    PlantedSequence {
        features,
        scenes,
        components,
    }
}

/// Adjusted Rand index between two labelings of the same items: 1 for
/// identical partitions up to relabeling, about 0 for independent ones.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    assert!(n > 1, "agreement needs at least two items");

    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }

    let comb2 = |k: usize| (k * k.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = cells.values().map(|&k| comb2(k)).sum();
    let row_sum: f64 = rows.values().map(|&k| comb2(k)).sum();
    let col_sum: f64 = cols.values().map(|&k| comb2(k)).sum();
    let expected = row_sum * col_sum / comb2(n);
    let max_index = 0.5 * (row_sum + col_sum);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

/// Wraps explicit scene/component assignments in a partition result with
/// placeholder transition and emission parameters, for exercising selection
/// code that only reads the assignments.
pub fn assignment_partition(z: Vec<usize>, s: Vec<usize>) -> PartitionResult {
    let n_states = z.iter().max().map_or(0, |m| m + 1).max(1);
    let n_components = s.iter().max().map_or(0, |m| m + 1).max(1);
    let mut emissions = BTreeMap::new();
    for (&zi, &si) in z.iter().zip(&s) {
        emissions.entry((zi, si)).or_insert_with(|| Emission {
            mean: DVector::zeros(1),
            cov: DMatrix::identity(1, 1),
        });
    }
    PartitionResult::new(
        z,
        s,
        vec![1.0 / (n_states + 1) as f64; n_states + 1],
        DMatrix::from_element(n_states, n_states, 1.0 / n_states as f64),
        DMatrix::from_element(n_states, n_components, 1.0 / n_components as f64),
        emissions,
        Vec::new(),
    )
    .expect("placeholder partition is well formed")
}

/// Clustered features for similarity-instance construction: `block_sizes`
/// tight clusters, each around a mean of norm in `[1, 2]` on its own random
/// direction, with isotropic noise of the given scale.
pub fn clustered_features(
    block_sizes: &[usize],
    dim: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> (DMatrix<f64>, Vec<usize>) {
    let n: usize = block_sizes.iter().sum();
    let mut features = DMatrix::zeros(n, dim);
    let mut assignment = vec![0; n];
    let mut row = 0;
    for (block, &size) in block_sizes.iter().enumerate() {
        let mut direction = DVector::from_fn(dim, |_, _| {
            let v: f64 = StandardNormal.sample(rng);
            v
        });
        direction /= direction.norm().max(1e-9);
        let mean = direction * (1.0 + rng.random::<f64>());
        for _ in 0..size {
            for j in 0..dim {
                let jitter: f64 = StandardNormal.sample(rng);
                features[(row, j)] = mean[j] + noise * jitter;
            }
            assignment[row] = block;
            row += 1;
        }
    }
    (features, assignment)
}

/// Block-diagonal similarity whose within-block entries are a per-block
/// level plus small jitter, symmetric and strictly positive.
pub fn near_constant_block_similarity(
    block_sizes: &[usize],
    jitter: f64,
    rng: &mut impl Rng,
) -> (SimilarityMatrix, Vec<usize>) {
    let n: usize = block_sizes.iter().sum();
    let mut values = DMatrix::zeros(n, n);
    let mut assignment = vec![0; n];
    let mut start = 0;
    for (block, &size) in block_sizes.iter().enumerate() {
        let level = 0.9 + 0.1 * rng.random::<f64>();
        for i in start..start + size {
            assignment[i] = block;
            for j in i..start + size {
                let entry = level + jitter * rng.random::<f64>();
                values[(i, j)] = entry;
                values[(j, i)] = entry;
            }
        }
        start += size;
    }
    (
        SimilarityMatrix::new(values).expect("constructed matrix is symmetric and non-negative"),
        assignment,
    )
}
