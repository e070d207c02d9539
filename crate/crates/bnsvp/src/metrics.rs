//! Detection metrics: ROC curves, AUC, and report files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// An ROC curve with its area.
#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    /// (false positive rate, true positive rate) pairs from (0, 0) to (1, 1),
    /// one interior point per distinct score threshold.
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under the curve.
    pub auc: f64,
}

/// Computes the ROC curve and AUC of scores against binary labels
/// (`true` marks a positive).
///
/// Tied scores are swept as one threshold group, which makes the trapezoidal
/// area equal to the Mann-Whitney statistic with half credit for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::Argument(format!(
            "got {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("scores must not contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Argument(
            "need at least one positive and one negative label".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == threshold {
            if labels[order[idx]] {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * 0.5)
        .sum();
    Ok(RocResult { points, auc })
}

/// Reduces a curve or bag name to a filesystem-safe stem.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn roc_svg(name: &str, roc: &RocResult) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 48.0;
    let span = SIZE - 2.0 * MARGIN;
    let to_x = |fpr: f64| MARGIN + fpr * span;
    let to_y = |tpr: f64| SIZE - MARGIN - tpr * span;
    let path: Vec<String> = roc
        .points
        .iter()
        .map(|&(fpr, tpr)| format!("{:.2},{:.2}", to_x(fpr), to_y(tpr)))
        .collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{e}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = SIZE - MARGIN,
        e = SIZE - MARGIN
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = SIZE - MARGIN
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{e}\" y2=\"{m}\" stroke=\"#bbbbbb\" stroke-dasharray=\"6,6\"/>\n",
        m = MARGIN,
        b = SIZE - MARGIN,
        e = SIZE - MARGIN
    ));
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
        path.join(" ")
    ));
    svg.push_str(&format!(
        "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{name} (AUC {auc:.4})</text>\n",
        x = SIZE / 2.0,
        y = MARGIN / 2.0 + 6.0,
        auc = roc.auc
    ));
    svg.push_str(&format!(
        "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">false positive rate</text>\n",
        x = SIZE / 2.0,
        y = SIZE - MARGIN / 4.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 {x} {y})\">true positive rate</text>\n",
        x = MARGIN / 4.0 + 4.0,
        y = SIZE / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Writes `metrics.csv` plus one `roc_<name>.csv` per curve (and an SVG plot
/// per curve when `with_svg` is set) into `out_dir`.
pub fn report(results: &[(String, RocResult)], out_dir: &Path, with_svg: bool) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Argument("report needs at least one result".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut metrics = String::from("name,auc\n");
    for (name, roc) in results {
        metrics.push_str(&format!("{name},{}\n", roc.auc));
    }
    let metrics_path = out_dir.join("metrics.csv");
    fs::write(&metrics_path, metrics).map_err(|e| Error::io(&metrics_path, e))?;

    for (name, roc) in results {
        let stem = sanitize_name(name);
        let mut curve = String::from("fpr,tpr\n");
        for (fpr, tpr) in &roc.points {
            curve.push_str(&format!("{fpr},{tpr}\n"));
        }
        let curve_path = out_dir.join(format!("roc_{stem}.csv"));
        fs::write(&curve_path, curve).map_err(|e| Error::io(&curve_path, e))?;
        if with_svg {
            let svg_path = out_dir.join(format!("roc_{stem}.svg"));
            fs::write(&svg_path, roc_svg(name, roc)).map_err(|e| Error::io(&svg_path, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Pairwise comparison form of the AUC: fraction of (positive, negative)
    /// pairs ranked correctly, with half credit for ties.
    fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    total += 1.0;
                } else if scores[i] == scores[j] {
                    total += 0.5;
                }
            }
        }
        total / pairs
    }

    #[test]
    fn perfect_separation_gives_unit_area() {
        let roc = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_abs_diff_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn interleaved_scores_match_hand_area() {
        let roc = roc_auc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert_abs_diff_eq!(roc.auc, 0.75);
        assert_eq!(
            roc.points,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn constant_scores_give_chance_area() {
        let roc = roc_auc(&[0.5, 0.5, 0.5], &[true, false, true]).unwrap();
        assert_abs_diff_eq!(roc.auc, 0.5);
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(roc_auc(&[0.1, 0.2], &[true]).is_err());
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1, f64::NAN], &[true, false]).is_err());
    }

    #[test]
    fn report_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let roc = roc_auc(&[0.9, 0.1], &[true, false]).unwrap();
        report(
            &[("bnsvp".to_string(), roc.clone()), ("max mil".to_string(), roc)],
            dir.path(),
            true,
        )
        .unwrap();
        let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics, "name,auc\nbnsvp,1\nmax mil,1\n");
        let curve = fs::read_to_string(dir.path().join("roc_bnsvp.csv")).unwrap();
        assert!(curve.starts_with("fpr,tpr\n0,0\n"));
        assert!(dir.path().join("roc_max_mil.csv").exists());
        let svg = fs::read_to_string(dir.path().join("roc_bnsvp.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pairwise_statistic(
            seed in any::<u64>(),
            n in 4usize..40,
        ) {
            use rand::Rng as _;
            let mut rng = crate::rng::rng_from_seed(seed);
            // Coarse grid forces frequent ties.
            let scores: Vec<f64> =
                (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random_range(0..2) == 1).collect();
            labels[0] = true;
            labels[1] = false;
            let roc = roc_auc(&scores, &labels).unwrap();
            prop_assert!((roc.auc - mann_whitney(&scores, &labels)).abs() < 1e-12);

            let flipped: Vec<bool> = labels.iter().map(|&l| !l).collect();
            let complement = roc_auc(&scores, &flipped).unwrap();
            prop_assert!((roc.auc + complement.auc - 1.0).abs() < 1e-12);

            for w in roc.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(*roc.points.first().unwrap(), (0.0, 0.0));
            prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        }
    }
}
