//! Curve statistics used for the convergence summary.

/// Trailing moving average over full windows only. Entry `i` averages
/// `values[i..i + window]`, i.e. it belongs to episode `i + window` (1-based).
/// A window longer than the series shrinks to the series length.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if values.is_empty() || window == 0 {
        return Vec::new();
    }
    let w = window.min(values.len());
    let mut out = Vec::with_capacity(values.len() - w + 1);
    let mut sum: f64 = values[..w].iter().sum();
    out.push(sum / w as f64);
    for i in w..values.len() {
        sum += values[i] - values[i - w];
        out.push(sum / w as f64);
    }
    out
}

/// Final value of the moving average.
pub fn plateau(moving: &[f64]) -> Option<f64> {
    moving.last().copied()
}

/// First 1-based episode whose moving average reaches `fraction` of the
/// plateau. For a negative plateau the threshold sits `1 - fraction` of its
/// magnitude below it, so the definition stays meaningful. Always at most
/// `series_len` because the plateau itself meets the threshold.
pub fn convergence_episode(moving: &[f64], series_len: usize, fraction: f64) -> Option<usize> {
    let plateau = plateau(moving)?;
    let threshold = plateau - (1.0 - fraction) * plateau.abs();
    let window = series_len + 1 - moving.len();
    moving.iter().position(|m| *m >= threshold).map(|i| i + window)
}

/// Mean of the last `window` values (all of them if fewer).
pub fn tail_mean(values: &[f64], window: usize) -> Option<f64> {
    if values.is_empty() || window == 0 {
        return None;
    }
    let tail = &values[values.len() - window.min(values.len())..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Element-wise mean of equally long series.
pub fn pointwise_mean(series: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let n = series.len() as f64;
    (0..first.len()).map(|i| series.iter().map(|s| s[i]).sum::<f64>() / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 5), vec![2.0]);
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn convergence_examples() {
        // Step curve: 0 for 10 episodes then 20; window 1.
        let values: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 20.0 }).collect();
        let ma = moving_average(&values, 1);
        assert_eq!(convergence_episode(&ma, values.len(), 0.95), Some(11));
        // Window 5: the average first reaches 19 when all five are 20.
        let ma = moving_average(&values, 5);
        assert_eq!(convergence_episode(&ma, values.len(), 0.95), Some(15));
        // Negative plateau.
        let ma = moving_average(&[-10.0, -2.0, -1.0], 1);
        assert_eq!(convergence_episode(&ma, 3, 0.95), Some(3));
    }

    #[test]
    fn tail_mean_examples() {
        assert_eq!(tail_mean(&[1.0, 2.0, 3.0, 5.0], 2), Some(4.0));
        assert_eq!(tail_mean(&[1.0, 3.0], 10), Some(2.0));
        assert_eq!(tail_mean(&[], 2), None);
    }

    proptest! {
        #[test]
        fn convergence_within_series(values in proptest::collection::vec(-1.0f64..20.0, 1..300),
                                     window in 1usize..60, fraction in 0.5f64..1.0) {
            let ma = moving_average(&values, window);
            prop_assert_eq!(ma.len(), values.len() + 1 - window.min(values.len()));
            let ep = convergence_episode(&ma, values.len(), fraction).unwrap();
            prop_assert!(ep >= window.min(values.len()) && ep <= values.len());
        }

        #[test]
        fn moving_average_matches_direct(values in proptest::collection::vec(-1.0f64..20.0, 1..100), window in 1usize..20) {
            let ma = moving_average(&values, window);
            let w = window.min(values.len());
            for (i, m) in ma.iter().enumerate() {
                let direct = values[i..i + w].iter().sum::<f64>() / w as f64;
                prop_assert!((m - direct).abs() < 1e-9);
            }
        }
    }
}
