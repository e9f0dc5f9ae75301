//! Threshold search for minimal variance sampling.
//!
//! Given regularized gradients `v_i ≥ 0` and a sample rate `s`, both routines
//! return `μ` with `Σ min(1, v_i / μ) = N·s`. Two degenerate inputs are settled
//! before either search runs:
//!
//! * all `v_i = 0`: returns `+∞`, and probabilities fall back to `p_i = s`;
//! * fewer than `N·s` positive values: returns the smallest positive value, so
//!   every positive row is kept with probability one.
//!
//! Under those exclusions the solution is unique and strictly positive.

use rand::Rng;

use crate::scalar::Scalar;

/// What [`prepare`] decided about an input.
enum Prepared<T> {
    Done(T),
    Solve { target: T },
}

fn prepare<T: Scalar>(values: &[T], rate: T) -> Prepared<T> {
    let target = rate * T::from_count(values.len());
    let mut positives = 0usize;
    let mut min_positive = T::infinity();
    for &v in values {
        if v > T::zero() {
            positives += 1;
            min_positive = min_positive.min(v);
        }
    }
    if positives == 0 {
        Prepared::Done(T::infinity())
    } else if target >= T::from_count(positives) {
        Prepared::Done(min_positive)
    } else {
        Prepared::Solve { target }
    }
}

/// Sort-based threshold: descending sort, suffix sums, and a closed-form `μ`
/// for each candidate count of capped rows.
pub fn threshold_by_sort<T: Scalar>(values: &[T], rate: T) -> T {
    threshold_by_sort_counted(values, rate).0
}

/// [`threshold_by_sort`] that also reports the number of value comparisons made.
pub fn threshold_by_sort_counted<T: Scalar>(values: &[T], rate: T) -> (T, u64) {
    let target = match prepare(values, rate) {
        Prepared::Done(mu) => return (mu, 0),
        Prepared::Solve { target } => target,
    };
    let mut comparisons = 0u64;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| {
        comparisons += 1;
        b.partial_cmp(a).expect("regularized gradients are finite")
    });

    let n = sorted.len();
    let mut suffix = vec![T::zero(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + sorted[i];
    }

    // With k rows capped at p = 1, the rest share the remaining budget:
    // μ_k = Σ_{i ≥ k} v_i / (N·s − k). The answer is the first k whose
    // largest uncapped value fits under μ_k.
    let mut k = 0;
    loop {
        let budget = target - T::from_count(k);
        let mu = suffix[k] / budget;
        comparisons += 1;
        if sorted[k] <= mu || k + 1 == n || T::from_count(k + 1) >= target {
            return (mu, comparisons);
        }
        k += 1;
    }
}

/// Expected-linear-time threshold search modelled on quickselect.
///
/// A random pivot partitions the live candidates into smaller, equal and
/// larger values. The sample rate implied by `μ = pivot` is then computed from
/// the running sum of discarded smaller values and the running count of
/// discarded larger values, and the search continues on one side only.
pub fn threshold_by_partition<T: Scalar, R: Rng + ?Sized>(values: &[T], rate: T, rng: &mut R) -> T {
    threshold_by_partition_counted(values, rate, rng).0
}

/// [`threshold_by_partition`] that also reports the number of value comparisons made.
pub fn threshold_by_partition_counted<T: Scalar, R: Rng + ?Sized>(
    values: &[T],
    rate: T,
    rng: &mut R,
) -> (T, u64) {
    let target = match prepare(values, rate) {
        Prepared::Done(mu) => return (mu, 0),
        Prepared::Solve { target } => target,
    };
    let mut comparisons = 0u64;
    let mut buf = values.to_vec();
    let (mut lo, mut hi) = (0usize, buf.len());
    let mut sum_small = T::zero();
    let mut n_large = 0usize;

    loop {
        let pivot = buf[rng.random_range(lo..hi)];

        // Dutch-flag partition of buf[lo..hi] into [< pivot | == pivot | > pivot].
        let (mut lt, mut i, mut gt) = (lo, lo, hi);
        let mut part_sum = T::zero();
        while i < gt {
            let v = buf[i];
            comparisons += 1;
            if v < pivot {
                part_sum = part_sum + v;
                buf.swap(lt, i);
                lt += 1;
                i += 1;
            } else {
                comparisons += 1;
                if v > pivot {
                    gt -= 1;
                    buf.swap(i, gt);
                } else {
                    i += 1;
                }
            }
        }
        let n_small = lt - lo;
        let n_equal = gt - lt;
        let n_greater = hi - gt;

        let uncapped = sum_small + part_sum;
        let capped = T::from_count(n_large + n_greater + n_equal);
        let current = if pivot > T::zero() {
            uncapped / pivot + capped
        } else {
            // μ = 0 would sample every positive row; always too many here.
            T::infinity()
        };

        if current == target {
            return (pivot, comparisons);
        }
        if current > target {
            // μ lies above the pivot: everything up to the pivot is uncapped.
            sum_small = uncapped + T::from_count(n_equal) * pivot;
            if n_greater == 0 {
                return (sum_small / (target - T::from_count(n_large)), comparisons);
            }
            lo = gt;
        } else {
            // μ lies below the pivot: the pivot and everything above it are capped.
            n_large += n_greater + n_equal;
            if n_small == 0 {
                return (sum_small / (target - T::from_count(n_large)), comparisons);
            }
            hi = lt;
        }
    }
}

/// `Σ min(1, v_i / μ)`: expected sample size at threshold `μ`.
pub fn expected_sample_size<T: Scalar>(values: &[T], mu: T) -> T {
    values.iter().map(|&v| (v / mu).min(T::one())).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Bisection on the monotone map μ ↦ Σ min(1, v/μ).
    fn bisect(values: &[f64], rate: f64) -> f64 {
        let target = rate * values.len() as f64;
        let (mut lo, mut hi) = (1e-300f64, values.iter().copied().fold(0.0, f64::max) / rate * 2.0);
        for _ in 0..4000 {
            let mid = 0.5 * (lo + hi);
            if expected_sample_size(values, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) <= 1e-12 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn both(values: &[f64], rate: f64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (threshold_by_sort(values, rate), threshold_by_partition(values, rate, &mut rng))
    }

    #[test]
    fn four_values_half_rate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let oracle = bisect(&v, 0.5);
        assert!((oracle - 5.0).abs() < 1e-9);
        let (a, b) = both(&v, 0.5);
        assert_eq!(a, 5.0);
        assert_eq!(b, 5.0);
        let probs: Vec<f64> = v.iter().map(|x| (x / a).min(1.0)).collect();
        assert_eq!(probs, vec![0.2, 0.4, 0.6, 0.8]);
    }

    #[test]
    fn capped_large_value() {
        let v = [1.0, 1.0, 1.0, 10.0];
        let oracle = bisect(&v, 0.5);
        assert!((oracle - 3.0).abs() < 1e-9);
        let (a, b) = both(&v, 0.5);
        assert!((a - 3.0).abs() < 1e-15);
        assert!((b - 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_rate_keeps_everything() {
        let v = [0.5, 2.0, 3.0, 1e-3];
        let (a, b) = both(&v, 1.0);
        assert!(v.iter().all(|&x| (x / a).min(1.0) == 1.0));
        assert!(v.iter().all(|&x| (x / b).min(1.0) == 1.0));
    }

    #[test]
    fn single_value() {
        let (a, b) = both(&[7.0], 0.3);
        assert!((a - 7.0 / 0.3).abs() < 1e-12);
        assert!((b - 7.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_infinite() {
        let (a, b) = both(&[0.0; 5], 0.4);
        assert!(a.is_infinite() && b.is_infinite());
    }

    #[test]
    fn few_positive_values_return_min_positive() {
        let v = [0.0, 0.0, 3.0, 0.0, 5.0];
        let (a, b) = both(&v, 0.6);
        assert_eq!(a, 3.0);
        assert_eq!(b, 3.0);
    }

    #[test]
    fn zeros_with_enough_positives() {
        let v = [0.0, 1.0, 0.0, 2.0, 3.0, 0.0];
        let (a, b) = both(&v, 0.25);
        let oracle = bisect(&v, 0.25);
        assert!((a - oracle).abs() < 1e-9 * oracle);
        assert!((b - a).abs() <= 1e-12 * a);
    }

    #[test]
    fn ties_and_all_equal() {
        let v = [2.0; 9];
        let (a, b) = both(&v, 0.3);
        assert!((a - 2.0 * 9.0 / 2.7).abs() < 1e-12);
        assert!((b - a).abs() <= 1e-12 * a);

        let v = [1.0, 3.0, 3.0, 3.0, 1.0, 9.0, 9.0, 0.5];
        for rate in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let (a, b) = both(&v, rate);
            let oracle = bisect(&v, rate);
            assert!((a - oracle).abs() < 1e-9 * oracle, "rate {rate}");
            assert!((b - a).abs() <= 1e-12 * a, "rate {rate}");
        }
    }

    #[test]
    fn f32_agrees() {
        let v = [1.0f32, 2.0, 3.0, 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(threshold_by_sort(&v, 0.5), 5.0);
        assert_eq!(threshold_by_partition(&v, 0.5f32, &mut rng), 5.0);
    }

    #[test]
    fn partition_is_linear_in_practice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let (_, ops) = threshold_by_partition_counted(&v, 0.1, &mut rng);
        assert!(ops < 20 * v.len() as u64, "{ops}");
        let (_, sort_ops) = threshold_by_sort_counted(&v, 0.1);
        assert!(sort_ops > ops);
    }
}
