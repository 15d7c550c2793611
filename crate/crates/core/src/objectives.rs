//! Training objectives with exact gradients with respect to the model
//! prediction: plain L2 to a single target rotation, L2 to the nearest
//! flip-equivalent target, and cross-entropy over the 24 flip classes.

use crate::octa::{Flip, FLIP_COUNT};
use crate::so3::{frobenius_sq, Mat3, Rotation};

/// Scalar loss plus its gradient with respect to the prediction.
#[derive(Clone, Debug)]
pub struct LossValue<G> {
    pub value: f64,
    pub grad: G,
}

pub type RegressionLoss = LossValue<Mat3>;
pub type FlipLoss = LossValue<[f64; FLIP_COUNT]>;

/// Squared Frobenius distance to the single target `r * omega`.
pub fn naive_l2(pred: &Mat3, r: &Rotation, omega: &Rotation) -> RegressionLoss {
    let target = r.matrix() * omega.matrix();
    LossValue { value: frobenius_sq(pred, &target), grad: 2.0 * (pred - target) }
}

/// Squared Frobenius distance to the nearest member of the orbit
/// `{r Q omega}` over all flips `Q`; the gradient is taken at the
/// minimizing flip (lowest index on ties), which is also returned.
pub fn quotient_l2(pred: &Mat3, r: &Rotation, omega: &Rotation) -> (RegressionLoss, Flip) {
    let mut best_value = f64::INFINITY;
    let mut best_flip = Flip::IDENTITY;
    let mut best_target = Mat3::zeros();
    for q in Flip::all() {
        let target = r.matrix() * q.rotation().matrix() * omega.matrix();
        let value = frobenius_sq(pred, &target);
        if value < best_value {
            best_value = value;
            best_flip = q;
            best_target = target;
        }
    }
    (LossValue { value: best_value, grad: 2.0 * (pred - best_target) }, best_flip)
}

/// Numerically stable softmax over the 24 flip logits.
pub fn softmax(logits: &[f64; FLIP_COUNT]) -> [f64; FLIP_COUNT] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; FLIP_COUNT];
    let mut sum = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Cross-entropy of the flip classifier's logits against a target flip,
/// computed max-shifted; the gradient is `softmax(logits) - onehot(target)`.
pub fn flip_cross_entropy(logits: &[f64; FLIP_COUNT], target: Flip) -> FlipLoss {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    let value = log_sum - logits[target.index()];
    let mut grad = softmax(logits);
    grad[target.index()] -= 1.0;
    LossValue { value, grad }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{random_rotation, seeded_rng};
    use approx::assert_relative_eq;

    #[test]
    fn naive_l2_at_target_is_zero() {
        let mut rng = seeded_rng(91);
        let (r, omega) = (random_rotation(&mut rng), random_rotation(&mut rng));
        let loss = naive_l2(&(r.matrix() * omega.matrix()), &r, &omega);
        assert!(loss.value < 1e-12);
        assert!(loss.grad.abs().max() < 1e-9);
    }

    #[test]
    fn naive_l2_known_value() {
        let loss = naive_l2(&Mat3::zeros(), &Rotation::identity(), &Rotation::identity());
        assert_eq!(loss.value, 3.0);
        assert_eq!(loss.grad, -2.0 * Mat3::identity());
    }

    #[test]
    fn quotient_l2_recovers_the_applied_flip() {
        let mut rng = seeded_rng(92);
        let (r, omega) = (random_rotation(&mut rng), random_rotation(&mut rng));
        for q in Flip::all() {
            let pred = r.matrix() * q.rotation().matrix() * omega.matrix();
            let (loss, arg) = quotient_l2(&pred, &r, &omega);
            assert!(loss.value < 1e-12);
            assert_eq!(arg, q);
        }
    }

    #[test]
    fn quotient_l2_never_exceeds_naive_l2() {
        let mut rng = seeded_rng(93);
        for _ in 0..50 {
            let (r, omega) = (random_rotation(&mut rng), random_rotation(&mut rng));
            let pred = random_rotation(&mut rng).matrix() * 0.8;
            let (q, _) = quotient_l2(&pred, &r, &omega);
            assert!(q.value <= naive_l2(&pred, &r, &omega).value + 1e-12);
        }
    }

    fn fd_check_mat<F: Fn(&Mat3) -> (f64, Mat3)>(pred: &Mat3, f: F) {
        let h = 1e-5;
        let (_, grad) = f(pred);
        for i in 0..3 {
            for j in 0..3 {
                let mut plus = *pred;
                let mut minus = *pred;
                plus[(i, j)] += h;
                minus[(i, j)] -= h;
                let fd = (f(&plus).0 - f(&minus).0) / (2.0 * h);
                let denom = fd.abs().max(grad[(i, j)].abs()).max(1e-6);
                assert!(
                    (fd - grad[(i, j)]).abs() / denom < 1e-6,
                    "entry ({i},{j}): fd {fd} vs grad {}",
                    grad[(i, j)]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded_rng(94);
        for _ in 0..10 {
            let (r, omega) = (random_rotation(&mut rng), random_rotation(&mut rng));
            let pred = random_rotation(&mut rng).matrix() * 1.1;
            fd_check_mat(&pred, |m| {
                let l = naive_l2(m, &r, &omega);
                (l.value, l.grad)
            });
            // Skip predictions near a flip boundary, where the quotient
            // objective is not differentiable.
            let (l0, q0) = quotient_l2(&pred, &r, &omega);
            let margin = Flip::all()
                .filter(|q| *q != q0)
                .map(|q| {
                    frobenius_sq(&pred, &(r.matrix() * q.rotation().matrix() * omega.matrix()))
                })
                .fold(f64::INFINITY, f64::min)
                - l0.value;
            if margin < 1e-3 {
                continue;
            }
            fd_check_mat(&pred, |m| {
                let (l, _) = quotient_l2(m, &r, &omega);
                (l.value, l.grad)
            });
        }
    }

    #[test]
    fn uniform_logits_give_log_24() {
        let loss = flip_cross_entropy(&[0.5; FLIP_COUNT], Flip::IDENTITY);
        assert_relative_eq!(loss.value, (FLIP_COUNT as f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn confident_correct_logits_give_tiny_loss() {
        let mut logits = [0.0; FLIP_COUNT];
        logits[5] = 20.0;
        let loss = flip_cross_entropy(&logits, Flip::from_index(5).unwrap());
        // Exact value is ln(1 + 23 e^-20) ~= 4.74e-8.
        assert_relative_eq!(loss.value, 23.0 * (-20.0f64).exp(), epsilon = 1e-3);
        assert!(loss.value < 1e-6, "loss {}", loss.value);
    }

    #[test]
    fn cross_entropy_is_shift_invariant() {
        let mut rng = seeded_rng(95);
        let mut logits = [0.0; FLIP_COUNT];
        for l in &mut logits {
            *l = rand::Rng::random_range(&mut rng, -2.0..2.0);
        }
        let base = flip_cross_entropy(&logits, Flip::from_index(3).unwrap());
        let mut shifted = logits;
        for l in &mut shifted {
            *l += 123.456;
        }
        let moved = flip_cross_entropy(&shifted, Flip::from_index(3).unwrap());
        assert_relative_eq!(base.value, moved.value, epsilon = 1e-9);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(96);
        let mut logits = [0.0; FLIP_COUNT];
        for l in &mut logits {
            *l = rand::Rng::random_range(&mut rng, -2.0..2.0);
        }
        let target = Flip::from_index(17).unwrap();
        let loss = flip_cross_entropy(&logits, target);
        assert!(loss.grad.iter().sum::<f64>().abs() < 1e-12);
        let h = 1e-6;
        for i in 0..FLIP_COUNT {
            let mut plus = logits;
            let mut minus = logits;
            plus[i] += h;
            minus[i] -= h;
            let fd = (flip_cross_entropy(&plus, target).value
                - flip_cross_entropy(&minus, target).value)
                / (2.0 * h);
            assert!((fd - loss.grad[i]).abs() < 1e-6, "logit {i}: fd {fd} vs {}", loss.grad[i]);
        }
    }

    #[test]
    fn softmax_sums_to_one_even_for_extreme_logits() {
        let mut logits = [-1000.0; FLIP_COUNT];
        logits[0] = 1000.0;
        let p = softmax(&logits);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
    }
}
