use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Generalized advantage estimation over a concatenation of trajectories.
///
/// `dones[t]` marks the last step of an episode; the value after it is taken as
/// zero. `bootstrap` is the value of the state following the final step when
/// that step is not terminal. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    bootstrap: T,
    gamma: T,
    lambda: T,
) -> Result<(Vec<T>, Vec<T>)> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(Error::LengthMismatch {
            context: "gae rewards/values/dones",
            left: rewards.len(),
            right: values.len().min(dones.len()),
        });
    }
    let n = rewards.len();
    let mut adv = vec![T::zero(); n];
    let mut next_value = bootstrap;
    let mut next_adv = T::zero();
    for t in (0..n).rev() {
        let live = if dones[t] { T::zero() } else { T::one() };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A_t = sum_k (gamma*lambda)^k delta_{t+k}, truncated at episode ends.
    fn brute_force(r: &[f64], v: &[f64], d: &[bool], boot: f64, g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let value_after = |t: usize| {
            if d[t] {
                0.0
            } else if t + 1 < n {
                v[t + 1]
            } else {
                boot
            }
        };
        (0..n)
            .map(|t| {
                let mut acc = 0.0;
                let mut w = 1.0;
                for k in t..n {
                    acc += w * (r[k] + g * value_after(k) - v[k]);
                    if d[k] {
                        break;
                    }
                    w *= g * l;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zeros() {
        let (a, r) = compute_gae(&[0.0; 4], &[0.0; 4], &[false, false, false, true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![0.0; 4]);
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn one_step_td() {
        let (a, _) = compute_gae(&[1.0], &[0.0], &[true], 0.0, 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn matches_direct_expansion() {
        let r = [1.0, -2.0, 0.5];
        let v = [0.3, 0.1, -0.4];
        for (d, boot) in [([false, false, false], 0.7), ([false, true, false], 0.2), ([false, false, true], 0.0)] {
            let (a, ret) = compute_gae(&r, &v, &d, boot, 0.9, 0.8).unwrap();
            let want = brute_force(&r, &v, &d, boot, 0.9, 0.8);
            for i in 0..3 {
                assert!((a[i] - want[i]).abs() < 1e-12);
                assert!((ret[i] - (a[i] + v[i])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lambda_one_is_discounted_return_minus_value() {
        let r = [1.0f64, 2.0, 3.0];
        let v = [0.5, -0.5, 0.25];
        let g = 0.9f64;
        let (a, _) = compute_gae(&r, &v, &[false, false, true], 0.0, g, 1.0).unwrap();
        let g0 = 1.0 + g * 2.0 + g * g * 3.0;
        let g1 = 2.0 + g * 3.0;
        let g2 = 3.0;
        for (ai, want) in a.iter().zip([g0 - 0.5, g1 + 0.5, g2 - 0.25]) {
            assert!((ai - want).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_gae(&[1.0, 2.0], &[0.0], &[true, true], 0.0, 0.9, 0.9).is_err());
    }
}
