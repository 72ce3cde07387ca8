//! Regression-offset encoding and the oriented proposal losses.
//!
//! Offsets relative to an anchor `(x_a, y_a, w_a, h_a, theta_a)`:
//!
//! ```text
//! t_x = (x - x_a) / w_a      t_y = (y - y_a) / h_a
//! t_w = ln(w / w_a)          t_h = ln(h / h_a)
//! t_theta = wrap(theta - theta_a)      (degrees, wrapped into [-90, 90))
//! ```
//!
//! The per-anchor loss is `L_cls(p, u) + lambda * u * L_reg(t, t*)` with a
//! binary cross-entropy classification term and a smooth-L1 regression term.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, RotatedBox};
use crate::numeric::{stable_sum, wrap_half_turn};

/// Lower/upper clamp applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("invalid box: {0}")]
    Box(#[from] GeometryError),
    #[error("loss batch is empty")]
    EmptyBatch,
    #[error("lambda must be finite and non-negative (got {0})")]
    BadLambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionOffsets {
    pub t_x: f64,
    pub t_y: f64,
    pub t_w: f64,
    pub t_h: f64,
    /// Degrees.
    pub t_theta: f64,
}

impl RegressionOffsets {
    pub fn to_array(self) -> [f64; 5] {
        [self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { t_x: a[0], t_y: a[1], t_w: a[2], t_h: a[3], t_theta: a[4] }
    }
}

/// Offsets of `target` relative to `anchor`.
pub fn encode(target: &RotatedBox, anchor: &RotatedBox) -> Result<RegressionOffsets, LossError> {
    target.validate()?;
    anchor.validate()?;
    Ok(RegressionOffsets {
        t_x: (target.x_c - anchor.x_c) / anchor.w,
        t_y: (target.y_c - anchor.y_c) / anchor.h,
        t_w: (target.w / anchor.w).ln(),
        t_h: (target.h / anchor.h).ln(),
        t_theta: wrap_half_turn(target.theta - anchor.theta),
    })
}

/// Inverse of [`encode`]; the result has a canonical angle.
pub fn decode(t: &RegressionOffsets, anchor: &RotatedBox) -> RotatedBox {
    RotatedBox {
        x_c: anchor.x_c + t.t_x * anchor.w,
        y_c: anchor.y_c + t.t_y * anchor.h,
        w: anchor.w * t.t_w.exp(),
        h: anchor.h * t.t_h.exp(),
        theta: anchor.theta + t.t_theta,
    }
    .canonical()
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Derivative of [`smooth_l1`]. At `|x| = 1` both branches agree (`±1`).
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `u * sum_i smooth_l1(t*_i - t_i)`; zero for background anchors.
pub fn reg_loss(t: &RegressionOffsets, t_star: &RegressionOffsets, foreground: bool) -> f64 {
    if !foreground {
        return 0.0;
    }
    t.to_array()
        .iter()
        .zip(t_star.to_array())
        .map(|(ti, si)| smooth_l1(si - ti))
        .sum()
}

/// Gradient of [`reg_loss`] with respect to the predicted offsets `t`.
pub fn reg_loss_grad(t: &RegressionOffsets, t_star: &RegressionOffsets, foreground: bool) -> [f64; 5] {
    let mut g = [0.0; 5];
    if !foreground {
        return g;
    }
    for (gi, (ti, si)) in g.iter_mut().zip(t.to_array().iter().zip(t_star.to_array())) {
        *gi = -smooth_l1_grad(si - ti);
    }
    g
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy of the foreground probability `p` against label `u`.
pub fn cls_loss(p: f64, foreground: bool) -> f64 {
    let p = clamp_prob(p);
    if foreground {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of [`cls_loss`] with respect to `p` (zero outside the clamp).
pub fn cls_loss_grad(p: f64, foreground: bool) -> f64 {
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
        return 0.0;
    }
    if foreground {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// One non-neutral anchor's contribution to the proposal loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorSample {
    /// Foreground probability.
    pub p: f64,
    pub foreground: bool,
    pub t: RegressionOffsets,
    pub t_star: RegressionOffsets,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean classification loss.
    pub l_cls: f64,
    /// Mean of `u * L_reg` over the batch.
    pub l_reg: f64,
    pub total: f64,
    pub lambda: f64,
}

/// Batch-mean proposal loss. Neutral anchors must already be excluded.
///
/// Reductions go through [`stable_sum`], so the result does not depend on
/// the order of `batch`.
pub fn orpn_loss(batch: &[AnchorSample], lambda: f64) -> Result<LossBreakdown, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(LossError::BadLambda(lambda));
    }
    let n = batch.len() as f64;
    let cls: Vec<f64> = batch.iter().map(|s| cls_loss(s.p, s.foreground)).collect();
    let reg: Vec<f64> = batch
        .iter()
        .map(|s| reg_loss(&s.t, &s.t_star, s.foreground))
        .collect();
    let l_cls = stable_sum(&cls) / n;
    let l_reg = stable_sum(&reg) / n;
    Ok(LossBreakdown { l_cls, l_reg, total: l_cls + lambda * l_reg, lambda })
}

/// Compares an analytic gradient against central finite differences with
/// step [`FD_STEP`] and returns the largest relative error
/// `|g - fd| / max(|g|, |fd|, 1e-8)` over the coordinates of `at`.
///
/// Callers keep smooth-L1 arguments more than `1e-3` away from `|x| = 1`.
pub fn grad_check<F, G>(f: F, grad: G, at: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = grad(at);
    let mut worst = 0.0_f64;
    let mut probe = at.to_vec();
    for i in 0..at.len() {
        probe[i] = at[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = at[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = at[i];
        let fd = (up - down) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

/// Worst relative gradient errors over a random sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSweep {
    pub points: usize,
    pub worst_cls: f64,
    pub worst_reg: f64,
}

/// Checks [`cls_loss_grad`] and [`reg_loss_grad`] against finite differences
/// at `points` random inputs drawn from a generator keyed by `seed`.
///
/// Probabilities lie in `[0.05, 0.95]`. Each regression residual has
/// magnitude in `[0.05, 0.95]` or `[1.05, 3]`, keeping clear of the
/// smooth-L1 kink at `|x| = 1` and the flat region where relative error is
/// ill-defined.
pub fn gradient_sweep(points: usize, seed: u64) -> GradientSweep {
    use rand::Rng;
    let mut worst_cls = 0.0_f64;
    let mut worst_reg = 0.0_f64;
    for i in 0..points {
        let mut rng = crate::augmentation::keyed_rng(seed, "gradcheck", i as u64);
        let p = rng.random_range(0.05..=0.95);
        let fg = rng.random_bool(0.5);
        worst_cls = worst_cls.max(grad_check(|x| cls_loss(x[0], fg), |x| vec![cls_loss_grad(x[0], fg)], &[p]));

        let t_star: [f64; 5] = std::array::from_fn(|_| rng.random_range(-2.0..=2.0));
        let t: [f64; 5] = std::array::from_fn(|k| {
            let mag = if rng.random_bool(0.5) { rng.random_range(0.05..=0.95) } else { rng.random_range(1.05..=3.0) };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            t_star[k] + sign * mag
        });
        let ts = RegressionOffsets::from_array(t_star);
        let as_offsets = |x: &[f64]| RegressionOffsets::from_array([x[0], x[1], x[2], x[3], x[4]]);
        worst_reg = worst_reg.max(grad_check(
            |x| reg_loss(&as_offsets(x), &ts, true),
            |x| reg_loss_grad(&as_offsets(x), &ts, true).to_vec(),
            &t,
        ));
    }
    GradientSweep { points, worst_cls, worst_reg }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64, t: f64) -> RotatedBox {
        RotatedBox::new(x, y, w, h, t).unwrap()
    }

    #[test]
    fn sweep_is_tight() {
        let s = gradient_sweep(50, 3);
        assert!(s.worst_cls <= 1e-5 && s.worst_reg <= 1e-5, "{s:?}");
    }

    #[test]
    fn encode_examples() {
        let a = bx(10.0, 10.0, 4.0, 4.0, 0.0);
        assert_eq!(encode(&a, &a).unwrap(), RegressionOffsets::default());
        let t = encode(&bx(12.0, 10.0, 8.0, 4.0, 0.0), &a).unwrap();
        assert_eq!(t.t_x, 0.5);
        assert_eq!(t.t_y, 0.0);
        assert!((t.t_w - 2f64.ln()).abs() < 1e-15);
        assert_eq!((t.t_h, t.t_theta), (0.0, 0.0));
        assert!(encode(&RotatedBox { w: 0.0, ..a }, &a).is_err());
    }

    #[test]
    fn decode_examples() {
        let a = bx(10.0, 10.0, 4.0, 4.0, 0.0);
        assert_eq!(decode(&RegressionOffsets::default(), &a), a);
        let t = RegressionOffsets { t_x: 0.5, t_w: 2f64.ln(), ..Default::default() };
        let b = decode(&t, &a);
        assert!((b.x_c - 12.0).abs() < 1e-12 && b.y_c == 10.0);
        assert!((b.w - 8.0).abs() < 1e-12 && (b.h - 4.0).abs() < 1e-12 && b.theta == 0.0);
    }

    #[test]
    fn angle_offset_is_wrapped() {
        let a = bx(0.0, 0.0, 4.0, 4.0, -80.0);
        let t = encode(&bx(0.0, 0.0, 4.0, 4.0, 85.0), &a).unwrap();
        assert!((t.t_theta - -15.0).abs() < 1e-12);
        assert!((decode(&t, &a).theta - 85.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_values() {
        assert_eq!(smooth_l1(0.0), 0.0);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        assert_eq!(smooth_l1(-2.0), 1.5);
        assert_eq!(smooth_l1(1.0), 0.5);
        assert_eq!(smooth_l1_grad(1.0), 1.0);
        assert_eq!(smooth_l1_grad(-1.0), -1.0);
    }

    #[test]
    fn reg_loss_values() {
        let t = RegressionOffsets::default();
        let s = RegressionOffsets { t_x: 0.5, t_theta: 2.0, ..Default::default() };
        assert_eq!(reg_loss(&t, &t, true), 0.0);
        assert_eq!(reg_loss(&t, &s, false), 0.0);
        assert_eq!(reg_loss(&t, &s, true), 1.625);
    }

    #[test]
    fn cls_loss_values() {
        assert!(cls_loss(1.0, true) < 1e-11);
        assert!(cls_loss(0.0, false) < 1e-11);
        assert!((cls_loss(0.5, true) - 2f64.ln()).abs() < 1e-15);
        assert!(cls_loss(0.0, true).is_finite());
    }

    #[test]
    fn orpn_examples() {
        let zero = RegressionOffsets::default();
        let perfect = [
            AnchorSample { p: 1.0, foreground: true, t: zero, t_star: zero },
            AnchorSample { p: 0.0, foreground: false, t: zero, t_star: zero },
        ];
        assert!(orpn_loss(&perfect, 1.0).unwrap().total < 1e-11);

        let s = RegressionOffsets { t_x: 0.5, t_theta: 2.0, ..Default::default() };
        let one = [AnchorSample { p: 0.5, foreground: true, t: zero, t_star: s }];
        let l = orpn_loss(&one, 1.0).unwrap();
        assert!((l.total - (2f64.ln() + 1.625)).abs() < 1e-15);
        assert!((l.total - 2.3181).abs() < 1e-4);

        let l0 = orpn_loss(&one, 0.0).unwrap();
        assert_eq!(l0.total, cls_loss(0.5, true));

        assert_eq!(orpn_loss(&[], 1.0), Err(LossError::EmptyBatch));
        assert!(orpn_loss(&one, -1.0).is_err());
    }

    #[test]
    fn named_gradient_points() {
        let e = grad_check(|v| smooth_l1(v[0]), |v| vec![smooth_l1_grad(v[0])], &[0.3]);
        assert!(e <= 1e-5, "{e}");
        assert_eq!(smooth_l1_grad(0.3), 0.3);
        let e = grad_check(|v| cls_loss(v[0], true), |v| vec![cls_loss_grad(v[0], true)], &[0.7]);
        assert!(e <= 1e-5, "{e}");
        assert!((cls_loss_grad(0.7, true) + 1.0 / 0.7).abs() < 1e-15);
    }

    fn arb_offsets() -> impl Strategy<Value = RegressionOffsets> {
        (-2.0..2.0f64, -2.0..2.0f64, -1.5..1.5f64, -1.5..1.5f64, -89.0..89.0f64)
            .prop_map(|(a, b, c, d, e)| RegressionOffsets { t_x: a, t_y: b, t_w: c, t_h: d, t_theta: e })
    }

    proptest! {
        #[test]
        fn losses_nonnegative(x in -50.0..50.0f64, p in 0.0..=1.0f64, t in arb_offsets(), s in arb_offsets(), u: bool) {
            prop_assert!(smooth_l1(x) >= 0.0);
            prop_assert!(cls_loss(p, u) >= 0.0);
            prop_assert!(reg_loss(&t, &s, u) >= 0.0);
            prop_assert_eq!(reg_loss(&t, &s, false), 0.0);
        }

        #[test]
        fn lambda_affine(batch in proptest::collection::vec((0.01..0.99f64, any::<bool>(), arb_offsets(), arb_offsets()), 1..20),
                         lam in 0.0..10.0f64) {
            let b: Vec<AnchorSample> = batch.into_iter().map(|(p, u, t, s)| AnchorSample { p, foreground: u, t, t_star: s }).collect();
            let l0 = orpn_loss(&b, 0.0).unwrap();
            let l = orpn_loss(&b, lam).unwrap();
            prop_assert!((l.total - (l0.total + lam * l.l_reg)).abs() < 1e-9);
            let mut rev = b.clone();
            rev.reverse();
            prop_assert_eq!(orpn_loss(&rev, lam).unwrap().total.to_bits(), l.total.to_bits());
        }

        #[test]
        fn decode_encode_round_trip(t in arb_offsets(), ax in 0.0..500.0f64, ay in 0.0..500.0f64,
                                    aw in 8.0..256.0f64, ah in 8.0..256.0f64, at in -45.0..45.0f64) {
            let a = RotatedBox { x_c: ax, y_c: ay, w: aw, h: ah, theta: at };
            let back = encode(&decode(&t, &a), &a).unwrap();
            for (x, y) in back.to_array().iter().zip(t.to_array()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
