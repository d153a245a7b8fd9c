use crate::error::{PvsError, Result};
use crate::froxel::FroxelGrid;
use crate::Real;

/// Confusion counts of a prediction against ground truth. Reals so the same
/// type holds soft counts.
///
/// `tp`: predicted and visible; `fp`: predicted but not visible; `fn_`:
/// visible but not predicted; `gtp = tp + fn_`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConfusionCounts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub gtp: f64,
}

impl ConfusionCounts {
    pub fn from_grids(pred: &FroxelGrid, gt: &FroxelGrid) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(PvsError::DimMismatch {
                expected: gt.dims().to_string(),
                actual: pred.dims().to_string(),
            });
        }
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (&p, &g) in pred.bytes().iter().zip(gt.bytes()) {
            tp += (p & g).count_ones() as u64;
            fp += (p & !g).count_ones() as u64;
            fn_ += (!p & g).count_ones() as u64;
        }
        Ok(Self {
            tp: tp as f64,
            fp: fp as f64,
            fn_: fn_ as f64,
            gtp: (tp + fn_) as f64,
        })
    }

    /// Soft counts `Σp·g`, `Σp·(1−g)`, `Σ(1−p)·g`.
    pub fn from_soft<T: Real>(pred: &[T], gt: &[T]) -> Result<Self> {
        check_len(pred, gt)?;
        let mut c = Self::default();
        for (&p, &g) in pred.iter().zip(gt) {
            let (p, g) = (p.to_f64_lossy(), g.to_f64_lossy());
            c.tp += p * g;
            c.fp += p * (1.0 - g);
            c.fn_ += (1.0 - p) * g;
            c.gtp += g;
        }
        Ok(c)
    }

    /// Hard counts of `pred ≥ tau` against a binary `gt`.
    pub fn from_threshold<T: Real>(pred: &[T], gt: &[T], tau: T) -> Result<Self> {
        check_len(pred, gt)?;
        let mut c = Self::default();
        for (&p, &g) in pred.iter().zip(gt) {
            let (p, g) = (p >= tau, g > T::zero());
            match (p, g) {
                (true, true) => c.tp += 1.0,
                (true, false) => c.fp += 1.0,
                (false, true) => c.fn_ += 1.0,
                (false, false) => {}
            }
            c.gtp += g as u8 as f64;
        }
        Ok(c)
    }

    pub fn add(&mut self, o: &Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.gtp += o.gtp;
    }

    /// `FN / GTP`, or 0 when there is no ground truth.
    pub fn fnr(&self) -> f64 {
        if self.gtp > 0.0 {
            self.fn_ / self.gtp
        } else {
            0.0
        }
    }

    /// `FP / GTP`, or 0 when there is no ground truth.
    pub fn fpr(&self) -> f64 {
        if self.gtp > 0.0 {
            self.fp / self.gtp
        } else {
            0.0
        }
    }
}

fn check_len<T>(pred: &[T], gt: &[T]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(PvsError::DimMismatch {
            expected: format!("{} values", gt.len()),
            actual: pred.len().to_string(),
        });
    }
    Ok(())
}

/// Loss value with its gradient with respect to the soft prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Loss<T> {
    pub value: T,
    pub grad: Vec<T>,
}

/// Weighted Dice loss `1 − 2TP / (2TP + α·FP + (1−α)·FN)`.
///
/// Without ground truth the loss is 0 for an all-zero prediction and 1
/// otherwise, with zero gradient.
pub fn dice_loss<T: Real>(pred: &[T], gt: &[T], alpha: T) -> Result<Loss<T>> {
    let c = ConfusionCounts::from_soft(pred, gt)?;
    let a = alpha.to_f64_lossy();
    let num = 2.0 * c.tp;
    let den = num + a * c.fp + (1.0 - a) * c.fn_;
    if c.gtp == 0.0 || den <= 0.0 {
        let empty = pred.iter().all(|&p| p == T::zero());
        let value = if c.gtp == 0.0 && empty { T::zero() } else { T::one() };
        return Ok(Loss {
            value,
            grad: vec![T::zero(); pred.len()],
        });
    }
    let den2 = den * den;
    // d(num)/dp = 2g, d(den)/dp = 2g + α(1−g) − (1−α)g
    let g_pos = T::lit(-(2.0 * den - num * (1.0 + a)) / den2);
    let g_neg = T::lit(num * a / den2);
    let grad = gt
        .iter()
        .map(|&g| {
            let g = g.to_f64_lossy();
            if g == 1.0 {
                g_pos
            } else if g == 0.0 {
                g_neg
            } else {
                T::lit(-(2.0 * g * den - num * (2.0 * g + a * (1.0 - g) - (1.0 - a) * g)) / den2)
            }
        })
        .collect();
    Ok(Loss {
        value: T::lit((a * c.fp + (1.0 - a) * c.fn_) / den),
        grad,
    })
}

/// Attraction and repulsion parts of the visibility loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RvlParts {
    /// `1 − TP/GTP`.
    pub attr: f64,
    /// `FP/GTP`.
    pub rep: f64,
}

pub fn rvl_parts<T: Real>(pred: &[T], gt: &[T]) -> Result<RvlParts> {
    let c = ConfusionCounts::from_soft(pred, gt)?;
    if c.gtp == 0.0 {
        return Ok(RvlParts::default());
    }
    Ok(RvlParts {
        attr: 1.0 - c.tp / c.gtp,
        rep: c.fp / c.gtp,
    })
}

/// `(1 − TP/GTP) + FP/GTP`; zero without ground truth.
pub fn rvl_loss<T: Real>(pred: &[T], gt: &[T]) -> Result<Loss<T>> {
    let parts = rvl_parts(pred, gt)?;
    let gtp: f64 = gt.iter().map(|g| g.to_f64_lossy()).sum();
    let grad = if gtp == 0.0 {
        vec![T::zero(); pred.len()]
    } else {
        gt.iter().map(|&g| T::lit((1.0 - 2.0 * g.to_f64_lossy()) / gtp)).collect()
    };
    Ok(Loss {
        value: T::lit(parts.attr + parts.rep),
        grad,
    })
}

/// `λ·dice + (1−λ)·rvl`.
pub fn combined_loss<T: Real>(pred: &[T], gt: &[T], alpha: T, lambda: T) -> Result<Loss<T>> {
    let d = dice_loss(pred, gt, alpha)?;
    let r = rvl_loss(pred, gt)?;
    let mu = T::one() - lambda;
    Ok(Loss {
        value: lambda * d.value + mu * r.value,
        grad: d.grad.iter().zip(&r.grad).map(|(&a, &b)| lambda * a + mu * b).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(v: &[u8]) -> Vec<f64> {
        v.iter().map(|&b| b as f64).collect()
    }

    #[test]
    fn dice_anchors() {
        let gt = bits(&[1, 0, 1, 1, 0]);
        assert_eq!(dice_loss(&gt, &gt, 0.1).unwrap().value, 0.0);
        assert_eq!(dice_loss(&[0.0; 5], &gt, 0.1).unwrap().value, 1.0);
        // one each of TP, FP, FN
        let p = bits(&[1, 1, 0, 0]);
        let g = bits(&[1, 0, 1, 0]);
        assert_eq!(dice_loss(&p, &g, 0.5).unwrap().value, 1.0 / 3.0);
    }

    #[test]
    fn dice_empty_truth_convention() {
        let g = [0.0; 4];
        assert_eq!(dice_loss(&[0.0; 4], &g, 0.1).unwrap().value, 0.0);
        let l = dice_loss(&[0.0, 0.2, 0.0, 0.0], &g, 0.1).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(l.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rvl_anchors() {
        let gt = bits(&[0, 1, 1, 0]);
        assert_eq!(rvl_parts(&gt, &gt).unwrap(), RvlParts::default());
        let mut g = vec![0.0; 1000];
        g[..10].iter_mut().for_each(|v| *v = 1.0);
        let all = vec![1.0; 1000];
        let p = rvl_parts(&all, &g).unwrap();
        assert_eq!((p.attr, p.rep), (0.0, 99.0));
        assert_eq!(rvl_loss(&all, &g).unwrap().value, 99.0);
        let p = rvl_parts(&vec![0.0; 1000], &g).unwrap();
        assert_eq!((p.attr, p.rep), (1.0, 0.0));
        assert_eq!(rvl_loss(&[0.3, 0.9], &[0.0, 0.0]).unwrap().value, 0.0);
    }

    #[test]
    fn combined_endpoints() {
        let p = [0.2, 0.7, 0.9, 0.1, 0.5];
        let g = bits(&[0, 1, 1, 0, 1]);
        let d = dice_loss(&p, &g, 0.1).unwrap();
        let r = rvl_loss(&p, &g).unwrap();
        assert_eq!(combined_loss(&p, &g, 0.1, 1.0).unwrap(), d);
        assert_eq!(combined_loss(&p, &g, 0.1, 0.0).unwrap(), r);
        for lambda in [0.0, 0.3, 0.99, 1.0] {
            assert_eq!(combined_loss(&g, &g, 0.1, lambda).unwrap().value, 0.0);
        }
    }

    #[test]
    fn counts_from_grids_match_loop() {
        use crate::froxel::{GridDims, GridRole};
        let dims = GridDims::new(16, 8, 8);
        let mut p = FroxelGrid::new(dims, GridRole::PredictedPvs).unwrap();
        let mut g = FroxelGrid::new(dims, GridRole::GtPvs).unwrap();
        for i in 0..dims.len() {
            if i % 3 == 0 {
                p.set_linear(i);
            }
            if i % 5 == 0 {
                g.set_linear(i);
            }
        }
        let c = ConfusionCounts::from_grids(&p, &g).unwrap();
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..dims.len() {
            match (i % 3 == 0, i % 5 == 0) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        assert_eq!((c.tp, c.fp, c.fn_, c.gtp), (tp, fp, fn_, tp + fn_));
    }

    #[test]
    fn rates() {
        let c = ConfusionCounts {
            tp: 98.0,
            fp: 50.0,
            fn_: 2.0,
            gtp: 100.0,
        };
        assert_eq!((c.fnr(), c.fpr()), (0.02, 0.5));
        assert_eq!(ConfusionCounts::default().fnr(), 0.0);
    }

    fn fd_check(f: impl Fn(&[f64]) -> Loss<f64>, p: &[f64]) {
        let base = f(p);
        let h = 1e-6;
        let mut q = p.to_vec();
        for i in 0..p.len() {
            q[i] = p[i] + h;
            let up = f(&q).value;
            q[i] = p[i] - h;
            let dn = f(&q).value;
            q[i] = p[i];
            let fd = (up - dn) / (2.0 * h);
            let err = (fd - base.grad[i]).abs() / fd.abs().max(base.grad[i].abs()).max(1e-8);
            assert!(err < 1e-4, "element {i}: analytic {} vs numeric {fd}", base.grad[i]);
        }
    }

    proptest! {
        #[test]
        fn loss_ranges_and_gradients(
            p in proptest::collection::vec(0.01f64..0.99, 24),
            g in proptest::collection::vec(any::<bool>(), 24),
            alpha in 0.0f64..1.0,
            lambda in 0.0f64..1.0,
        ) {
            let g: Vec<f64> = g.into_iter().map(|b| b as u8 as f64).collect();
            let d = dice_loss(&p, &g, alpha).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&d));
            let parts = rvl_parts(&p, &g).unwrap();
            prop_assert!((0.0..=1.0).contains(&parts.attr) && parts.rep >= 0.0);
            prop_assert!(combined_loss(&p, &g, alpha, lambda).unwrap().value >= 0.0);
            fd_check(|q| dice_loss(q, &g, alpha).unwrap(), &p);
            fd_check(|q| rvl_loss(q, &g).unwrap(), &p);
            fd_check(|q| combined_loss(q, &g, alpha, lambda).unwrap(), &p);
        }

        #[test]
        fn raising_visible_prediction_never_raises_attraction(
            p in proptest::collection::vec(0.0f64..1.0, 16),
            g in proptest::collection::vec(any::<bool>(), 16),
            i in 0usize..16,
            bump in 0.0f64..1.0,
        ) {
            let g: Vec<f64> = g.into_iter().map(|b| b as u8 as f64).collect();
            prop_assume!(g[i] == 1.0);
            let before = rvl_parts(&p, &g).unwrap().attr;
            let mut q = p.clone();
            q[i] = (q[i] + bump).min(1.0);
            prop_assert!(rvl_parts(&q, &g).unwrap().attr <= before);
        }
    }
}
