//! Adversarial losses and their derivatives with respect to the scores.

use crate::config::LossKind;
use crate::error::{Error, Result};

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_scores(real: &[f64], fake: &[f64]) -> Result<()> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if real.iter().chain(fake).any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Non-saturating logistic pair `(softplus(−f), softplus(f) + softplus(−r))`.
pub fn logistic_losses(d_real: f64, d_fake: f64) -> Result<(f64, f64)> {
    let l = batch_losses(LossKind::Logistic, &[d_real], &[d_fake])?;
    Ok((l.loss_g, l.loss_d))
}

/// Relativistic hinge pair over batches of real and fake scores.
pub fn relativistic_hinge_losses(d_real: &[f64], d_fake: &[f64]) -> Result<(f64, f64)> {
    let l = batch_losses(LossKind::RelativisticHinge, d_real, d_fake)?;
    Ok((l.loss_g, l.loss_d))
}

/// `(γ₁/2)·a + (γ₂/2)·b` for squared gradient norms `a` (real) and `b` (fake).
pub fn r_penalty(grad_real_sqnorm: f64, grad_fake_sqnorm: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    for v in [grad_real_sqnorm, grad_fake_sqnorm] {
        if v < 0.0 {
            return Err(Error::NegativeNorm(v));
        }
    }
    Ok(0.5 * gamma1 * grad_real_sqnorm + 0.5 * gamma2 * grad_fake_sqnorm)
}

/// Batch losses and their score derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchLoss {
    pub loss_g: f64,
    pub loss_d: f64,
    /// `∂loss_g/∂fake[j]`.
    pub g_fake: Vec<f64>,
    /// `∂loss_d/∂real[i]`.
    pub d_real: Vec<f64>,
    /// `∂loss_d/∂fake[j]`.
    pub d_fake: Vec<f64>,
}

pub fn batch_losses(kind: LossKind, real: &[f64], fake: &[f64]) -> Result<BatchLoss> {
    check_scores(real, fake)?;
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let out = match kind {
        LossKind::Logistic => BatchLoss {
            loss_g: fake.iter().map(|f| softplus(-f)).sum::<f64>() / nf,
            loss_d: fake.iter().map(|&f| softplus(f)).sum::<f64>() / nf + real.iter().map(|r| softplus(-r)).sum::<f64>() / nr,
            g_fake: fake.iter().map(|f| -sigmoid(-f) / nf).collect(),
            d_real: real.iter().map(|r| -sigmoid(-r) / nr).collect(),
            d_fake: fake.iter().map(|&f| sigmoid(f) / nf).collect(),
        },
        LossKind::RelativisticHinge => {
            let (mr, mf) = (mean(real), mean(fake));
            // real-minus-mean-fake and fake-minus-mean-real differences
            let rf: Vec<f64> = real.iter().map(|r| r - mf).collect();
            let fr: Vec<f64> = fake.iter().map(|f| f - mr).collect();
            let loss_g = rf.iter().map(|x| relu(1.0 + x)).sum::<f64>() / nr + fr.iter().map(|x| relu(1.0 - x)).sum::<f64>() / nf;
            let loss_d = rf.iter().map(|x| relu(1.0 - x)).sum::<f64>() / nr + fr.iter().map(|x| relu(1.0 + x)).sum::<f64>() / nf;
            // fraction of active hinge terms in each sum
            let g_rf = rf.iter().map(|x| step(1.0 + x)).sum::<f64>() / nr;
            let d_rf = rf.iter().map(|x| step(1.0 - x)).sum::<f64>() / nr;
            let d_fr = fr.iter().map(|x| step(1.0 + x)).sum::<f64>() / nf;
            BatchLoss {
                loss_g,
                loss_d,
                g_fake: fr.iter().map(|x| (-g_rf - step(1.0 - x)) / nf).collect(),
                d_real: rf.iter().map(|x| (-step(1.0 - x) - d_fr) / nr).collect(),
                d_fake: fr.iter().map(|x| (d_rf + step(1.0 + x)) / nf).collect(),
            }
        }
    };
    if !(out.loss_g.is_finite() && out.loss_d.is_finite()) {
        return Err(Error::NonFinite("loss"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scores() {
        let (g, d) = logistic_losses(0.0, 0.0).unwrap();
        assert!((g - 2f64.ln()).abs() < 1e-12);
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(relativistic_hinge_losses(&[0.3, 0.3], &[0.3]).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(relativistic_hinge_losses(&[2.0], &[-2.0]).unwrap(), (10.0, 0.0));
        assert!(logistic_losses(0.0, 800.0).unwrap().0 < 1e-300);
        assert!(logistic_losses(-800.0, 800.0).unwrap().1.is_finite());
        assert_eq!(r_penalty(0.0, 0.0, 10.0, 0.0).unwrap(), 0.0);
        assert_eq!(r_penalty(2.0, 5.0, 10.0, 0.0).unwrap(), 10.0);
        assert!(matches!(r_penalty(-1.0, 0.0, 10.0, 0.0), Err(Error::NegativeNorm(_))));
        assert!(matches!(relativistic_hinge_losses(&[], &[1.0]), Err(Error::EmptyBatch)));
        assert!(matches!(logistic_losses(f64::NAN, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn score_derivatives_match_differences() {
        let real = [0.4, -0.9, 1.7];
        let fake = [-0.2, 0.8, 2.5, -1.1];
        for kind in [LossKind::Logistic, LossKind::RelativisticHinge] {
            let l = batch_losses(kind, &real, &fake).unwrap();
            let h = 1e-6;
            for j in 0..fake.len() {
                let (mut p, mut m) = (fake, fake);
                p[j] += h;
                m[j] -= h;
                let (lp, lm) = (batch_losses(kind, &real, &p).unwrap(), batch_losses(kind, &real, &m).unwrap());
                assert!(((lp.loss_g - lm.loss_g) / (2.0 * h) - l.g_fake[j]).abs() < 1e-8);
                assert!(((lp.loss_d - lm.loss_d) / (2.0 * h) - l.d_fake[j]).abs() < 1e-8);
            }
            for i in 0..real.len() {
                let (mut p, mut m) = (real, real);
                p[i] += h;
                m[i] -= h;
                let (lp, lm) = (batch_losses(kind, &p, &fake).unwrap(), batch_losses(kind, &m, &fake).unwrap());
                assert!(((lp.loss_d - lm.loss_d) / (2.0 * h) - l.d_real[i]).abs() < 1e-8);
            }
        }
    }
}
