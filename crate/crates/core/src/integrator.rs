//! Fixed-step classical RK4 on the state operator.
//!
//! The production path integrates `γ̇ = −i G(γγ†) γ`, so `ρ = γγ†` stays
//! positive no matter what the step error is. The generator is re-evaluated
//! at every internal stage on that stage's own `γγ†`. Any number of extra
//! matrices (a propagator, for instance) can ride along and are advanced with
//! the same stage generators.

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::linalg::{hermitian_part, ComplexMatrix, I};
use crate::state::hs_norm_sqr;

/// Largest tolerated relative change of `Tr[γ†γ]` in one step.
pub const MAX_STEP_DRIFT: f64 = 1e-6;

/// Anything that maps a (possibly unnormalized) state `ρ` to a generator `G(ρ)`.
pub trait GeneratorField: Sync {
    fn dim(&self) -> usize;
    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix>;
}

impl GeneratorField for GeneratorSpec {
    fn dim(&self) -> usize {
        GeneratorSpec::dim(self)
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        GeneratorSpec::generator(self, rho)
    }
}

impl<F: GeneratorField + ?Sized> GeneratorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn generator(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        (**self).generator(rho)
    }
}

fn density_of(gamma: &ComplexMatrix) -> ComplexMatrix {
    hermitian_part(&(gamma * gamma.adjoint()))
}

/// Step count and step size that land exactly on `span`.
pub fn grid(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, 0.0);
    }
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct StepPolicy {
    pub renormalize: bool,
    /// `Tr[γ†γ]` the carried state should keep; 1 for normalized states.
    pub target_norm: f64,
}

impl StepPolicy {
    pub fn unit(renormalize: bool) -> Self {
        Self { renormalize, target_norm: 1.0 }
    }
}

/// One RK4 step. `carry[0]` is `γ`; the rest are advanced with the same
/// stage generators. Returns the relative norm drift of `γ` before any
/// rescaling.
pub fn rk4_step<F: GeneratorField + ?Sized>(
    field: &F,
    carry: &mut [ComplexMatrix],
    h: f64,
    policy: StepPolicy,
    t: f64,
) -> Result<f64> {
    let rate = |g: &ComplexMatrix, xs: &[ComplexMatrix]| -> Result<Vec<ComplexMatrix>> {
        let gen = field.generator(&density_of(g))?.map(|z| -z * I);
        Ok(xs.iter().map(|x| &gen * x).collect())
    };
    let shifted = |ks: &[ComplexMatrix], c: f64| -> Vec<ComplexMatrix> {
        carry.iter().zip(ks).map(|(x, k)| x + k.scale(c)).collect()
    };

    let k1 = rate(&carry[0], carry)?;
    let s2 = shifted(&k1, 0.5 * h);
    let k2 = rate(&s2[0], &s2)?;
    let s3 = shifted(&k2, 0.5 * h);
    let k3 = rate(&s3[0], &s3)?;
    let s4 = shifted(&k3, h);
    let k4 = rate(&s4[0], &s4)?;

    let before = hs_norm_sqr(&carry[0]);
    for (i, x) in carry.iter_mut().enumerate() {
        let incr = &k1[i] + (&k2[i] + &k3[i]).scale(2.0) + &k4[i];
        *x += incr.scale(h / 6.0);
    }
    let after = hs_norm_sqr(&carry[0]);
    let drift = (after - before).abs() / policy.target_norm;
    if drift > MAX_STEP_DRIFT {
        return Err(Error::StepSize { drift, limit: MAX_STEP_DRIFT, t: t + h });
    }
    if policy.renormalize && after > 0.0 {
        let s = (policy.target_norm / after).sqrt();
        for x in carry.iter_mut() {
            x.scale_mut(s);
        }
    }
    Ok(drift)
}

/// Advance `carry` from `t_start` to `t_end` on the [`grid`] for `dt`.
/// `observe` sees `(step, t, carry)` after every step, with steps counted from 1.
/// Returns the worst per-step drift.
pub fn integrate<F, O>(
    field: &F,
    carry: &mut [ComplexMatrix],
    t_start: f64,
    t_end: f64,
    dt: f64,
    policy: StepPolicy,
    mut observe: O,
) -> Result<f64>
where
    F: GeneratorField + ?Sized,
    O: FnMut(usize, f64, &[ComplexMatrix]) -> Result<()>,
{
    let (n, h) = grid(t_end - t_start, dt);
    let mut worst = 0.0f64;
    for step in 1..=n {
        let t = t_start + (step - 1) as f64 * h;
        worst = worst.max(rk4_step(field, carry, h, policy, t)?);
        let t_now = if step == n { t_end } else { t_start + step as f64 * h };
        observe(step, t_now, carry)?;
    }
    Ok(worst)
}

/// RK4 directly on `ρ̇ = −i(Gρ − ρG†)`. Used only as a cross-check of the
/// state-operator route; no renormalization.
pub fn rk4_density_step<F: GeneratorField + ?Sized>(field: &F, rho: &ComplexMatrix, h: f64) -> Result<ComplexMatrix> {
    let rate = |r: &ComplexMatrix| -> Result<ComplexMatrix> {
        let r = hermitian_part(r);
        let g = field.generator(&r)?;
        Ok((&g * &r - &r * g.adjoint()).map(|z| -z * I))
    };
    let k1 = rate(rho)?;
    let k2 = rate(&(rho + k1.scale(0.5 * h)))?;
    let k3 = rate(&(rho + k2.scale(0.5 * h)))?;
    let k4 = rate(&(rho + k3.scale(h)))?;
    let next = rho + (k1 + (k2 + k3).scale(2.0) + k4).scale(h / 6.0);
    Ok(hermitian_part(&next))
}
