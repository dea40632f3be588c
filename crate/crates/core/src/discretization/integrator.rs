//! Stiff time integration of the semi-discrete rod.
//!
//! The adaptive scheme is TR-BDF2 (trapezoidal stage followed by a BDF2
//! stage, L-stable, order 2) with the embedded third-order error estimate
//! filtered through the iteration matrix. The fixed-step fallback is
//! linearly implicit Euler with one Jacobian per call to [`Integrator::advance`].

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    #[default]
    AdaptiveStiff,
    FixedStepSemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// s
    pub max_step: f64,
    /// s
    pub initial_step: f64,
    pub integrator: IntegratorKind,
    /// s, used by the fixed-step integrator
    pub fixed_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-6,
            absolute_tolerance: 1e-8,
            max_step: 1e-2,
            initial_step: 1e-5,
            integrator: IntegratorKind::AdaptiveStiff,
            fixed_step: 1e-4,
        }
    }
}

impl SolverConfig {
    /// The fixed-step scheme at its default step.
    pub fn semi_implicit() -> Self {
        Self {
            integrator: IntegratorKind::FixedStepSemiImplicit,
            ..Self::default()
        }
    }

    pub fn fixed_step(dt: f64) -> Self {
        Self {
            integrator: IntegratorKind::FixedStepSemiImplicit,
            fixed_step: dt,
            ..Self::default()
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.relative_tolerance = rtol;
        self.absolute_tolerance = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("solver.relative_tolerance", self.relative_tolerance),
            ("solver.absolute_tolerance", self.absolute_tolerance),
            ("solver.max_step", self.max_step),
            ("solver.initial_step", self.initial_step),
            ("solver.fixed_step", self.fixed_step),
        ];
        for (key, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Counters for diagnostics and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub jacobians: usize,
    pub factorizations: usize,
}

pub const MIN_STEP: f64 = 1e-12;

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const DIAG: f64 = GAMMA / 2.0;
const W: f64 = std::f64::consts::SQRT_2 / 4.0;
// embedded weights of the error estimate
const E1: f64 = W - (1.0 - W) / 3.0;
const E2: f64 = W - (3.0 * W + 1.0) / 3.0;
const E3: f64 = DIAG - DIAG / 3.0;

const NEWTON_MAX_ITERS: usize = 8;
const NEWTON_TOL: f64 = 0.03;
// relative step-size change tolerated before refactorizing
const FACTOR_SLACK: f64 = 0.2;

enum Newton {
    Converged(DVector<f64>),
    Failed,
}

/// Integrator state that persists across segments: step size and Jacobian.
pub struct Integrator {
    config: SolverConfig,
    step: Option<f64>,
    jacobian: Option<DMatrix<f64>>,
    jacobian_fresh: bool,
    factor: Option<(f64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    stats: IntegratorStats,
}

impl Integrator {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: None,
            jacobian: None,
            jacobian_fresh: false,
            factor: None,
            stats: IntegratorStats::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// Advances `y` from `t0` to `t1` with the system held fixed in between.
    pub fn advance<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t0: f64,
        y: &mut DVector<f64>,
        t1: f64,
    ) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        // inputs may have changed since the Jacobian was formed
        self.jacobian_fresh = false;
        match self.config.integrator {
            IntegratorKind::AdaptiveStiff => self.advance_adaptive(sys, t0, y, t1),
            IntegratorKind::FixedStepSemiImplicit => self.advance_fixed(sys, t0, y, t1),
        }
    }

    fn eval<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut dy = DVector::zeros(y.len());
        sys.rhs(t, y, &mut dy)?;
        self.stats.rhs_evaluations += 1;
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        Ok(dy)
    }

    fn refresh_jacobian<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        y: &DVector<f64>,
        f0: &DVector<f64>,
    ) -> Result<()> {
        let n = y.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        let mut fp = DVector::zeros(n);
        for j in 0..n {
            let delta = 1e-8 * y[j].abs().max(1e-2);
            let orig = yp[j];
            yp[j] = orig + delta;
            let actual = yp[j] - orig;
            sys.rhs(t, &yp, &mut fp)?;
            yp[j] = orig;
            jac.column_mut(j).copy_from(&((&fp - f0) / actual));
        }
        self.stats.rhs_evaluations += n;
        self.stats.jacobians += 1;
        self.jacobian = Some(jac);
        self.jacobian_fresh = true;
        self.factor = None;
        Ok(())
    }

    /// Factorizes `I - coeff J`, keeping the current factors when their
    /// coefficient is within `slack` (relative) of `coeff`.
    fn factorize(&mut self, coeff: f64, slack: f64) -> Result<()> {
        if let Some((c, _)) = &self.factor {
            if (c / coeff - 1.0).abs() <= slack {
                return Ok(());
            }
        }
        let jac = self.jacobian.as_ref().expect("jacobian before factorization");
        let n = jac.nrows();
        let m = DMatrix::identity(n, n) - jac * coeff;
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularMatrix);
        }
        self.stats.factorizations += 1;
        self.factor = Some((coeff, lu));
        Ok(())
    }

    fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let (_, lu) = self.factor.as_ref().expect("factorization before solve");
        lu.solve(rhs).ok_or(Error::SingularMatrix)
    }

    fn advance_fixed<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t0: f64,
        y: &mut DVector<f64>,
        t1: f64,
    ) -> Result<()> {
        let span = t1 - t0;
        let steps = ((span / self.config.fixed_step) - 1e-9).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let f0 = self.eval(sys, t0, y)?;
        self.refresh_jacobian(sys, t0, y, &f0)?;
        self.factorize(dt, 0.0)?;
        let mut f = f0;
        for k in 0..steps {
            let t = t0 + k as f64 * dt;
            if k > 0 {
                f = self.eval(sys, t, y)?;
            }
            let dy = self.solve(&(&f * dt))?;
            *y += dy;
            self.stats.accepted += 1;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t1));
        }
        Ok(())
    }

    fn weights(&self, y: &DVector<f64>, other: Option<&DVector<f64>>) -> DVector<f64> {
        let (rtol, atol) = (self.config.relative_tolerance, self.config.absolute_tolerance);
        match other {
            Some(o) => y.zip_map(o, |a, b| atol + rtol * a.abs().max(b.abs())),
            None => y.map(|a| atol + rtol * a.abs()),
        }
    }

    fn wrms(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let sum: f64 = v.iter().zip(w.iter()).map(|(a, b)| (a / b).powi(2)).sum();
        (sum / v.len() as f64).sqrt()
    }

    /// Simplified Newton for `z = base + coeff f(t, z)`.
    fn newton<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        base: &DVector<f64>,
        coeff: f64,
        mut z: DVector<f64>,
        weights: &DVector<f64>,
    ) -> Result<Newton> {
        let mut previous: Option<f64> = None;
        for _ in 0..NEWTON_MAX_ITERS {
            let f = match self.eval(sys, t, &z) {
                Ok(f) => f,
                Err(Error::NonFinite(_)) | Err(Error::CompressedSection(..)) => return Ok(Newton::Failed),
                Err(e) => return Err(e),
            };
            let residual = &z - base - &f * coeff;
            let delta = self.solve(&(-residual))?;
            z += &delta;
            let norm = Self::wrms(&delta, weights);
            if !norm.is_finite() {
                return Ok(Newton::Failed);
            }
            match previous {
                Some(prev) => {
                    let rate = norm / prev;
                    if rate >= 0.9 {
                        return Ok(Newton::Failed);
                    }
                    if rate / (1.0 - rate) * norm < NEWTON_TOL {
                        return Ok(Newton::Converged(z));
                    }
                }
                None if norm < 1e-3 * NEWTON_TOL => return Ok(Newton::Converged(z)),
                None => {}
            }
            previous = Some(norm.max(1e-300));
        }
        Ok(Newton::Failed)
    }

    fn advance_adaptive<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t0: f64,
        y: &mut DVector<f64>,
        t1: f64,
    ) -> Result<()> {
        let mut t = t0;
        let mut h = self
            .step
            .unwrap_or(self.config.initial_step)
            .min(self.config.max_step);
        let mut f0 = self.eval(sys, t, y)?;
        if self.jacobian.is_none() {
            self.refresh_jacobian(sys, t, y, &f0)?;
        }
        loop {
            let remaining = t1 - t;
            if remaining <= 1e-12 * t1.abs().max(1.0) {
                break;
            }
            let clipped = h >= remaining;
            let h_step = if clipped { remaining } else { h };
            if h_step < MIN_STEP && !clipped {
                return Err(Error::StepUnderflow { t, h: h_step });
            }
            let coeff = h_step * DIAG;
            self.factorize(coeff, FACTOR_SLACK)?;
            let weights = self.weights(y, None);

            // trapezoidal stage to t + gamma h
            let base2 = &*y + &f0 * coeff;
            let guess2 = &*y + &f0 * (GAMMA * h_step);
            let z2 = match self.newton(sys, t + GAMMA * h_step, &base2, coeff, guess2, &weights)? {
                Newton::Converged(z) => z,
                Newton::Failed => {
                    self.recover_from_newton_failure(sys, t, y, &f0, &mut h, h_step)?;
                    continue;
                }
            };
            let f2 = (&z2 - &base2) / coeff;

            // BDF2 stage to t + h
            let base3 = &*y + (&f0 + &f2) * (W * h_step);
            let guess3 = &*y + (&z2 - &*y) / GAMMA;
            let z3 = match self.newton(sys, t + h_step, &base3, coeff, guess3, &weights)? {
                Newton::Converged(z) => z,
                Newton::Failed => {
                    self.recover_from_newton_failure(sys, t, y, &f0, &mut h, h_step)?;
                    continue;
                }
            };
            let f3 = (&z3 - &base3) / coeff;

            let raw = (&f0 * E1 + &f2 * E2 + &f3 * E3) * h_step;
            let estimate = self.solve(&raw)?;
            let err = Self::wrms(&estimate, &self.weights(y, Some(&z3)));
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
            };

            if err <= 1.0 {
                t = if clipped { t1 } else { t + h_step };
                *y = z3;
                self.stats.accepted += 1;
                let proposed = if (1.0..=1.2).contains(&factor) { h_step } else { h_step * factor };
                h = if clipped { proposed.max(h) } else { proposed };
                h = h.min(self.config.max_step);
                if t < t1 {
                    f0 = self.eval(sys, t, y)?;
                }
            } else {
                self.stats.rejected += 1;
                h = h_step * factor.min(0.9);
                if h < MIN_STEP {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        self.step = Some(h);
        Ok(())
    }

    fn recover_from_newton_failure<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        y: &DVector<f64>,
        f0: &DVector<f64>,
        h: &mut f64,
        h_step: f64,
    ) -> Result<()> {
        self.stats.rejected += 1;
        let coeff = h_step * DIAG;
        if self.factor.as_ref().is_some_and(|(c, _)| *c != coeff) {
            self.factorize(coeff, 0.0)?;
            *h = h_step;
        } else if !self.jacobian_fresh {
            self.refresh_jacobian(sys, t, y, f0)?;
            *h = h_step;
        } else {
            *h = 0.25 * h_step;
            if *h < MIN_STEP {
                return Err(Error::StepUnderflow { t, h: *h });
            }
        }
        Ok(())
    }
}
