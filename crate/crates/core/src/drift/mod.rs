//! Drifts `b_t(x) = theta(t) g(x)` with declared regularity `(alpha, q)`.

mod control;
mod fields;
mod heat;
mod profile;
mod regime;
mod registry;

use std::fmt;
use std::sync::Arc;

pub use control::{control_from_profile, ControlFn};
pub use fields::{
    holder_seminorm_estimate, weierstrass, Constant, Linear, SignPower, SpatialField, SumField, TrigSeries, TrigTerm,
    Zero,
};
pub use heat::{heat_smooth, mollify_sequence, negative_norm_estimate, HeatSmoothed, LacunaryDistribution};
pub use profile::TimeProfile;
pub use regime::{classify_regime, conjugate, Regime, RegimeReport};
pub use registry::{build_drift, FieldSpec};

use crate::error::{invalid, Result};

/// Evaluable drift with regularity metadata.
#[derive(Clone)]
pub struct DriftField {
    spatial: Arc<dyn SpatialField>,
    profile: TimeProfile,
    alpha: f64,
    q: f64,
    spatial_norm: f64,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("spatial", &self.spatial.name())
            .field("profile", &self.profile)
            .field("alpha", &self.alpha)
            .field("q", &self.q)
            .finish()
    }
}

impl DriftField {
    /// Drift `profile(t) * spatial(x)` declared to lie in `L^q_t C^alpha_x`.
    pub fn new(spatial: Arc<dyn SpatialField>, profile: TimeProfile, alpha: f64, q: f64) -> Result<Self> {
        if !(q > 1.0) {
            return Err(invalid(format!("time integrability q must exceed 1, got {q}")));
        }
        if !alpha.is_finite() || alpha > 1.0 {
            return Err(invalid(format!("alpha must be finite and at most 1, got {alpha}")));
        }
        if !profile.is_q_integrable(q) {
            return Err(invalid(format!("time profile {profile:?} is not {q}-integrable on [0,1]")));
        }
        let spatial_norm = spatial.holder_norm(alpha).unwrap_or_else(|| fields::estimate_norm(spatial.as_ref(), alpha));
        Ok(Self { spatial, profile, alpha, q, spatial_norm })
    }

    /// Time-homogeneous drift.
    pub fn autonomous(spatial: Arc<dyn SpatialField>, alpha: f64) -> Self {
        Self::new(spatial, TimeProfile::Constant(1.0), alpha, f64::INFINITY).expect("constant profile is always valid")
    }

    pub fn zero(dim: usize) -> Self {
        Self::autonomous(Arc::new(Zero { dim }), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.spatial.dim()
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn spatial(&self) -> &Arc<dyn SpatialField> {
        &self.spatial
    }
    pub fn profile(&self) -> &TimeProfile {
        &self.profile
    }
    pub fn name(&self) -> String {
        self.spatial.name()
    }

    /// Same spatial part with a different time profile.
    pub fn with_profile(&self, profile: TimeProfile) -> Result<Self> {
        Self::new(Arc::clone(&self.spatial), profile, self.alpha, self.q)
    }

    /// Same drift with different declared regularity.
    pub fn with_metadata(&self, alpha: f64, q: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.spatial), self.profile.clone(), alpha, q)
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let th = self.profile.value(t);
        self.spatial.eval(x, out);
        for o in out.iter_mut() {
            *o *= th;
        }
    }

    /// Row-major `d x d` Jacobian `[i*d + j] = d b_i / d x_j`.
    pub fn gradient(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let th = self.profile.value(t);
        self.spatial.gradient(x).map(|g| g.into_iter().map(|v| v * th).collect())
    }

    /// `t -> ||b_t||_{C^alpha}`: exact in time, spatial factor analytic or lattice-estimated.
    pub fn norm_profile(&self, t: f64) -> f64 {
        self.profile.value(t).abs() * self.spatial_norm
    }

    pub fn spatial_norm(&self) -> f64 {
        self.spatial_norm
    }

    /// `w(s,t) = int_s^t ||b_r||^q dr` (for `q = inf` the `L^1` control is used).
    pub fn control(&self) -> ControlFn {
        let q = if self.q.is_finite() { self.q } else { 1.0 };
        let norm = self.spatial_norm.powf(q);
        let profile = self.profile.clone();
        ControlFn::new(move |s, t| norm * profile.power_integral(q, s, t), format!("||{}||^{q}", self.name()))
    }

    /// `L^q_t C^alpha_x` norm over `[0,1]`.
    pub fn lq_norm(&self) -> f64 {
        if self.q.is_finite() {
            self.control().eval(0.0, 1.0).powf(1.0 / self.q)
        } else {
            self.profile.sup_abs(0.0, 1.0) * self.spatial_norm
        }
    }
}
