//! Discrete Bayesian estimation of the human's following preference and
//! error-proneness on an 11-point grid over `[0, 1]`.
//!
//! Both estimators share the update shape
//! `b'(y') = η Σ_y T(y → y') · π(y, observed) · b(y)`.
//! The following preference is assumed static (`T` is the identity); the
//! error-proneness drifts one grid step per observation through a
//! skew-normal transition kernel.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const GRID_POINTS: usize = 11;

/// The grid `W = (0.0, 0.1, …, 1.0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreferenceGrid;

impl PreferenceGrid {
    pub fn value(i: usize) -> f64 {
        i as f64 / (GRID_POINTS - 1) as f64
    }

    pub fn values() -> [f64; GRID_POINTS] {
        std::array::from_fn(Self::value)
    }

    /// Index of the grid point nearest to `x`.
    pub fn index_of(x: f64) -> usize {
        ((x.clamp(0.0, 1.0) * (GRID_POINTS - 1) as f64).round()) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefKind {
    Following,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefGrid {
    pub kind: BeliefKind,
    pub probs: [f64; GRID_POINTS],
}

impl BeliefGrid {
    pub fn uniform(kind: BeliefKind) -> Self {
        BeliefGrid {
            kind,
            probs: [1.0 / GRID_POINTS as f64; GRID_POINTS],
        }
    }

    pub fn point_mass(kind: BeliefKind, index: usize) -> Self {
        let mut probs = [0.0; GRID_POINTS];
        probs[index] = 1.0;
        BeliefGrid { kind, probs }
    }

    /// `Σ w_i · p_i`.
    pub fn expected_value(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| PreferenceGrid::value(i) * p)
            .sum()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..GRID_POINTS {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p >= 0.0) && (self.probs.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// Replaces `probs` by `weights / Σ weights`; returns `false` and leaves
    /// the belief untouched when the weights carry no mass.
    fn renormalize_from(&mut self, weights: [f64; GRID_POINTS]) -> bool {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return false;
        }
        self.probs = weights.map(|w| w / total);
        true
    }
}

/// Observation classes feeding the following-preference estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FollowingClass {
    /// Human assigned a subtask to the robot.
    F1,
    /// Human performed a subtask the robot assigned.
    F2,
    /// Human rejected a subtask the robot assigned.
    F3,
}

/// Observation classes feeding the error-proneness estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    /// Wrong color placed or assigned.
    M1,
    /// Correct self-initiated placement or assignment.
    M2,
}

/// Bounded FIFO of the last `k` classified actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionHistory<C> {
    capacity: usize,
    entries: VecDeque<C>,
}

impl<C: Copy + PartialEq> ActionHistory<C> {
    pub fn new(capacity: usize) -> Self {
        ActionHistory {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, class: C) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(class);
    }

    pub fn count(&self, class: C) -> usize {
        self.entries.iter().filter(|&&c| c == class).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &C> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    /// Extra weight of explicit assignments to the robot (must exceed 1).
    pub alpha_weight: f64,
    /// Scale of the skew-normal transition kernel.
    pub sigma: f64,
    /// Skewness applied after an erroneous action.
    pub beta_wrong: f64,
    /// Skewness applied after a correct action.
    pub beta_correct: f64,
    pub prior_p_following: f64,
    pub prior_p_error: f64,
    /// Length of the bounded action memory.
    pub memory: usize,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            alpha_weight: 2.0,
            sigma: 0.15,
            beta_wrong: 4.0,
            beta_correct: -4.0,
            prior_p_following: 0.7,
            prior_p_error: 0.1,
            memory: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("alpha_weight must be > 1, got {0}")]
    AlphaWeight(f64),
    #[error("sigma must be > 0, got {0}")]
    Sigma(f64),
    #[error("prior probability must lie in (0, 1), got {0}")]
    Prior(f64),
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha_weight > 1.0) {
            return Err(ParamError::AlphaWeight(self.alpha_weight));
        }
        if !(self.sigma > 0.0) {
            return Err(ParamError::Sigma(self.sigma));
        }
        for p in [self.prior_p_following, self.prior_p_error] {
            if !(p > 0.0 && p < 1.0) {
                return Err(ParamError::Prior(p));
            }
        }
        Ok(())
    }
}

/// Binomial(n = 10, p) prior over the grid.
pub fn init_belief(kind: BeliefKind, params: &EstimatorParams) -> BeliefGrid {
    let p = match kind {
        BeliefKind::Following => params.prior_p_following,
        BeliefKind::Error => params.prior_p_error,
    };
    let n = (GRID_POINTS - 1) as i32;
    let mut probs = [0.0; GRID_POINTS];
    let mut binom = 1.0;
    for (i, slot) in probs.iter_mut().enumerate() {
        let k = i as i32;
        if k > 0 {
            binom = binom * f64::from(n - k + 1) / f64::from(k);
        }
        *slot = binom * p.powi(k) * (1.0 - p).powi(n - k);
    }
    BeliefGrid { kind, probs }
}

/// Following-preference update. `history` must already contain `observed`.
///
/// Likelihood of compliance-type observations (F1, F2) grows with `y`;
/// rejections (F3) use the complement `1 - y`. A zero denominator or a
/// posterior without mass leaves the belief unchanged.
pub fn update_following(
    belief: &BeliefGrid,
    history: &ActionHistory<FollowingClass>,
    observed: FollowingClass,
    params: &EstimatorParams,
) -> BeliefGrid {
    let f1 = history.count(FollowingClass::F1) as f64;
    let f2 = history.count(FollowingClass::F2) as f64;
    let f3 = history.count(FollowingClass::F3) as f64;
    let denom = params.alpha_weight * f1 + f2 + f3;
    if denom <= 0.0 {
        return belief.clone();
    }
    let mut weights = [0.0; GRID_POINTS];
    for (i, w) in weights.iter_mut().enumerate() {
        let y = PreferenceGrid::value(i);
        let pi = match observed {
            FollowingClass::F1 | FollowingClass::F2 => (params.alpha_weight * f1 + f2) / denom * y,
            FollowingClass::F3 => f3 / denom * (1.0 - y),
        };
        *w = pi * belief.probs[i];
    }
    let mut out = belief.clone();
    out.renormalize_from(weights);
    out
}

/// Error-proneness update. `history` must already contain `observed`.
///
/// Errors (M1) are likelier for larger `y` and shift mass one step up via
/// the skew-normal kernel; correct actions (M2) use `1 - y` and shift down.
pub fn update_error(
    belief: &BeliefGrid,
    history: &ActionHistory<ErrorClass>,
    observed: ErrorClass,
    params: &EstimatorParams,
) -> BeliefGrid {
    let m1 = history.count(ErrorClass::M1) as f64;
    let m2 = history.count(ErrorClass::M2) as f64;
    let total = m1 + m2;
    if total <= 0.0 {
        return belief.clone();
    }
    let kernel = TransitionKernel::new(observed, params);
    let mut weights = [0.0; GRID_POINTS];
    for y in 0..GRID_POINTS {
        let yv = PreferenceGrid::value(y);
        let pi = match observed {
            ErrorClass::M1 => m1 / total * yv,
            ErrorClass::M2 => m2 / total * (1.0 - yv),
        };
        let mass = pi * belief.probs[y];
        if mass == 0.0 {
            continue;
        }
        for (to, w) in weights.iter_mut().enumerate() {
            *w += kernel.rows[y][to] * mass;
        }
    }
    let mut out = belief.clone();
    out.renormalize_from(weights);
    out
}

/// Row-stochastic transition matrix of the error-proneness estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub rows: [[f64; GRID_POINTS]; GRID_POINTS],
}

impl TransitionKernel {
    pub fn new(observed: ErrorClass, params: &EstimatorParams) -> Self {
        let rows = std::array::from_fn(|y| transition_row(y, observed, params));
        TransitionKernel { rows }
    }
}

/// Transition probabilities out of grid cell `from`.
///
/// After an error, `Z ~ SN(mean = g_u(y), σ, β_wrong)` and cell `y'` receives
/// `P(y' ≤ Z < g_u(y'))`; after a correct action, `Z ~ SN(mean = g_l(y), σ,
/// β_correct)` and cell `y'` receives `P(g_l(y') ≤ Z < y')`. Tail mass
/// outside `[0, 1]` lands in the boundary cell. A cell already saturated in
/// the direction of the shift maps to itself.
pub fn transition_row(
    from: usize,
    observed: ErrorClass,
    params: &EstimatorParams,
) -> [f64; GRID_POINTS] {
    let last = GRID_POINTS - 1;
    let mut row = [0.0; GRID_POINTS];
    let (target, beta) = match observed {
        ErrorClass::M1 if from == last => {
            row[last] = 1.0;
            return row;
        }
        ErrorClass::M2 if from == 0 => {
            row[0] = 1.0;
            return row;
        }
        ErrorClass::M1 => (from + 1, params.beta_wrong),
        ErrorClass::M2 => (from - 1, params.beta_correct),
    };
    let sn = SkewNormal::from_mean(PreferenceGrid::value(target), params.sigma, beta);
    let cdf_at = |i: usize| sn.cdf(PreferenceGrid::value(i));
    match observed {
        ErrorClass::M1 => {
            // Cells are [w_i, w_{i+1}); below 0 joins cell 0, at or above 1 joins the top.
            for i in 0..last {
                row[i] = cdf_at(i + 1) - cdf_at(i);
            }
            row[0] += cdf_at(0);
            row[last] += 1.0 - cdf_at(last);
        }
        ErrorClass::M2 => {
            // Cells are [w_{i-1}, w_i); below 0 joins cell 0, at or above 1 joins the top.
            for i in 1..=last {
                row[i] = cdf_at(i) - cdf_at(i - 1);
            }
            row[0] += cdf_at(0);
            row[last] += 1.0 - cdf_at(last);
        }
    }
    for p in row.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = row.iter().sum();
    row.map(|p| p / total)
}

/// Azzalini skew-normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormal {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
}

impl SkewNormal {
    /// Distribution with the given mean, scale and shape.
    pub fn from_mean(mean: f64, scale: f64, shape: f64) -> Self {
        let delta = shape / (1.0 + shape * shape).sqrt();
        let location = mean - scale * delta * (2.0 / std::f64::consts::PI).sqrt();
        SkewNormal {
            location,
            scale,
            shape,
        }
    }

    pub fn mean(&self) -> f64 {
        let delta = self.shape / (1.0 + self.shape * self.shape).sqrt();
        self.location + self.scale * delta * (2.0 / std::f64::consts::PI).sqrt()
    }

    /// `Φ(z) - 2 T(z, α)` with Owen's T function.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        let phi = Normal::new(0.0, 1.0).expect("standard normal").cdf(z);
        (phi - 2.0 * owens_t(z, self.shape)).clamp(0.0, 1.0)
    }
}

const GL_NODES: [f64; 10] = [
    -0.973_906_528_517_171_7,
    -0.865_063_366_688_984_5,
    -0.679_409_568_299_024_4,
    -0.433_395_394_129_247_2,
    -0.148_874_338_981_631_2,
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 10] = [
    0.066_671_344_308_688_1,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982,
    0.269_266_719_309_996_4,
    0.295_524_224_714_752_9,
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Owen's T function by composite 10-point Gauss-Legendre quadrature of
/// `(1 / 2π) ∫_0^a exp(-h²(1+t²)/2) / (1+t²) dt`.
pub fn owens_t(h: f64, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if a < 0.0 {
        return -owens_t(h, -a);
    }
    const PANELS: usize = 16;
    let width = a / PANELS as f64;
    let mut sum = 0.0;
    for p in 0..PANELS {
        let mid = (p as f64 + 0.5) * width;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let t = mid + 0.5 * width * x;
            let one_t2 = 1.0 + t * t;
            sum += w * 0.5 * width * (-0.5 * h * h * one_t2).exp() / one_t2;
        }
    }
    sum / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EstimatorParams {
        EstimatorParams::default()
    }

    fn history_f(classes: &[FollowingClass]) -> ActionHistory<FollowingClass> {
        let mut h = ActionHistory::new(3);
        for &c in classes {
            h.push(c);
        }
        h
    }

    #[test]
    fn grid_endpoints() {
        let w = PreferenceGrid::values();
        assert_eq!(w[0], 0.0);
        assert_eq!(w[10], 1.0);
        assert!(w.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(PreferenceGrid::index_of(0.7), 7);
    }

    #[test]
    fn following_prior_matches_binomial() {
        let b = init_belief(BeliefKind::Following, &params());
        // C(10,7) 0.7^7 0.3^3
        let expected = 120.0 * 0.7f64.powi(7) * 0.3f64.powi(3);
        assert!((b.probs[7] - expected).abs() < 1e-12);
        assert!((b.probs[7] - 0.266_827_932_4).abs() < 1e-9);
        assert!((b.expected_value() - 0.7).abs() < 1e-12);
        assert!(b.is_normalized(1e-12));
    }

    #[test]
    fn error_prior_mode_is_one_tenth() {
        let b = init_belief(BeliefKind::Error, &params());
        assert_eq!(b.argmax(), 1);
        assert!((b.expected_value() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn expected_value_simple_cases() {
        assert!((BeliefGrid::uniform(BeliefKind::Following).expected_value() - 0.5).abs() < 1e-12);
        assert!(
            (BeliefGrid::point_mass(BeliefKind::Error, 3).expected_value() - 0.3).abs() < 1e-12
        );
    }

    #[test]
    fn uniform_f1_gives_point_seven() {
        use FollowingClass::*;
        let b = BeliefGrid::uniform(BeliefKind::Following);
        let out = update_following(&b, &history_f(&[F1, F1, F1]), F1, &params());
        // Σ y² / Σ y over the grid = 3.85 / 5.5
        assert!((out.expected_value() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn uniform_f3_gives_point_three() {
        use FollowingClass::*;
        let b = BeliefGrid::uniform(BeliefKind::Following);
        let out = update_following(&b, &history_f(&[F3, F3, F3]), F3, &params());
        assert!((out.expected_value() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn zero_likelihood_is_noop() {
        let b = BeliefGrid::point_mass(BeliefKind::Following, 0);
        let out = update_following(
            &b,
            &history_f(&[FollowingClass::F1]),
            FollowingClass::F1,
            &params(),
        );
        assert_eq!(out, b);
        let empty = ActionHistory::new(3);
        let uni = BeliefGrid::uniform(BeliefKind::Following);
        assert_eq!(
            update_following(&uni, &empty, FollowingClass::F2, &params()),
            uni
        );
    }

    #[test]
    fn history_is_bounded() {
        use FollowingClass::*;
        let h = history_f(&[F1, F2, F3, F3, F3]);
        assert_eq!(h.len(), 3);
        assert_eq!(h.count(F3), 3);
        assert_eq!(h.count(F1), 0);
    }

    #[test]
    fn boundary_point_mass_saturates() {
        let mut h = ActionHistory::new(3);
        h.push(ErrorClass::M1);
        let top = BeliefGrid::point_mass(BeliefKind::Error, 10);
        assert_eq!(update_error(&top, &h, ErrorClass::M1, &params()), top);
        let mut h2 = ActionHistory::new(3);
        h2.push(ErrorClass::M2);
        let bottom = BeliefGrid::point_mass(BeliefKind::Error, 0);
        assert_eq!(
            update_error(&bottom, &h2, ErrorClass::M2, &params()),
            bottom
        );
    }

    #[test]
    fn skew_normal_mean_parameterisation() {
        let sn = SkewNormal::from_mean(0.3, 0.15, 4.0);
        assert!((sn.mean() - 0.3).abs() < 1e-12);
        assert!(sn.location < 0.3);
    }

    #[test]
    fn owens_t_reference_values() {
        // T(h, 1) = Φ(h)(1 - Φ(h)) / 2
        let n = Normal::new(0.0, 1.0).unwrap();
        for h in [0.0, 0.5, 1.3, 2.7] {
            let p = n.cdf(h);
            let d = (owens_t(h, 1.0) - 0.5 * p * (1.0 - p)).abs();
            assert!(d < 1e-11, "h={h} diff={d:e}");
        }
        // T(0, a) = atan(a) / 2π
        assert!((owens_t(0.0, 4.0) - 4f64.atan() / (2.0 * std::f64::consts::PI)).abs() < 1e-13);
    }

    #[test]
    fn rows_are_stochastic() {
        for class in [ErrorClass::M1, ErrorClass::M2] {
            let k = TransitionKernel::new(class, &params());
            for row in k.rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = params();
        p.alpha_weight = 1.0;
        assert!(p.validate().is_err());
        p = params();
        p.sigma = 0.0;
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());
    }
}
