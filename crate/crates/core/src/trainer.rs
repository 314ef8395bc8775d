//! Finite-difference gradient descent over wave-plate angles.
//!
//! Each iteration measures the cost at the current angles, probes every
//! angle once with a forward step `s_a`, then moves all angles against the
//! secant-slope gradient with step `learning_rate * s_a`. `s_a` drops from the
//! coarse to the fine value the first time a measured cost falls below the
//! threshold, and every angle is kicked if no such cost appears within the
//! stuck window. Every cost measurement is one evaluation and one trace
//! record.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::autoencoder::{cost, junk_probability, TrainingSet};
use crate::error::{QaeError, Result};
use crate::optics::{
    mesh_unitary, prepare_state, sample_prep_settings, MeshLayout, ParameterVector, PrepSetting, PreparationFamily,
};
use crate::scalar::Real;

/// Unit in which the secant slope is expressed. The movement step is
/// `learning_rate * s_a * slope`, so the unit sets the effective step size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    /// Slope per radian: a move shifts each angle by `learning_rate * dC` radians.
    #[default]
    Radian,
    /// Slope per degree: a move shifts each angle by `learning_rate * dC` degrees.
    Degree,
}

impl AngleUnit {
    fn step<T: Real>(self, s_a_deg: T) -> T {
        match self {
            AngleUnit::Radian => s_a_deg.to_radians(),
            AngleUnit::Degree => s_a_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig<T> {
    /// Coarse adjustment value in degrees.
    pub s_coarse: T,
    /// Fine adjustment value in degrees.
    pub s_fine: T,
    pub fine_threshold: T,
    /// Iterations without a cost below `fine_threshold` before a kick.
    pub stuck_window: usize,
    /// Kick applied to every angle, degrees.
    pub kick: T,
    pub early_stop: Option<T>,
    pub max_evals: usize,
    pub learning_rate: T,
    pub gradient_unit: AngleUnit,
    pub seed: u64,
}

impl<T: Real> Default for TrainerConfig<T> {
    fn default() -> Self {
        Self {
            s_coarse: T::lit(12.0),
            s_fine: T::lit(5.0),
            fine_threshold: T::lit(0.1),
            stuck_window: 50,
            kick: T::lit(25.0),
            early_stop: None,
            max_evals: 200,
            learning_rate: T::one(),
            gradient_unit: AngleUnit::Radian,
            seed: 0,
        }
    }
}

impl<T: Real> TrainerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(QaeError::InvalidConfig(msg.to_string()));
        if !(self.s_coarse > T::zero() && self.s_fine > T::zero() && self.kick > T::zero()) {
            return bad("angle constants must be positive");
        }
        if !(self.fine_threshold > T::zero() && self.fine_threshold < T::one()) {
            return bad("fine_threshold must lie in (0, 1)");
        }
        if self.max_evals < 1 {
            return bad("max_evals must be at least 1");
        }
        if self.stuck_window < 1 {
            return bad("stuck_window must be at least 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= T::zero() {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// How a cost evaluation is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Backend {
    /// Exact junk probabilities.
    Exact,
    /// Per state: a fixed number of heralded photons, junk count binomial.
    Sampled { shots: u64 },
    /// Per state: junk and kept counts independent Poisson with total mean
    /// `mean_counts`; estimate is junk / (junk + kept).
    Poisson { mean_counts: f64 },
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Sampled { shots } => write!(f, "sampled:{shots}"),
            Backend::Poisson { mean_counts } => write!(f, "poisson:{mean_counts}"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = QaeError;

    fn from_str(s: &str) -> Result<Self> {
        let err = || QaeError::InvalidConfig(format!("unknown backend '{s}'"));
        match s.split_once(':') {
            None if s == "exact" => Ok(Backend::Exact),
            Some(("sampled", n)) => match n.parse::<u64>() {
                Ok(shots) if shots > 0 => Ok(Backend::Sampled { shots }),
                _ => Err(err()),
            },
            Some(("poisson", n)) => match n.parse::<f64>() {
                Ok(mean_counts) if mean_counts > 0.0 => Ok(Backend::Poisson { mean_counts }),
                _ => Err(err()),
            },
            _ => Err(err()),
        }
    }
}

/// Estimates a junk probability under the backend's noise model.
pub fn estimate_probability<T: Real, R: Rng + ?Sized>(backend: &Backend, p: T, rng: &mut R) -> T {
    let pf = p.as_f64().clamp(0.0, 1.0);
    match *backend {
        Backend::Exact => p,
        Backend::Sampled { shots } => {
            let count = Binomial::new(shots, pf).expect("p in [0, 1]").sample(rng);
            T::lit(count as f64 / shots as f64)
        }
        Backend::Poisson { mean_counts } => {
            let mut draw = |mean: f64| {
                if mean > 0.0 {
                    Poisson::new(mean).expect("positive mean").sample(rng)
                } else {
                    0.0
                }
            };
            let junk = draw(mean_counts * pf);
            let kept = draw(mean_counts * (1.0 - pf));
            if junk + kept == 0.0 {
                T::zero()
            } else {
                T::lit(junk / (junk + kept))
            }
        }
    }
}

/// Cost measurement device: a backend, its noise stream, and a counter of
/// evaluations performed.
#[derive(Debug, Clone)]
pub struct CostMeter {
    backend: Backend,
    rng: ChaCha8Rng,
    evals: usize,
}

impl CostMeter {
    pub fn new(backend: Backend, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { backend, rng, evals: 0 }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    /// One cost evaluation: every training state passes through the mesh once.
    pub fn measure<T: Real>(&mut self, layout: &MeshLayout, x: &ParameterVector<T>, set: &TrainingSet<T>) -> Result<T> {
        let u = mesh_unitary(layout, x)?;
        let value = match self.backend {
            Backend::Exact => cost(&u, set)?,
            _ => {
                let mut total = T::zero();
                for s in set.states() {
                    let p = junk_probability(&u, s, set.keep())?;
                    total += estimate_probability(&self.backend, p, &mut self.rng);
                }
                total / T::lit(set.len() as f64)
            }
        };
        self.evals += 1;
        Ok(value)
    }

    /// Junk probability of a single state, with the backend's noise.
    pub fn measure_state<T: Real>(
        &mut self,
        layout: &MeshLayout,
        x: &ParameterVector<T>,
        state: &crate::qudit::PureState<T>,
    ) -> Result<T> {
        let u = mesh_unitary(layout, x)?;
        let p = junk_probability(&u, state, layout.keep())?;
        Ok(estimate_probability(&self.backend, p, &mut self.rng))
    }
}

/// Free-function form of [`CostMeter::measure`].
pub fn measure_cost<T: Real>(
    meter: &mut CostMeter,
    layout: &MeshLayout,
    x: &ParameterVector<T>,
    set: &TrainingSet<T>,
) -> Result<T> {
    meter.measure(layout, x, set)
}

/// Result of one probing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<T> {
    pub base_cost: T,
    pub probe_costs: Vec<T>,
    pub partials: Vec<T>,
}

fn secant<T: Real>(probed: T, base: T, s_a: T, unit: AngleUnit) -> T {
    (probed - base) / unit.step(s_a)
}

/// Measures the base cost, then each forward probe `x_k + s_a`, restoring
/// every angle afterwards. Uses `param_count + 1` evaluations.
pub fn probe_gradient<T: Real>(
    meter: &mut CostMeter,
    layout: &MeshLayout,
    x: &mut ParameterVector<T>,
    set: &TrainingSet<T>,
    s_a: T,
    unit: AngleUnit,
) -> Result<GradientEstimate<T>> {
    if s_a.is_nan() || s_a <= T::zero() {
        return Err(QaeError::InvalidConfig("s_a must be positive".into()));
    }
    let base_cost = meter.measure(layout, x, set)?;
    let mut probe_costs = Vec::with_capacity(x.len());
    let mut partials = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let saved = x.get(k);
        x.rotate(k, s_a);
        let c = meter.measure(layout, x, set);
        x.set(k, saved);
        let c = c?;
        probe_costs.push(c);
        partials.push(secant(c, base_cost, s_a, unit));
    }
    Ok(GradientEstimate {
        base_cost,
        probe_costs,
        partials,
    })
}

/// Periodic rotation of the preparation scrambler during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule<T> {
    /// Signed degrees per drift event.
    pub step: T,
    /// Cost evaluations per drift event.
    pub period: usize,
    pub enabled: bool,
}

impl<T: Real> DriftSchedule<T> {
    pub fn disabled() -> Self {
        Self {
            step: T::zero(),
            period: 1,
            enabled: false,
        }
    }

    pub fn every(period: usize, step: T) -> Self {
        Self {
            step,
            period,
            enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && self.period == 0 {
            return Err(QaeError::InvalidConfig("drift period must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where training states come from.
#[derive(Debug, Clone)]
pub enum TrainingSource<T> {
    /// A fixed set of states; cannot drift.
    Fixed(TrainingSet<T>),
    /// States prepared from fixed settings against a (possibly drifting) family.
    Prepared {
        family: PreparationFamily<T>,
        settings: Vec<PrepSetting<T>>,
    },
}

impl<T: Real> TrainingSource<T> {
    fn build(&self) -> Result<TrainingSet<T>> {
        match self {
            TrainingSource::Fixed(set) => Ok(set.clone()),
            TrainingSource::Prepared { family, settings } => {
                let states = settings
                    .iter()
                    .map(|p| prepare_state(family, p))
                    .collect::<Result<Vec<_>>>()?;
                TrainingSet::new(states, family.keep)
            }
        }
    }

    pub fn family(&self) -> Option<&PreparationFamily<T>> {
        match self {
            TrainingSource::Fixed(_) => None,
            TrainingSource::Prepared { family, .. } => Some(family),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Forward probe of the given parameter.
    Probe(usize),
    /// Measurement at the current angles, i.e. after the previous move (or
    /// at the initial angles for iteration 0).
    Move,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Probe(k) => write!(f, "probe:{}", k + 1),
            Phase::Move => write!(f, "move"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Events {
    /// All angles were kicked just before this measurement.
    pub kick: bool,
    /// The family drifted right after this measurement.
    pub drift: bool,
    /// This measurement switched `s_a` from coarse to fine.
    pub phase_switch: bool,
}

impl fmt::Display for Events {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<&str> = [
            (self.kick, "kick"),
            (self.drift, "drift"),
            (self.phase_switch, "phase_switch"),
        ]
        .into_iter()
        .filter_map(|(on, t)| on.then_some(t))
        .collect();
        write!(f, "{}", tokens.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<T> {
    /// 1-based count of cost evaluations so far.
    pub eval_index: usize,
    pub iteration: usize,
    pub phase: Phase,
    pub angles: ParameterVector<T>,
    pub cost: T,
    pub events: Events,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEvals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace<T> {
    pub records: Vec<TraceRecord<T>>,
    /// Angles the device holds when training stops.
    pub final_angles: ParameterVector<T>,
    /// Preparation family at the end of training (drifted if drift was on).
    pub final_family: Option<PreparationFamily<T>>,
    pub stop: StopReason,
}

impl<T: Real> TrainingTrace<T> {
    pub fn evals(&self) -> usize {
        self.records.len()
    }

    pub fn last_cost(&self) -> T {
        self.records.last().map_or(T::one(), |r| r.cost)
    }

    pub fn min_cost(&self) -> T {
        self.records.iter().fold(T::one(), |m, r| m.min(r.cost))
    }

    /// Cost at 1-based evaluation `k`; after the trace ends, the last
    /// measured value is held.
    pub fn cost_at(&self, k: usize) -> T {
        let idx = k.clamp(1, self.records.len().max(1)) - 1;
        self.records.get(idx).map_or(T::one(), |r| r.cost)
    }

    pub fn count_events(&self, pick: impl Fn(&Events) -> bool) -> usize {
        self.records.iter().filter(|r| pick(&r.events)).count()
    }

    /// Writes one CSV row per record: `eval_index,iteration,phase,cost,x1..xP,events`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let p = self.final_angles.len();
        let mut header = vec![
            "eval_index".to_string(),
            "iteration".into(),
            "phase".into(),
            "cost".into(),
        ];
        header.extend((1..=p).map(|k| format!("x{k}")));
        header.push("events".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            write!(w, "{},{},{},{}", r.eval_index, r.iteration, r.phase, r.cost)?;
            for a in r.angles.angles() {
                write!(w, ",{}", a)?;
            }
            writeln!(w, ",{}", r.events)?;
        }
        Ok(())
    }
}

/// Mutable state of one training run.
struct Run<'a, T> {
    layout: &'a MeshLayout,
    config: &'a TrainerConfig<T>,
    drift: &'a DriftSchedule<T>,
    source: TrainingSource<T>,
    set: TrainingSet<T>,
    meter: CostMeter,
    records: Vec<TraceRecord<T>>,
    s_a: T,
    switched: bool,
    /// Iteration at which the current stuck window opened.
    window_start: usize,
    pending_kick: bool,
}

enum Flow {
    Continue,
    Stop(StopReason),
}

impl<T: Real> Run<'_, T> {
    fn evaluate(&mut self, x: &ParameterVector<T>, iteration: usize, phase: Phase) -> Result<(T, Flow)> {
        let cost = self.meter.measure(self.layout, x, &self.set)?;
        let mut events = Events {
            kick: std::mem::take(&mut self.pending_kick),
            ..Events::default()
        };
        if cost < self.config.fine_threshold {
            if !self.switched {
                self.switched = true;
                self.s_a = self.config.s_fine;
                events.phase_switch = true;
            }
            self.window_start = iteration + 1;
        }
        let evals = self.meter.evals();
        if self.drift.enabled && evals.is_multiple_of(self.drift.period) {
            if let TrainingSource::Prepared { family, .. } = &mut self.source {
                *family = family.drifted(self.drift.step);
                self.set = self.source.build()?;
                events.drift = true;
            }
        }
        self.records.push(TraceRecord {
            eval_index: evals,
            iteration,
            phase,
            angles: x.clone(),
            cost,
            events,
        });
        let flow = if self.config.early_stop.is_some_and(|t| cost <= t) {
            Flow::Stop(StopReason::EarlyStop)
        } else if evals >= self.config.max_evals {
            Flow::Stop(StopReason::MaxEvals)
        } else {
            Flow::Continue
        };
        Ok((cost, flow))
    }
}

/// Initial angles for a run: uniform on `[0, 360)` from the config seed.
pub fn initial_angles<T: Real>(layout: &MeshLayout, seed: u64) -> ParameterVector<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ParameterVector::random(layout.param_count(), &mut rng)
}

/// Runs the training loop from the seed's random initial angles.
pub fn train<T: Real>(
    layout: &MeshLayout,
    source: TrainingSource<T>,
    config: &TrainerConfig<T>,
    drift: &DriftSchedule<T>,
    backend: Backend,
) -> Result<TrainingTrace<T>> {
    let x = initial_angles(layout, config.seed);
    train_from(layout, source, config, drift, backend, x)
}

/// Runs the training loop from the given initial angles.
pub fn train_from<T: Real>(
    layout: &MeshLayout,
    source: TrainingSource<T>,
    config: &TrainerConfig<T>,
    drift: &DriftSchedule<T>,
    backend: Backend,
    mut x: ParameterVector<T>,
) -> Result<TrainingTrace<T>> {
    config.validate()?;
    drift.validate()?;
    if x.len() != layout.param_count() {
        return Err(QaeError::ParameterCount {
            expected: layout.param_count(),
            found: x.len(),
        });
    }
    let set = source.build()?;
    if set.dim() != layout.dim() || set.keep() != layout.keep() {
        return Err(QaeError::DimensionMismatch {
            expected: layout.dim(),
            found: set.dim(),
        });
    }
    let mut run = Run {
        layout,
        config,
        drift,
        source,
        set,
        meter: CostMeter::new(backend, config.seed),
        records: Vec::with_capacity(config.max_evals),
        s_a: config.s_coarse,
        switched: false,
        window_start: 0,
        pending_kick: false,
    };

    let mut iteration = 0;
    let (stop, final_angles) = 'outer: loop {
        let (base, flow) = run.evaluate(&x, iteration, Phase::Move)?;
        if let Flow::Stop(reason) = flow {
            break (reason, x);
        }
        // s_a is fixed for the whole iteration even if a probe crosses the threshold
        let s_a = run.s_a;
        let mut partials = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let saved = x.get(k);
            x.rotate(k, s_a);
            let probed = x.clone();
            x.set(k, saved);
            let (c, flow) = run.evaluate(&probed, iteration, Phase::Probe(k))?;
            if let Flow::Stop(reason) = flow {
                let held = match reason {
                    StopReason::EarlyStop => probed,
                    StopReason::MaxEvals => x,
                };
                break 'outer (reason, held);
            }
            partials.push(secant(c, base, s_a, config.gradient_unit));
        }
        for (k, g) in partials.iter().enumerate() {
            x.rotate(k, -(config.learning_rate * s_a * *g));
        }
        iteration += 1;
        if iteration - run.window_start >= config.stuck_window {
            x.rotate_all(config.kick);
            run.pending_kick = true;
            run.window_start = iteration;
        }
    };

    let final_family = run.source.family().copied();
    Ok(TrainingTrace {
        records: run.records,
        final_angles,
        final_family,
        stop,
    })
}

/// Junk probabilities of `test_count` fresh family members under the mesh
/// at `x_final`.
pub fn evaluate_generalization<T: Real>(
    layout: &MeshLayout,
    x_final: &ParameterVector<T>,
    family: &PreparationFamily<T>,
    test_count: usize,
    seed: u64,
    backend: Backend,
) -> Result<Vec<T>> {
    if test_count == 0 {
        return Err(QaeError::InvalidConfig("test_count must be at least 1".into()));
    }
    let mut meter = CostMeter::new(backend, seed);
    sample_prep_settings(test_count, seed)?
        .iter()
        .map(|p| {
            let s = prepare_state(family, p)?;
            meter.measure_state(layout, x_final, &s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{build_mesh, PreparationFamily};
    use crate::qudit::PureState;

    fn physical_source(family_seed: u64, settings_seed: u64, m: usize) -> TrainingSource<f64> {
        TrainingSource::Prepared {
            family: PreparationFamily::physical_from_seed(family_seed),
            settings: sample_prep_settings(m, settings_seed).unwrap(),
        }
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("exact".parse::<Backend>().unwrap(), Backend::Exact);
        assert_eq!(
            "sampled:10000".parse::<Backend>().unwrap(),
            Backend::Sampled { shots: 10_000 }
        );
        assert_eq!(
            "poisson:500".parse::<Backend>().unwrap(),
            Backend::Poisson { mean_counts: 500.0 }
        );
        for bad in ["sampled:0", "sampled:x", "foo", "exact:1", "poisson:-1"] {
            assert!(bad.parse::<Backend>().is_err(), "{bad}");
        }
        for b in [Backend::Exact, Backend::Sampled { shots: 7 }] {
            assert_eq!(b.to_string().parse::<Backend>().unwrap(), b);
        }
    }

    #[test]
    fn config_validation() {
        let ok = TrainerConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        for broken in [
            TrainerConfig {
                s_fine: 0.0,
                ..ok.clone()
            },
            TrainerConfig {
                fine_threshold: 1.0,
                ..ok.clone()
            },
            TrainerConfig {
                max_evals: 0,
                ..ok.clone()
            },
            TrainerConfig {
                kick: -1.0,
                ..ok.clone()
            },
        ] {
            assert!(broken.validate().is_err());
        }
        assert!(DriftSchedule::every(0, 4.0_f64).validate().is_err());
    }

    #[test]
    fn exact_meter_delegates_to_cost() {
        let layout = build_mesh(3, 2).unwrap();
        let set = physical_source(1, 2, 2).build().unwrap();
        let mut meter = CostMeter::new(Backend::Exact, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=20 {
            let x = ParameterVector::random(4, &mut rng);
            let direct = cost(&mesh_unitary(&layout, &x).unwrap(), &set).unwrap();
            assert_eq!(measure_cost(&mut meter, &layout, &x, &set).unwrap(), direct);
            assert_eq!(meter.evals(), k);
        }
    }

    #[test]
    fn sampled_zero_probability_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let backend = Backend::Sampled { shots: 1000 };
            assert_eq!(estimate_probability(&backend, 0.0_f64, &mut rng), 0.0);
            let backend = Backend::Poisson { mean_counts: 1000.0 };
            assert_eq!(estimate_probability(&backend, 0.0_f64, &mut rng), 0.0);
        }
    }

    #[test]
    fn poisson_estimator_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let backend = Backend::Poisson { mean_counts: 10_000.0 };
        let n = 2000;
        let mean: f64 = (0..n)
            .map(|_| estimate_probability(&backend, 0.25_f64, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 1e-3, "{mean}");
    }

    // mode-0 state, first slot axis-aligned: the second slot never sees the photon
    #[test]
    fn flat_landscape_gives_zero_gradient() {
        let layout = build_mesh(3, 2).unwrap();
        let set = TrainingSet::new(vec![PureState::basis(3, 0).unwrap()], 2).unwrap();
        let mut meter = CostMeter::new(Backend::Exact, 0);
        let mut x = ParameterVector::new(vec![0.0, 0.0, 37.0, 81.0]);
        let g = probe_gradient(&mut meter, &layout, &mut x, &set, 12.0, AngleUnit::Degree).unwrap();
        assert_eq!(meter.evals(), 5);
        assert_eq!(g.partials[2], 0.0);
        assert_eq!(g.partials[3], 0.0);
        assert_eq!(g.base_cost, 0.0);
    }

    #[test]
    fn probe_restores_angles() {
        let layout = build_mesh(3, 2).unwrap();
        let set = physical_source(3, 4, 2).build().unwrap();
        let mut meter = CostMeter::new(Backend::Exact, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut x = ParameterVector::random(4, &mut rng);
            let before = x.clone();
            probe_gradient(&mut meter, &layout, &mut x, &set, 12.0, AngleUnit::Radian).unwrap();
            assert_eq!(x, before);
        }
    }

    #[test]
    fn probe_matches_hand_secants() {
        // oracle: evaluate the cost at the five settings directly
        let layout = build_mesh(3, 2).unwrap();
        let set = physical_source(5, 6, 2).build().unwrap();
        let c = |x: &ParameterVector<f64>| cost(&mesh_unitary(&layout, x).unwrap(), &set).unwrap();
        let mut x = ParameterVector::new(vec![10.0, 100.0, 200.0, 300.0]);
        let base = c(&x);
        let expected: Vec<f64> = (0..4)
            .map(|k| {
                let mut p = x.clone();
                p.rotate(k, 5.0);
                (c(&p) - base) / 5.0
            })
            .collect();
        let mut meter = CostMeter::new(Backend::Exact, 0);
        let g = probe_gradient(&mut meter, &layout, &mut x, &set, 5.0, AngleUnit::Degree).unwrap();
        for (a, b) in g.partials.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12);
        }
        let mut meter = CostMeter::new(Backend::Exact, 0);
        let g = probe_gradient(&mut meter, &layout, &mut x, &set, 5.0, AngleUnit::Radian).unwrap();
        for (a, b) in g.partials.iter().zip(&expected) {
            assert!((a - b * 180.0 / std::f64::consts::PI).abs() <= 1e-10);
        }
    }

    #[test]
    fn trace_accounting() {
        let layout = build_mesh(3, 2).unwrap();
        let config = TrainerConfig {
            seed: 3,
            max_evals: 123,
            ..TrainerConfig::default()
        };
        let trace = train(
            &layout,
            physical_source(1, 1, 2),
            &config,
            &DriftSchedule::disabled(),
            Backend::Exact,
        )
        .unwrap();
        assert_eq!(trace.evals(), 123);
        assert_eq!(trace.stop, StopReason::MaxEvals);
        for (i, r) in trace.records.iter().enumerate() {
            assert_eq!(r.eval_index, i + 1);
            assert_eq!(r.iteration, i / 5);
            let expect_phase = if i % 5 == 0 {
                Phase::Move
            } else {
                Phase::Probe(i % 5 - 1)
            };
            assert_eq!(r.phase, expect_phase);
            assert!((0.0..=1.0).contains(&r.cost));
        }
    }

    #[test]
    fn early_stop_terminates_at_first_hit() {
        let layout = build_mesh(3, 2).unwrap();
        for seed in 0..10 {
            let config = TrainerConfig {
                seed,
                early_stop: Some(0.02),
                max_evals: 400,
                ..TrainerConfig::default()
            };
            let trace = train(
                &layout,
                physical_source(2, 8, 2),
                &config,
                &DriftSchedule::disabled(),
                Backend::Exact,
            )
            .unwrap();
            let first_hit = trace.records.iter().position(|r| r.cost <= 0.02);
            match first_hit {
                Some(i) => {
                    assert_eq!(trace.records.len(), i + 1);
                    assert_eq!(trace.stop, StopReason::EarlyStop);
                }
                None => assert_eq!(trace.stop, StopReason::MaxEvals),
            }
        }
    }

    #[test]
    fn deterministic_traces() {
        let layout = build_mesh(3, 2).unwrap();
        let config = TrainerConfig {
            seed: 17,
            ..TrainerConfig::default()
        };
        for backend in [Backend::Exact, Backend::Sampled { shots: 1000 }] {
            let drift = DriftSchedule::every(5, 4.0);
            let a = train(&layout, physical_source(1, 2, 2), &config, &drift, backend).unwrap();
            let b = train(&layout, physical_source(1, 2, 2), &config, &drift, backend).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn drift_event_count() {
        let layout = build_mesh(3, 2).unwrap();
        let config = TrainerConfig {
            seed: 5,
            max_evals: 203,
            ..TrainerConfig::default()
        };
        let drift = DriftSchedule::every(5, -4.0);
        let trace = train(&layout, physical_source(1, 2, 2), &config, &drift, Backend::Exact).unwrap();
        assert_eq!(trace.count_events(|e| e.drift), 203 / 5);
        let start = PreparationFamily::<f64>::physical_from_seed(1);
        let end = trace.final_family.unwrap();
        let expected = crate::scalar::wrap_degrees(start.scrambler_angle - 4.0 * 40.0);
        assert!((end.scrambler_angle - expected).abs() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let layout = build_mesh(3, 2).unwrap();
        let config = TrainerConfig {
            seed: 1,
            max_evals: 12,
            ..TrainerConfig::default()
        };
        let trace = train(
            &layout,
            physical_source(1, 2, 2),
            &config,
            &DriftSchedule::every(5, 4.0),
            Backend::Exact,
        )
        .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eval_index,iteration,phase,cost,x1,x2,x3,x4,events");
        assert_eq!(lines.len(), 13);
        let row5: Vec<&str> = lines[5].split(',').collect();
        assert_eq!(row5[0], "5");
        assert_eq!(row5[2], "probe:4");
        assert!(row5[8].contains("drift"));
        // angles round-trip exactly
        assert_eq!(row5[4].parse::<f64>().unwrap(), trace.records[4].angles.get(0));
        assert_eq!(row5[3].parse::<f64>().unwrap(), trace.records[4].cost);
    }
}
