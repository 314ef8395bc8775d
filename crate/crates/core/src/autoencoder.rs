//! Junk-mode cost, post-selected encoding, and decoding through `U^dagger`.
//!
//! The trailing `d - n` output modes are the junk modes. Everything here is
//! exact; shot noise is added only by the trainer's measurement backend.

use num_complex::Complex;

use crate::error::{QaeError, Result};
use crate::qudit::{PureState, UnitaryMatrix};
use crate::scalar::Real;

/// Training states for a `d -> n` autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    states: Vec<PureState<T>>,
    keep: usize,
}

impl<T: Real> TrainingSet<T> {
    pub fn new(states: Vec<PureState<T>>, keep: usize) -> Result<Self> {
        let first = states.first().ok_or(QaeError::EmptyTrainingSet)?;
        let dim = first.dim();
        if keep < 1 || keep >= dim {
            return Err(QaeError::InvalidDimensions { d: dim, n: keep });
        }
        if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
            return Err(QaeError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { states, keep })
    }

    pub fn states(&self) -> &[PureState<T>] {
        &self.states
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Output of a successful post-selected encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState<T> {
    pub kept: PureState<T>,
    pub p_junk: T,
}

fn check_keep(dim: usize, keep: usize) -> Result<()> {
    if keep < 1 || keep >= dim {
        Err(QaeError::InvalidDimensions { d: dim, n: keep })
    } else {
        Ok(())
    }
}

/// Probability that the photon leaves `U` in one of the junk modes.
pub fn junk_probability<T: Real>(u: &UnitaryMatrix<T>, s: &PureState<T>, keep: usize) -> Result<T> {
    check_keep(u.dim(), keep)?;
    let out = u.apply(s)?;
    let p = out.amps()[keep..].iter().fold(T::zero(), |acc, a| acc + a.norm_sqr());
    Ok(p.min(T::one()))
}

/// Junk probability averaged over the training set.
pub fn cost<T: Real>(u: &UnitaryMatrix<T>, t: &TrainingSet<T>) -> Result<T> {
    let mut total = T::zero();
    for s in t.states() {
        total += junk_probability(u, s, t.keep())?;
    }
    Ok(total / T::lit(t.len() as f64))
}

/// Applies `U`, discards the junk modes, and renormalizes the kept part.
pub fn encode<T: Real>(u: &UnitaryMatrix<T>, s: &PureState<T>, keep: usize) -> Result<EncodedState<T>> {
    check_keep(u.dim(), keep)?;
    let out = u.apply(s)?;
    let p_junk = out.amps()[keep..]
        .iter()
        .fold(T::zero(), |acc, a| acc + a.norm_sqr())
        .min(T::one());
    if p_junk >= T::one() - T::unit_tol() {
        return Err(QaeError::CompressionImpossible {
            p_junk: p_junk.as_f64(),
        });
    }
    let scale = (T::one() - p_junk).sqrt();
    let kept = out.amps()[..keep].iter().map(|a| a / scale).collect();
    Ok(EncodedState {
        kept: PureState::from_normalized(kept),
        p_junk,
    })
}

/// Pads the kept amplitudes with vacuum junk modes and applies `U^dagger`.
pub fn decode<T: Real>(u: &UnitaryMatrix<T>, e: &EncodedState<T>) -> Result<PureState<T>> {
    let keep = e.kept.dim();
    if keep >= u.dim() {
        return Err(QaeError::DimensionMismatch {
            expected: u.dim() - 1,
            found: keep,
        });
    }
    let mut padded = e.kept.amps().to_vec();
    padded.resize(u.dim(), Complex::new(T::zero(), T::zero()));
    u.adjoint().apply(&PureState::from_normalized(padded))
}

/// Probability that the encoder emits a photon.
pub fn success_probability<T: Real>(e: &EncodedState<T>) -> T {
    T::one() - e.p_junk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{haar_random_state, haar_random_unitary, Matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    /// The control-run unitary as printed (three decimals).
    fn printed_u1() -> UnitaryMatrix<f64> {
        let m = Matrix::from_rows(vec![
            vec![c(-0.373, -0.037), c(-0.927, 0.015), c(0.0, 0.0)],
            vec![c(0.008, 0.213), c(-0.013, -0.085), c(-0.003, -0.973)],
            vec![c(-0.017, 0.902), c(-0.035, -0.363), c(-0.012, 0.230)],
        ])
        .unwrap();
        UnitaryMatrix::from_matrix_unchecked(m).unwrap()
    }

    fn e(k: usize) -> PureState<f64> {
        PureState::basis(3, k).unwrap()
    }

    #[test]
    fn junk_probability_examples() {
        let id = UnitaryMatrix::identity(3);
        assert_eq!(junk_probability(&id, &e(0), 2).unwrap(), 0.0);
        assert_eq!(junk_probability(&id, &e(2), 2).unwrap(), 1.0);
        let p = junk_probability(&printed_u1(), &e(2), 2).unwrap();
        assert!((p - (0.012_f64.powi(2) + 0.230_f64.powi(2))).abs() <= 1e-15);
        assert!((p - 0.0531).abs() < 1e-4);
    }

    #[test]
    fn printed_u1_third_column() {
        let out = printed_u1().apply(&e(2)).unwrap();
        let expect = [c(0.0, 0.0), c(-0.003, -0.973), c(-0.012, 0.230)];
        for (a, b) in out.amps().iter().zip(expect) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn junk_probability_dimension_errors() {
        let id = UnitaryMatrix::<f64>::identity(3);
        assert!(junk_probability(&id, &PureState::basis(2, 0).unwrap(), 1).is_err());
        assert!(junk_probability(&id, &e(0), 3).is_err());
    }

    #[test]
    fn cost_examples() {
        let id = UnitaryMatrix::identity(3);
        let t = TrainingSet::new(vec![e(2), e(0)], 2).unwrap();
        assert_eq!(cost(&id, &t).unwrap(), 0.5);
        let t = TrainingSet::new(vec![e(0), e(1)], 2).unwrap();
        assert_eq!(cost(&id, &t).unwrap(), 0.0);
        assert_eq!(
            TrainingSet::<f64>::new(vec![], 2).unwrap_err(),
            QaeError::EmptyTrainingSet
        );
    }

    #[test]
    fn cost_is_mean_of_junk_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = haar_random_unitary::<f64, _>(3, &mut rng);
            let states: Vec<_> = (0..3).map(|_| haar_random_state(3, &mut rng)).collect();
            // independent: |row-2 . s|^2 summed by hand
            let by_hand: f64 = states
                .iter()
                .map(|s| {
                    let amp = (0..3).fold(c(0., 0.), |acc, k| acc + u.entry(2, k) * s.amps()[k]);
                    amp.norm_sqr()
                })
                .sum::<f64>()
                / 3.0;
            let t = TrainingSet::new(states, 2).unwrap();
            assert!((cost(&u, &t).unwrap() - by_hand).abs() <= 1e-15);
        }
    }

    #[test]
    fn encode_renormalizes_kept_amplitudes() {
        // U = I so that U s = s = (a1, a2, b)
        let s = PureState::<f64>::normalize(vec![c(0.6, 0.1), c(0.2, -0.3), c(0.5, 0.4)]).unwrap();
        let enc = encode(&UnitaryMatrix::identity(3), &s, 2).unwrap();
        let b2 = s.amps()[2].norm_sqr();
        assert!((enc.p_junk - b2).abs() <= 1e-15);
        let scale = (1.0 - b2).sqrt();
        for k in 0..2 {
            assert!((enc.kept.amps()[k] - s.amps()[k] / scale).norm() <= 1e-15);
        }
        assert!((enc.kept.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn encode_perfect_compression_keeps_amplitudes() {
        let s = PureState::<f64>::normalize(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]).unwrap();
        let enc = encode(&UnitaryMatrix::identity(3), &s, 2).unwrap();
        assert_eq!(enc.p_junk, 0.0);
        assert_eq!(enc.kept.amps(), &s.amps()[..2]);
        assert_eq!(success_probability(&enc), 1.0);
    }

    #[test]
    fn encode_pure_junk_fails() {
        let err = encode(&UnitaryMatrix::identity(3), &e(2), 2).unwrap_err();
        assert!(matches!(err, QaeError::CompressionImpossible { .. }));
    }

    #[test]
    fn decode_pads_with_vacuum() {
        let enc = EncodedState {
            kept: PureState::basis(2, 0).unwrap(),
            p_junk: 0.0,
        };
        let out = decode(&UnitaryMatrix::<f64>::identity(3), &enc).unwrap();
        assert_eq!(out, e(0));
        let too_wide = EncodedState {
            kept: e(0),
            p_junk: 0.0,
        };
        assert!(decode(&UnitaryMatrix::<f64>::identity(3), &too_wide).is_err());
    }

    #[test]
    fn success_probability_values() {
        let half = EncodedState {
            kept: PureState::<f64>::basis(2, 0).unwrap(),
            p_junk: 0.5,
        };
        assert_eq!(success_probability(&half), 0.5);
        let enc = encode(&printed_u1(), &e(2), 2).unwrap();
        assert!((success_probability(&enc) - 0.946956).abs() < 1e-15);
        assert!((success_probability(&enc) - 0.9469).abs() < 1e-4);
    }

    #[test]
    fn perfect_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let u = haar_random_unitary::<f64, _>(3, &mut rng);
            // a state U^dagger (a, b, 0) is compressed perfectly by U
            let inner = PureState::<f64>::normalize(vec![c(0.3, 0.2), c(-0.1, 0.9), c(0.0, 0.0)]).unwrap();
            let s = u.adjoint().apply(&inner).unwrap();
            let enc = encode(&u, &s, 2).unwrap();
            assert!(enc.p_junk <= 1e-12);
            let back = decode(&u, &enc).unwrap();
            assert!((s.fidelity(&back).unwrap() - 1.0).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fidelity_equals_success_probability(seed in any::<u64>(), d in 3usize..6, keep_off in 1usize..3) {
            let keep = d - keep_off.min(d - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_random_unitary::<f64, _>(d, &mut rng);
            let s = haar_random_state(d, &mut rng);
            let enc = encode(&u, &s, keep).unwrap();
            let back = decode(&u, &enc).unwrap();
            let fid = s.fidelity(&back).unwrap();
            prop_assert!((fid - (1.0 - enc.p_junk)).abs() <= 1e-12);
        }

        #[test]
        fn cost_is_bounded_and_phase_invariant(seed in any::<u64>(), phases in proptest::collection::vec(0.0..6.3f64, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_random_unitary::<f64, _>(3, &mut rng);
            let states: Vec<_> = (0..2).map(|_| haar_random_state(3, &mut rng)).collect();
            let t = TrainingSet::new(states, 2).unwrap();
            let base = cost(&u, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));

            let mut m = u.matrix().clone();
            for r in 0..3 {
                let ph = Complex::from_polar(1.0, phases[r]);
                for col in 0..3 {
                    m[(r, col)] = ph * m[(r, col)];
                }
            }
            let rephased = UnitaryMatrix::from_matrix_unchecked(m).unwrap();
            let other = cost(&rephased, &t).unwrap();
            prop_assert!((base - other).abs() <= 1e-15);
        }

        #[test]
        fn zero_cost_extends_to_span(seed in any::<u64>(), a in (-1.0..1.0f64, -1.0..1.0f64), b in (-1.0..1.0f64, -1.0..1.0f64)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_random_unitary::<f64, _>(3, &mut rng);
            let udg = u.adjoint();
            // two independent states compressed perfectly by construction
            let s1 = udg.apply(&PureState::normalize(vec![c(1., 0.), c(0.3, -0.2), c(0., 0.)]).unwrap()).unwrap();
            let s2 = udg.apply(&PureState::normalize(vec![c(-0.4, 0.1), c(0., 1.), c(0., 0.)]).unwrap()).unwrap();
            let t = TrainingSet::new(vec![s1.clone(), s2.clone()], 2).unwrap();
            prop_assert!(cost(&u, &t).unwrap() <= 1e-12);
            let (ca, cb) = (c(a.0, a.1), c(b.0, b.1));
            let mix: Vec<C> = s1.amps().iter().zip(s2.amps()).map(|(x, y)| ca * x + cb * y).collect();
            if let Ok(m) = PureState::normalize(mix) {
                prop_assert!(junk_probability(&u, &m, 2).unwrap() <= 1e-10);
            }
        }
    }
}
