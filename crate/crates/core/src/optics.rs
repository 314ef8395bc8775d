//! Wave plates, the trainable wave-plate mesh, and the state-preparation
//! stage that produces compressible qutrit families.
//!
//! Angles are in degrees throughout; conversion to radians happens only at
//! the trig calls. Beam displacers are ideal mode relabelings and appear
//! only implicitly through the mode pairs each gate slot acts on.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QaeError, Result};
use crate::qudit::{haar_random_isometry, haar_random_state, Matrix, PureState, TwoModeGate, UnitaryMatrix};
use crate::scalar::{wrap_degrees, Real};

/// Retardance in radians of the default scrambler: a half-wave plate cut
/// for 810 nm used at 404 nm.
pub const DEFAULT_SCRAMBLER_RETARDANCE: f64 = 2.0 * std::f64::consts::PI * (404.0 / 810.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WavePlateKind<T> {
    Half,
    Quarter,
    /// General linear retarder with the given retardance in radians.
    Retarder(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlate<T> {
    pub kind: WavePlateKind<T>,
    /// Optic-axis orientation in degrees.
    pub angle: T,
}

impl<T: Real> WavePlate<T> {
    pub fn half(angle: T) -> Self {
        Self {
            kind: WavePlateKind::Half,
            angle,
        }
    }

    pub fn quarter(angle: T) -> Self {
        Self {
            kind: WavePlateKind::Quarter,
            angle,
        }
    }

    pub fn retarder(retardance: T, angle: T) -> Self {
        Self {
            kind: WavePlateKind::Retarder(retardance),
            angle,
        }
    }

    /// The 2x2 Jones block `R(theta) diag(1, e^{i delta}) R(theta)^T`.
    ///
    /// Half and quarter plates use the closed forms directly so that axis-aligned
    /// settings come out exact.
    pub fn block(&self) -> [[Complex<T>; 2]; 2] {
        let theta = self.angle.to_radians();
        let (s, c) = theta.sin_cos();
        let re = |x: T| Complex::new(x, T::zero());
        match self.kind {
            WavePlateKind::Half => {
                let (s2, c2) = (theta + theta).sin_cos();
                [[re(c2), re(s2)], [re(s2), re(-c2)]]
            }
            WavePlateKind::Quarter => {
                let i = Complex::new(T::zero(), T::one());
                let sc = s * c;
                let off = (re(T::one()) - i) * sc;
                [[re(c * c) + i * (s * s), off], [off, re(s * s) + i * (c * c)]]
            }
            WavePlateKind::Retarder(delta) => {
                let phase = Complex::from_polar(T::one(), delta);
                let one = re(T::one());
                let off = (one - phase) * (s * c);
                [
                    [one * (c * c) + phase * (s * s), off],
                    [off, one * (s * s) + phase * (c * c)],
                ]
            }
        }
    }
}

/// Jones matrix of a wave plate as a 2x2 unitary.
pub fn jones_matrix<T: Real>(w: &WavePlate<T>) -> UnitaryMatrix<T> {
    block_to_unitary(&w.block())
}

fn block_to_unitary<T: Real>(b: &[[Complex<T>; 2]; 2]) -> UnitaryMatrix<T> {
    let m = Matrix::from_rows(vec![b[0].to_vec(), b[1].to_vec()]).expect("2x2 rows");
    UnitaryMatrix::from_matrix_unchecked(m).expect("square")
}

fn mul2<T: Real>(a: &[[Complex<T>; 2]; 2], b: &[[Complex<T>; 2]; 2]) -> [[Complex<T>; 2]; 2] {
    let mut out = [[Complex::new(T::zero(), T::zero()); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// One trainable two-mode unitary: a half-wave plate followed by a
/// quarter-wave plate on adjacent modes `(lo, lo + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSlot {
    pub lo: usize,
    pub hi: usize,
    pub hwp_param: usize,
    pub qwp_param: usize,
}

/// Ordered gate slots of the reduced triangular mesh for compressing
/// `dim`-mode qudits into `keep` modes.
///
/// The mesh is the triangle of adjacent-mode gates with one chain per junk
/// mode `k` (gates `(0,1), (1,2), ..., (k-1,k)`), chains ordered from mode
/// `dim - 1` down to `keep`. Slots later in the list multiply on the left.
/// Chains for kept modes and all single-mode phases are omitted: they only
/// act after the junk rows are fixed and cannot change junk occupation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshLayout {
    dim: usize,
    keep: usize,
    slots: Vec<GateSlot>,
}

impl MeshLayout {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn slots(&self) -> &[GateSlot] {
        &self.slots
    }

    pub fn param_count(&self) -> usize {
        2 * self.slots.len()
    }
}

/// Builds the reduced mesh for `d -> n` compression.
pub fn build_mesh(d: usize, n: usize) -> Result<MeshLayout> {
    if n < 1 || n >= d {
        return Err(QaeError::InvalidDimensions { d, n });
    }
    let mut slots = Vec::with_capacity(d * (d - 1) / 2 - n * (n - 1) / 2);
    for junk in (n..d).rev() {
        for lo in 0..junk {
            let p = 2 * slots.len();
            slots.push(GateSlot {
                lo,
                hi: lo + 1,
                hwp_param: p,
                qwp_param: p + 1,
            });
        }
    }
    Ok(MeshLayout { dim: d, keep: n, slots })
}

/// Wave-plate angles in degrees, always stored wrapped into `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector<T> {
    angles: Vec<T>,
}

impl<T: Real> ParameterVector<T> {
    pub fn new(angles: Vec<T>) -> Self {
        Self {
            angles: angles.into_iter().map(wrap_degrees).collect(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            angles: vec![T::zero(); len],
        }
    }

    /// Independent uniform angles on `[0, 360)`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self::new((0..len).map(|_| T::lit(rng.random_range(0.0..360.0))).collect())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn get(&self, k: usize) -> T {
        self.angles[k]
    }

    pub fn set(&mut self, k: usize, deg: T) {
        self.angles[k] = wrap_degrees(deg);
    }

    pub fn rotate(&mut self, k: usize, delta: T) {
        self.set(k, self.angles[k] + delta);
    }

    pub fn rotate_all(&mut self, delta: T) {
        for a in &mut self.angles {
            *a = wrap_degrees(*a + delta);
        }
    }
}

/// The 2x2 block of a gate slot at the given parameters: `Q(q) * H(h)`.
pub fn slot_block<T: Real>(slot: &GateSlot, x: &ParameterVector<T>) -> [[Complex<T>; 2]; 2] {
    let h = WavePlate::half(x.get(slot.hwp_param)).block();
    let q = WavePlate::quarter(x.get(slot.qwp_param)).block();
    mul2(&q, &h)
}

/// The mesh's `dim x dim` unitary at parameters `x`.
pub fn mesh_unitary<T: Real>(layout: &MeshLayout, x: &ParameterVector<T>) -> Result<UnitaryMatrix<T>> {
    if x.len() != layout.param_count() {
        return Err(QaeError::ParameterCount {
            expected: layout.param_count(),
            found: x.len(),
        });
    }
    let mut u = UnitaryMatrix::identity(layout.dim);
    for slot in &layout.slots {
        let gate = TwoModeGate::new(slot.lo, slot.hi, slot_block(slot, x))?;
        u.apply_gate_left(&gate);
    }
    Ok(u)
}

/// How the family's underlying `n`-dimensional subspace is chosen before
/// the scrambler acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generation {
    /// The first `n` modes, as produced by a polarization qubit and a beam
    /// displacer.
    Physical,
    /// A Haar-random `d x n` isometry drawn from `seed`.
    Haar { seed: u64 },
}

/// A compressible family: states `S * V * c` where `V` spans the base
/// subspace, `c` is the input qunit, and `S` is a fixed birefringent
/// scrambler on modes `(n - 1, n)`.
///
/// For `(d, n) = (3, 2)` the scrambler acts on modes 1 and 2: the lower
/// spatial path's two polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationFamily<T> {
    pub dim: usize,
    pub keep: usize,
    /// Scrambler optic-axis angle in degrees, kept in `[0, 360)`.
    pub scrambler_angle: T,
    /// Scrambler retardance in radians.
    pub scrambler_retardance: T,
    pub generation: Generation,
}

impl<T: Real> PreparationFamily<T> {
    /// The qutrit family of the polarization/path preparation stage.
    pub fn physical(scrambler_angle: T, scrambler_retardance: T) -> Self {
        Self {
            dim: 3,
            keep: 2,
            scrambler_angle: wrap_degrees(scrambler_angle),
            scrambler_retardance,
            generation: Generation::Physical,
        }
    }

    /// Physical qutrit family with the default scrambler retardance and a
    /// scrambler angle drawn uniformly on `[0, 180)` from `seed`.
    pub fn physical_from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = T::lit(rng.random_range(0.0..180.0));
        Self::physical(angle, T::lit(DEFAULT_SCRAMBLER_RETARDANCE))
    }

    pub fn haar(dim: usize, keep: usize, seed: u64, scrambler_angle: T, scrambler_retardance: T) -> Result<Self> {
        if keep < 1 || keep >= dim {
            return Err(QaeError::InvalidDimensions { d: dim, n: keep });
        }
        Ok(Self {
            dim,
            keep,
            scrambler_angle: wrap_degrees(scrambler_angle),
            scrambler_retardance,
            generation: Generation::Haar { seed },
        })
    }

    fn scrambler(&self) -> TwoModeGate<T> {
        let block = WavePlate::retarder(self.scrambler_retardance, self.scrambler_angle).block();
        TwoModeGate::new(self.keep - 1, self.keep, block).expect("keep - 1 < keep")
    }

    /// The `d x n` isometry whose column span is the family's subspace.
    pub fn isometry(&self) -> Result<Matrix<T>> {
        let mut base = match self.generation {
            Generation::Physical => {
                let mut m = Matrix::zeros(self.dim, self.keep);
                for k in 0..self.keep {
                    m[(k, k)] = Complex::new(T::one(), T::zero());
                }
                m
            }
            Generation::Haar { seed } => haar_random_isometry(self.dim, self.keep, seed)?,
        };
        let s = self.scrambler();
        let (lo, hi) = s.modes();
        base.apply_block_rows(lo, hi, s.block());
        Ok(base)
    }

    /// The family with its scrambler rotated by `delta` degrees.
    pub fn drifted(&self, delta: T) -> Self {
        Self {
            scrambler_angle: wrap_degrees(self.scrambler_angle + delta),
            ..*self
        }
    }
}

/// Free-function form of [`PreparationFamily::drifted`].
pub fn drift_family<T: Real>(f: &PreparationFamily<T>, delta: T) -> PreparationFamily<T> {
    f.drifted(delta)
}

/// Settings of the motorized preparation half- and quarter-wave plates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepSetting<T> {
    pub h: T,
    pub q: T,
}

impl<T: Real> PrepSetting<T> {
    pub fn new(h: T, q: T) -> Self {
        Self {
            h: wrap_degrees(h),
            q: wrap_degrees(q),
        }
    }

    /// The input qunit for a family keeping `keep` modes.
    ///
    /// For a qubit this is `Q(q) H(h) (1, 0)^T`. Wider qunits have no
    /// wave-plate analogue; they are Haar-random vectors seeded by the bit
    /// patterns of both angles.
    pub fn qunit(&self, keep: usize) -> Vec<Complex<T>> {
        if keep == 2 {
            let b = mul2(&WavePlate::quarter(self.q).block(), &WavePlate::half(self.h).block());
            return vec![b[0][0], b[1][0]];
        }
        let hb = self.h.as_f64().to_bits();
        let qb = self.q.as_f64().to_bits();
        let mut rng = ChaCha8Rng::seed_from_u64(hb ^ qb.rotate_left(32));
        haar_random_state::<T, _>(keep.max(2), &mut rng).amps()[..keep].to_vec()
    }
}

/// Prepares the family member selected by the preparation wave plates.
pub fn prepare_state<T: Real>(f: &PreparationFamily<T>, p: &PrepSetting<T>) -> Result<PureState<T>> {
    let v = f.isometry()?;
    let amps = v.mul_vec(&p.qunit(f.keep))?;
    PureState::normalize(amps)
}

/// `m` preparation settings, both angles uniform on `[0, 180)`.
pub fn sample_prep_settings<T: Real>(m: usize, seed: u64) -> Result<Vec<PrepSetting<T>>> {
    if m == 0 {
        return Err(QaeError::InvalidConfig("need at least one preparation setting".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| {
            let h = rng.random_range(0.0..180.0);
            let q = rng.random_range(0.0..180.0);
            PrepSetting::new(T::lit(h), T::lit(q))
        })
        .collect())
}
