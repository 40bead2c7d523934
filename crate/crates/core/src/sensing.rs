//! Gaussian sensing operators, simulated measurements and proxy observations.
//!
//! Random draws use `ChaCha8Rng::seed_from_u64` and the ziggurat sampler of
//! `rand_distr::StandardNormal`. Results are reproducible for a given seed
//! within this implementation; nothing is promised across implementations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Multiplier applied to the power-iteration eigenvalue before it is used as
/// a step-size bound. Overestimating `L` keeps the gradient step stable.
pub const LIPSCHITZ_SAFETY_FACTOR: f64 = 1.001;
pub const LIPSCHITZ_TOL: f64 = 1e-6;
pub const LIPSCHITZ_MAX_ITERS: usize = 1000;

const POWER_ITERATION_SEED: u64 = 0x5eed_0f_1a_b0_0c;
const OPERATOR_MAGIC: &[u8; 8] = b"LSETOPv1";

/// Minimal linear-operator surface used by the solver.
pub trait LinearOperator {
    /// Number of measurements `k`.
    fn rows(&self) -> usize;
    /// Ambient dimension `p`.
    fn cols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T y`
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);

    /// Upper bound on `lambda_max(A^T A)`, used for the step `1 / L`.
    fn lipschitz_bound(&self) -> f64 {
        estimate_lipschitz(self, LIPSCHITZ_TOL, LIPSCHITZ_MAX_ITERS).bound
    }
}

/// Outcome of the power iteration on `A^T A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Final Rayleigh quotient, an estimate of `lambda_max(A^T A)`.
    pub eigenvalue: f64,
    /// `eigenvalue * LIPSCHITZ_SAFETY_FACTOR`.
    pub bound: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before the quotient settled.
    pub converged: bool,
}

/// Power iteration on `A^T A` from a fixed pseudo-random start vector.
///
/// Stops when the relative change between successive Rayleigh quotients
/// drops below `tol`. On exhaustion the last quotient is returned with
/// `converged == false`.
pub fn estimate_lipschitz<O: LinearOperator + ?Sized>(op: &O, tol: f64, max_iters: usize) -> LipschitzEstimate {
    let (k, p) = (op.rows(), op.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);

    let mut av = vec![0.0; k];
    let mut w = vec![0.0; p];
    let mut quotient = 0.0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=max_iters.max(1) {
        iterations = iter;
        op.apply(&v, &mut av);
        op.apply_adjoint(&av, &mut w);
        let next = dot(&av, &av);
        let norm_w = norm(&w);
        if norm_w == 0.0 {
            // v lies in the null space; for a zero operator that is exact.
            quotient = next;
            converged = true;
            break;
        }
        let change = (next - quotient).abs() / next.abs().max(f64::MIN_POSITIVE);
        quotient = next;
        if iter > 1 && change < tol {
            converged = true;
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm_w;
        }
    }

    LipschitzEstimate {
        eigenvalue: quotient,
        bound: quotient * LIPSCHITZ_SAFETY_FACTOR,
        iterations,
        converged,
    }
}

/// Dense row-major `k x p` measurement matrix.
#[derive(Debug)]
pub struct SensingOperator {
    k: usize,
    p: usize,
    seed: u64,
    entries: Vec<f64>,
    lipschitz: OnceLock<LipschitzEstimate>,
}

impl Clone for SensingOperator {
    fn clone(&self) -> Self {
        let lipschitz = OnceLock::new();
        if let Some(est) = self.lipschitz.get() {
            let _ = lipschitz.set(*est);
        }
        Self {
            k: self.k,
            p: self.p,
            seed: self.seed,
            entries: self.entries.clone(),
            lipschitz,
        }
    }
}

impl PartialEq for SensingOperator {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.p == other.p && self.seed == other.seed && self.entries == other.entries
    }
}

impl SensingOperator {
    /// Wrap an explicit row-major matrix. `seed` is recorded for provenance only.
    pub fn from_dense(k: usize, p: usize, entries: Vec<f64>, seed: u64) -> Result<Self> {
        if k == 0 || p == 0 {
            return Err(Error::invalid(format!("operator dimensions must be positive, got {k}x{p}")));
        }
        check_len(k * p, entries.len(), "operator entry count")?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        Ok(Self {
            k,
            p,
            seed,
            entries,
            lipschitz: OnceLock::new(),
        })
    }

    pub fn identity(p: usize) -> Result<Self> {
        Self::scaled_identity(p, 1.0)
    }

    pub fn scaled_identity(p: usize, scale: f64) -> Result<Self> {
        let mut entries = vec![0.0; p * p];
        for i in 0..p {
            entries[i * p + i] = scale;
        }
        Self::from_dense(p, p, entries, 0)
    }

    /// `k x p` matrix with i.i.d. `N(0, 1/k)` entries.
    pub fn gaussian(k: usize, p: usize, seed: u64) -> Result<Self> {
        if k == 0 || p == 0 {
            return Err(Error::invalid(format!("operator dimensions must be positive, got {k}x{p}")));
        }
        let scale = 1.0 / (k as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..k * p)
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        Self::from_dense(k, p, entries, seed)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    /// Power-iteration estimate of `lambda_max(A^T A)`.
    ///
    /// The first estimate computed is cached; later calls return it regardless
    /// of the `tol`/`max_iters` they pass.
    pub fn estimate_lipschitz(&self, tol: f64, max_iters: usize) -> Result<LipschitzEstimate> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("power-iteration tolerance must be positive, got {tol}")));
        }
        if max_iters == 0 {
            return Err(Error::invalid("power iteration needs at least one iteration"));
        }
        Ok(*self.lipschitz.get_or_init(|| estimate_lipschitz(self, tol, max_iters)))
    }

    /// Cached estimate with the default tolerance and iteration cap.
    pub fn lipschitz(&self) -> LipschitzEstimate {
        *self
            .lipschitz
            .get_or_init(|| estimate_lipschitz(self, LIPSCHITZ_TOL, LIPSCHITZ_MAX_ITERS))
    }

    pub fn cached_lipschitz(&self) -> Option<LipschitzEstimate> {
        self.lipschitz.get().copied()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.p, x.len(), "operator input")?;
        let mut out = vec![0.0; self.k];
        self.apply(x, &mut out);
        Ok(out)
    }

    pub fn adjoint_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.k, y.len(), "operator adjoint input")?;
        let mut out = vec![0.0; self.p];
        self.apply_adjoint(y, &mut out);
        Ok(out)
    }

    /// Binary dump: 8-byte magic, then `k`, `p`, `seed` as little-endian
    /// `u64`, then the row-major entries as little-endian `f64`.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(OPERATOR_MAGIC)?;
        w.write_all(&(self.k as u64).to_le_bytes())?;
        w.write_all(&(self.p as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.entries {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 32];
        read_exact_at(&mut r, &mut header, 0)?;
        if &header[..8] != OPERATOR_MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: "bad operator magic".into(),
            });
        }
        let field = |i: usize| u64::from_le_bytes(header[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let (k, p, seed) = (field(0) as usize, field(1) as usize, field(2));
        let count = k.checked_mul(p).ok_or_else(|| Error::Parse {
            offset: 8,
            message: format!("operator size {k}x{p} overflows"),
        })?;
        let mut payload = vec![0u8; count * 8];
        read_exact_at(&mut r, &mut payload, 32)?;
        let entries = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_dense(k, p, entries, seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: usize) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Parse {
        offset,
        message: format!("truncated operator file: {e}"),
    })
}

impl LinearOperator for SensingOperator {
    fn rows(&self) -> usize {
        self.k
    }

    fn cols(&self) -> usize {
        self.p
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        self.lipschitz().bound
    }
}

/// Observations `y = A x + n` with `n ~ N(0, sigma^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub y: Vec<f64>,
    pub sigma: f64,
    /// Seed of the noise draw (independent of the operator seed).
    pub seed: u64,
}

pub fn measure<O: LinearOperator + ?Sized>(op: &O, x: &[f64], sigma: f64, seed: u64) -> Result<MeasurementSet> {
    check_len(op.cols(), x.len(), "signal length")?;
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise level must be finite and nonnegative, got {sigma}")));
    }
    let mut y = vec![0.0; op.rows()];
    op.apply(x, &mut y);
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for yi in y.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *yi += sigma * n;
        }
    }
    Ok(MeasurementSet { y, sigma, seed })
}

/// Proxy observations `z = A^T y`.
pub fn proxy_observations<O: LinearOperator + ?Sized>(op: &O, meas: &MeasurementSet) -> Result<Vec<f64>> {
    check_len(op.rows(), meas.y.len(), "measurement length")?;
    let mut z = vec![0.0; op.cols()];
    op.apply_adjoint(&meas.y, &mut z);
    Ok(z)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
