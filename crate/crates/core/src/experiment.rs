//! Random test systems and the multi-seed comparison harness.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lss::{Lss, ModeMatrices};
use crate::moment::check_compatible;
use crate::scalar::Real;
use crate::simulate::{bfr, random_switching, simulate, white_noise, SampledSignal, SwitchingSequence};
use crate::word::Mode;

/// Shape and spectrum of a random system.
///
/// Each `A_q = radius * G / rho(G) + shift * I` with `G` Gaussian, so its
/// eigenvalues lie on the disc of the given radius centred at `shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomLssSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub modes: usize,
    pub radius: f64,
    pub shift: f64,
    pub zero_x0: bool,
}

impl Default for RandomLssSpec {
    fn default() -> Self {
        RandomLssSpec { n: 4, m: 1, p: 1, modes: 2, radius: 1.0, shift: 0.0, zero_x0: false }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn spectral_radius(g: &DMatrix<f64>) -> f64 {
    g.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deterministic random system for a given seed.
pub fn random_lss(spec: &RandomLssSpec, seed: u64) -> Lss<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n;
    let modes = (0..spec.modes)
        .map(|_| {
            let g = gaussian(&mut rng, n, n) / (n.max(1) as f64).sqrt();
            let rho = if n == 0 { 0.0 } else { spectral_radius(&g) };
            let scaled = if rho > 0.0 { g * (spec.radius / rho) } else { g };
            let a = scaled + DMatrix::identity(n, n) * spec.shift;
            let b = gaussian(&mut rng, n, spec.m);
            let c = gaussian(&mut rng, spec.p, n);
            ModeMatrices { a, b, c }
        })
        .collect();
    let x0 = if spec.zero_x0 {
        DVector::zeros(n)
    } else {
        DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
    };
    Lss { p: spec.p, m: spec.m, n, modes, x0 }
}

/// Settings of a multi-seed comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSpec {
    pub horizon: f64,
    pub dt: f64,
    pub min_dwell: Vec<f64>,
    pub first_mode: Option<Mode>,
    pub seeds: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult<T: Real> {
    pub seed: u64,
    pub switching: SwitchingSequence<T>,
    pub bfr: T,
}

#[derive(Debug, Clone)]
pub struct ComparisonSummary<T: Real> {
    pub runs: Vec<RunResult<T>>,
    pub mean: T,
    pub best: T,
    pub worst: T,
}

/// Seed used for the input of run `seed`, decorrelated from its switching.
pub fn input_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Switching signal, input and both outputs of one run.
pub fn comparison_run<T: Real>(
    sys: &Lss<T>,
    red: &Lss<T>,
    spec: &ComparisonSpec,
    seed: u64,
) -> Result<(SwitchingSequence<T>, SampledSignal<T>, SampledSignal<T>)> {
    let min_dwell: Vec<T> = spec.min_dwell.iter().map(|&d| T::lit(d)).collect();
    let mu = random_switching(sys.mode_count(), T::lit(spec.horizon), &min_dwell, seed, spec.first_mode)?;
    let steps = (spec.horizon / spec.dt).round() as usize;
    let u = white_noise(sys.m, steps, T::lit(spec.dt), input_seed(seed));
    let y = simulate(sys, &mu, &u)?;
    let ybar = simulate(red, &mu, &u)?;
    Ok((mu, y, ybar))
}

/// Simulates `sys` and `red` on `spec.seeds` random switching signals with
/// white-noise inputs and reports the BFR of each run.
pub fn compare<T: Real>(sys: &Lss<T>, red: &Lss<T>, spec: &ComparisonSpec) -> Result<ComparisonSummary<T>> {
    sys.ensure_valid()?;
    red.ensure_valid()?;
    check_compatible(sys, red)?;
    if spec.seeds == 0 {
        return Err(Error::InvalidInput("at least one seed is required".into()));
    }
    let mut runs = Vec::with_capacity(spec.seeds);
    for k in 0..spec.seeds as u64 {
        let seed = spec.base_seed.wrapping_add(k);
        let (switching, y, ybar) = comparison_run(sys, red, spec, seed)?;
        runs.push(RunResult { seed, switching, bfr: bfr(&y, &ybar)? });
    }
    let values: Vec<T> = runs.iter().map(|r| r.bfr).collect();
    let mean = values.iter().fold(T::zero(), |a, &b| a + b) / T::lit(values.len() as f64);
    let best = values.iter().copied().fold(values[0], |a, b| if b > a { b } else { a });
    let worst = values.iter().copied().fold(values[0], |a, b| if b < a { b } else { a });
    Ok(ComparisonSummary { runs, mean, best, worst })
}
