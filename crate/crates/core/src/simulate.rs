//! Sampled simulation of the switched system, random dwell-time switching
//! signals, white-noise inputs and the best-fit-rate metric.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::lss::Lss;
use crate::scalar::Real;
use crate::word::{Mode, Word};

/// Timed mode sequence `(q_1, t_1) .. (q_k, t_k)` with positive durations.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSequence<T: Real> {
    segments: Vec<(Mode, T)>,
}

impl<T: Real> SwitchingSequence<T> {
    pub fn new(segments: Vec<(Mode, T)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("switching sequence has no segments".into()));
        }
        for &(q, t) in &segments {
            if q == 0 {
                return Err(Error::InvalidInput("modes are numbered from 1".into()));
            }
            if !t.is_finite_value() || t <= T::zero() {
                return Err(Error::InvalidInput(format!("segment duration {t} must be positive")));
            }
        }
        Ok(SwitchingSequence { segments })
    }

    pub fn segments(&self) -> &[(Mode, T)] {
        &self.segments
    }

    pub fn total_duration(&self) -> T {
        self.segments.iter().fold(T::zero(), |acc, &(_, t)| acc + t)
    }

    /// The mode word `q_1 .. q_k`.
    pub fn mode_word(&self) -> Word {
        Word::new(self.segments.iter().map(|&(q, _)| q).collect())
    }

    /// Parses `q:t,q:t,..`.
    pub fn parse(s: &str) -> Result<Self> {
        let segments = s
            .split(',')
            .map(|part| {
                let (q, t) = part
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("segment {part:?} is not of the form q:t")))?;
                let q: Mode = q.trim().parse().map_err(|_| Error::Parse(format!("bad mode {q:?}")))?;
                let t: f64 = t.trim().parse().map_err(|_| Error::Parse(format!("bad duration {t:?}")))?;
                Ok((q, T::lit(t)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(segments)
    }
}

/// Uniformly sampled vector signal; sample `k` sits at time `k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal<T: Real> {
    pub dt: T,
    pub values: Vec<DVector<T>>,
}

impl<T: Real> SampledSignal<T> {
    pub fn new(dt: T, values: Vec<DVector<T>>) -> Result<Self> {
        if !dt.is_finite_value() || dt <= T::zero() {
            return Err(Error::InvalidInput(format!("sampling step {dt} must be positive")));
        }
        if let Some(first) = values.first() {
            let k = first.len();
            if values.iter().any(|v| v.len() != k) {
                return Err(Error::Dimension("samples have different lengths".into()));
            }
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite_value())) {
            return Err(Error::InvalidInput("signal contains non-finite samples".into()));
        }
        Ok(SampledSignal { dt, values })
    }

    pub fn zeros(dim: usize, len: usize, dt: T) -> Self {
        SampledSignal { dt, values: vec![DVector::zeros(dim); len] }
    }

    /// `len` copies of `value`.
    pub fn constant(value: DVector<T>, len: usize, dt: T) -> Self {
        SampledSignal { dt, values: vec![value; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Channel count (0 for an empty signal).
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn time(&self, k: usize) -> T {
        T::lit(k as f64) * self.dt
    }

    /// Per-channel time mean.
    pub fn channel_means(&self) -> DVector<T> {
        let mut sum = DVector::zeros(self.dim());
        for v in &self.values {
            sum += v;
        }
        if !self.values.is_empty() {
            sum /= T::lit(self.values.len() as f64);
        }
        sum
    }

    /// Largest absolute sample over all channels.
    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.amax()).fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Largest absolute sample-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        check_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).amax())
            .fold(T::zero(), |a, b| if b > a { b } else { a }))
    }

    /// CSV with header `t,v1..vk`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("v{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (k, v) in self.values.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", self.time(k).as_f64())];
            row.extend(v.iter().map(|x| format!("{:.16e}", x.as_f64())));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the [`write_csv`](Self::write_csv) layout; `dt` is taken from
    /// the first two time stamps, or `fallback_dt` for a single sample.
    pub fn read_csv<R: Read>(input: R, fallback_dt: Option<T>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let nums = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {f:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let (t, v) = nums.split_first().ok_or_else(|| Error::Parse("empty CSV row".into()))?;
            times.push(*t);
            values.push(DVector::from_iterator(v.len(), v.iter().map(|&x| T::lit(x))));
        }
        let dt = match (times.first(), times.get(1), fallback_dt) {
            (Some(&t0), Some(&t1), _) => T::lit(t1 - t0),
            (_, _, Some(dt)) => dt,
            _ => return Err(Error::Parse("cannot infer the sampling step from fewer than two rows".into())),
        };
        Self::new(dt, values)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn check_same_grid<T: Real>(a: &SampledSignal<T>, b: &SampledSignal<T>) -> Result<()> {
    if a.len() != b.len() || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "signals differ in shape: {} x {} vs {} x {}",
            a.len(),
            a.dim(),
            b.len(),
            b.dim()
        )));
    }
    let tol = T::lit(1e-12) * a.dt;
    if (a.dt - b.dt).abs() > tol {
        return Err(Error::Dimension(format!("signals differ in sampling step: {} vs {}", a.dt, b.dt)));
    }
    Ok(())
}

/// Step counts per segment after snapping cumulative switch times to the
/// grid `k dt`.
pub fn snapped_steps<T: Real>(mu: &SwitchingSequence<T>, dt: T) -> Result<Vec<usize>> {
    let mut steps = Vec::with_capacity(mu.segments.len());
    let mut elapsed = T::zero();
    let mut prev = 0usize;
    for (idx, &(q, t)) in mu.segments.iter().enumerate() {
        elapsed += t;
        let boundary = (elapsed / dt).round().as_f64() as usize;
        if boundary <= prev {
            return Err(Error::InvalidInput(format!(
                "segment {} (mode {q}, duration {t}) vanishes on the grid with step {dt}",
                idx + 1
            )));
        }
        steps.push(boundary - prev);
        prev = boundary;
    }
    Ok(steps)
}

/// Output of `sys` under switching `mu` and sampled input `u`, on the grid
/// of `u`.
///
/// Inputs are held constant over each step and every step is propagated
/// exactly with the exponential of the augmented matrix `[[A_q, B_q], [0, 0]]`.
/// The switching signal is left-continuous: the sample at a switch instant
/// belongs to the mode that was active before it. The result has one more
/// sample than the number of steps.
pub fn simulate<T: Real>(sys: &Lss<T>, mu: &SwitchingSequence<T>, u: &SampledSignal<T>) -> Result<SampledSignal<T>> {
    sys.ensure_valid()?;
    mu.mode_word().check_alphabet(sys.mode_count())?;
    if !u.is_empty() && u.dim() != sys.m {
        return Err(Error::Dimension(format!("input has {} channels, system expects {}", u.dim(), sys.m)));
    }
    let dt = u.dt;
    let steps = snapped_steps(mu, dt)?;
    let total: usize = steps.iter().sum();
    if u.len() < total {
        return Err(Error::Coverage(format!(
            "{} input samples for {total} steps of {dt} s",
            u.len()
        )));
    }
    let (n, m) = (sys.n, sys.m);
    let mut cache: HashMap<Mode, (DMatrix<T>, DMatrix<T>)> = HashMap::new();
    let mut x = sys.x0.clone();
    let mut y = Vec::with_capacity(total + 1);
    y.push(&sys.mode(mu.segments[0].0).c * &x);
    let mut k = 0;
    for (&(q, _), &count) in mu.segments.iter().zip(&steps) {
        let md = sys.mode(q);
        if let Entry::Vacant(slot) = cache.entry(q) {
            let mut aug = DMatrix::zeros(n + m, n + m);
            aug.view_mut((0, 0), (n, n)).copy_from(&md.a);
            aug.view_mut((0, n), (n, m)).copy_from(&md.b);
            let e = expm(&aug, dt)?;
            slot.insert((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()));
        }
        let (phi, gamma) = &cache[&q];
        for _ in 0..count {
            x = phi * &x + gamma * &u.values[k];
            y.push(&md.c * &x);
            k += 1;
        }
    }
    Ok(SampledSignal { dt, values: y })
}

/// Random switching signal on `[0, horizon]`.
///
/// Each segment lasts `min_dwell[q] + Exp(mean min_dwell[q])`; the next mode
/// is drawn uniformly among the other modes whose minimum dwell still fits.
/// If none fits, the current segment absorbs the remaining time; the last
/// segment is cut at the horizon. `first_mode` fixes `q_1`.
pub fn random_switching<T: Real>(
    modes: usize,
    horizon: T,
    min_dwell: &[T],
    seed: u64,
    first_mode: Option<Mode>,
) -> Result<SwitchingSequence<T>> {
    if modes == 0 || min_dwell.len() != modes {
        return Err(Error::InvalidInput(format!(
            "{} minimum dwell times given for {modes} modes",
            min_dwell.len()
        )));
    }
    if min_dwell.iter().any(|d| !d.is_finite_value() || *d <= T::zero()) {
        return Err(Error::InvalidInput("minimum dwell times must be positive".into()));
    }
    if !horizon.is_finite_value() || horizon <= T::zero() {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let h = horizon.as_f64();
    let dwell: Vec<f64> = min_dwell.iter().map(|d| d.as_f64()).collect();
    let fits = |q: Mode, remaining: f64| dwell[q - 1] <= remaining;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = match first_mode {
        Some(q) if q == 0 || q > modes => return Err(Error::LetterOutOfRange { letter: q, modes }),
        Some(q) if !fits(q, h) => {
            return Err(Error::Infeasible(format!(
                "horizon {h} is shorter than the minimum dwell {} of mode {q}",
                dwell[q - 1]
            )))
        }
        Some(q) => q,
        None => {
            let feasible: Vec<Mode> = (1..=modes).filter(|&q| fits(q, h)).collect();
            if feasible.is_empty() {
                return Err(Error::Infeasible(format!("horizon {h} is shorter than every minimum dwell time")));
            }
            feasible[rng.random_range(0..feasible.len())]
        }
    };
    let mut segments = Vec::new();
    let mut remaining = h;
    loop {
        let extra = Exp::new(1.0 / dwell[q - 1]).expect("positive rate").sample(&mut rng);
        let d = dwell[q - 1] + extra;
        if d >= remaining {
            segments.push((q, remaining));
            break;
        }
        let after = remaining - d;
        let next: Vec<Mode> = (1..=modes).filter(|&p| p != q && fits(p, after)).collect();
        if next.is_empty() {
            segments.push((q, remaining));
            break;
        }
        segments.push((q, d));
        remaining = after;
        q = next[rng.random_range(0..next.len())];
    }
    SwitchingSequence::new(segments.into_iter().map(|(q, t)| (q, T::lit(t))).collect())
}

/// I.i.d. standard normal samples, `len` vectors of dimension `dim`.
pub fn white_noise<T: Real>(dim: usize, len: usize, dt: T, seed: u64) -> SampledSignal<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..len)
        .map(|_| DVector::from_fn(dim, |_, _| T::lit(StandardNormal.sample(&mut rng))))
        .collect();
    SampledSignal { dt, values }
}

/// Best-fit rate `100 max(1 - |y - ybar| / |y - y_m|, 0)` with `y_m` the
/// per-channel mean of the reference `y`. For a constant reference the
/// value is 100 if the signals coincide and 0 otherwise.
pub fn bfr<T: Real>(y: &SampledSignal<T>, ybar: &SampledSignal<T>) -> Result<T> {
    check_same_grid(y, ybar)?;
    let mean = y.channel_means();
    let mut num = T::zero();
    let mut den = T::zero();
    for (a, b) in y.values.iter().zip(&ybar.values) {
        num += (a - b).norm_squared();
        den += (a - &mean).norm_squared();
    }
    let hundred = T::lit(100.0);
    if den == T::zero() {
        return Ok(if num == T::zero() { hundred } else { T::zero() });
    }
    let fit = T::one() - num.sqrt() / den.sqrt();
    Ok(hundred * if fit > T::zero() { fit } else { T::zero() })
}
