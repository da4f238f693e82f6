//! Monte Carlo oracle for `Ω(E)` and the grand density `Ω(p, q)`.
//!
//! Pure states are drawn uniformly with respect to the Fubini–Study volume.
//! Their basis populations `p_k = |c_k|²` are then uniform on the probability
//! simplex, so the sampled energies `Σ p_k E_k` histogram the normalized
//! density of states.
//!
//! Reproducibility: sample `j` of the run belongs to stream `i` and each
//! stream owns a ChaCha8 generator keyed by `seed` with stream id `i`.
//! Streams are independent of how they are scheduled on threads, and the
//! per-stream integer histograms are summed in stream order, so a given
//! `(seed, streams, samples, bins)` reproduces bit for bit on any thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::dos::PiecewiseDos;
use crate::error::{invalid, Result};
use crate::spectrum::Spectrum;
use crate::state_space_volume;

pub const DEFAULT_BINS: usize = 512;
pub const DEFAULT_STREAMS: usize = 16;

/// How a Fubini–Study uniform state is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Complex amplitudes with i.i.d. standard normal real and imaginary
    /// parts, normalized.
    Gaussian,
    /// Populations as normalized i.i.d. unit-rate exponentials.
    #[default]
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub streams: usize,
    pub bins: usize,
    pub sampler: Sampler,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            streams: DEFAULT_STREAMS,
            bins: DEFAULT_BINS,
            sampler: Sampler::default(),
        }
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }

    pub fn with_streams(mut self, streams: usize) -> Self {
        self.streams = streams;
        self
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(invalid("bins must be positive"));
        }
        if self.streams == 0 {
            return Err(invalid("streams must be positive"));
        }
        if self.samples < self.bins as u64 {
            return Err(invalid(format!(
                "samples ({}) must be at least bins ({})",
                self.samples, self.bins
            )));
        }
        Ok(())
    }

    /// Number of samples drawn by stream `i`.
    fn stream_samples(&self, i: usize) -> u64 {
        let streams = self.streams as u64;
        self.samples / streams + u64::from((i as u64) < self.samples % streams)
    }

    /// Generator for stream `i`.
    pub fn stream_rng(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        rng
    }
}

/// Unnormalized populations `w_k` with `p_k = w_k / Σ w`.
fn draw_weights<R: Rng + ?Sized>(weights: &mut [f64], rng: &mut R, sampler: Sampler) -> f64 {
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = match sampler {
            Sampler::Gaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                re * re + im * im
            }
            Sampler::Exponential => rng.sample(Exp1),
        };
        total += *w;
    }
    total
}

/// Basis populations of one Fubini–Study uniform pure state.
pub fn sample_state<R: Rng + ?Sized>(
    dim: usize,
    rng: &mut R,
    sampler: Sampler,
) -> Result<Vec<f64>> {
    if dim < 2 {
        return Err(invalid(format!("state dimension {dim} < 2")));
    }
    let mut p = vec![0.0; dim];
    let total = draw_weights(&mut p, rng, sampler);
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Binned estimate of `Ω(E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub volume: f64,
    pub samples: u64,
    pub seed: u64,
    pub streams: usize,
    pub sampler: Sampler,
}

impl McEstimate {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn bin(&self, i: usize) -> (f64, f64) {
        (self.bin_edges[i], self.bin_edges[i + 1])
    }

    /// `Σ density_i · width_i`.
    pub fn total_integral(&self) -> f64 {
        self.density
            .iter()
            .enumerate()
            .map(|(i, d)| d * (self.bin_edges[i + 1] - self.bin_edges[i]))
            .sum()
    }
}

/// Runs `per_stream` for every stream index on up to `threads` workers and
/// returns the results ordered by stream index.
fn run_streams<T, F>(streams: usize, threads: usize, per_stream: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.clamp(1, streams);
    if threads == 1 {
        return (0..streams).map(per_stream).collect();
    }
    let mut slots: Vec<Option<T>> = (0..streams).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = streams.div_ceil(threads);
        for (c, out) in slots.chunks_mut(chunk).enumerate() {
            let per_stream = &per_stream;
            scope.spawn(move || {
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = Some(per_stream(c * chunk + k));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("stream ran")).collect()
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn merge_counts(per_stream: Vec<Vec<u64>>, len: usize) -> Vec<u64> {
    per_stream.into_iter().fold(vec![0u64; len], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    })
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (x - lo) / (hi - lo) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect();
    edges[bins] = hi;
    edges
}

/// Histogram estimate of `Ω(E)` using all available cores.
pub fn estimate_dos(s: &Spectrum, cfg: &McConfig) -> Result<McEstimate> {
    estimate_dos_with_threads(s, cfg, default_threads())
}

/// Histogram estimate of `Ω(E)` on at most `threads` worker threads. The
/// result does not depend on `threads`.
pub fn estimate_dos_with_threads(
    s: &Spectrum,
    cfg: &McConfig,
    threads: usize,
) -> Result<McEstimate> {
    cfg.validate()?;
    let energies = s.eigenvalues();
    let (lo, hi) = (s.min_energy(), s.max_energy());
    if hi <= lo {
        return Err(invalid("spectrum has zero width; nothing to histogram"));
    }
    let bins = cfg.bins;

    let per_stream = run_streams(cfg.streams, threads, |i| {
        let mut rng = cfg.stream_rng(i);
        let mut weights = vec![0.0; energies.len()];
        let mut counts = vec![0u64; bins];
        for _ in 0..cfg.stream_samples(i) {
            let total = draw_weights(&mut weights, &mut rng, cfg.sampler);
            let e = weights
                .iter()
                .zip(&energies)
                .map(|(w, e)| w * e)
                .sum::<f64>()
                / total;
            counts[bin_index(e, lo, hi, bins)] += 1;
        }
        counts
    });
    let counts = merge_counts(per_stream, bins);

    let volume = state_space_volume(s.dim());
    let edges = uniform_edges(lo, hi, bins);
    let (density, stderr) = scale_counts(&counts, cfg.samples, volume, |i| edges[i + 1] - edges[i]);
    Ok(McEstimate {
        bin_edges: edges,
        counts,
        density,
        stderr,
        volume,
        samples: cfg.samples,
        seed: cfg.seed,
        streams: cfg.streams,
        sampler: cfg.sampler,
    })
}

/// Converts counts to `volume ×` probability density, with binomial
/// standard errors from the observed counts.
fn scale_counts(
    counts: &[u64],
    samples: u64,
    volume: f64,
    cell: impl Fn(usize) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = samples as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let p = c as f64 / n;
            let scale = volume / cell(i);
            (p * scale, (p * (1.0 - p) / n).sqrt() * scale)
        })
        .unzip()
}

/// One bin of an exact-versus-sampled comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinCheck {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    /// Binomial standard error of the estimate under the exact bin
    /// probability.
    pub stderr: f64,
    /// Bin average of the exact density.
    pub exact: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub bins: Vec<BinCheck>,
    pub threshold_sigma: f64,
}

impl Verification {
    pub fn within(&self) -> usize {
        self.bins
            .iter()
            .filter(|b| b.z.abs() <= self.threshold_sigma)
            .count()
    }

    pub fn fraction_within(&self) -> f64 {
        self.within() as f64 / self.bins.len() as f64
    }
}

/// z-scores of every bin against the exact density.
///
/// The histogram estimates the bin average of `Ω`, so that is the reference.
/// The standard error is the binomial one evaluated at the exact bin
/// probability, which stays meaningful for bins with few or zero counts.
pub fn verify_against(
    est: &McEstimate,
    exact: &PiecewiseDos,
    threshold_sigma: f64,
) -> Verification {
    let n = est.samples as f64;
    let bins = (0..est.bins())
        .map(|i| {
            let (lo, hi) = est.bin(i);
            let width = hi - lo;
            let mass = exact.integrate(lo, hi);
            let p = (mass / est.volume).clamp(0.0, 1.0);
            let stderr = (p * (1.0 - p) / n).sqrt() * est.volume / width;
            let exact_avg = mass / width;
            let diff = est.density[i] - exact_avg;
            let z = if stderr > 0.0 {
                diff / stderr
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            BinCheck {
                lo,
                hi,
                estimate: est.density[i],
                stderr,
                exact: exact_avg,
                z,
            }
        })
        .collect();
    Verification {
        bins,
        threshold_sigma,
    }
}

/// Two-dimensional histogram over `(p, q) ∈ [0, 1]²` targeting `Ω(p, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrandEstimate {
    /// Shared edges of both axes.
    pub edges: Vec<f64>,
    /// Row-major `[i_p * bins + i_q]`.
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub volume: f64,
    pub samples: u64,
    pub seed: u64,
    pub streams: usize,
}

impl GrandEstimate {
    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn index(&self, ip: usize, iq: usize) -> usize {
        ip * self.bins() + iq
    }

    pub fn total_integral(&self) -> f64 {
        let b = self.bins();
        (0..b)
            .flat_map(|i| (0..b).map(move |j| (i, j)))
            .map(|(i, j)| {
                let area =
                    (self.edges[i + 1] - self.edges[i]) * (self.edges[j + 1] - self.edges[j]);
                self.density[self.index(i, j)] * area
            })
            .sum()
    }
}

/// Histogram of the first two populations `(p₁, p₂)` of a three-level
/// system, scaled so that it targets the grand density `Ω(p, q)`.
/// `cfg.bins` is the number of bins per axis.
pub fn estimate_grand(s: &Spectrum, cfg: &McConfig) -> Result<GrandEstimate> {
    estimate_grand_with_threads(s, cfg, default_threads())
}

pub fn estimate_grand_with_threads(
    s: &Spectrum,
    cfg: &McConfig,
    threads: usize,
) -> Result<GrandEstimate> {
    if s.dim() != 3 {
        return Err(invalid(format!(
            "grand density estimate needs a 3-level system, got dimension {}",
            s.dim()
        )));
    }
    cfg.validate()?;
    let bins = cfg.bins;
    let per_stream = run_streams(cfg.streams, threads, |i| {
        let mut rng = cfg.stream_rng(i);
        let mut weights = [0.0; 3];
        let mut counts = vec![0u64; bins * bins];
        for _ in 0..cfg.stream_samples(i) {
            let total = draw_weights(&mut weights, &mut rng, cfg.sampler);
            let ip = bin_index(weights[0] / total, 0.0, 1.0, bins);
            let iq = bin_index(weights[1] / total, 0.0, 1.0, bins);
            counts[ip * bins + iq] += 1;
        }
        counts
    });
    let counts = merge_counts(per_stream, bins * bins);
    let volume = state_space_volume(3);
    let edges = uniform_edges(0.0, 1.0, bins);
    let (density, stderr) = scale_counts(&counts, cfg.samples, volume, |k| {
        let (i, j) = (k / bins, k % bins);
        (edges[i + 1] - edges[i]) * (edges[j + 1] - edges[j])
    });
    Ok(GrandEstimate {
        edges,
        counts,
        density,
        stderr,
        volume,
        samples: cfg.samples,
        seed: cfg.seed,
        streams: cfg.streams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos::build_dos;
    use crate::spectrum::make_spectrum;
    use std::f64::consts::PI;

    fn ladder(levels: &[f64]) -> Spectrum {
        make_spectrum(&levels.iter().map(|&e| (e, 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn states_lie_on_the_simplex() {
        let mut rng = McConfig::new(1, 7).stream_rng(0);
        for sampler in [Sampler::Gaussian, Sampler::Exponential] {
            for _ in 0..100 {
                let p = sample_state(2, &mut rng, sampler).unwrap();
                assert!(p.iter().all(|&x| x >= 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
        assert!(sample_state(1, &mut rng, Sampler::Gaussian).is_err());
    }

    #[test]
    fn two_level_marginal_mean() {
        // p₁ is uniform on [0,1]: mean 1/2, standard deviation sqrt(1/12).
        for sampler in [Sampler::Gaussian, Sampler::Exponential] {
            let mut rng = McConfig::new(1, 11).stream_rng(3);
            let n = 1_000_000;
            let mean = (0..n)
                .map(|_| sample_state(2, &mut rng, sampler).unwrap()[0])
                .sum::<f64>()
                / n as f64;
            let sigma = (1.0f64 / 12.0 / n as f64).sqrt();
            assert!((mean - 0.5).abs() < 4.0 * sigma, "{sampler:?}: {mean}");
        }
    }

    #[test]
    fn three_level_marginal_is_beta_1_2() {
        // Marginal of a flat Dirichlet(1,1,1) is Beta(1,2): density 2(1-x),
        // mean 1/3. Compare both samplers to the exact bin masses.
        let n = 1_000_000u64;
        let bins = 20;
        for sampler in [Sampler::Gaussian, Sampler::Exponential] {
            let mut rng = McConfig::new(1, 5).stream_rng(1);
            let mut counts = vec![0u64; bins];
            let mut sum = 0.0;
            for _ in 0..n {
                let p = sample_state(3, &mut rng, sampler).unwrap()[0];
                sum += p;
                counts[bin_index(p, 0.0, 1.0, bins)] += 1;
            }
            let mean = sum / n as f64;
            let var = 1.0 / 18.0; // Beta(1,2) variance
            assert!((mean - 1.0 / 3.0).abs() < 4.0 * (var / n as f64).sqrt());
            let chi2: f64 = (0..bins)
                .map(|i| {
                    let (a, b) = (i as f64 / bins as f64, (i + 1) as f64 / bins as f64);
                    // ∫ 2(1-x) dx = (1-a)² - (1-b)²
                    let expect = n as f64 * ((1.0 - a).powi(2) - (1.0 - b).powi(2));
                    (counts[i] as f64 - expect).powi(2) / expect
                })
                .sum();
            // 19 degrees of freedom; 99.99th percentile ≈ 49.
            assert!(chi2 < 49.0, "{sampler:?}: chi2 = {chi2}");
        }
    }

    #[test]
    fn two_level_histogram_is_flat_pi() {
        let s = ladder(&[0.0, 1.0]);
        let est = estimate_dos(&s, &McConfig::new(1_000_000, 42).with_bins(64)).unwrap();
        assert!((est.total_integral() - PI).abs() < 1e-12);
        for i in 0..est.bins() {
            assert!(
                (est.density[i] - PI).abs() <= 4.0 * est.stderr[i],
                "bin {i}"
            );
        }
    }

    #[test]
    fn three_level_histogram_peaks_at_middle_level() {
        let s = ladder(&[0.0, 1.0, 2.0]);
        let est = estimate_dos(&s, &McConfig::new(1_000_000, 1).with_bins(64)).unwrap();
        let peak = (0..est.bins())
            .max_by(|&a, &b| est.density[a].total_cmp(&est.density[b]))
            .unwrap();
        let (lo, hi) = est.bin(peak);
        assert!(
            lo <= 1.0 + 2.0 / 64.0 && hi >= 1.0 - 2.0 / 64.0,
            "peak at [{lo}, {hi})"
        );
        let v = verify_against(&est, &build_dos(&s).unwrap(), 4.0);
        assert!(v.fraction_within() >= 0.99);
    }

    #[test]
    fn bit_identical_across_thread_counts() {
        let s = make_spectrum(&[(-3.75, 1), (-0.75, 3), (1.25, 3), (2.25, 1)]).unwrap();
        let cfg = McConfig::new(200_000, 9).with_bins(128).with_streams(7);
        let one = estimate_dos_with_threads(&s, &cfg, 1).unwrap();
        for threads in [2, 3, 8] {
            assert_eq!(one, estimate_dos_with_threads(&s, &cfg, threads).unwrap());
        }
        let other_seed = estimate_dos_with_threads(&s, &McConfig { seed: 10, ..cfg }, 1).unwrap();
        assert_ne!(one.counts, other_seed.counts);
    }

    #[test]
    fn stream_count_changes_draws_not_distribution() {
        let s = ladder(&[0.0, 0.5, 2.0, 3.0]);
        let a = estimate_dos(
            &s,
            &McConfig::new(2_000_000, 3).with_bins(64).with_streams(1),
        )
        .unwrap();
        let b = estimate_dos(
            &s,
            &McConfig::new(2_000_000, 3).with_bins(64).with_streams(13),
        )
        .unwrap();
        assert_ne!(a.counts, b.counts);
        let (chi2, dof) = two_sample_chi2(&a.counts, &b.counts);
        assert!(
            (chi2 - dof) / (2.0 * dof).sqrt() < 5.0,
            "chi2 = {chi2}, dof = {dof}"
        );
    }

    #[test]
    fn gaussian_and_exponential_samplers_agree() {
        let s = make_spectrum(&[(0.0, 2), (1.0, 1), (2.5, 2)]).unwrap();
        let cfg = McConfig::new(2_000_000, 17).with_bins(128);
        let g = estimate_dos(&s, &cfg.with_sampler(Sampler::Gaussian)).unwrap();
        let e = estimate_dos(&s, &cfg.with_sampler(Sampler::Exponential)).unwrap();
        let bad = (0..g.bins())
            .filter(|&i| {
                let sigma = (g.stderr[i].powi(2) + e.stderr[i].powi(2)).sqrt();
                (g.density[i] - e.density[i]).abs() > 4.0 * sigma
            })
            .count();
        assert!(bad as f64 <= 0.01 * g.bins() as f64, "{bad} bins disagree");
    }

    #[test]
    fn grand_histogram_is_flat_on_the_simplex() {
        let s = ladder(&[0.0, 1.0, 2.0]);
        let est = estimate_grand(&s, &McConfig::new(2_000_000, 4).with_bins(20)).unwrap();
        assert!((est.total_integral() - PI * PI / 2.0).abs() < 1e-10);
        let b = est.bins();
        for i in 0..b {
            for j in 0..b {
                let k = est.index(i, j);
                if i + j + 1 < b {
                    // Cell strictly inside the simplex.
                    assert!(
                        (est.density[k] - PI * PI).abs() <= 4.0 * est.stderr[k],
                        "cell ({i},{j})"
                    );
                } else if i + j >= b {
                    assert_eq!(est.counts[k], 0, "cell ({i},{j}) is outside the simplex");
                }
            }
        }
        assert!(estimate_grand(&ladder(&[0.0, 1.0]), &McConfig::new(100, 1).with_bins(4)).is_err());
    }

    #[test]
    fn config_validation() {
        let s = ladder(&[0.0, 1.0]);
        assert!(estimate_dos(&s, &McConfig::new(10, 1).with_bins(20)).is_err());
        assert!(estimate_dos(&s, &McConfig::new(100, 1).with_bins(0)).is_err());
        assert!(estimate_dos(&s, &McConfig::new(100, 1).with_bins(10).with_streams(0)).is_err());
        // More streams than samples is fine; idle streams draw nothing.
        let est = estimate_dos(&s, &McConfig::new(10, 1).with_bins(2).with_streams(64)).unwrap();
        assert_eq!(est.counts.iter().sum::<u64>(), 10);
    }

    fn two_sample_chi2(a: &[u64], b: &[u64]) -> (f64, f64) {
        let mut chi2 = 0.0;
        let mut dof = -1.0;
        for (&x, &y) in a.iter().zip(b) {
            if x + y > 0 {
                chi2 += (x as f64 - y as f64).powi(2) / (x + y) as f64;
                dof += 1.0;
            }
        }
        (chi2, dof)
    }
}
