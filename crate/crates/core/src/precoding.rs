//! Beam-pair selection and multi-user analog precoders.
//!
//! A user's effective channel `h` is the array-domain sum of its clusters,
//! `h = sum_c g_c a(aod_c)`, and the received amplitude for weights `w` is
//! `h^H w`. Ties are broken toward the lowest index everywhere.

use num_complex::Complex64;

use crate::array::codebook::Codebook;
use crate::array::steering::{element_pattern_db, quantize_weights, ArrayGeometry};
use crate::array::ue::{subarray_gain_db, UeAntennaState};
use crate::channel::composite::ClusterGain;
use crate::error::{Error, Result};
use crate::geometry::Orientation;

/// Relative tolerance below which a projected channel counts as zero.
const RANK_TOL: f64 = 1e-9;
const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 10_000;

pub type EffectiveChannel = Vec<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Steering,
    Zeroforcing,
    GeneralizedEigenvector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub strategy: Strategy,
    /// Unit-norm weights, one per user.
    pub weights: Vec<Vec<Complex64>>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scaled(a: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

fn normalized(a: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scaled(a, 1.0 / n))
}

/// Removes from `v` its components along the orthonormal `basis`, twice.
fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            for (x, qi) in v.iter_mut().zip(q) {
                *x -= c * qi;
            }
        }
    }
}

/// Orthonormal basis of the span of `vs`, skipping numerically dependent
/// vectors.
fn orthonormal_basis<'a>(vs: impl IntoIterator<Item = &'a Vec<Complex64>>) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for v in vs {
        let n0 = norm(v);
        let mut r = v.clone();
        project_out(&mut r, &basis);
        if norm(&r) > RANK_TOL * n0 {
            basis.push(normalized(&r).expect("nonzero residual"));
        }
    }
    basis
}

fn check_channels(channels: &[EffectiveChannel]) -> Result<usize> {
    let n = channels.first().ok_or(Error::EmptyInput("channels"))?.len();
    for (k, h) in channels.iter().enumerate() {
        if h.len() != n {
            return Err(Error::Domain(format!("channel {k} has {} entries, expected {n}", h.len())));
        }
        if h.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Domain(format!("channel {k} is not finite")));
        }
        if norm(h) == 0.0 {
            return Err(Error::ZeroChannel { user: k });
        }
    }
    Ok(n)
}

/// Conjugate match to each user: `w_k = h_k / |h_k|`.
pub fn mu_steering(channels: &[EffectiveChannel]) -> Result<PrecoderSet> {
    check_channels(channels)?;
    Ok(PrecoderSet {
        strategy: Strategy::Steering,
        weights: channels.iter().map(|h| normalized(h).expect("checked")).collect(),
    })
}

/// Projects each channel onto the orthogonal complement of the other users'
/// channels.
pub fn mu_zeroforcing(channels: &[EffectiveChannel]) -> Result<PrecoderSet> {
    let n = check_channels(channels)?;
    if channels.len() > n {
        return Err(Error::RankDeficient {
            users: (0..channels.len()).collect(),
        });
    }
    let mut weights = Vec::with_capacity(channels.len());
    let mut bad = Vec::new();
    for (k, h) in channels.iter().enumerate() {
        let basis = orthonormal_basis(channels.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v));
        let mut r = h.clone();
        project_out(&mut r, &basis);
        if norm(&r) <= RANK_TOL * norm(h) {
            bad.push(k);
        } else {
            weights.push(normalized(&r).expect("nonzero residual"));
        }
    }
    if !bad.is_empty() {
        return Err(Error::RankDeficient { users: bad });
    }
    Ok(PrecoderSet {
        strategy: Strategy::Zeroforcing,
        weights,
    })
}

/// Dense Hermitian matrix in row-major order.
struct Mat {
    n: usize,
    a: Vec<Complex64>,
}

impl Mat {
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.a[i * self.n + j]
    }

    /// Lower-triangular `L` with `L L^H = self`.
    fn cholesky(&self) -> Option<Mat> {
        let n = self.n;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                if i == j {
                    if !(s.re > 0.0) {
                        return None;
                    }
                    l[i * n + i] = Complex64::new(s.re.sqrt(), 0.0);
                } else {
                    l[i * n + j] = s / l[j * n + j].re;
                }
            }
        }
        Some(Mat { n, a: l })
    }

    /// Solves `L x = b` for lower-triangular self.
    fn solve_lower(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i).re;
        }
        x
    }

    /// Solves `L^H x = b` for lower-triangular self.
    fn solve_upper_h(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.at(k, i).conj() * x[k];
            }
            x[i] = s / self.at(i, i).re;
        }
        x
    }
}

/// Dominant eigenvector of the Hermitian PSD operator `f` by power iteration.
fn dominant_eigvec(f: impl Fn(&[Complex64]) -> Vec<Complex64>, start: Vec<Complex64>) -> Vec<Complex64> {
    let mut x = normalized(&start).unwrap_or(start);
    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_MAX {
        let y = f(&x);
        let l = norm(&y);
        if l == 0.0 {
            break;
        }
        x = scaled(&y, 1.0 / l);
        if (l - lambda).abs() <= POWER_ITER_TOL * l {
            break;
        }
        lambda = l;
    }
    x
}

/// SLNR-maximizing weights: the dominant generalized eigenvector of
/// `(h_k h_k^H, noise I + sum_{j != k} h_j h_j^H)`.
///
/// The optimum lies in the span of the user channels, so the problem is
/// reduced to that subspace, whitened with a Cholesky factor of the
/// interference-plus-noise matrix and solved by power iteration.
pub fn mu_gev(channels: &[EffectiveChannel], noise_power: f64) -> Result<PrecoderSet> {
    check_channels(channels)?;
    if !(noise_power > 0.0) || !noise_power.is_finite() {
        return Err(Error::OutOfRange {
            what: "noise power",
            value: noise_power,
            min: f64::MIN_POSITIVE,
            max: f64::INFINITY,
        });
    }
    let q = orthonormal_basis(channels);
    let r = q.len();
    // channels in subspace coordinates
    let hr: Vec<Vec<Complex64>> = channels
        .iter()
        .map(|h| q.iter().map(|qi| dot(qi, h)).collect())
        .collect();
    let mut weights = Vec::with_capacity(channels.len());
    for k in 0..channels.len() {
        let mut b = Mat {
            n: r,
            a: vec![Complex64::new(0.0, 0.0); r * r],
        };
        for i in 0..r {
            b.a[i * r + i] += noise_power;
        }
        for (j, hj) in hr.iter().enumerate() {
            if j == k {
                continue;
            }
            for i in 0..r {
                for l in 0..r {
                    b.a[i * r + l] += hj[i] * hj[l].conj();
                }
            }
        }
        let l = b.cholesky().ok_or_else(|| Error::Domain("interference matrix not positive definite".into()))?;
        // C = L^-1 h h^H L^-H is rank one with eigenvector L^-1 h
        let g = l.solve_lower(&hr[k]);
        let y = dominant_eigvec(
            |x| {
                let c = dot(&g, x);
                g.iter().map(|gi| gi * c).collect()
            },
            g.clone(),
        );
        let wr = l.solve_upper_h(&y);
        let mut w = vec![Complex64::new(0.0, 0.0); channels[k].len()];
        for (c, qi) in wr.iter().zip(&q) {
            for (x, qe) in w.iter_mut().zip(qi) {
                *x += c * qe;
            }
        }
        weights.push(normalized(&w).ok_or(Error::ZeroChannel { user: k })?);
    }
    Ok(PrecoderSet {
        strategy: Strategy::GeneralizedEigenvector,
        weights,
    })
}

/// Signal-to-leakage-plus-noise ratio of `w` for user `k`, linear.
pub fn slnr(channels: &[EffectiveChannel], k: usize, w: &[Complex64], noise_power: f64) -> f64 {
    let signal = dot(&channels[k], w).norm_sqr();
    let leak: f64 = channels
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, h)| dot(h, w).norm_sqr())
        .sum();
    let wn = w.iter().map(|x| x.norm_sqr()).sum::<f64>();
    signal / (noise_power * wn + leak)
}

/// `sum_k log2(1 + SINR_k)`, bps/Hz.
pub fn sum_rate(p: &PrecoderSet, channels: &[EffectiveChannel], noise_power: f64) -> f64 {
    channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let signal = dot(h, &p.weights[k]).norm_sqr();
            let interference: f64 = p
                .weights
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, w)| dot(h, w).norm_sqr())
                .sum();
            (1.0 + signal / (noise_power + interference)).log2()
        })
        .sum()
}

/// Phase-quantized, unit-norm version of a precoder set.
pub fn quantize_precoders(p: &PrecoderSet, bits: u8) -> PrecoderSet {
    PrecoderSet {
        strategy: p.strategy,
        weights: p
            .weights
            .iter()
            .map(|w| {
                let q = quantize_weights(w, bits).to_complex();
                normalized(&q).unwrap_or(q)
            })
            .collect(),
    }
}

/// Sum-rate loss caused by phase quantization, bps/Hz.
pub fn quantization_loss(p: &PrecoderSet, channels: &[EffectiveChannel], noise_power: f64, bits: u8) -> f64 {
    sum_rate(p, channels, noise_power) - sum_rate(&quantize_precoders(p, bits), channels, noise_power)
}

/// Array-domain channel of a gNB toward one user.
pub fn effective_channel(g: &ArrayGeometry, orient: &Orientation, clusters: &[ClusterGain]) -> Result<EffectiveChannel> {
    let mut h = vec![Complex64::new(0.0, 0.0); g.len()];
    for c in clusters {
        let amp = c.complex();
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (az, el) = orient.to_local(c.departure)?;
        let e = 10f64.powf((g.element_gain_dbi + element_pattern_db(az, el, g.element_floor_db)) / 20.0);
        for (x, a) in h.iter_mut().zip(g.response(az, el)) {
            *x += amp * e * a;
        }
    }
    Ok(h)
}

/// Selected beam pair and its coupled gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPair {
    pub tx_beam: usize,
    pub subarray: usize,
    pub rx_beam: usize,
    /// Channel plus both antennas, dB.
    pub path_gain_db: f64,
    /// Antenna contribution alone: `path_gain_db` minus the omni channel gain.
    pub bf_gain_db: f64,
}

/// Linear per-cluster antenna gains of every candidate at both ends of one
/// gNB-UE link, combined incoherently:
/// `sum_c P_c G_tx(aod_c) G_rx(aoa_c)`.
#[derive(Debug, Clone)]
pub struct CouplingTable {
    /// Cluster powers, linear.
    pub power: Vec<f64>,
    /// `tx[beam][cluster]`, linear, finest level.
    pub tx: Vec<Vec<f64>>,
    /// `(subarray, beam)` and per-cluster gains, linear, in (subarray, beam)
    /// order.
    pub rx: Vec<((usize, usize), Vec<f64>)>,
}

impl CouplingTable {
    pub fn new(
        clusters: &[ClusterGain],
        tx_cb: &Codebook,
        tx_orient: &Orientation,
        ue: &UeAntennaState,
        rx_cbs: &[Codebook],
        ue_body: &Orientation,
    ) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyInput("cluster set"));
        }
        if tx_cb.finest().is_empty() || rx_cbs.iter().all(|c| c.finest().is_empty()) {
            return Err(Error::EmptyInput("codebook"));
        }
        let g = &tx_cb.geometry;
        let power: Vec<f64> = clusters.iter().map(|c| 10f64.powf(c.gain_db / 10.0)).collect();
        let mut tx = vec![Vec::with_capacity(clusters.len()); tx_cb.finest().len()];
        let mut rx_dirs = Vec::with_capacity(clusters.len());
        for c in clusters {
            let (az, el) = tx_orient.to_local(c.departure)?;
            let a = g.response(az, el);
            let elem = 10f64.powf((g.element_gain_dbi + element_pattern_db(az, el, g.element_floor_db)) / 10.0);
            for (b, beam) in tx_cb.finest().iter().enumerate() {
                tx[b].push(beam.array_factor(&a) * elem);
            }
            rx_dirs.push(ue_body.to_local(c.arrival)?);
        }
        let mut rx = Vec::new();
        for (s, cb) in rx_cbs.iter().enumerate() {
            if !ue.enabled(s) {
                continue;
            }
            for b in 0..cb.finest().len() {
                let gains = rx_dirs
                    .iter()
                    .map(|&(az, el)| 10f64.powf(subarray_gain_db(ue, cb, s, b, az, el) / 10.0))
                    .collect();
                rx.push(((s, b), gains));
            }
        }
        if rx.is_empty() {
            return Err(Error::NoCoverage);
        }
        Ok(CouplingTable { power, tx, rx })
    }

    /// Omni channel gain, linear.
    pub fn omni(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Coupled gain of tx beam `t` with rx candidate index `r`, linear.
    pub fn gain(&self, t: usize, r: usize) -> f64 {
        let rx = &self.rx[r].1;
        self.power
            .iter()
            .zip(&self.tx[t])
            .zip(rx)
            .map(|((p, gt), gr)| p * gt * gr)
            .sum()
    }

    /// Index of the rx candidate for `(subarray, beam)`.
    pub fn rx_index(&self, subarray: usize, beam: usize) -> Option<usize> {
        self.rx.iter().position(|(id, _)| *id == (subarray, beam))
    }

    fn pair(&self, t: usize, r: usize) -> BeamPair {
        let g = self.gain(t, r);
        let (subarray, rx_beam) = self.rx[r].0;
        BeamPair {
            tx_beam: t,
            subarray,
            rx_beam,
            path_gain_db: 10.0 * g.log10(),
            bf_gain_db: 10.0 * (g / self.omni()).log10(),
        }
    }

    /// Exhaustive argmax; ties go to the lowest (tx beam, subarray, rx beam).
    pub fn best(&self) -> BeamPair {
        let (mut bt, mut br, mut bg) = (0, 0, f64::NEG_INFINITY);
        for t in 0..self.tx.len() {
            for r in 0..self.rx.len() {
                let g = self.gain(t, r);
                if g > bg {
                    (bt, br, bg) = (t, r, g);
                }
            }
        }
        self.pair(bt, br)
    }

    /// All candidates of the table as `(tx beam, subarray, rx beam, gain dB)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.tx.len()).flat_map(move |t| {
            (0..self.rx.len()).map(move |r| {
                let (s, b) = self.rx[r].0;
                (t, s, b, 10.0 * self.gain(t, r).log10())
            })
        })
    }
}

/// Coupled gain of a single candidate, dB, by the same metric as
/// [`CouplingTable::gain`]. Cheaper than building the table when only the
/// serving pair is measured.
#[allow(clippy::too_many_arguments)]
pub fn candidate_gain_db(
    clusters: &[ClusterGain],
    tx_cb: &Codebook,
    tx_orient: &Orientation,
    tx_beam: usize,
    ue: &UeAntennaState,
    rx_cb: &Codebook,
    subarray: usize,
    rx_beam: usize,
    ue_body: &Orientation,
) -> Result<f64> {
    let beam = tx_cb.finest().get(tx_beam).ok_or_else(|| Error::Lookup {
        kind: "tx beam",
        id: tx_beam.to_string(),
    })?;
    if rx_beam >= rx_cb.finest().len() {
        return Err(Error::Lookup {
            kind: "rx beam",
            id: rx_beam.to_string(),
        });
    }
    let g = &tx_cb.geometry;
    let mut total = 0.0;
    for c in clusters {
        if c.gain_db == f64::NEG_INFINITY {
            continue;
        }
        let (az, el) = tx_orient.to_local(c.departure)?;
        let elem = 10f64.powf((g.element_gain_dbi + element_pattern_db(az, el, g.element_floor_db)) / 10.0);
        let gt = beam.array_factor(&g.response(az, el)) * elem;
        let (raz, rel) = ue_body.to_local(c.arrival)?;
        let gr = 10f64.powf(subarray_gain_db(ue, rx_cb, subarray, rx_beam, raz, rel) / 10.0);
        total += 10f64.powf(c.gain_db / 10.0) * gt * gr;
    }
    Ok(10.0 * total.log10())
}

/// Best single-user beam pair over the finest gNB level and every enabled UE
/// subarray and beam.
pub fn select_beam_pair(
    clusters: &[ClusterGain],
    tx_cb: &Codebook,
    tx_orient: &Orientation,
    ue: &UeAntennaState,
    rx_cbs: &[Codebook],
    ue_body: &Orientation,
) -> Result<BeamPair> {
    Ok(CouplingTable::new(clusters, tx_cb, tx_orient, ue, rx_cbs, ue_body)?.best())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::codebook::{build_codebook, Sector};
    use crate::array::ue::{ue_codebooks, GripMode};
    use crate::geometry::Vec3;
    use crate::rng::{stream, Purpose};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channel(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect()
    }

    fn unit_norms(p: &PrecoderSet) {
        for w in &p.weights {
            assert_abs_diff_eq!(norm(w), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn steering_single_user_is_matched_filter() {
        let h = vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0)];
        let p = mu_steering(std::slice::from_ref(&h)).unwrap();
        unit_norms(&p);
        // Cauchy-Schwarz: |h^H w|^2 = |h|^2
        assert_abs_diff_eq!(dot(&h, &p.weights[0]).norm_sqr(), norm(&h).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn steering_cross_interference() {
        let h1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = vec![c(0.0, 0.0), c(0.0, 3.0)];
        let p = mu_steering(&[h1.clone(), h2.clone()]).unwrap();
        assert_eq!(dot(&h2, &p.weights[0]).norm(), 0.0);
        let p = mu_steering(&[h1.clone(), h1.clone()]).unwrap();
        assert_abs_diff_eq!(dot(&h1, &p.weights[1]).norm_sqr(), dot(&h1, &p.weights[0]).norm_sqr());
    }

    #[test]
    fn zero_channel_rejected() {
        let z = vec![c(0.0, 0.0); 4];
        let h = vec![c(1.0, 0.0); 4];
        assert!(matches!(mu_steering(&[h.clone(), z.clone()]), Err(Error::ZeroChannel { user: 1 })));
        assert!(matches!(mu_zeroforcing(std::slice::from_ref(&z)), Err(Error::ZeroChannel { user: 0 })));
        assert!(mu_steering(&[]).is_err());
    }

    #[test]
    fn zf_matches_steering_when_trivial() {
        let h1 = vec![c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)];
        let h2 = vec![c(0.0, 0.0), c(2.0, 0.0), c(0.0, -1.0)];
        for set in [vec![h1.clone()], vec![h1.clone(), h2.clone()]] {
            let s = mu_steering(&set).unwrap();
            let z = mu_zeroforcing(&set).unwrap();
            for (a, b) in s.weights.iter().zip(&z.weights) {
                for (x, y) in a.iter().zip(b) {
                    assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-12);
                }
            }
            assert_abs_diff_eq!(sum_rate(&s, &set, 0.1), sum_rate(&z, &set, 0.1), epsilon = 1e-12);
        }
    }

    #[test]
    fn zf_correlated_pair() {
        // unit channels with inner product 0.5
        let h1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = vec![c(0.5, 0.0), c(0.75f64.sqrt(), 0.0)];
        let p = mu_zeroforcing(&[h1.clone(), h2.clone()]).unwrap();
        unit_norms(&p);
        // oracle: the complement of h2 in C^2 is spanned by (sqrt(3)/2, -1/2)
        let expect = [0.75f64.sqrt(), -0.5];
        let phase = p.weights[0][0] / p.weights[0][0].norm();
        for (w, e) in p.weights[0].iter().zip(expect) {
            assert_abs_diff_eq!((w - phase * e).norm(), 0.0, epsilon = 1e-12);
        }
        for (k, j) in [(0, 1), (1, 0)] {
            let chans = [&h1, &h2];
            let leak = dot(chans[j], &p.weights[k]).norm_sqr();
            let sig = dot(chans[k], &p.weights[k]).norm_sqr();
            assert!(10.0 * (leak / sig).log10() <= -100.0 || leak == 0.0);
        }
    }

    #[test]
    fn zf_names_dependent_users() {
        let mut rng = stream(5, Purpose::Synthetic, 0);
        let a = random_channel(&mut rng, 8);
        let b = random_channel(&mut rng, 8);
        let a2: Vec<Complex64> = a.iter().map(|x| x * c(0.0, -2.0)).collect();
        match mu_zeroforcing(&[a, b, a2]) {
            Err(Error::RankDeficient { users }) => assert_eq!(users, vec![0, 2]),
            other => panic!("{other:?}"),
        }
        let mut rng = stream(6, Purpose::Synthetic, 0);
        let too_many: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 2)).collect();
        assert!(matches!(mu_zeroforcing(&too_many), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn gev_single_user_is_matched_filter() {
        let mut rng = stream(7, Purpose::Synthetic, 0);
        let h = random_channel(&mut rng, 16);
        let g = mu_gev(std::slice::from_ref(&h), 0.3).unwrap();
        let s = mu_steering(std::slice::from_ref(&h)).unwrap();
        unit_norms(&g);
        assert_abs_diff_eq!(dot(&g.weights[0], &s.weights[0]).norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn gev_limits() {
        let mut rng = stream(8, Purpose::Synthetic, 0);
        let chans: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 8)).collect();
        let hn = norm(&chans[0]).powi(2);
        let s = mu_steering(&chans).unwrap();
        let z = mu_zeroforcing(&chans).unwrap();
        let hi = mu_gev(&chans, 1e6 * hn).unwrap();
        let lo = mu_gev(&chans, 1e-9 * hn).unwrap();
        for k in 0..3 {
            assert!(dot(&hi.weights[k], &s.weights[k]).norm() > 1.0 - 1e-5);
            assert!(dot(&lo.weights[k], &z.weights[k]).norm() > 1.0 - 1e-6);
        }
        assert!(mu_gev(&chans, 0.0).is_err());
    }

    #[test]
    fn gev_maximizes_slnr() {
        let mut rng = stream(9, Purpose::Synthetic, 0);
        for _ in 0..50 {
            let chans: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 8)).collect();
            let noise = 0.5;
            let g = mu_gev(&chans, noise).unwrap();
            let s = mu_steering(&chans).unwrap();
            let z = mu_zeroforcing(&chans).unwrap();
            for k in 0..3 {
                let best = slnr(&chans, k, &g.weights[k], noise);
                assert!(best >= slnr(&chans, k, &s.weights[k], noise) - 1e-9);
                assert!(best >= slnr(&chans, k, &z.weights[k], noise) - 1e-9);
                for _ in 0..50 {
                    let v = normalized(&random_channel(&mut rng, 8)).unwrap();
                    assert!(best >= slnr(&chans, k, &v, noise) - 1e-9);
                }
            }
        }
    }

    #[test]
    fn sum_rate_unit_snr() {
        let h = vec![c(1.0, 0.0)];
        let p = mu_steering(std::slice::from_ref(&h)).unwrap();
        assert_abs_diff_eq!(sum_rate(&p, &[h], 1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gev_usually_beats_others_in_sum_rate() {
        let mut rng = stream(10, Purpose::Synthetic, 0);
        let mut wins = 0;
        for _ in 0..1000 {
            let chans: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 8)).collect();
            let noise = 1.0;
            let r = |p: PrecoderSet| sum_rate(&p, &chans, noise);
            let g = r(mu_gev(&chans, noise).unwrap());
            if g >= r(mu_zeroforcing(&chans).unwrap()) - 1e-9 && g >= r(mu_steering(&chans).unwrap()) - 1e-9 {
                wins += 1;
            }
        }
        assert!(wins >= 950, "{wins}");
    }

    #[test]
    fn quantization_loss_is_reported() {
        let mut rng = stream(11, Purpose::Synthetic, 0);
        let chans: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 16)).collect();
        let p = mu_steering(&chans).unwrap();
        let q = quantize_precoders(&p, 4);
        unit_norms(&q);
        assert!(quantization_loss(&p, &chans, 1.0, 4).is_finite());
    }

    fn cluster(departure: Vec3, arrival: Vec3, gain_db: f64) -> ClusterGain {
        ClusterGain {
            gain_db,
            phase: 0.0,
            penetration_db: 0.0,
            blocker_db: 0.0,
            departure,
            arrival,
            excess_delay_ns: 0.0,
        }
    }

    struct Rig {
        tx: Codebook,
        orient: Orientation,
        ue: UeAntennaState,
        rx: Vec<Codebook>,
        body: Orientation,
    }

    fn rig() -> Rig {
        let g = ArrayGeometry::new(4, 8);
        let tx = build_codebook(&g, &Sector::default(), 1, 4).unwrap();
        let ue = UeAntennaState::new(ArrayGeometry::ue_subarray(), GripMode::Freespace);
        let rx = ue_codebooks(&ue, 4, 4).unwrap();
        Rig {
            tx,
            orient: Orientation::wrapped(90.0, 90.0),
            ue,
            rx,
            body: Orientation::wrapped(0.0, 90.0),
        }
    }

    fn select(r: &Rig, cs: &[ClusterGain]) -> BeamPair {
        select_beam_pair(cs, &r.tx, &r.orient, &r.ue, &r.rx, &r.body).unwrap()
    }

    #[test]
    fn los_cluster_on_beam_direction() {
        let r = rig();
        let beam = &r.tx.finest()[5];
        let dep = r.orient.to_world(beam.az_deg, beam.el_deg);
        let p = select(&r, &[cluster(dep, -dep, -80.0)]);
        assert_eq!(p.tx_beam, 5);
        assert!(p.bf_gain_db > 10.0);
    }

    #[test]
    fn blocked_dominant_cluster_is_skipped() {
        let r = rig();
        let a = r.orient.to_world(-30.0, 0.0);
        let b = r.orient.to_world(35.0, 5.0);
        let arr_a = Vec3::from_bearing(10.0, 0.0);
        let arr_b = Vec3::from_bearing(200.0, 0.0);
        let cs = [cluster(a, arr_a, f64::NEG_INFINITY), cluster(b, arr_b, -95.0)];
        let p = select(&r, &cs);
        // brute-force oracle over every tuple with only the surviving cluster
        let t = CouplingTable::new(&cs[1..], &r.tx, &r.orient, &r.ue, &r.rx, &r.body).unwrap();
        let mut best = (0, 0, 0, f64::NEG_INFINITY);
        for e in t.entries() {
            if e.3 > best.3 {
                best = e;
            }
        }
        assert_eq!((p.tx_beam, p.subarray, p.rx_beam), (best.0, best.1, best.2));
    }

    #[test]
    fn ties_go_to_lowest_tuple() {
        let t = CouplingTable {
            power: vec![1.0, 0.5],
            tx: vec![vec![0.1, 0.2], vec![2.0, 1.0], vec![1.0, 3.0]],
            rx: vec![((0, 0), vec![1.0, 1.0]), ((1, 2), vec![1.0, 1.0]), ((2, 0), vec![0.5, 0.5])],
        };
        // beams 1 and 2 both couple 2.5 on either of the first two rx candidates
        let p = t.best();
        assert_eq!((p.tx_beam, p.subarray, p.rx_beam), (1, 0, 0));
    }

    #[test]
    fn single_candidate_matches_table() {
        let r = rig();
        let cs = [
            cluster(r.orient.to_world(-20.0, 3.0), Vec3::from_bearing(170.0, 0.0), -90.0),
            cluster(r.orient.to_world(25.0, -4.0), Vec3::from_bearing(60.0, 5.0), -97.0),
            cluster(r.orient.to_world(0.0, 0.0), Vec3::from_bearing(0.0, 0.0), f64::NEG_INFINITY),
        ];
        let t = CouplingTable::new(&cs, &r.tx, &r.orient, &r.ue, &r.rx, &r.body).unwrap();
        for (tb, s, b, g) in t.entries() {
            let one = candidate_gain_db(&cs, &r.tx, &r.orient, tb, &r.ue, &r.rx[s], s, b, &r.body).unwrap();
            assert_abs_diff_eq!(one, g, epsilon = 1e-9);
        }
    }

    #[test]
    fn empty_cluster_set_is_error() {
        let r = rig();
        assert!(select_beam_pair(&[], &r.tx, &r.orient, &r.ue, &r.rx, &r.body).is_err());
    }

    #[test]
    fn effective_channel_matches_beam_gain() {
        let r = rig();
        let beam = &r.tx.finest()[3];
        let dep = r.orient.to_world(beam.az_deg, beam.el_deg);
        let cs = [cluster(dep, -dep, -60.0)];
        let h = effective_channel(&r.tx.geometry, &r.orient, &cs).unwrap();
        let w = normalized(beam.complex_weights()).unwrap();
        let t = CouplingTable::new(&cs, &r.tx, &r.orient, &r.ue, &r.rx, &r.body).unwrap();
        let expect = t.power[0] * t.tx[3][0];
        assert_abs_diff_eq!(dot(&h, &w).norm_sqr() / expect, 1.0, epsilon = 1e-9);
    }

    proptest::proptest! {
        #[test]
        fn phase_rotation_invariance(seed in 0u64..1000, theta in 0.0..std::f64::consts::TAU) {
            let mut rng = stream(seed, Purpose::Synthetic, 0);
            let chans: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 8)).collect();
            let mut rot = chans.clone();
            for x in &mut rot[1] {
                *x *= Complex64::from_polar(1.0, theta);
            }
            for (a, b) in [
                (mu_steering(&chans).unwrap(), mu_steering(&rot).unwrap()),
                (mu_zeroforcing(&chans).unwrap(), mu_zeroforcing(&rot).unwrap()),
                (mu_gev(&chans, 0.7).unwrap(), mu_gev(&rot, 0.7).unwrap()),
            ] {
                proptest::prop_assert!((sum_rate(&a, &chans, 0.7) - sum_rate(&b, &rot, 0.7)).abs() < 1e-9);
                for k in 0..3 {
                    let d = slnr(&chans, k, &a.weights[k], 0.7) - slnr(&rot, k, &b.weights[k], 0.7);
                    proptest::prop_assert!(d.abs() < 1e-9 * slnr(&chans, k, &a.weights[k], 0.7).max(1.0));
                }
            }
        }

        #[test]
        fn zf_null_depth(seed in 0u64..1000, k in 1usize..5) {
            let mut rng = stream(seed, Purpose::Synthetic, 1);
            let chans: Vec<_> = (0..k).map(|_| random_channel(&mut rng, 16)).collect();
            let p = mu_zeroforcing(&chans).unwrap();
            for (i, w) in p.weights.iter().enumerate() {
                proptest::prop_assert!((norm(w) - 1.0).abs() < 1e-9);
                for (j, h) in chans.iter().enumerate() {
                    if i != j {
                        proptest::prop_assert!(dot(w, h).norm() <= 1e-10 * norm(h));
                    }
                }
            }
        }
    }
}
