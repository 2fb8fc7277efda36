//! Johnson-Lindenstrauss projection with a one-sided distance guarantee.
//!
//! Matrices here are scaled so that squared distances never shrink (up to
//! verification slack) and grow by at most a `(1 + γ)` factor: a standard
//! two-sided matrix is drawn at the internal parameter `γ′ = γ/(2 + γ)`
//! and every entry is multiplied by `1/√(1 − γ′)`, which places squared
//! distance ratios in `[1, (1+γ′)/(1−γ′)] = [1, 1+γ]` exactly.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::Dataset;
use crate::util::dist_sq;

/// Entry distribution for the random projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JlFamily {
    GaussianEntries,
    Rademacher,
}

impl JlFamily {
    fn as_u8(self) -> u8 {
        match self {
            JlFamily::GaussianEntries => 0,
            JlFamily::Rademacher => 1,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(JlFamily::GaussianEntries),
            1 => Ok(JlFamily::Rademacher),
            other => Err(Error::Parse(format!("unknown sketch family tag {other}"))),
        }
    }
}

impl std::str::FromStr for JlFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(JlFamily::GaussianEntries),
            "rademacher" => Ok(JlFamily::Rademacher),
            other => Err(Error::Parse(format!("unknown sketch family `{other}`"))),
        }
    }
}

/// Default constant in the `w = ⌈c·ln((n+1)/δ)/min(1,γ²)⌉` dimension rule.
///
/// Sized so that the two-sided draw at the internal parameter `γ/(2+γ)`
/// passes an all-pairs verification with comfortable margin; 8 only covers
/// the per-pair failure rate.
pub const DEFAULT_C_JL: f64 = 32.0;

/// Default attempt budget for [`sketch_with_retry`].
pub const DEFAULT_MAX_ATTEMPTS: u32 = 16;

/// A dense `w × d` random projection matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JlMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    family: JlFamily,
    /// The one-sided error the matrix was scaled for. Zero for the identity
    /// hook and for matrices loaded from disk (the file format does not
    /// record it).
    gamma_target: f64,
    seed: u64,
}

/// A projection matrix together with the projected dataset it was applied to.
#[derive(Debug, Clone)]
pub struct SketchPair {
    pub pi: JlMatrix,
    pub projected: Dataset,
    /// Fingerprint of the source dataset, checked by recovery.
    pub source_fingerprint: u64,
    /// Number of draws it took to pass verification (1 when unverified).
    pub attempts: u32,
    /// Failure-probability budget left unverified: pairs involving the
    /// unknown mode cannot be checked ahead of solving, so retry-verified
    /// sketches certify the data pairs and carry half the budget here.
    pub residual_delta: f64,
}

/// Target sketch dimension `⌈c_jl · ln((n+1)/δ) / min(1, γ²)⌉`, at least 1.
pub fn target_dim(n: usize, gamma: f64, delta: f64, c_jl: f64) -> usize {
    let w = (c_jl * ((n as f64 + 1.0) / delta).ln() / gamma.powi(2).min(1.0)).ceil();
    if w >= 1.0 {
        w as usize
    } else {
        1
    }
}

/// Draws a fresh projection matrix. Deterministic given
/// `(seed, family, w, d)`.
pub fn make_jl(d: usize, w: usize, family: JlFamily, gamma_target: f64, seed: u64) -> JlMatrix {
    let gamma_prime = gamma_target / (2.0 + gamma_target);
    let scale = 1.0 / ((w as f64) * (1.0 - gamma_prime)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(w * d);
    match family {
        JlFamily::Rademacher => {
            for _ in 0..w * d {
                entries.push(if rng.random::<bool>() { scale } else { -scale });
            }
        }
        JlFamily::GaussianEntries => {
            for _ in 0..w * d {
                let z: f64 = rng.sample(StandardNormal);
                entries.push(z * scale);
            }
        }
    }
    JlMatrix { rows: w, cols: d, entries, family, gamma_target, seed }
}

impl JlMatrix {
    /// The `d × d` identity, useful as a distortion-free test hook.
    pub fn identity(d: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1.0;
        }
        JlMatrix { rows: d, cols: d, entries, family: JlFamily::Rademacher, gamma_target: 0.0, seed: 0 }
    }

    /// Builds a matrix from explicit entries (row-major).
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        family: JlFamily,
        gamma_target: f64,
        seed: u64,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Domain(format!(
                "entry buffer length {} does not match {rows}x{cols}",
                entries.len()
            )));
        }
        Ok(JlMatrix { rows, cols, entries, family, gamma_target, seed })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn family(&self) -> JlFamily {
        self.family
    }

    pub fn gamma_target(&self) -> f64 {
        self.gamma_target
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Matrix-vector product `Πv`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Domain(format!(
                "vector has dimension {} but projection takes {}",
                v.len(),
                self.cols
            )));
        }
        Ok(self.apply_unchecked(v))
    }

    fn apply_unchecked(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(r, x)| r * x).sum())
            .collect()
    }

    /// Writes the matrix in the binary sketch format: magic `KJLS`,
    /// version, dimensions, family, seed, then row-major little-endian
    /// doubles.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
        f.write_all(b"KJLS")?;
        f.write_all(&1u32.to_le_bytes())?;
        f.write_all(&(self.rows as u32).to_le_bytes())?;
        f.write_all(&(self.cols as u32).to_le_bytes())?;
        f.write_all(&[self.family.as_u8()])?;
        f.write_all(&self.seed.to_le_bytes())?;
        for &e in &self.entries {
            f.write_all(&e.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path.as_ref())?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != b"KJLS" {
            return Err(Error::Parse("not a sketch file (bad magic)".into()));
        }
        let mut u32buf = [0u8; 4];
        f.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != 1 {
            return Err(Error::Parse(format!("unsupported sketch file version {version}")));
        }
        f.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        f.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        let mut byte = [0u8; 1];
        f.read_exact(&mut byte)?;
        let family = JlFamily::from_u8(byte[0])?;
        let mut u64buf = [0u8; 8];
        f.read_exact(&mut u64buf)?;
        let seed = u64::from_le_bytes(u64buf);
        let mut entries = Vec::with_capacity(rows * cols);
        let mut fbuf = [0u8; 8];
        for _ in 0..rows * cols {
            f.read_exact(&mut fbuf)?;
            entries.push(f64::from_le_bytes(fbuf));
        }
        Ok(JlMatrix { rows, cols, entries, family, gamma_target: 0.0, seed })
    }
}

/// Projects every dataset point, producing a [`SketchPair`].
pub fn project(pi: &JlMatrix, data: &Dataset) -> Result<SketchPair> {
    if data.dim() != pi.cols {
        return Err(Error::Domain(format!(
            "dataset has dimension {} but projection takes {}",
            data.dim(),
            pi.cols
        )));
    }
    let flat: Vec<f64> = data
        .iter_points()
        .collect::<Vec<_>>()
        .par_iter()
        .flat_map_iter(|p| pi.apply_unchecked(p))
        .collect();
    let projected = Dataset::from_flat(flat, data.len(), pi.rows)?;
    Ok(SketchPair {
        pi: pi.clone(),
        projected,
        source_fingerprint: data.fingerprint(),
        attempts: 1,
        residual_delta: 0.0,
    })
}

/// Checks the one-sided guarantee on every point pair: squared distances
/// must not shrink (1e−12 relative slack) and must not grow beyond `1 + γ`.
pub fn verify_one_sided(pi: &JlMatrix, points: &Dataset, gamma: f64) -> Result<bool> {
    const SLACK: f64 = 1e-12;
    if points.dim() != pi.cols {
        return Err(Error::Domain(format!(
            "dataset has dimension {} but projection takes {}",
            points.dim(),
            pi.cols
        )));
    }
    let projected: Vec<Vec<f64>> = points.iter_points().map(|p| pi.apply_unchecked(p)).collect();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let orig = dist_sq(points.point(i), points.point(j));
            let proj = dist_sq(&projected[i], &projected[j]);
            if proj < orig * (1.0 - SLACK) {
                return Ok(false);
            }
            if proj > (1.0 + gamma) * orig * (1.0 + SLACK) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Draws projections at the designed dimension until one passes
/// [`verify_one_sided`] on the dataset points, incrementing the seed each
/// attempt.
///
/// Only data pairs can be verified here; pairs involving the yet-unknown
/// mode keep half the failure budget, recorded as `residual_delta`. The
/// dimension is therefore designed at `δ/2`.
pub fn sketch_with_retry(
    data: &Dataset,
    gamma: f64,
    delta: f64,
    family: JlFamily,
    seed: u64,
    max_attempts: u32,
) -> Result<SketchPair> {
    let w = target_dim(data.len(), gamma, delta / 2.0, DEFAULT_C_JL);
    sketch_with_retry_dim(data, w, gamma, delta, family, seed, max_attempts)
}

/// [`sketch_with_retry`] with an explicit sketch dimension.
pub fn sketch_with_retry_dim(
    data: &Dataset,
    w: usize,
    gamma: f64,
    delta: f64,
    family: JlFamily,
    seed: u64,
    max_attempts: u32,
) -> Result<SketchPair> {
    if max_attempts == 0 {
        return Err(Error::Domain("max_attempts must be at least 1".into()));
    }
    for attempt in 0..max_attempts {
        let pi = make_jl(data.dim(), w, family, gamma, seed.wrapping_add(attempt as u64));
        if verify_one_sided(&pi, data, gamma)? {
            let mut pair = project(&pi, data)?;
            pair.attempts = attempt + 1;
            pair.residual_delta = delta / 2.0;
            return Ok(pair);
        }
    }
    Err(Error::SketchFailure { attempts: max_attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        Dataset::from_rows(rows).unwrap()
    }

    #[test]
    fn target_dim_examples() {
        // ln((99+1)/δ) = 10 when δ = 100/e^10.
        let delta = 100.0 / (10.0f64).exp();
        assert_eq!(target_dim(99, 1.0, delta, 8.0), 80);

        // γ ≥ 1 behaves as γ = 1.
        assert_eq!(target_dim(99, 2.0, delta, 8.0), target_dim(99, 1.0, delta, 8.0));

        // Frozen from ⌈8·ln(1001/0.1)/0.05²⌉ evaluated directly.
        let expect = (8.0 * (1001.0f64 / 0.1).ln() / 0.0025f64).ceil() as usize;
        assert_eq!(target_dim(1000, 0.05, 0.1, 8.0), expect);
        assert_eq!(expect, 29_477);
    }

    #[test]
    fn make_jl_is_deterministic() {
        let a = make_jl(7, 5, JlFamily::Rademacher, 0.5, 99);
        let b = make_jl(7, 5, JlFamily::Rademacher, 0.5, 99);
        assert_eq!(a, b);
        let c = make_jl(7, 5, JlFamily::Rademacher, 0.5, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn rademacher_entries_take_two_values() {
        let gamma = 0.3f64;
        let m = make_jl(4, 6, JlFamily::Rademacher, gamma, 1);
        let scale = 1.0 / (6.0 * (1.0 - gamma / (2.0 + gamma))).sqrt();
        for &e in m.entries() {
            assert!(
                (e - scale).abs() < 1e-15 || (e + scale).abs() < 1e-15,
                "unexpected entry {e}"
            );
        }
    }

    #[test]
    fn expected_squared_norm_matches_designed_scale() {
        // E‖Πe₁‖² should be 1/(1−γ′) within 5% averaged over seeds.
        let gamma = 0.6f64;
        let designed = 1.0 / (1.0 - gamma / (2.0 + gamma));
        for family in [JlFamily::Rademacher, JlFamily::GaussianEntries] {
            let mut mean = 0.0;
            for seed in 0..20 {
                let m = make_jl(1, 10_000, family, gamma, seed);
                let img = m.apply(&[1.0]).unwrap();
                mean += img.iter().map(|v| v * v).sum::<f64>();
            }
            mean /= 20.0;
            assert!(
                (mean - designed).abs() <= 0.05 * designed,
                "{family:?}: mean {mean} vs designed {designed}"
            );
        }
    }

    #[test]
    fn project_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_dataset(&mut rng, 6, 4);
        let pair = project(&JlMatrix::identity(4), &data).unwrap();
        assert_eq!(pair.projected, data);
        assert_eq!(pair.source_fingerprint, data.fingerprint());
    }

    #[test]
    fn project_matches_naive_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pi = make_jl(5, 3, JlFamily::GaussianEntries, 0.4, 77);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = pi.apply(&x).unwrap();
        for r in 0..3 {
            let mut want = 0.0;
            for c in 0..5 {
                want += pi.entries()[r * 5 + c] * x[c];
            }
            assert_relative_eq!(got[r], want, max_relative = 1e-12);
        }
        let zero = pi.apply(&[0.0; 5]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn verify_identity_and_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_dataset(&mut rng, 8, 3);
        let id = JlMatrix::identity(3);
        assert!(verify_one_sided(&id, &data, 0.0).unwrap());

        // 2·I multiplies squared distances by 4: fails below γ = 3.
        let entries: Vec<f64> =
            JlMatrix::identity(3).entries().iter().map(|e| 2.0 * e).collect();
        let two_id =
            JlMatrix::from_entries(3, 3, entries, JlFamily::Rademacher, 0.0, 0).unwrap();
        assert!(!verify_one_sided(&two_id, &data, 2.9).unwrap());
        assert!(verify_one_sided(&two_id, &data, 3.0).unwrap());
    }

    #[test]
    fn verify_passes_at_designed_dimension_in_most_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_dataset(&mut rng, 50, 100);
        let gamma = 0.5;
        let w = target_dim(50, gamma, 0.1, 8.0);
        let mut passes = 0;
        for seed in 0..10 {
            let pi = make_jl(100, w, JlFamily::Rademacher, gamma, seed);
            if verify_one_sided(&pi, &data, gamma).unwrap() {
                passes += 1;
            }
        }
        assert!(passes >= 9, "only {passes}/10 seeds verified");
    }

    #[test]
    fn retry_is_vacuous_for_a_single_point() {
        let data = Dataset::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        let pair =
            sketch_with_retry_dim(&data, 1, 0.2, 0.1, JlFamily::Rademacher, 3, 1).unwrap();
        assert_eq!(pair.attempts, 1);
    }

    #[test]
    fn retry_succeeds_quickly_at_designed_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data = random_dataset(&mut rng, 60, 30);
        let mut within_three = 0;
        let trials = 100;
        for seed in 0..trials {
            match sketch_with_retry(&data, 0.3, 0.1, JlFamily::Rademacher, seed, 3) {
                Ok(pair) => {
                    assert!(pair.attempts <= 3);
                    assert_eq!(pair.residual_delta, 0.05);
                    within_three += 1;
                }
                Err(Error::SketchFailure { .. }) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(within_three >= 95, "only {within_three}/{trials} passed within 3 attempts");
    }

    #[test]
    fn retry_reports_failure_with_attempt_count() {
        // A 1-row projection of 3-d data cannot preserve all pairs.
        let data = Dataset::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        match sketch_with_retry_dim(&data, 1, 0.1, 0.1, JlFamily::Rademacher, 0, 4) {
            Err(Error::SketchFailure { attempts }) => assert_eq!(attempts, 4),
            other => panic!("expected sketch failure, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let pi = make_jl(6, 4, JlFamily::GaussianEntries, 0.25, 123);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proj.kjls");
        pi.save(&path).unwrap();
        let back = JlMatrix::load(&path).unwrap();
        assert_eq!(back.rows(), 4);
        assert_eq!(back.cols(), 6);
        assert_eq!(back.family(), JlFamily::GaussianEntries);
        assert_eq!(back.seed(), 123);
        assert_eq!(back.entries(), pi.entries());

        // Header layout: magic, version u32, w u32, d u32, family u8, seed u64.
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"KJLS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 6);
        assert_eq!(bytes[16], 0);
        assert_eq!(u64::from_le_bytes(bytes[17..25].try_into().unwrap()), 123);
        assert_eq!(bytes.len(), 25 + 24 * 8);
    }
}
