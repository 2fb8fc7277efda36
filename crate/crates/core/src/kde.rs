//! Dataset representation and unnormalized KDE evaluation.

use std::io;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::util::{dist_sq, Fnv1a, KahanSum};

/// An ordered set of `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Domain(format!("dataset needs n >= 1 and d >= 1, got {n}x{d}")));
        }
        if data.len() != n * d {
            return Err(Error::Domain(format!(
                "buffer length {} does not match {n}x{d}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Domain("dataset needs at least one point".into()));
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Domain(format!(
                    "point {i} has dimension {} but expected {d}",
                    r.len()
                )));
            }
        }
        Self::from_flat(rows.into_iter().flatten().collect(), n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires n >= 1
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Order-sensitive content hash, used to tie sketches to their source.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.n as u64);
        h.write_u64(self.d as u64);
        for &v in &self.data {
            h.write_f64(v);
        }
        h.finish()
    }

    /// Loads a dataset from CSV: one point per row, no header, decimal
    /// floats. Ragged rows are rejected.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv(file)
    }

    pub fn read_csv(reader: impl io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(format!("csv row {}: {e}", i + 1)))?;
            let mut row = Vec::with_capacity(record.len());
            for field in record.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("csv row {}: bad float `{field}`", i + 1)))?;
                row.push(v);
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path.as_ref())?;
        for p in self.iter_points() {
            wtr.write_record(p.iter().map(|v| format!("{v}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A dataset paired with a kernel, evaluable as the unnormalized KDE
/// `K̄_M(x) = Σ_m κ(‖x − m‖² / σ²)`.
#[derive(Debug, Clone)]
pub struct KdeInstance {
    data: Dataset,
    kernel: KernelSpec,
}

impl KdeInstance {
    pub fn new(data: Dataset, kernel: KernelSpec) -> Self {
        Self { data, kernel }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn into_data(self) -> Dataset {
        self.data
    }

    /// Evaluates the unnormalized KDE at `x`. The result lies in `[0, n]`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.data.dim() {
            return Err(Error::Domain(format!(
                "query has dimension {} but dataset has {}",
                x.len(),
                self.data.dim()
            )));
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// Evaluation without the dimension check; `x.len()` must equal `d`.
    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        evaluate_raw(&self.data, &self.kernel, x)
    }

    /// Evaluates many queries; elementwise identical to [`Self::evaluate`],
    /// order preserved. Queries are processed in parallel.
    pub fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for (i, x) in xs.iter().enumerate() {
            if x.len() != self.data.dim() {
                return Err(Error::Domain(format!(
                    "query {i} has dimension {} but dataset has {}",
                    x.len(),
                    self.data.dim()
                )));
            }
        }
        Ok(xs.par_iter().map(|x| self.evaluate_unchecked(x)).collect())
    }
}

/// Unnormalized KDE value `Σ_m κ(‖x − m‖² / σ²)` over a borrowed dataset.
/// `x.len()` must equal `data.dim()`.
pub(crate) fn evaluate_raw(data: &Dataset, kernel: &KernelSpec, x: &[f64]) -> f64 {
    let inv_bw_sq = 1.0 / (kernel.bandwidth() * kernel.bandwidth());
    let mut acc = KahanSum::new();
    for m in data.iter_points() {
        acc.add(kernel.kappa_raw(dist_sq(x, m) * inv_bw_sq));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn gaussian() -> KernelSpec {
        KernelSpec::new(KernelKind::Gaussian, 1.0).unwrap()
    }

    #[test]
    fn evaluate_singleton_center() {
        let inst = KdeInstance::new(Dataset::from_rows(vec![vec![0.0]]).unwrap(), gaussian());
        assert_eq!(inst.evaluate(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_symmetric_pair() {
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![-1.0], vec![1.0]]).unwrap(),
            gaussian(),
        );
        assert_relative_eq!(
            inst.evaluate(&[0.0]).unwrap(),
            2.0 * (-1.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn evaluate_box_counts_centers_in_range() {
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![0.0], vec![10.0]]).unwrap(),
            KernelSpec::new(KernelKind::Box, 1.0).unwrap(),
        );
        assert_eq!(inst.evaluate(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_applies_bandwidth_once() {
        let inst = KdeInstance::new(
            Dataset::from_rows(vec![vec![0.0, 0.0]]).unwrap(),
            KernelSpec::new(KernelKind::Gaussian, 2.0).unwrap(),
        );
        // t = (3² + 4²) / 2² = 6.25
        assert_relative_eq!(inst.evaluate(&[3.0, 4.0]).unwrap(), (-6.25f64).exp());
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let inst = KdeInstance::new(Dataset::from_rows(vec![vec![0.0, 1.0]]).unwrap(), gaussian());
        assert!(inst.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn batch_matches_sequential_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> =
            (0..20).map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let inst = KdeInstance::new(Dataset::from_rows(rows).unwrap(), gaussian());
        let xs: Vec<Vec<f64>> =
            (0..5).map(|_| (0..5).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let batch = inst.evaluate_batch(&xs).unwrap();
        assert_eq!(batch.len(), 5);
        for (x, got) in xs.iter().zip(&batch) {
            assert_eq!(*got, inst.evaluate(x).unwrap());
        }
        assert!(inst.evaluate_batch(&[]).unwrap().is_empty());
    }

    #[test]
    fn evaluation_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> =
            (0..10).map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let shift: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();

        let shifted_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&shift).map(|(a, s)| a + s).collect())
            .collect();
        let x_shifted: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| a + s).collect();

        let a = KdeInstance::new(Dataset::from_rows(rows).unwrap(), gaussian());
        let b = KdeInstance::new(Dataset::from_rows(shifted_rows).unwrap(), gaussian());
        assert_relative_eq!(
            a.evaluate(&x).unwrap(),
            b.evaluate(&x_shifted).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn evaluation_at_a_center_is_at_least_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> =
            (0..8).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let inst = KdeInstance::new(Dataset::from_rows(rows.clone()).unwrap(), gaussian());
        for r in &rows {
            assert!(inst.evaluate(r).unwrap() >= 1.0);
        }
    }

    #[test]
    fn permutation_changes_value_only_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut permuted = rows.clone();
        permuted.shuffle(&mut rng);
        let x = vec![0.1, -0.2, 0.3];
        let a = KdeInstance::new(Dataset::from_rows(rows).unwrap(), gaussian());
        let b = KdeInstance::new(Dataset::from_rows(permuted).unwrap(), gaussian());
        assert_relative_eq!(
            a.evaluate(&x).unwrap(),
            b.evaluate(&x).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        assert!(Dataset::from_rows(vec![]).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Dataset::from_rows(vec![vec![f64::NAN]]).is_err());
        assert!(Dataset::from_flat(vec![1.0, 2.0, 3.0], 2, 2).is_err());
    }

    #[test]
    fn csv_round_trip_and_ragged_rejection() {
        let csv = "1.0,2.0\n3.5,-4.25\n";
        let ds = Dataset::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.point(1), &[3.5, -4.25]);

        let ragged = "1.0,2.0\n3.0\n";
        assert!(Dataset::read_csv(ragged.as_bytes()).is_err());

        let not_a_number = "1.0,two\n";
        assert!(Dataset::read_csv(not_a_number.as_bytes()).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        ds.save_csv(&path).unwrap();
        let back = Dataset::load_csv(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn fingerprint_is_order_sensitive() {
        let a = Dataset::from_rows(vec![vec![1.0], vec![2.0]]).unwrap();
        let b = Dataset::from_rows(vec![vec![2.0], vec![1.0]]).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
