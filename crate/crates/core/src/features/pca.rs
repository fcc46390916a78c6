use nalgebra::{DMatrix, SymmetricEigen};

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcaOptions {
    /// Divide each centred feature by its sample standard deviation before
    /// fitting. Constant features are left unscaled.
    pub standardize: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self { standardize: true }
    }
}

/// Two-component principal axis projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-feature divisor applied after centring, when standardizing.
    pub scale: Option<Vec<f64>>,
    /// Orthonormal rows, largest-magnitude entry of each positive.
    pub components: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance, descending.
    pub explained_variance: [f64; 2],
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn whiten(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let c = v - self.mean[i];
                match &self.scale {
                    Some(s) => c / s[i],
                    None => c,
                }
            })
            .collect()
    }

    /// `(x - mean) / scale` projected on both components.
    pub fn project(&self, x: &[f64]) -> Result<[f64; 2], FeatureError> {
        if x.len() != self.dim() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let w = self.whiten(x);
        Ok([dot(&w, &self.components[0]), dot(&w, &self.components[1])])
    }

    /// Maps a projected point back into feature space.
    pub fn back_project(&self, y: [f64; 2]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let w = y[0] * self.components[0][i] + y[1] * self.components[1][i];
                let w = match &self.scale {
                    Some(s) => w * s[i],
                    None => w,
                };
                w + self.mean[i]
            })
            .collect()
    }
}

/// `(statics - mean) · componentsᵀ`, with the model's scaling applied.
pub fn pca_project(model: &PcaModel, statics: &[f64]) -> Result<[f64; 2], FeatureError> {
    model.project(statics)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the top two eigenvectors of the sample covariance.
pub fn pca_fit(data: &[Vec<f64>], opts: PcaOptions) -> Result<PcaModel, FeatureError> {
    if data.len() < 3 {
        return Err(FeatureError::InsufficientData(format!(
            "PCA needs at least 3 vectors, got {}",
            data.len()
        )));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(FeatureError::InsufficientData(
            "PCA needs at least 2 dimensions".into(),
        ));
    }
    if let Some(bad) = data.iter().find(|v| v.len() != d) {
        return Err(FeatureError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for v in data {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let centred = DMatrix::from_fn(data.len(), d, |r, c| data[r][c] - mean[c]);
    if centred.iter().all(|&v| v == 0.0) {
        return Err(FeatureError::DegenerateData(
            "all input vectors are identical".into(),
        ));
    }
    let scale = opts.standardize.then(|| {
        (0..d)
            .map(|c| {
                let ss: f64 = centred.column(c).iter().map(|v| v * v).sum();
                let sd = (ss / (n - 1.0)).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect::<Vec<f64>>()
    });
    let mut x = centred;
    if let Some(s) = &scale {
        for (c, sd) in s.iter().enumerate() {
            x.column_mut(c).iter_mut().for_each(|v| *v /= sd);
        }
    }
    let cov = (x.transpose() * &x) / (n - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let component = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let mut v: Vec<f64> = col.iter().copied().collect();
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    Ok(PcaModel {
        mean,
        scale,
        components: [component(0), component(1)],
        explained_variance: [
            eig.eigenvalues[order[0]].max(0.0),
            eig.eigenvalues[order[1]].max(0.0),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW: PcaOptions = PcaOptions { standardize: false };

    fn line_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let dir: Vec<f64> = (0..39).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
        let norm = dot(&dir, &dir).sqrt();
        let dir: Vec<f64> = dir.iter().map(|x| x / norm).collect();
        let data = (0..20)
            .map(|k| {
                let t = k as f64 * 0.37 - 3.0;
                dir.iter().enumerate().map(|(i, d)| i as f64 + t * d).collect()
            })
            .collect();
        (data, dir)
    }

    #[test]
    fn line_has_one_component() {
        let (data, dir) = line_data();
        let m = pca_fit(&data, RAW).unwrap();
        assert!(m.explained_variance[1].abs() < 1e-9);
        assert!((dot(&m.components[0], &dir).abs() - 1.0).abs() < 1e-9);
        assert!(dot(&m.components[0], &m.components[1]).abs() < 1e-9);
        assert!((dot(&m.components[1], &m.components[1]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_examples() {
        let (mut data, _) = line_data();
        for (k, v) in data.iter_mut().enumerate() {
            v[3] += (k as f64 * 1.3).sin();
        }
        let m = pca_fit(&data, RAW).unwrap();
        let p = m.project(&m.mean).unwrap();
        assert_eq!(p, [0.0, 0.0]);
        let x: Vec<f64> = m.mean.iter().zip(&m.components[0]).map(|(a, b)| a + b).collect();
        let p = m.project(&x).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && p[1].abs() < 1e-9);
        let x: Vec<f64> = x.iter().zip(&m.components[1]).map(|(a, b)| a + b).collect();
        let p = m.project(&x).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sign_convention() {
        let (data, _) = line_data();
        let m = pca_fit(&data, PcaOptions::default()).unwrap();
        for c in &m.components {
            let pivot = c.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let same = vec![vec![1.0; 39]; 5];
        assert!(matches!(pca_fit(&same, RAW), Err(FeatureError::DegenerateData(_))));
        assert!(matches!(
            pca_fit(&same[..2], RAW),
            Err(FeatureError::InsufficientData(_))
        ));
    }
}
