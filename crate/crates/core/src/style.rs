//! Cosine Gram matrices and multi-layer style vectors.
//!
//! For a feature map with channels `F_1..F_N` flattened over space,
//! `G_ij = <F_i, F_j> / (|F_i| |F_j|)`. A channel with zero norm gets a unit
//! diagonal entry and zero off-diagonals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Embedding, EmbeddingKind, FeatureMap, FeaturePyramid};
use crate::histogram::Histogram;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::validation(format!(
                "gram matrix of order {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Upper triangle including the diagonal, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            out.extend_from_slice(&self.values[i * self.n + i..(i + 1) * self.n]);
        }
        out
    }

    pub fn from_upper_triangle(n: usize, tri: &[f64]) -> Result<Self> {
        if tri.len() != n * (n + 1) / 2 {
            return Err(Error::validation(format!(
                "upper triangle of order {n} needs {} values, got {}",
                n * (n + 1) / 2,
                tri.len()
            )));
        }
        let mut values = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                values[i * n + j] = tri[k];
                values[j * n + i] = tri[k];
                k += 1;
            }
        }
        Ok(Self { n, values })
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.values
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &v)| v)
    }
}

pub fn gram(f: &FeatureMap) -> GramMatrix {
    let n = f.channels();
    let mut dots = vec![0.0f64; n * n];
    for cell in f.data().chunks_exact(n) {
        for i in 0..n {
            let a = cell[i] as f64;
            if a == 0.0 {
                continue;
            }
            let row = &mut dots[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += a * cell[j] as f64;
            }
        }
    }
    let norms: Vec<f64> = (0..n).map(|i| dots[i * n + i].sqrt()).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        if norms[i] > 0.0 {
            values[i * n + i] = 1.0;
        } else {
            values[i * n + i] = 1.0;
            continue;
        }
        for j in i + 1..n {
            if norms[j] == 0.0 {
                continue;
            }
            let c = (dots[i * n + j] / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    GramMatrix { n, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub layer: usize,
    pub n: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyleVector {
    pub data: Vec<f64>,
    pub layout: Vec<LayerSlot>,
}

impl StyleVector {
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    /// Rebuilds the per-layer Gram matrices from the packed triangles.
    pub fn reconstruct(&self) -> Result<Vec<GramMatrix>> {
        let mut off = 0;
        let mut out = Vec::with_capacity(self.layout.len());
        for slot in &self.layout {
            out.push(GramMatrix::from_upper_triangle(slot.n, &self.data[off..off + slot.len])?);
            off += slot.len;
        }
        Ok(out)
    }

    pub fn to_embedding(&self) -> Embedding {
        Embedding {
            kind: EmbeddingKind::Style,
            data: self.data.clone(),
        }
    }

    /// Packs the vector as a single `(1, 1, dim)` layer for the feature
    /// file cache. Values are narrowed to `f32`.
    pub fn to_pyramid(&self, source_id: &str) -> Result<FeaturePyramid> {
        let map = FeatureMap::new(1, 1, self.dim(), self.data.iter().map(|&v| v as f32).collect())?;
        FeaturePyramid::new(vec![map], "style", source_id)
    }
}

/// Concatenates the Gram upper triangles of the selected layers in the order
/// given.
pub fn style_vector(p: &FeaturePyramid, layers: &[usize]) -> Result<StyleVector> {
    if layers.is_empty() {
        return Err(Error::validation("style vector needs at least one layer"));
    }
    let mut data = Vec::new();
    let mut layout = Vec::with_capacity(layers.len());
    for &l in layers {
        let map = p.layers.get(l).ok_or_else(|| {
            Error::validation(format!("layer index {l} out of range for {} layers", p.layers.len()))
        })?;
        let tri = gram(map).upper_triangle();
        layout.push(LayerSlot {
            layer: l,
            n: map.channels(),
            len: tri.len(),
        });
        data.extend(tri);
    }
    Ok(StyleVector { data, layout })
}

pub fn style_vector_all(p: &FeaturePyramid) -> Result<StyleVector> {
    let all: Vec<usize> = (0..p.layers.len()).collect();
    style_vector(p, &all)
}

pub fn average_gram(grams: &[GramMatrix]) -> Result<GramMatrix> {
    let first = grams.first().ok_or_else(|| Error::validation("cannot average an empty list of gram matrices"))?;
    let n = first.n;
    if let Some(g) = grams.iter().find(|g| g.n != n) {
        return Err(Error::validation(format!("gram order mismatch: {} vs {n}", g.n)));
    }
    let mut values = vec![0.0; n * n];
    for g in grams {
        for (acc, v) in values.iter_mut().zip(&g.values) {
            *acc += v;
        }
    }
    let count = grams.len() as f64;
    for v in &mut values {
        *v /= count;
    }
    Ok(GramMatrix { n, values })
}

/// Density of off-diagonal entries over `[-1, 1]`.
pub fn gram_density(g: &GramMatrix, bins: usize, log_scale: bool) -> Result<Histogram> {
    let mut h = Histogram::from_values(g.off_diagonal(), -1.0, 1.0, bins)?;
    h.log_scale = log_scale;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, n: usize, data: Vec<f32>) -> FeatureMap {
        FeatureMap::new(h, w, n, data).unwrap()
    }

    #[test]
    fn orthogonal_channels_give_identity() {
        let f = map(1, 2, 2, vec![1.0, 0.0, 0.0, 3.0]);
        assert_eq!(gram(&f), GramMatrix::identity(2));
    }

    #[test]
    fn duplicated_channel_has_unit_cosine() {
        let f = map(1, 3, 3, vec![1.0, 1.0, 0.5, 2.0, 2.0, -1.0, -0.5, -0.5, 4.0]);
        let g = gram(&f);
        assert!((g.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((g.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_convention() {
        let f = map(1, 2, 2, vec![1.0, 0.0, 2.0, 0.0]);
        let g = gram(&f);
        assert_eq!(g.values(), [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn brute_force_fixture() {
        let data: Vec<f32> = vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75, 3.0, 1.0, 0.0, -2.0, 0.5, 1.25];
        let f = map(2, 2, 3, data.clone());
        let g = gram(&f);
        let chan = |c: usize| -> Vec<f64> { (0..4).map(|p| data[p * 3 + c] as f64).collect() };
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (chan(i), chan(j));
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((g.get(i, j) - dot / (na * nb)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn style_vector_dims() {
        let layer = |n: usize| map(2, 2, n, (0..4 * n).map(|i| (i % 7) as f32).collect());
        let p = FeaturePyramid::new(vec![layer(16), layer(32), layer(64)], "b", "s").unwrap();
        assert_eq!(style_vector(&p, &[0]).unwrap().dim(), 136);
        let all = style_vector_all(&p).unwrap();
        assert_eq!(all.dim(), 2744);
        assert!(style_vector(&p, &[3]).is_err());
        assert!(style_vector(&p, &[]).is_err());
        let back = all.reconstruct().unwrap();
        for (l, g) in back.iter().enumerate() {
            assert_eq!(*g, gram(&p.layers[l]));
        }
    }

    #[test]
    fn spatial_permutation_leaves_style_unchanged() {
        let (h, w, n) = (3, 4, 5);
        let data: Vec<f32> = (0..h * w * n).map(|i| ((i * 37 % 23) as f32 - 11.0) / 7.0).collect();
        let perm = [7usize, 2, 11, 0, 5, 9, 1, 3, 10, 4, 8, 6];
        let mut permuted = vec![0.0f32; data.len()];
        for (dst, &src) in perm.iter().enumerate() {
            permuted[dst * n..(dst + 1) * n].copy_from_slice(&data[src * n..(src + 1) * n]);
        }
        let a = FeaturePyramid::new(vec![map(h, w, n, data)], "b", "s").unwrap();
        let b = FeaturePyramid::new(vec![map(h, w, n, permuted)], "b", "s").unwrap();
        let va = style_vector_all(&a).unwrap();
        let vb = style_vector_all(&b).unwrap();
        for (x, y) in va.data.iter().zip(&vb.data) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn averaging() {
        let i = GramMatrix::identity(3);
        assert_eq!(average_gram(std::slice::from_ref(&i)).unwrap(), i);
        assert_eq!(average_gram(&[i.clone(), i.clone()]).unwrap(), i);
        let a = GramMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let b = GramMatrix::new(2, vec![1.0, -0.25, -0.25, 1.0]).unwrap();
        let m = average_gram(&[a, b]).unwrap();
        assert_eq!(m.values(), [1.0, 0.125, 0.125, 1.0]);
        assert!(average_gram(&[i, GramMatrix::identity(2)]).is_err());
        assert!(average_gram(&[]).is_err());
    }

    #[test]
    fn density_placement() {
        let h = gram_density(&GramMatrix::identity(4), 10, true).unwrap();
        assert!((h.integral() - 1.0).abs() <= 1e-9);
        let zero_bin = h.bin_of(0.0);
        assert!((h.density[zero_bin] * h.bin_width() - 1.0).abs() < 1e-12);
        assert!(h.log_scale);
        let ones = GramMatrix::new(3, vec![1.0; 9]).unwrap();
        let h = gram_density(&ones, 8, false).unwrap();
        assert!((h.density[h.bin_of(1.0)] * h.bin_width() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gram_invariants(h in 1usize..4, w in 1usize..4, n in 1usize..6, seed in any::<u64>()) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let data: Vec<f32> = (0..h * w * n)
                .map(|_| if rng.next_f64() < 0.2 { 0.0 } else { rng.uniform(-3.0, 3.0) as f32 })
                .collect();
            let g = gram(&map(h, w, n, data));
            for i in 0..n {
                prop_assert_eq!(g.get(i, i), 1.0);
                for j in 0..n {
                    prop_assert!((g.get(i, j) - g.get(j, i)).abs() <= 1e-6);
                    prop_assert!(g.get(i, j).abs() <= 1.0 + 1e-6);
                }
            }
        }
    }
}
