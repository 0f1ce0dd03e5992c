//! 2-D projections of embedding tables (PCA and exact t-SNE).

use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Exact t-SNE is O(n²) in time and memory.
pub const TSNE_MAX_POINTS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    Pca,
    Tsne,
}

impl ProjectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionMethod::Pca => "pca",
            ProjectionMethod::Tsne => "tsne",
        }
    }
}

impl FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(ProjectionMethod::Pca),
            "tsne" | "t-sne" => Ok(ProjectionMethod::Tsne),
            _ => Err(Error::Config(format!("unknown projection method {s:?}"))),
        }
    }
}

/// Top-2 principal directions of mean-centred data.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-norm, mutually orthogonal directions.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub coords: Vec<[f64; 2]>,
}

fn check_rows(data: &[Vec<f64>]) -> Result<usize> {
    if data.len() < 3 {
        return Err(Error::Validation(format!("projection needs at least 3 points, got {}", data.len())));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(Error::Validation("projection rows must share a positive dimension".into()));
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Validation("projection input contains non-finite values".into()));
    }
    Ok(d)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    // Fix the sign so the largest-magnitude entry is positive
    let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn pca(data: &[Vec<f64>]) -> Result<Pca> {
    let d = check_rows(data)?;
    let n = data.len();
    let mut mean = vec![0.0; d];
    for r in data {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let xc = DMatrix::from_fn(n, d, |i, j| data[i][j] - mean[j]);
    let denom = (n - 1) as f64;
    // Decompose whichever of the covariance (d×d) or Gram (n×n) matrix is smaller
    let (vals, dirs): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = xc.transpose() * &xc / denom;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order
            .iter()
            .take(2)
            .map(|&k| (eig.eigenvalues[k].max(0.0), eig.eigenvectors.column(k).iter().copied().collect()))
            .unzip()
    } else {
        let gram = &xc * xc.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        order
            .iter()
            .take(2)
            .map(|&k| {
                let u = eig.eigenvectors.column(k);
                let v = xc.transpose() * u;
                (eig.eigenvalues[k].max(0.0), v.iter().copied().collect())
            })
            .unzip()
    };
    let mut comps: Vec<Vec<f64>> = dirs;
    while comps.len() < 2 {
        comps.push(vec![0.0; d]);
    }
    for c in comps.iter_mut() {
        normalize(c);
    }
    // Re-orthogonalize the second direction against the first
    let dot: f64 = comps[0].iter().zip(&comps[1]).map(|(a, b)| a * b).sum();
    let first = comps[0].clone();
    comps[1].iter_mut().zip(&first).for_each(|(b, a)| *b -= dot * a);
    normalize(&mut comps[1]);
    let coords = (0..n)
        .map(|i| {
            let row = xc.row(i);
            let p = |c: &[f64]| row.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
            [p(&comps[0]), p(&comps[1])]
        })
        .collect();
    let [c0, c1]: [Vec<f64>; 2] = comps.try_into().expect("two components");
    let explained_variance = [vals.first().copied().unwrap_or(0.0), vals.get(1).copied().unwrap_or(0.0)];
    Ok(Pca { mean, components: [c0, c1], explained_variance, coords })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

fn squared_distances(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = data[i].iter().zip(&data[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional affinities with per-point precision found by bisection on
/// the entropy, then symmetrized and normalized to sum 1.
fn joint_affinities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di = &dist[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        // Shift by the nearest-neighbour distance for numerical range
        let dmin = di.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).fold(f64::INFINITY, f64::min);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut wsum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(di[j] - dmin) * beta).exp() };
                sum += row[j];
                wsum += row[j] * (di[j] - dmin);
            }
            let h = sum.ln() + beta * wsum / sum;
            if (h - target).abs() < 1e-5 {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        let sum: f64 = row.iter().sum();
        for j in 0..n {
            p[i * n + j] = row[j] / sum;
        }
    }
    let mut sym = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            sym[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
    }
    sym
}

/// Exact t-SNE to two dimensions. Perplexity is capped at (n - 1) / 3.
pub fn tsne(data: &[Vec<f64>], cfg: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    check_rows(data)?;
    let n = data.len();
    if n > TSNE_MAX_POINTS {
        return Err(Error::Validation(format!("t-SNE limited to {TSNE_MAX_POINTS} points, got {n}")));
    }
    let perplexity = cfg.perplexity.min((n - 1) as f64 / 3.0);
    let p = joint_affinities(&squared_distances(data), n, perplexity);

    let mut rng = rng_from_seed(cfg.seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];
    for it in 0..cfg.iterations {
        let exag = if it < cfg.exaggeration_iters { cfg.early_exaggeration } else { 1.0 };
        let momentum = if it < cfg.exaggeration_iters { 0.5 } else { 0.8 };
        let mut qsum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                qsum += 2.0 * v;
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = num[i * n + j];
                let coef = (exag * p[i * n + j] - (v / qsum).max(1e-12)) * v;
                g[0] += coef * (y[i][0] - y[j][0]);
                g[1] += coef * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for k in 0..2 {
                let same = (grad[i][k] > 0.0) == (update[i][k] > 0.0);
                gains[i][k] = if same { gains[i][k] * 0.8 } else { gains[i][k] + 0.2 };
                gains[i][k] = gains[i][k].max(0.01);
                update[i][k] = momentum * update[i][k] - cfg.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += update[i][k];
            }
        }
        let mx = y.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let my = y.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        for v in y.iter_mut() {
            v[0] -= mx;
            v[1] -= my;
        }
    }
    if y.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Validation("t-SNE produced non-finite coordinates".into()));
    }
    Ok(y)
}

/// Mean Euclidean distance over all unordered pairs; 0 for fewer than two
/// points.
pub fn mean_pairwise_distance<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += points[i].as_ref().iter().zip(points[j].as_ref()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Mean silhouette coefficient under Euclidean distance. Points in
/// singleton clusters score 0.
pub fn silhouette<P: AsRef<[f64]>>(points: &[P], labels: &[usize]) -> f64 {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let n = points.len();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    let mut sums = vec![0.0f64; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(points[i].as_ref(), points[j].as_ref());
            }
        }
        let own = labels[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectedPoint {
    pub segment_id: String,
    pub x: f64,
    pub y: f64,
    pub speaker: String,
    pub age_group: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    pub method: ProjectionMethod,
    pub points: Vec<ProjectedPoint>,
}

impl Projection2D {
    /// Fill per-point metadata from a lookup `segment_id -> (speaker, age_group, provenance)`.
    pub fn annotate<F>(&mut self, mut lookup: F)
    where
        F: FnMut(&str) -> Option<(String, String, String)>,
    {
        for p in &mut self.points {
            if let Some((s, a, v)) = lookup(&p.segment_id) {
                p.speaker = s;
                p.age_group = a;
                p.provenance = v;
            }
        }
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }

    /// CSV `segment_id,x,y,speaker,age_group,provenance`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["segment_id", "x", "y", "speaker", "age_group", "provenance"])
            .map_err(|e| Error::csv("projection", e))?;
        for p in &self.points {
            wtr.write_record([&p.segment_id, &format!("{:.6}", p.x), &format!("{:.6}", p.y), &p.speaker, &p.age_group, &p.provenance])
                .map_err(|e| Error::csv("projection", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<projection writer>", e))
    }
}

/// Project every entry of `table` to 2-D. The seed only affects t-SNE.
pub fn project_embeddings(table: &EmbeddingTable, method: ProjectionMethod, seed: u64) -> Result<Projection2D> {
    let ids: Vec<&str> = table.iter().map(|(k, _)| k).collect();
    let data: Vec<Vec<f64>> = table.iter().map(|(_, v)| v.iter().map(|&x| x as f64).collect()).collect();
    let coords = match method {
        ProjectionMethod::Pca => pca(&data)?.coords,
        ProjectionMethod::Tsne => tsne(&data, &TsneConfig { seed, ..TsneConfig::default() })?,
    };
    let points = ids
        .into_iter()
        .zip(coords)
        .map(|(id, [x, y])| ProjectedPoint { segment_id: id.to_string(), x, y, ..Default::default() })
        .collect();
    Ok(Projection2D { method, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn clusters(n_each: usize, dim: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for c in 0..2 {
            for _ in 0..n_each {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                // Centres differ by `sep` along a random-looking but fixed direction
                for (j, x) in v.iter_mut().enumerate() {
                    *x += c as f64 * sep * if j % 2 == 0 { 1.0 } else { -1.0 } / (dim as f64).sqrt();
                }
                data.push(v);
                labels.push(c);
            }
        }
        (data, labels)
    }

    #[test]
    fn rank_one_data() {
        let data: Vec<Vec<f64>> = (0..20).map(|i| (0..128).map(|j| i as f64 * (j as f64 + 1.0).sin()).collect()).collect();
        let p = pca(&data).unwrap();
        let var = |k: usize| {
            let m = p.coords.iter().map(|c| c[k]).sum::<f64>() / 20.0;
            p.coords.iter().map(|c| (c[k] - m).powi(2)).sum::<f64>()
        };
        assert!(var(1) < 1e-10 * var(0), "{} vs {}", var(1), var(0));
    }

    #[test]
    fn axes_orthogonal_and_unit() {
        let (data, _) = clusters(40, 16, 5.0, 2);
        let p = pca(&data).unwrap();
        let dot: f64 = p.components[0].iter().zip(&p.components[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8);
        for c in &p.components {
            assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_and_covariance_paths_agree() {
        let (data, _) = clusters(5, 30, 4.0, 3);
        let wide = pca(&data).unwrap();
        let narrow: Vec<Vec<f64>> = data.iter().map(|r| r[..8].to_vec()).collect();
        let narrow = pca(&narrow).unwrap();
        // Different data, so just check each path is self-consistent
        for p in [wide, narrow] {
            assert!(p.explained_variance[0] >= p.explained_variance[1]);
            let v0 = p.coords.iter().map(|c| c[0] * c[0]).sum::<f64>() / (p.coords.len() - 1) as f64;
            assert!((v0 - p.explained_variance[0]).abs() < 1e-8 * v0.max(1.0));
        }
    }

    #[test]
    fn separated_clusters_pca_and_tsne() {
        let (data, labels) = clusters(60, 128, 10.0, 5);
        let p = pca(&data).unwrap();
        assert!(silhouette(&p.coords, &labels) > 0.5);
        let t = tsne(&data, &TsneConfig { seed: 1, ..TsneConfig::default() }).unwrap();
        assert!(silhouette(&t, &labels) > 0.5, "{}", silhouette(&t, &labels));
    }

    #[test]
    fn tsne_deterministic() {
        let (data, _) = clusters(15, 8, 6.0, 7);
        let cfg = TsneConfig { seed: 11, iterations: 300, ..TsneConfig::default() };
        assert_eq!(tsne(&data, &cfg).unwrap(), tsne(&data, &cfg).unwrap());
    }

    #[test]
    fn too_few_points() {
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(pca(&data), Err(Error::Validation(_))));
        assert!(matches!(tsne(&data, &TsneConfig::default()), Err(Error::Validation(_))));
    }

    #[test]
    fn mean_pairwise_distance_hand_case() {
        // Unit right triangle: 1, 1, sqrt 2
        let pts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((mean_pairwise_distance(&pts) - (2.0 + 2f64.sqrt()) / 3.0).abs() < 1e-12);
        assert_eq!(mean_pairwise_distance(&pts[..1]), 0.0);
    }

    #[test]
    fn silhouette_hand_case() {
        // Two tight pairs far apart: a = 1, b ≈ 10, s = 1 - a/b
        let pts = [[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]];
        let s = silhouette(&pts, &[0, 0, 1, 1]);
        let want = ((1.0 - 1.0 / 10.5) + (1.0 - 1.0 / 9.5)) / 2.0;
        assert!((s - want).abs() < 1e-12, "{s} vs {want}");
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let mut t = EmbeddingTable::new(3).unwrap();
        for i in 0..5 {
            t.insert(format!("s{i}"), vec![i as f32, (i * i) as f32, 1.0]).unwrap();
        }
        let mut proj = project_embeddings(&t, ProjectionMethod::Pca, 0).unwrap();
        proj.annotate(|id| Some((format!("spk_{id}"), "young".into(), "original".into())));
        let mut buf = Vec::new();
        proj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("segment_id,x,y,speaker,age_group,provenance"));
        assert!(text.contains("spk_s0"));
    }
}
