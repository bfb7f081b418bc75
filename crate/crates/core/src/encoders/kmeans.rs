//! k-means++ initialisation followed by Lloyd iterations.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use crate::embeddings::{format_matrix, parse_matrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    k: usize,
    dim: usize,
    centers: Vec<f64>,
}

impl Codebook {
    pub fn new(dim: usize, centers: Vec<f64>) -> Result<Self> {
        if dim == 0 || centers.is_empty() || !centers.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} center values do not form rows of width {dim}", centers.len())));
        }
        if let Some(i) = centers.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("center {} has a non-finite entry", i / dim)));
        }
        Ok(Codebook {
            k: centers.len() / dim,
            dim,
            centers,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Index of the nearest center, lower index on ties, and its squared distance.
    pub fn nearest(&self, point: &[f64]) -> (usize, f64) {
        nearest(&self.centers, self.dim, point)
    }
}

/// Per-run diagnostics: inertia after every assignment step, and the
/// final assignment of each point.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    pub inertia: Vec<f64>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[f64], dim: usize, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.chunks(dim).enumerate() {
        let d = squared_distance(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(centers: &[f64], dim: usize, points: &[f64]) -> Vec<(usize, f64)> {
    points.par_chunks(dim).map(|p| nearest(centers, dim, p)).collect()
}

fn plus_plus_init(points: &[f64], dim: usize, k: usize, rng: &mut rng::Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centers.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points.chunks(dim).map(|p| squared_distance(p, &centers[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Rounding can leave `target` past the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = &points[pick * dim..(pick + 1) * dim];
        centers.extend_from_slice(c);
        for (w, p) in d2.iter_mut().zip(points.chunks(dim)) {
            *w = w.min(squared_distance(p, c));
        }
    }
    centers
}

pub fn fit_codebook(points: &[f64], dim: usize, k: usize, max_iters: usize, tol: f64, seed: u64) -> Result<Codebook> {
    fit_codebook_traced(points, dim, k, max_iters, tol, seed).map(|(cb, _)| cb)
}

/// Fits `k` centers to the rows of `points` (`n x dim`, row-major).
/// Stops once no center moves by `tol` or more, or after `max_iters`
/// update steps. A final assignment pass follows the last update.
pub fn fit_codebook_traced(
    points: &[f64],
    dim: usize,
    k: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<(Codebook, KMeansTrace)> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!("{} values do not form rows of width {dim}", points.len())));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("codebook size must be at least 1".into()));
    }
    let n = points.len() / dim;
    if n < k {
        return Err(Error::InvalidArgument(format!("{n} points cannot seed {k} centers")));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be non-negative")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("points contain non-finite values".into()));
    }

    let mut rng = rng::seeded(seed);
    let mut centers = plus_plus_init(points, dim, k, &mut rng);
    let mut inertia = Vec::new();
    let mut assigned = assign(&centers, dim, points);
    inertia.push(assigned.iter().map(|a| a.1).sum());
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in points.chunks(dim).zip(&assigned) {
            counts[c] += 1;
            for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next = centers.clone();
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, &s) in next[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s / counts[c] as f64;
                }
                continue;
            }
            // Empty cluster: move it onto the point worst served by its own center.
            let far = assigned
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken[*i])
                .fold(None, |best: Option<(usize, f64)>, (i, a)| match best {
                    Some((_, d)) if d >= a.1 => best,
                    _ => Some((i, a.1)),
                })
                .map(|(i, _)| i)
                .expect("n >= k leaves an untaken point");
            taken[far] = true;
            next[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
        }
        let movement = centers
            .chunks(dim)
            .zip(next.chunks(dim))
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centers = next;
        assigned = assign(&centers, dim, points);
        inertia.push(assigned.iter().map(|a| a.1).sum());
        if movement < tol {
            break;
        }
    }

    let trace = KMeansTrace {
        inertia,
        assignments: assigned.into_iter().map(|a| a.0).collect(),
        iterations,
    };
    Ok((Codebook::new(dim, centers)?, trace))
}

pub fn write_codebook(cb: &Codebook) -> String {
    let names: Vec<String> = (0..cb.k).map(|i| i.to_string()).collect();
    format_matrix(&names, cb.dim, &cb.centers)
}

pub fn read_codebook(content: &str, source: &str) -> Result<Codebook> {
    let (names, dim, values) = parse_matrix::<f64>(content, source)?;
    for (i, name) in names.iter().enumerate() {
        if name.parse::<usize>().ok() != Some(i) {
            return Err(Error::parse(source, i + 2, format!("expected center index {i}, found {name:?}")));
        }
    }
    Codebook::new(dim, values).map_err(|e| Error::parse(source, 1, e.to_string()))
}

pub fn save_codebook(cb: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_codebook(cb)).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_codebook(&content, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr_free_normal as normal;

    /// Box-Muller, kept local so the blob oracle does not depend on the code under test.
    mod rand_distr_free_normal {
        use rand::Rng;
        pub fn sample(rng: &mut impl Rng) -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    fn sorted_rows(cb: &Codebook) -> Vec<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = (0..cb.k()).map(|i| cb.center(i).to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows
    }

    #[test]
    fn exact_fit_when_k_equals_n() {
        let pts = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let (cb, trace) = fit_codebook_traced(&pts, 2, 4, 50, 1e-9, 3).unwrap();
        assert_eq!(sorted_rows(&cb), vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(*trace.inertia.last().unwrap(), 0.0);
    }

    #[test]
    fn single_center_is_the_mean() {
        let pts = [1.0, 2.0, 3.0, 6.0, -4.0, 1.0];
        let cb = fit_codebook(&pts, 2, 1, 10, 1e-12, 0).unwrap();
        assert!((cb.center(0)[0] - 0.0).abs() < 1e-12);
        assert!((cb.center(0)[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_separated_blobs() {
        let mut r = rng::seeded(42);
        let truth = [[-5.0, 0.0], [5.0, 3.0]];
        let mut pts = Vec::new();
        let mut means = [[0.0f64; 2]; 2];
        for (b, mu) in truth.iter().enumerate() {
            for _ in 0..100 {
                let p = [mu[0] + normal::sample(&mut r), mu[1] + normal::sample(&mut r)];
                means[b][0] += p[0] / 100.0;
                means[b][1] += p[1] / 100.0;
                pts.extend_from_slice(&p);
            }
        }
        let cb = fit_codebook(&pts, 2, 2, 100, 1e-9, 7).unwrap();
        for m in means {
            let (i, _) = cb.nearest(&m);
            assert!(squared_distance(cb.center(i), &m).sqrt() < 0.2);
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(fit_codebook(&[0.0, 1.0], 1, 3, 10, 0.0, 0).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_center() {
        let pts = [1.0; 10];
        let (cb, trace) = fit_codebook_traced(&pts, 1, 3, 5, 0.0, 0).unwrap();
        assert_eq!(cb.k(), 3);
        assert_eq!(*trace.inertia.last().unwrap(), 0.0);
    }

    #[test]
    fn file_roundtrip() {
        let cb = Codebook::new(2, vec![0.1, -2.0, 1.0 / 3.0, 1e-300]).unwrap();
        let text = write_codebook(&cb);
        assert!(text.starts_with("2 2\n0 0.1 -2\n1 "));
        assert_eq!(read_codebook(&text, "cb").unwrap(), cb);
        assert!(read_codebook("2 1\n0 1\n5 2\n", "cb").is_err());
    }

    proptest! {
        #[test]
        fn lloyd_invariants(values in proptest::collection::vec(-10.0f64..10.0, 24..120), k in 1usize..6, seed in any::<u64>()) {
            let dim = 3;
            let pts = &values[..values.len() / dim * dim];
            let (cb, trace) = fit_codebook_traced(pts, dim, k, 30, 0.0, seed).unwrap();
            for w in trace.inertia.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "inertia rose: {:?}", trace.inertia);
            }
            for (p, &a) in pts.chunks(dim).zip(&trace.assignments) {
                let d = squared_distance(p, cb.center(a));
                for c in 0..cb.k() {
                    prop_assert!(d <= squared_distance(p, cb.center(c)));
                }
            }
            let again = fit_codebook(pts, dim, k, 30, 0.0, seed).unwrap();
            prop_assert_eq!(again, cb);
        }
    }
}
