//! Independent reference implementations used by the integration and
//! acceptance tests. They follow the textbook definitions directly and share
//! no code with the library beyond its data types.

#![allow(dead_code, clippy::needless_range_loop)]

use cobra_ensemble::geometry::{BoundingBox, Point, VoronoiDiagram};
use cobra_ensemble::rng::XorShift64Star;
use cobra_ensemble::{Dataset, Matrix};

pub fn random_matrix(rng: &mut XorShift64Star, n: usize, d: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::new(n, d, (0..n * d).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

/// Literal consensus rule: each machine collects the points whose cached
/// prediction is within `eps` of its prediction at the query; points
/// collected by at least `alpha` machines are averaged in index order. An
/// empty consensus falls back to the mean of all responses.
pub fn cobra_oracle(preds: &[Vec<f64>], responses: &[f64], outputs: &[f64], eps: f64, alpha: usize) -> f64 {
    let l = responses.len();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for (j, pred) in outputs.iter().enumerate() {
        let mut set = Vec::new();
        for i in 0..l {
            if (preds[j][i] - pred).abs() <= eps {
                set.push(i);
            }
        }
        sets.push(set);
    }
    let mut array = Vec::new();
    for i in 0..l {
        let votes = sets.iter().filter(|s| s.contains(&i)).count();
        if votes >= alpha {
            array.push(i);
        }
    }
    let pick: Vec<usize> = if array.is_empty() { (0..l).collect() } else { array };
    let mut sum = 0.0;
    for &i in &pick {
        sum += responses[i];
    }
    sum / pick.len() as f64
}

/// Literal majority vote: points where at least `alpha` machines reproduce
/// the query's labels vote with their response; ties go to the smaller
/// label; an empty consensus votes with every point.
pub fn classifier_oracle(
    labels: &[Vec<usize>],
    responses: &[usize],
    outputs: &[usize],
    alpha: usize,
    k: usize,
) -> usize {
    let l = responses.len();
    let kept: Vec<usize> = (0..l)
        .filter(|&i| (0..outputs.len()).filter(|&j| labels[j][i] == outputs[j]).count() >= alpha)
        .collect();
    let voters: Vec<usize> = if kept.is_empty() { (0..l).collect() } else { kept };
    let mut counts = vec![0usize; k];
    for i in voters {
        counts[responses[i]] += 1;
    }
    let mut best = 0;
    for c in 1..k {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Ridge by the dense normal equations on centered data.
pub fn ridge_oracle(data: &Dataset, lambda: f64) -> (Vec<f64>, f64) {
    let (n, d) = (data.len(), data.dim());
    let y = data.responses().unwrap();
    let xm: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| data.row(i)[j]).sum::<f64>() / n as f64)
        .collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for i in 0..n {
        let r = data.row(i);
        for p in 0..d {
            b[p] += (r[p] - xm[p]) * (y[i] - ym);
            for q in 0..d {
                a[p][q] += (r[p] - xm[p]) * (r[q] - xm[q]);
            }
        }
    }
    for (p, row) in a.iter_mut().enumerate() {
        row[p] += lambda;
    }
    let beta = gauss_solve(a, b);
    let intercept = ym - xm.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    (beta, intercept)
}

/// Standardized lasso objective `(1/2n)‖yc − Zb‖² + λ‖b‖₁` for a 2-feature
/// dataset, with `b` on the standardized scale.
pub struct LassoObjective {
    z: Vec<[f64; 2]>,
    yc: Vec<f64>,
    pub sd: [f64; 2],
    lambda: f64,
}

impl LassoObjective {
    pub fn new(data: &Dataset, lambda: f64) -> Self {
        assert_eq!(data.dim(), 2);
        let n = data.len() as f64;
        let y = data.responses().unwrap();
        let mut mean = [0.0; 2];
        let mut sd = [0.0; 2];
        for j in 0..2 {
            mean[j] = (0..data.len()).map(|i| data.row(i)[j]).sum::<f64>() / n;
            sd[j] = ((0..data.len()).map(|i| (data.row(i)[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
        }
        let ym = y.iter().sum::<f64>() / n;
        Self {
            z: (0..data.len())
                .map(|i| [(data.row(i)[0] - mean[0]) / sd[0], (data.row(i)[1] - mean[1]) / sd[1]])
                .collect(),
            yc: y.iter().map(|v| v - ym).collect(),
            sd,
            lambda,
        }
    }

    pub fn value(&self, b: [f64; 2]) -> f64 {
        let n = self.yc.len() as f64;
        let rss: f64 = self
            .z
            .iter()
            .zip(&self.yc)
            .map(|(z, y)| (y - z[0] * b[0] - z[1] * b[1]).powi(2))
            .sum();
        rss / (2.0 * n) + self.lambda * (b[0].abs() + b[1].abs())
    }

    /// Coarse-to-fine grid search: a 41x41 grid halved around its best
    /// point 60 times.
    pub fn grid_minimum(&self) -> f64 {
        let mut center = [0.0, 0.0];
        let mut half = 4.0 * self.yc.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let mut best = self.value(center);
        for _ in 0..60 {
            let step = half / 20.0;
            let mut arg = center;
            for a in -20..=20 {
                for b in -20..=20 {
                    let p = [center[0] + a as f64 * step, center[1] + b as f64 * step];
                    let v = self.value(p);
                    if v < best {
                        best = v;
                        arg = p;
                    }
                }
            }
            center = arg;
            half /= 2.0;
        }
        best
    }
}

fn sse(y: &[f64], idx: &[usize]) -> f64 {
    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
}

fn gini(y: &[usize], idx: &[usize], k: usize) -> f64 {
    let mut c = vec![0.0; k];
    idx.iter().for_each(|&i| c[y[i]] += 1.0);
    idx.len() as f64 - c.iter().map(|v| v * v).sum::<f64>() / idx.len() as f64
}

pub enum TreeTargets<'a> {
    Real(&'a [f64]),
    Labels(&'a [usize], usize),
}

impl TreeTargets<'_> {
    fn impurity(&self, idx: &[usize]) -> f64 {
        match self {
            TreeTargets::Real(y) => sse(y, idx),
            TreeTargets::Labels(y, k) => gini(y, idx, *k),
        }
    }

    fn leaf(&self, idx: &[usize]) -> f64 {
        match self {
            TreeTargets::Real(y) => idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64,
            TreeTargets::Labels(y, k) => {
                let mut c = vec![0usize; *k];
                idx.iter().for_each(|&i| c[y[i]] += 1);
                (0..*k).fold(0, |b, l| if c[l] > c[b] { l } else { b }) as f64
            }
        }
    }
}

/// Greedy CART grown by evaluating every midpoint split of every feature
/// from scratch. Returns the training-set prediction of every row.
pub fn tree_oracle(x: &Matrix, t: &TreeTargets, max_depth: usize) -> Vec<f64> {
    fn grow(x: &Matrix, t: &TreeTargets, idx: Vec<usize>, depth: usize, out: &mut [f64]) {
        let parent = t.impurity(&idx);
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        if depth > 0 && idx.len() >= 2 {
            for f in 0..x.cols() {
                let mut vals: Vec<f64> = idx.iter().map(|&i| x.row(i)[f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let thr = w[0] + (w[1] - w[0]) / 2.0;
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.row(i)[f] <= thr);
                    let cost = t.impurity(&l) + t.impurity(&r);
                    if best.as_ref().is_none_or(|b| cost < b.0) {
                        best = Some((cost, l, r));
                    }
                }
            }
        }
        match best {
            Some((cost, l, r)) if parent - cost > 1e-12 * parent.max(1.0) => {
                grow(x, t, l, depth - 1, out);
                grow(x, t, r, depth - 1, out);
            }
            _ => {
                let v = t.leaf(&idx);
                idx.iter().for_each(|&i| out[i] = v);
            }
        }
    }
    let mut out = vec![0.0; x.rows()];
    grow(x, t, (0..x.rows()).collect(), max_depth, &mut out);
    out
}

/// k nearest rows by brute-force ranking on (squared distance, row).
pub fn knn_neighbours(x: &Matrix, q: &[f64], k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..x.rows())
        .map(|i| {
            let mut d = 0.0;
            for (a, b) in x.row(i).iter().zip(q) {
                d += (a - b) * (a - b);
            }
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut nb: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
    nb.sort();
    nb
}

pub fn knn_regression_oracle(x: &Matrix, y: &[f64], q: &[f64], k: usize) -> f64 {
    let nb = knn_neighbours(x, q, k);
    let mut s = 0.0;
    for &i in &nb {
        s += y[i];
    }
    s / k as f64
}

pub fn nearest_centroid_oracle(x: &Matrix, labels: &[usize], k: usize, q: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for l in 0..k {
        let rows: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == l).collect();
        if rows.is_empty() {
            continue;
        }
        let d: f64 = (0..x.cols())
            .map(|j| {
                let c = rows.iter().map(|&i| x.row(i)[j]).sum::<f64>() / rows.len() as f64;
                (c - q[j]).powi(2)
            })
            .sum();
        if d < best.0 {
            best = (d, l);
        }
    }
    best.1
}

fn inside_convex(poly: &[Point], p: Point) -> bool {
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

/// Samples `samples` uniform points in the box and counts those whose
/// containing cells differ from the brute-force nearest site, skipping points
/// within `band` of a bisector.
pub fn voronoi_violations(d: &VoronoiDiagram, samples: usize, band: f64, seed: u64) -> usize {
    let b = d.bounding_box;
    let mut rng = XorShift64Star::new(seed);
    let mut bad = 0;
    for _ in 0..samples {
        let p = [rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax)];
        let mut dist: Vec<(f64, usize)> = d
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| ((s[0] - p[0]).hypot(s[1] - p[1]), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        if dist.len() > 1 && dist[1].0 - dist[0].0 < band {
            continue;
        }
        let owners: Vec<usize> = (0..d.cells.len()).filter(|&i| inside_convex(&d.cells[i], p)).collect();
        if owners != vec![dist[0].1] {
            bad += 1;
        }
    }
    bad
}

pub fn shoelace(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1])
        .sum::<f64>()
        / 2.0
}

/// All structural invariants of a diagram.
pub fn voronoi_invariants_hold(d: &VoronoiDiagram) -> bool {
    let b: BoundingBox = d.bounding_box;
    let tol = 1e-9 * b.width().max(b.height());
    let total: f64 = d.cells.iter().map(|c| shoelace(c)).sum();
    d.cells.len() == d.sites.len()
        && (total - b.area()).abs() <= 1e-9 * b.area()
        && d.cells.iter().zip(&d.sites).all(|(c, s)| {
            c.len() >= 3
                && shoelace(c) > 0.0
                && c.iter().all(|v| {
                    v[0] >= b.xmin - tol && v[0] <= b.xmax + tol && v[1] >= b.ymin - tol && v[1] <= b.ymax + tol
                })
                && (0..c.len()).all(|i| {
                    let (p, q, r) = (c[i], c[(i + 1) % c.len()], c[(i + 2) % c.len()]);
                    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]) >= -tol * tol
                })
                && (0..c.len()).all(|i| {
                    let (p, q) = (c[i], c[(i + 1) % c.len()]);
                    let len = (q[0] - p[0]).hypot(q[1] - p[1]);
                    ((q[0] - p[0]) * (s[1] - p[1]) - (q[1] - p[1]) * (s[0] - p[0])) / len >= -tol
                })
        })
}

/// Fixed inputs of the checked-in golden SVG files.
pub mod golden {
    use cobra_ensemble::diagnostics::boxplot_stats;
    use cobra_ensemble::geometry::{build_voronoi, BoundingBox};
    use cobra_ensemble::plots::{render_boxplots, render_qq, render_voronoi, to_svg_string, Coloring};

    pub const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

    pub fn boxplot() -> String {
        let residuals: [(&str, Vec<f64>); 3] = [
            ("ridge", vec![-1.2, -0.4, 0.1, 0.3, 0.8, 1.1, 2.9]),
            ("tree", vec![-0.5, -0.25, 0.0, 0.0, 0.25, 0.5]),
            ("cobra", vec![-3.5, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4]),
        ];
        let summaries: Vec<_> = residuals
            .iter()
            .map(|(n, r)| (n.to_string(), boxplot_stats(r).unwrap()))
            .collect();
        to_svg_string(&render_boxplots(&summaries, "Residuals on test data"))
    }

    pub fn qq() -> String {
        let pts = [
            (-1.5, -1.2),
            (-0.5, -0.7),
            (0.0, 0.1),
            (0.4, 0.5),
            (1.0, 0.9),
            (2.2, 1.8),
        ];
        to_svg_string(&render_qq(&pts, "QQ-plot of cobra predictions"))
    }

    pub fn voronoi() -> String {
        let sites = [[0.1, 0.2], [0.8, 0.1], [0.5, 0.5], [0.2, 0.9], [0.9, 0.8]];
        let d = build_voronoi(&sites, BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        to_svg_string(&render_voronoi(&d, &Coloring::Labels(vec![0, 1, 2, 0, 1]), "Voronoi tessellation").unwrap())
    }

    pub fn all() -> [(&'static str, String); 3] {
        [("boxplot.svg", boxplot()), ("qq.svg", qq()), ("voronoi.svg", voronoi())]
    }
}
