//! Cubic smoothing splines.
//!
//! A [`CubicSpline`] is a piecewise cubic stored as one `(a, b, c, d)` row per
//! knot interval, `s(x) = a + b·u + c·u² + d·u³` with `u = x − knot`. Outside the
//! knot span the spline continues linearly with its boundary value and slope.
//!
//! [`fit`] solves the penalized regression
//!
//! ```text
//! minimize  Σ wᵢ (yᵢ − s(xᵢ))² + λ ∫ s''(x)² dx
//! ```
//!
//! over natural cubic splines. The spline is parametrized by its values `g` at
//! the knots; the interior second derivatives follow from `R γ = Qᵀ g` and the
//! roughness penalty is `gᵀ Q R⁻¹ Qᵀ g`. Knots sit at the distinct abscissae, or
//! at a quantile-spaced subset of them when there are more than
//! [`SplineFitSpec::max_knots`]. The normal equations are diagonalized once per
//! fit (Demmler–Reinsch basis) so that every smoothing level on the GCV grid
//! costs `O(m²)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How the smoothing penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Fixed(f64),
    /// Minimize generalized cross-validation over a logarithmic grid.
    Gcv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFitSpec {
    pub lambda: Lambda,
    pub weights: Option<Vec<f64>>,
    pub max_knots: usize,
}

impl Default for SplineFitSpec {
    fn default() -> Self {
        SplineFitSpec {
            lambda: Lambda::Gcv,
            weights: None,
            max_knots: DEFAULT_MAX_KNOTS,
        }
    }
}

impl SplineFitSpec {
    pub fn fixed(lambda: f64) -> Self {
        SplineFitSpec {
            lambda: Lambda::Fixed(lambda),
            ..Default::default()
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn with_max_knots(mut self, max_knots: usize) -> Self {
        self.max_knots = max_knots;
        self
    }
}

pub const DEFAULT_MAX_KNOTS: usize = 200;
/// Number of points in the GCV search grid.
pub const GCV_GRID_POINTS: usize = 50;
const GCV_GRID_DECADES: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    pieces: Vec<[f64; 4]>,
    /// Value and slope at the last knot, used beyond it.
    tail: (f64, f64),
}

impl CubicSpline {
    /// Builds a spline from explicit pieces, one per interval between
    /// consecutive knots. Checks that value, slope and curvature are
    /// continuous at interior knots.
    pub fn from_pieces(knots: Vec<f64>, pieces: Vec<[f64; 4]>) -> Result<Self> {
        if knots.len() < 2 || pieces.len() + 1 != knots.len() {
            return Err(Error::Parameter(format!(
                "spline needs at least 2 knots and one piece per interval (got {} knots, {} pieces)",
                knots.len(),
                pieces.len()
            )));
        }
        if knots
            .iter()
            .chain(pieces.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Parameter("spline has non-finite entries".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "spline knots must be strictly increasing".into(),
            ));
        }
        for j in 1..pieces.len() {
            let h = knots[j] - knots[j - 1];
            let [a, b, c, d] = pieces[j - 1];
            let left = [
                a + h * (b + h * (c + h * d)),
                b + h * (2.0 * c + 3.0 * h * d),
                2.0 * c + 6.0 * h * d,
            ];
            let right = [pieces[j][0], pieces[j][1], 2.0 * pieces[j][2]];
            for (l, r) in left.iter().zip(right.iter()) {
                if (l - r).abs() > 1e-9 * l.abs().max(r.abs()).max(1.0) {
                    return Err(Error::Parameter(format!(
                        "spline is not C2-continuous at knot {}",
                        knots[j]
                    )));
                }
            }
        }
        let h = knots[knots.len() - 1] - knots[knots.len() - 2];
        let [a, b, c, d] = pieces[pieces.len() - 1];
        let tail = (
            a + h * (b + h * (c + h * d)),
            b + h * (2.0 * c + 3.0 * h * d),
        );
        Ok(CubicSpline {
            knots,
            pieces,
            tail,
        })
    }

    /// Natural cubic spline from knot values and second derivatives
    /// (`second[0]` and `second[m-1]` are expected to be zero).
    fn from_values_and_curvature(knots: Vec<f64>, values: &[f64], second: &[f64]) -> Self {
        let m = knots.len();
        let mut pieces = Vec::with_capacity(m - 1);
        for j in 0..m - 1 {
            let h = knots[j + 1] - knots[j];
            let a = values[j];
            let c = second[j] / 2.0;
            let d = (second[j + 1] - second[j]) / (6.0 * h);
            let b = (values[j + 1] - values[j]) / h - h * (2.0 * second[j] + second[j + 1]) / 6.0;
            pieces.push([a, b, c, d]);
        }
        let h = knots[m - 1] - knots[m - 2];
        let tail = (
            values[m - 1],
            (values[m - 1] - values[m - 2]) / h + h * (second[m - 2] + 2.0 * second[m - 1]) / 6.0,
        );
        CubicSpline {
            knots,
            pieces,
            tail,
        }
    }

    /// Interpolating natural cubic spline through `(knots[i], values[i])`.
    pub fn natural_interpolant(knots: Vec<f64>, values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::Parameter(
                "interpolant needs ≥ 2 matching knots/values".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "spline knots must be strictly increasing".into(),
            ));
        }
        let m = knots.len();
        let mut second = vec![0.0; m];
        if m > 2 {
            let penalty = Penalty::new(&knots);
            let qt_g = penalty.qt_times(values);
            let r = penalty.r_dense();
            let interior = r
                .cholesky()
                .ok_or_else(|| Error::Fit("singular curvature system".into()))?
                .solve(&DVector::from_vec(qt_g));
            second[1..m - 1].copy_from_slice(interior.as_slice());
        }
        Ok(Self::from_values_and_curvature(knots, values, &second))
    }

    /// The identity map represented on `[lo, hi]`.
    pub fn identity(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        CubicSpline {
            knots: vec![lo, hi],
            pieces: vec![[lo, 1.0, 0.0, 0.0]],
            tail: (hi, 1.0),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[[f64; 4]] {
        &self.pieces
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    #[inline]
    fn locate(&self, x: f64) -> Option<usize> {
        let m = self.knots.len();
        if x < self.knots[0] || x >= self.knots[m - 1] || x.is_nan() {
            return None;
        }
        // partition_point returns the first knot strictly greater than x.
        Some(self.knots.partition_point(|&k| k <= x) - 1)
    }

    /// Value at `x`; linear beyond the end knots.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(j) => {
                let u = x - self.knots[j];
                let [a, b, c, d] = self.pieces[j];
                a + u * (b + u * (c + u * d))
            }
            None if x < self.knots[0] => {
                let [a, b, _, _] = self.pieces[0];
                a + b * (x - self.knots[0])
            }
            None => self.tail.0 + self.tail.1 * (x - self.knots[self.knots.len() - 1]),
        }
    }

    /// First derivative at `x`; constant in the extrapolation zones.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(j) => {
                let u = x - self.knots[j];
                let [_, b, c, d] = self.pieces[j];
                b + u * (2.0 * c + 3.0 * d * u)
            }
            None if x < self.knots[0] => self.pieces[0][1],
            None => self.tail.1,
        }
    }

    /// Value and first derivative together.
    #[inline]
    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        match self.locate(x) {
            Some(j) => {
                let u = x - self.knots[j];
                let [a, b, c, d] = self.pieces[j];
                (
                    a + u * (b + u * (c + u * d)),
                    b + u * (2.0 * c + 3.0 * d * u),
                )
            }
            None => (self.eval(x), self.deriv(x)),
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(j) => {
                let [_, _, c, d] = self.pieces[j];
                2.0 * c + 6.0 * d * (x - self.knots[j])
            }
            None => 0.0,
        }
    }

    /// Exact `∫ s''(x)² dx` over the knot span.
    pub fn curvature_energy(&self) -> f64 {
        self.pieces
            .iter()
            .zip(self.knots.windows(2))
            .map(|(&[_, _, c, d], w)| {
                let h = w[1] - w[0];
                4.0 * c * c * h + 12.0 * c * d * h * h + 12.0 * d * d * h * h * h
            })
            .sum()
    }

    /// `offset + scale · s(x)`.
    pub fn affine_image(&self, offset: f64, scale: f64) -> Self {
        CubicSpline {
            knots: self.knots.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|&[a, b, c, d]| [offset + scale * a, scale * b, scale * c, scale * d])
                .collect(),
            tail: (offset + scale * self.tail.0, scale * self.tail.1),
        }
    }

    /// True when `s' > 0` at every knot and at every interior stationary
    /// point of the pieces inside `[lo, hi]`.
    pub fn is_increasing_on(&self, lo: f64, hi: f64) -> bool {
        let mut min_slope = f64::INFINITY;
        let mut check = |x: f64| {
            if x >= lo && x <= hi {
                min_slope = min_slope.min(self.deriv(x));
            }
        };
        check(lo);
        check(hi);
        for (j, &[_, _, c, d]) in self.pieces.iter().enumerate() {
            check(self.knots[j]);
            if d != 0.0 {
                // s' is quadratic in u; its extremum is at u = -c / (3d).
                let u = -c / (3.0 * d);
                let h = self.knots[j + 1] - self.knots[j];
                if u > 0.0 && u < h {
                    check(self.knots[j] + u);
                }
            }
        }
        check(self.knots[self.knots.len() - 1]);
        min_slope > 0.0
    }

    /// Plain-text table, one `knot a b c d` row per knot separated by tabs.
    /// The final row holds the linear continuation beyond the last knot.
    pub fn to_table(&self) -> String {
        let mut out = String::from("knot\ta\tb\tc\td\n");
        for (k, p) in self.knots.iter().zip(self.pieces.iter()) {
            out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", k, p[0], p[1], p[2], p[3]));
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t0\t0\n",
            self.knots[self.knots.len() - 1],
            self.tail.0,
            self.tail.1
        ));
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if (lineno == 0 && line.starts_with("knot")) || line.trim().is_empty() {
                continue;
            }
            let fields: std::result::Result<Vec<f64>, _> =
                line.split('\t').map(|f| f.trim().parse::<f64>()).collect();
            let fields = fields.map_err(|e| Error::Parse {
                file: "<spline table>".into(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if fields.len() != 5 {
                return Err(Error::Parse {
                    file: "<spline table>".into(),
                    line: lineno + 1,
                    message: format!("expected 5 columns, found {}", fields.len()),
                });
            }
            knots.push(fields[0]);
            rows.push([fields[1], fields[2], fields[3], fields[4]]);
        }
        if rows.len() < 2 {
            return Err(Error::Parameter(
                "spline table needs at least two rows".into(),
            ));
        }
        rows.pop();
        Self::from_pieces(knots, rows)
    }
}

/// Result of a penalized fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub spline: CubicSpline,
    pub lambda: f64,
    /// Trace of the smoother matrix.
    pub edf: f64,
    pub gcv: f64,
}

/// Tridiagonal structure of the roughness penalty for a knot sequence.
struct Penalty {
    h: Vec<f64>,
}

impl Penalty {
    fn new(knots: &[f64]) -> Self {
        Penalty {
            h: knots.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }

    fn interior(&self) -> usize {
        self.h.len() - 1
    }

    /// `Qᵀ g`, an interior-sized vector of second divided differences.
    fn qt_times(&self, g: &[f64]) -> Vec<f64> {
        (0..self.interior())
            .map(|i| {
                let (h0, h1) = (self.h[i], self.h[i + 1]);
                (g[i + 2] - g[i + 1]) / h1 - (g[i + 1] - g[i]) / h0
            })
            .collect()
    }

    fn qt_dense(&self) -> DMatrix<f64> {
        let p = self.interior();
        let mut qt = DMatrix::zeros(p, p + 2);
        for i in 0..p {
            let (h0, h1) = (self.h[i], self.h[i + 1]);
            qt[(i, i)] = 1.0 / h0;
            qt[(i, i + 1)] = -1.0 / h0 - 1.0 / h1;
            qt[(i, i + 2)] = 1.0 / h1;
        }
        qt
    }

    fn r_dense(&self) -> DMatrix<f64> {
        let p = self.interior();
        let mut r = DMatrix::zeros(p, p);
        for i in 0..p {
            r[(i, i)] = (self.h[i] + self.h[i + 1]) / 3.0;
            if i + 1 < p {
                r[(i, i + 1)] = self.h[i + 1] / 6.0;
                r[(i + 1, i)] = self.h[i + 1] / 6.0;
            }
        }
        r
    }
}

/// Data after merging tied abscissae.
struct Merged {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn merge_ties(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Merged> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!(
            "abscissa/response length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return Err(Error::Fit("weights length does not match data".into()));
        }
        if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Fit("weights must be positive and finite".into()));
        }
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut merged = Merged {
        x: Vec::new(),
        y: Vec::new(),
        w: Vec::new(),
    };
    let mut i = 0;
    while i < order.len() {
        let xv = x[order[i]];
        let (mut sw, mut swy) = (0.0, 0.0);
        while i < order.len() && x[order[i]] == xv {
            let w = weight(order[i]);
            sw += w;
            swy += w * y[order[i]];
            i += 1;
        }
        merged.x.push(xv);
        merged.y.push(swy / sw);
        merged.w.push(sw);
    }
    if merged.x.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 distinct abscissae, found {}",
            merged.x.len()
        )));
    }
    Ok(merged)
}

fn choose_knots(x: &[f64], max_knots: usize) -> Vec<f64> {
    let n = x.len();
    let m = max_knots.max(4);
    if n <= m {
        return x.to_vec();
    }
    (0..m)
        .map(|i| {
            let idx = ((i as f64) * (n - 1) as f64 / (m - 1) as f64).round() as usize;
            x[idx]
        })
        .collect()
}

/// The penalized least-squares problem in a Demmler–Reinsch basis.
///
/// With `S = L Lᵀ` the weighted design Gram matrix and `R = C Cᵀ`, the
/// penalty in whitened coordinates is `F Fᵀ` for `F = L⁻¹ Q C⁻ᵀ`. The SVD of
/// `F` gives the penalized directions; its orthogonal complement (the linear
/// functions) is left unpenalized exactly.
struct Problem {
    knots: Vec<f64>,
    n: usize,
    total_weight: f64,
    l: DMatrix<f64>,
    /// Left singular vectors of `F`, `m × (m − 2)`.
    dirs: DMatrix<f64>,
    /// Squared singular values of `F`.
    eig: Vec<f64>,
    /// Whitened right-hand side `L⁻¹ Bᵀ W y`.
    w: DVector<f64>,
    /// `dirsᵀ w`.
    z: Vec<f64>,
    /// Residual sum of squares of the unpenalized (interpolating) fit.
    floor_rss: f64,
    /// Interior second derivatives per unit of `g`: `γ = curv · g`.
    curv: DMatrix<f64>,
}

fn solve_failed() -> Error {
    Error::Fit("triangular solve failed".into())
}

impl Problem {
    fn build(data: &Merged, max_knots: usize) -> Result<Self> {
        let knots = choose_knots(&data.x, max_knots);
        let m = knots.len();
        let p = m - 2;
        let penalty = Penalty::new(&knots);
        let r = penalty.r_dense();
        let qt = penalty.qt_dense();
        let r_chol = r
            .cholesky()
            .ok_or_else(|| Error::Fit("singular curvature system".into()))?;
        // γ = R⁻¹ Qᵀ g
        let curv = r_chol.solve(&qt);
        // C⁻¹ Qᵀ, so that K = Q R⁻¹ Qᵀ = (C⁻¹Qᵀ)ᵀ (C⁻¹Qᵀ)
        let half = r_chol
            .l()
            .solve_lower_triangular(&qt)
            .ok_or_else(solve_failed)?;

        // Accumulate the normal equations in (g, γ) space, then map γ through `curv`.
        let dim = m + p;
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        let mut ywy = 0.0;
        let mut j = 0usize;
        for ((&xi, &yi), &wi) in data.x.iter().zip(&data.y).zip(&data.w) {
            while j + 2 < m && xi >= knots[j + 1] {
                j += 1;
            }
            let h = knots[j + 1] - knots[j];
            let (u, v) = (xi - knots[j], knots[j + 1] - xi);
            let mut idx = [0usize; 4];
            let mut val = [0.0f64; 4];
            idx[0] = j;
            val[0] = v / h;
            idx[1] = j + 1;
            val[1] = u / h;
            let mut len = 2;
            let cubic = -u * v / 6.0;
            if cubic != 0.0 {
                // γ_j and γ_{j+1}; end knots carry zero curvature.
                if j >= 1 {
                    idx[len] = m + j - 1;
                    val[len] = cubic * (1.0 + v / h);
                    len += 1;
                }
                if j < m - 2 {
                    idx[len] = m + j;
                    val[len] = cubic * (1.0 + u / h);
                    len += 1;
                }
            }
            for a in 0..len {
                rhs[idx[a]] += wi * val[a] * yi;
                for b in 0..len {
                    gram[(idx[a], idx[b])] += wi * val[a] * val[b];
                }
            }
            ywy += wi * yi * yi;
        }
        let mut transform = DMatrix::<f64>::zeros(dim, m);
        for i in 0..m {
            transform[(i, i)] = 1.0;
        }
        transform.view_mut((m, 0), (p, m)).copy_from(&curv);
        let s = transform.transpose() * &gram * &transform;
        let b = transform.transpose() * &rhs;
        let s = (&s + s.transpose()) * 0.5;

        let chol = match s.clone().cholesky() {
            Some(c) => c,
            None => {
                let ridge = 1e-12 * s.trace().max(f64::MIN_POSITIVE);
                let mut s2 = s;
                for i in 0..m {
                    s2[(i, i)] += ridge;
                }
                s2.cholesky()
                    .ok_or_else(|| Error::Fit("design is rank deficient".into()))?
            }
        };
        let l = chol.l();
        let f = l
            .solve_lower_triangular(&half.transpose())
            .ok_or_else(solve_failed)?;
        let svd = f.svd(true, false);
        let dirs = svd.u.ok_or_else(|| Error::Fit("SVD failed".into()))?;
        let eig: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
        let w = l.solve_lower_triangular(&b).ok_or_else(solve_failed)?;
        let z: Vec<f64> = (dirs.transpose() * &w).iter().copied().collect();
        let floor_rss = (ywy - w.norm_squared()).max(0.0);
        Ok(Problem {
            knots,
            n: data.x.len(),
            total_weight: data.w.iter().sum(),
            l,
            dirs,
            eig,
            w,
            z,
            floor_rss,
            curv,
        })
    }

    fn edf(&self, lambda: f64) -> f64 {
        2.0 + self
            .eig
            .iter()
            .map(|&d| 1.0 / (1.0 + lambda * d))
            .sum::<f64>()
    }

    fn rss(&self, lambda: f64) -> f64 {
        let shrunk: f64 = self
            .eig
            .iter()
            .zip(&self.z)
            .map(|(&d, &z)| {
                let r = lambda * d / (1.0 + lambda * d);
                z * z * r * r
            })
            .sum();
        self.floor_rss + shrunk
    }

    fn gcv(&self, lambda: f64) -> f64 {
        let n = self.n as f64;
        let denom = (n - self.edf(lambda)).max(1e-12);
        n * self.rss(lambda) / (denom * denom)
    }

    fn base_lambda(&self) -> f64 {
        let span = self.knots[self.knots.len() - 1] - self.knots[0];
        self.total_weight * span.powi(3) / self.n as f64
    }

    fn grid(&self) -> Vec<f64> {
        let base = self.base_lambda();
        let step = 2.0 * GCV_GRID_DECADES / (GCV_GRID_POINTS - 1) as f64;
        (0..GCV_GRID_POINTS)
            .map(|i| base * 10f64.powf(-GCV_GRID_DECADES + step * i as f64))
            .collect()
    }

    fn select_gcv(&self) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for lambda in self.grid() {
            let score = self.gcv(lambda);
            // Strict inequality keeps the smallest λ among exact ties.
            if score < best.0 {
                best = (score, lambda);
            }
        }
        best.1
    }

    fn spline(&self, lambda: f64) -> Result<CubicSpline> {
        let shrink = DVector::from_iterator(
            self.eig.len(),
            self.eig
                .iter()
                .zip(&self.z)
                .map(|(&d, &z)| z * lambda * d / (1.0 + lambda * d)),
        );
        let v = &self.w - &self.dirs * shrink;
        let g = self
            .l
            .transpose()
            .solve_upper_triangular(&v)
            .ok_or_else(solve_failed)?;
        let gamma = &self.curv * &g;
        let m = self.knots.len();
        let mut second = vec![0.0; m];
        second[1..m - 1].copy_from_slice(gamma.as_slice());
        Ok(CubicSpline::from_values_and_curvature(
            self.knots.clone(),
            g.as_slice(),
            &second,
        ))
    }
}

/// Penalized cubic smoothing-spline regression of `y` on `x`.
pub fn fit(x: &[f64], y: &[f64], spec: &SplineFitSpec) -> Result<SplineFit> {
    if let Lambda::Fixed(l) = spec.lambda {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Fit(format!("penalty must be positive, got {l}")));
        }
    }
    if spec.max_knots < 4 {
        return Err(Error::Fit("max_knots must be at least 4".into()));
    }
    let data = merge_ties(x, y, spec.weights.as_deref())?;
    let problem = Problem::build(&data, spec.max_knots)?;
    let lambda = match spec.lambda {
        Lambda::Fixed(l) => l,
        Lambda::Gcv => problem.select_gcv(),
    };
    Ok(SplineFit {
        spline: problem.spline(lambda)?,
        lambda,
        edf: problem.edf(lambda),
        gcv: problem.gcv(lambda),
    })
}

/// Smoothing penalty minimizing generalized cross-validation on the default
/// logarithmic grid.
pub fn gcv_lambda(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    let data = merge_ties(x, y, weights)?;
    Ok(Problem::build(&data, DEFAULT_MAX_KNOTS)?.select_gcv())
}

/// GCV scores over the default grid, as `(λ, score)` pairs.
pub fn gcv_profile(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Vec<(f64, f64)>> {
    let data = merge_ties(x, y, weights)?;
    let problem = Problem::build(&data, DEFAULT_MAX_KNOTS)?;
    Ok(problem
        .grid()
        .into_iter()
        .map(|l| (l, problem.gcv(l)))
        .collect())
}
