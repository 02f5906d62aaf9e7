//! Pointwise exterior calculus on flat coordinate charts.
//!
//! A [`KForm`] of degree `k` on a chart of dimension `dim` is a coefficient
//! function returning `C(dim, k)` values over the lexicographic basis of
//! `k`-element index subsets, so that
//! `f = sum_I f_I dx^{i_1} ^ ... ^ dx^{i_k}` with `i_1 < ... < i_k`.
//! Forms may carry analytic exterior-derivative coefficients; when they do,
//! `wedge`, `add`, `scale` and `pullback` propagate them, and
//! [`KForm::exterior_derivative`] uses them instead of finite differences.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg;

/// Coefficient callback: point -> coefficient vector.
pub type CoeffFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Vector field callback: point -> components in the chart frame.
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Default central-difference step, in chart units.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("expected {expected} tangent vectors, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree {degree} exceeds chart dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },
    #[error("interior product of a 0-form")]
    ZeroDegree,
    #[error("exterior derivative of a top-degree form (degree {degree})")]
    TopDegree { degree: usize },
    #[error("tangent vectors do not share a base point")]
    BaseMismatch,
    #[error("coefficient callback returned {got} values, expected {expected}")]
    CoefficientLength { expected: usize, got: usize },
}

/// A tangent vector attached to a base point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Self {
        Self { base, components }
    }

    /// Coordinate basis vector `e_i` at `base`.
    pub fn basis(base: &[f64], i: usize) -> Self {
        let mut components = vec![0.0; base.len()];
        components[i] = 1.0;
        Self { base: base.to_vec(), components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

/// Smooth map between charts with a Jacobian callback.
///
/// The Jacobian is returned row-major with `target_dim` rows and
/// `source_dim` columns.
#[derive(Clone)]
pub struct ChartMap {
    pub source_dim: usize,
    pub target_dim: usize,
    map: CoeffFn,
    jacobian: CoeffFn,
}

impl ChartMap {
    pub fn new<M, J>(source_dim: usize, target_dim: usize, map: M, jacobian: J) -> Self
    where
        M: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            source_dim,
            target_dim,
            map: Arc::new(map),
            jacobian: Arc::new(jacobian),
        }
    }

    /// Map whose Jacobian is a fixed matrix (affine maps).
    pub fn affine(source_dim: usize, target_dim: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), source_dim * target_dim);
        assert_eq!(offset.len(), target_dim);
        let m = matrix.clone();
        Self::new(
            source_dim,
            target_dim,
            move |x| {
                (0..target_dim)
                    .map(|r| offset[r] + (0..source_dim).map(|c| m[r * source_dim + c] * x[c]).sum::<f64>())
                    .collect()
            },
            move |_| matrix.clone(),
        )
    }

    /// Identity on a chart of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self::affine(dim, dim, m, vec![0.0; dim])
    }

    /// Coordinate projection `x -> (x[indices[0]], x[indices[1]], ...)`.
    pub fn projection(source_dim: usize, indices: &[usize]) -> Self {
        let target_dim = indices.len();
        let mut m = vec![0.0; source_dim * target_dim];
        for (r, &c) in indices.iter().enumerate() {
            m[r * source_dim + c] = 1.0;
        }
        Self::affine(source_dim, target_dim, m, vec![0.0; target_dim])
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        (self.jacobian)(x)
    }

    /// Push a tangent vector forward.
    pub fn push_forward(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let j = self.jacobian(x);
        (0..self.target_dim)
            .map(|r| (0..self.source_dim).map(|c| j[r * self.source_dim + c] * v[c]).sum())
            .collect()
    }
}

impl fmt::Debug for ChartMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChartMap({} -> {})", self.source_dim, self.target_dim)
    }
}

/// Lexicographic list of the `k`-element subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance the rightmost index that can still move
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Position of a sorted subset in the lexicographic basis.
pub fn subset_index(n: usize, subset: &[usize]) -> usize {
    // rank = number of k-subsets lexicographically before `subset`
    let k = subset.len();
    let mut rank = 0;
    let mut prev: usize = 0;
    for (pos, &s) in subset.iter().enumerate() {
        let start = if pos == 0 { 0 } else { prev + 1 };
        for v in start..s {
            rank += binomial(n - v - 1, k - pos - 1);
        }
        prev = s;
    }
    rank
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Sign of the permutation sorting `indices`, or 0 if an index repeats.
fn permutation_sign(indices: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..indices.len() {
        for j in i + 1..indices.len() {
            if indices[i] == indices[j] {
                return 0.0;
            }
            if indices[i] > indices[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Precomputed shuffle table for wedging a k-form with an l-form.
#[derive(Debug, Clone)]
struct WedgeTable {
    out_len: usize,
    // (output index, left index, right index, sign)
    terms: Vec<(usize, usize, usize, f64)>,
}

impl WedgeTable {
    fn new(dim: usize, k: usize, l: usize) -> Self {
        let out = subsets(dim, k + l);
        let mut terms = Vec::new();
        for (ko, big) in out.iter().enumerate() {
            for pick in subsets(k + l, k) {
                let left: Vec<usize> = pick.iter().map(|&p| big[p]).collect();
                let right: Vec<usize> = big.iter().copied().filter(|x| !left.contains(x)).collect();
                let mut order = left.clone();
                order.extend(&right);
                let sign = permutation_sign(&order);
                terms.push((ko, subset_index(dim, &left), subset_index(dim, &right), sign));
            }
        }
        Self { out_len: out.len(), terms }
    }

    fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_len];
        for &(o, i, j, s) in &self.terms {
            out[o] += s * a[i] * b[j];
        }
        out
    }
}

/// Degree-k differential form on a flat chart.
#[derive(Clone)]
pub struct KForm {
    degree: usize,
    dim: usize,
    coeffs: CoeffFn,
    derivative: Option<CoeffFn>,
}

impl fmt::Debug for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KForm")
            .field("degree", &self.degree)
            .field("dim", &self.dim)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl KForm {
    /// Form from a coefficient callback, without derivative information.
    pub fn new<F>(dim: usize, degree: usize, coeffs: F) -> Result<Self, FormError>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if degree > dim {
            return Err(FormError::DegreeOverflow { degree, dim });
        }
        Ok(Self { degree, dim, coeffs: Arc::new(coeffs), derivative: None })
    }

    /// Attach analytic coefficients of `d f` (degree + 1).
    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    /// Form with constant coefficients; its derivative is analytically zero.
    pub fn constant(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self, FormError> {
        if degree > dim {
            return Err(FormError::DegreeOverflow { degree, dim });
        }
        let expected = binomial(dim, degree);
        if coeffs.len() != expected {
            return Err(FormError::CoefficientLength { expected, got: coeffs.len() });
        }
        let zeros = vec![0.0; binomial(dim, degree + 1)];
        let mut form = Self::new(dim, degree, move |_| coeffs.clone())?;
        if degree < dim {
            form = form.with_derivative(move |_| zeros.clone());
        }
        Ok(form)
    }

    pub fn zero(dim: usize, degree: usize) -> Result<Self, FormError> {
        Self::constant(dim, degree, vec![0.0; binomial(dim, degree)])
    }

    /// `scale * dx^{indices[0]} ^ dx^{indices[1]} ^ ...`; indices need not be sorted.
    pub fn coordinate(dim: usize, indices: &[usize], scale: f64) -> Result<Self, FormError> {
        let degree = indices.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(FormError::DimensionMismatch { expected: dim, got: bad + 1 });
        }
        let mut coeffs = vec![0.0; binomial(dim, degree)];
        let sign = permutation_sign(indices);
        if sign != 0.0 {
            let mut sorted = indices.to_vec();
            sorted.sort_unstable();
            coeffs[subset_index(dim, &sorted)] = sign * scale;
        }
        Self::constant(dim, degree, coeffs)
    }

    /// Scalar function (0-form) with analytic gradient.
    pub fn scalar<F, G>(dim: usize, value: F, gradient: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            degree: 0,
            dim,
            coeffs: Arc::new(move |p| vec![value(p)]),
            derivative: Some(Arc::new(gradient)),
        }
    }

    /// Scalar function without gradient information (finite differences are used).
    pub fn scalar_fd<F>(dim: usize, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { degree: 0, dim, coeffs: Arc::new(move |p| vec![value(p)]), derivative: None }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn basis_len(&self) -> usize {
        binomial(self.dim, self.degree)
    }

    /// Coefficients at `p` over the lexicographic basis.
    pub fn coefficients(&self, p: &[f64]) -> Vec<f64> {
        (self.coeffs)(p)
    }

    /// Value of a 0-form.
    pub fn value(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(self.degree, 0);
        (self.coeffs)(p)[0]
    }

    /// Gradient of a 0-form: analytic when available, else central differences.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.degree, 0);
        match &self.derivative {
            Some(d) => d(p),
            None => fd_derivative(&self.coeffs, self.dim, 0, p, DEFAULT_FD_STEP),
        }
    }

    /// Evaluate on `k` tangent vectors sharing a base point.
    pub fn evaluate(&self, vs: &[TangentVector]) -> Result<f64, FormError> {
        if vs.len() != self.degree {
            return Err(FormError::ArityMismatch { expected: self.degree, got: vs.len() });
        }
        if self.degree == 0 {
            // a 0-form has no vectors to define a base; callers use `value`
            return Err(FormError::ArityMismatch { expected: 1, got: 0 });
        }
        let base = &vs[0].base;
        if base.len() != self.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: base.len() });
        }
        for v in vs {
            if v.dim() != self.dim {
                return Err(FormError::DimensionMismatch { expected: self.dim, got: v.dim() });
            }
            if &v.base != base {
                return Err(FormError::BaseMismatch);
            }
        }
        let cols: Vec<&[f64]> = vs.iter().map(|v| v.components.as_slice()).collect();
        self.evaluate_at(base, &cols)
    }

    /// Evaluate at `p` on raw component vectors.
    pub fn evaluate_at(&self, p: &[f64], vectors: &[&[f64]]) -> Result<f64, FormError> {
        if vectors.len() != self.degree {
            return Err(FormError::ArityMismatch { expected: self.degree, got: vectors.len() });
        }
        if p.len() != self.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: p.len() });
        }
        let coeffs = self.checked_coefficients(p)?;
        if self.degree == 0 {
            return Ok(coeffs[0]);
        }
        let k = self.degree;
        let mut total = 0.0;
        let mut minor = vec![0.0; k * k];
        for (idx, subset) in subsets(self.dim, k).iter().enumerate() {
            let c = coeffs[idx];
            if c == 0.0 {
                continue;
            }
            for (r, &row) in subset.iter().enumerate() {
                for (col, v) in vectors.iter().enumerate() {
                    minor[r * k + col] = v[row];
                }
            }
            total += c * linalg::det_in_place(&mut minor.clone(), k);
        }
        Ok(total)
    }

    /// Matrix `M_ij = f(e_i, e_j)` of a 2-form at `p`, row-major.
    pub fn matrix(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.degree, 2);
        let n = self.dim;
        let c = (self.coeffs)(p);
        let mut m = vec![0.0; n * n];
        for (idx, s) in subsets(n, 2).iter().enumerate() {
            m[s[0] * n + s[1]] = c[idx];
            m[s[1] * n + s[0]] = -c[idx];
        }
        m
    }

    fn checked_coefficients(&self, p: &[f64]) -> Result<Vec<f64>, FormError> {
        let c = (self.coeffs)(p);
        let expected = self.basis_len();
        if c.len() != expected {
            return Err(FormError::CoefficientLength { expected, got: c.len() });
        }
        Ok(c)
    }

    pub fn add(&self, other: &KForm) -> Result<KForm, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.degree != other.degree {
            return Err(FormError::ArityMismatch { expected: self.degree, got: other.degree });
        }
        let (a, b) = (self.coeffs.clone(), other.coeffs.clone());
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(da), Some(db)) => {
                let (da, db) = (da.clone(), db.clone());
                Some(Arc::new(move |p: &[f64]| add_vec(&da(p), &db(p))) as CoeffFn)
            }
            _ => None,
        };
        Ok(KForm {
            degree: self.degree,
            dim: self.dim,
            coeffs: Arc::new(move |p| add_vec(&a(p), &b(p))),
            derivative,
        })
    }

    pub fn scale(&self, factor: f64) -> KForm {
        let a = self.coeffs.clone();
        let derivative = self.derivative.clone().map(|d| {
            Arc::new(move |p: &[f64]| d(p).into_iter().map(|x| factor * x).collect::<Vec<_>>()) as CoeffFn
        });
        KForm {
            degree: self.degree,
            dim: self.dim,
            coeffs: Arc::new(move |p| a(p).into_iter().map(|x| factor * x).collect()),
            derivative,
        }
    }

    pub fn sub(&self, other: &KForm) -> Result<KForm, FormError> {
        self.add(&other.scale(-1.0))
    }

    /// Exterior product. Graded-commutative: `a ^ b = (-1)^{kl} b ^ a`.
    pub fn wedge(&self, other: &KForm) -> Result<KForm, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (k, l, dim) = (self.degree, other.degree, self.dim);
        if k + l > dim {
            return Err(FormError::DegreeOverflow { degree: k + l, dim });
        }
        let table = Arc::new(WedgeTable::new(dim, k, l));
        let (a, b) = (self.coeffs.clone(), other.coeffs.clone());
        let t = table.clone();
        let coeffs: CoeffFn = Arc::new(move |p| t.apply(&a(p), &b(p)));

        // d(a ^ b) = da ^ b + (-1)^k a ^ db
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(da), Some(db)) if k + l < dim => {
                let left = Arc::new(WedgeTable::new(dim, k + 1, l));
                let right = Arc::new(WedgeTable::new(dim, k, l + 1));
                let (a, b, da, db) = (self.coeffs.clone(), other.coeffs.clone(), da.clone(), db.clone());
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Some(Arc::new(move |p: &[f64]| {
                    let (av, bv) = (a(p), b(p));
                    let x = left.apply(&da(p), &bv);
                    let y = right.apply(&av, &db(p));
                    x.iter().zip(&y).map(|(u, v)| u + sign * v).collect::<Vec<_>>()
                }) as CoeffFn)
            }
            _ => None,
        };
        Ok(KForm { degree: k + l, dim, coeffs, derivative })
    }

    /// Interior product `i_X f`.
    pub fn interior(&self, field: &VectorField) -> Result<KForm, FormError> {
        if self.degree == 0 {
            return Err(FormError::ZeroDegree);
        }
        let (dim, k) = (self.dim, self.degree);
        // (output index, vector component, input index, sign)
        let mut terms = Vec::new();
        for (oi, small) in subsets(dim, k - 1).iter().enumerate() {
            for j in (0..dim).filter(|j| !small.contains(j)) {
                let mut big = small.clone();
                big.push(j);
                big.sort_unstable();
                let pos = big.iter().position(|&x| x == j).unwrap_or(0);
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((oi, j, subset_index(dim, &big), sign));
            }
        }
        let out_len = binomial(dim, k - 1);
        let (f, x) = (self.coeffs.clone(), field.clone());
        Ok(KForm {
            degree: k - 1,
            dim,
            coeffs: Arc::new(move |p| {
                let c = f(p);
                let v = x(p);
                let mut out = vec![0.0; out_len];
                for &(o, j, i, s) in &terms {
                    out[o] += s * v[j] * c[i];
                }
                out
            }),
            derivative: None,
        })
    }

    /// Interior product with a constant vector field.
    pub fn interior_constant(&self, components: Vec<f64>) -> Result<KForm, FormError> {
        if components.len() != self.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: components.len() });
        }
        let field: VectorField = Arc::new(move |_| components.clone());
        self.interior(&field)
    }

    /// Exterior derivative; analytic when available, else central differences with step `h`.
    pub fn exterior_derivative(&self, h: f64) -> Result<KForm, FormError> {
        if self.degree >= self.dim {
            return Err(FormError::TopDegree { degree: self.degree });
        }
        let (dim, k) = (self.dim, self.degree);
        if let Some(d) = &self.derivative {
            let mut form = KForm { degree: k + 1, dim, coeffs: d.clone(), derivative: None };
            if k + 2 <= dim {
                // d(df) = 0
                let zeros = vec![0.0; binomial(dim, k + 2)];
                form.derivative = Some(Arc::new(move |_| zeros.clone()));
            }
            return Ok(form);
        }
        let f = self.coeffs.clone();
        Ok(KForm {
            degree: k + 1,
            dim,
            coeffs: Arc::new(move |p| fd_derivative(&f, dim, k, p, h)),
            derivative: None,
        })
    }

    /// Pullback along a chart map whose target dimension equals `self.dim`.
    pub fn pullback(&self, map: &ChartMap) -> Result<KForm, FormError> {
        if map.target_dim != self.dim {
            return Err(FormError::DimensionMismatch { expected: self.dim, got: map.target_dim });
        }
        let k = self.degree;
        let m = map.source_dim;
        if k > m {
            return Err(FormError::DegreeOverflow { degree: k, dim: m });
        }
        let coeffs = pullback_fn(self.coeffs.clone(), map.clone(), self.dim, k);
        let derivative = match &self.derivative {
            Some(d) if k < m => Some(pullback_fn(d.clone(), map.clone(), self.dim, k + 1)),
            _ => None,
        };
        Ok(KForm { degree: k, dim: m, coeffs, derivative })
    }

    /// `f ^ f ^ ... ^ f` (m factors); `power(0)` is the constant 0-form 1.
    pub fn power(&self, m: usize) -> Result<KForm, FormError> {
        if m * self.degree > self.dim {
            return Err(FormError::DegreeOverflow { degree: m * self.degree, dim: self.dim });
        }
        let mut acc = KForm::constant(self.dim, 0, vec![1.0])?;
        for _ in 0..m {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }
}

fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn pullback_fn(f: CoeffFn, map: ChartMap, target_dim: usize, k: usize) -> CoeffFn {
    let m = map.source_dim;
    let src = subsets(m, k);
    let dst = subsets(target_dim, k);
    Arc::new(move |x: &[f64]| {
        let y = map.apply(x);
        let c = f(&y);
        if k == 0 {
            return c;
        }
        let jac = map.jacobian(x);
        let mut out = vec![0.0; src.len()];
        let mut minor = vec![0.0; k * k];
        for (oi, cols) in src.iter().enumerate() {
            let mut acc = 0.0;
            for (di, rows) in dst.iter().enumerate() {
                if c[di] == 0.0 {
                    continue;
                }
                for (r, &row) in rows.iter().enumerate() {
                    for (cc, &col) in cols.iter().enumerate() {
                        minor[r * k + cc] = jac[row * m + col];
                    }
                }
                acc += c[di] * linalg::det_in_place(&mut minor.clone(), k);
            }
            out[oi] = acc;
        }
        out
    })
}

/// Central-difference exterior derivative of a degree-`k` coefficient function.
fn fd_derivative(f: &CoeffFn, dim: usize, k: usize, p: &[f64], h: f64) -> Vec<f64> {
    let partials: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let (fp, fm) = (f(&plus), f(&minus));
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let out_sets = subsets(dim, k + 1);
    let mut out = vec![0.0; out_sets.len()];
    for (oi, big) in out_sets.iter().enumerate() {
        for (pos, &j) in big.iter().enumerate() {
            let small: Vec<usize> = big.iter().copied().filter(|&x| x != j).collect();
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            out[oi] += sign * partials[j][subset_index(dim, &small)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx(dim: usize, i: usize) -> KForm {
        KForm::coordinate(dim, &[i], 1.0).unwrap()
    }

    #[test]
    fn subset_ranks_match_enumeration() {
        for n in 1..7 {
            for k in 0..=n {
                for (i, s) in subsets(n, k).iter().enumerate() {
                    assert_eq!(subset_index(n, s), i, "n={n} k={k} s={s:?}");
                }
                assert_eq!(subsets(n, k).len(), binomial(n, k));
            }
        }
    }

    #[test]
    fn evaluate_coordinate_forms() {
        let f = KForm::coordinate(2, &[0, 1], 1.0).unwrap();
        let p = [0.3, -1.2];
        let ex = TangentVector::basis(&p, 0);
        let ey = TangentVector::basis(&p, 1);
        assert_eq!(f.evaluate(&[ex.clone(), ey.clone()]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[ex.clone(), ex.clone()]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[ey, ex]).unwrap(), -1.0);

        let w = KForm::coordinate(4, &[0, 1], 1.0)
            .unwrap()
            .add(&KForm::coordinate(4, &[2, 3], 1.0).unwrap())
            .unwrap();
        let q = [0.0; 4];
        let v = w.evaluate(&[TangentVector::basis(&q, 2), TangentVector::basis(&q, 3)]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn evaluate_rejects_bad_arity_and_base() {
        let f = KForm::coordinate(2, &[0, 1], 1.0).unwrap();
        let p = [0.0, 0.0];
        let err = f.evaluate(&[TangentVector::basis(&p, 0)]).unwrap_err();
        assert_eq!(err, FormError::ArityMismatch { expected: 2, got: 1 });
        let err = f
            .evaluate(&[TangentVector::basis(&p, 0), TangentVector::basis(&[1.0, 0.0], 1)])
            .unwrap_err();
        assert_eq!(err, FormError::BaseMismatch);
        let err = f
            .evaluate(&[TangentVector::basis(&[0.0; 3], 0), TangentVector::basis(&[0.0; 3], 1)])
            .unwrap_err();
        assert!(matches!(err, FormError::DimensionMismatch { .. }));
    }

    #[test]
    fn wedge_examples() {
        let xy = dx(2, 0).wedge(&dx(2, 1)).unwrap();
        assert_eq!(xy.coefficients(&[0.0, 0.0]), vec![1.0]);
        let xx = dx(2, 0).wedge(&dx(2, 0)).unwrap();
        assert_eq!(xx.coefficients(&[0.0, 0.0]), vec![0.0]);

        let a = KForm::coordinate(4, &[0, 1], 1.0).unwrap();
        let b = KForm::coordinate(4, &[2, 3], 1.0).unwrap();
        let vol = a.wedge(&b).unwrap();
        let e = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let frame: Vec<&[f64]> = e.iter().map(|r| r.as_slice()).collect();
        assert_eq!(vol.evaluate_at(&[0.0; 4], &frame).unwrap(), 1.0);

        let err = a.wedge(&KForm::coordinate(4, &[0, 1, 2], 1.0).unwrap()).unwrap_err();
        assert_eq!(err, FormError::DegreeOverflow { degree: 5, dim: 4 });
    }

    #[test]
    fn interior_examples() {
        let xy = KForm::coordinate(2, &[0, 1], 1.0).unwrap();
        let r = xy.interior_constant(vec![1.0, 0.0]).unwrap();
        assert_eq!(r.coefficients(&[0.0, 0.0]), vec![0.0, 1.0]); // dy

        let w = KForm::coordinate(4, &[0, 1], 1.0)
            .unwrap()
            .add(&KForm::coordinate(4, &[2, 3], 1.0).unwrap())
            .unwrap();
        let r = w.interior_constant(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(r.coefficients(&[0.0; 4]), vec![0.0, 0.0, 1.0, 0.0]); // dz

        let f = KForm::scalar_fd(2, |p| p[0]);
        assert_eq!(f.interior_constant(vec![1.0, 0.0]).unwrap_err(), FormError::ZeroDegree);
    }

    #[test]
    fn exterior_derivative_examples() {
        // d(sin t) = cos t dt, analytic and finite-difference paths
        let s = KForm::scalar(1, |p| p[0].sin(), |p| vec![p[0].cos()]);
        let ds = s.exterior_derivative(DEFAULT_FD_STEP).unwrap();
        assert_eq!(ds.coefficients(&[0.7]), vec![0.7f64.cos()]);
        let s_fd = KForm::scalar_fd(1, |p| p[0].sin());
        let ds_fd = s_fd.exterior_derivative(DEFAULT_FD_STEP).unwrap();
        assert!((ds_fd.coefficients(&[0.7])[0] - 0.7f64.cos()).abs() < 1e-9);

        // d(p dq) with coordinates (q, p): coefficient of dq^dp is -1
        let pdq = KForm::new(2, 1, |x| vec![x[1], 0.0]).unwrap();
        let d = pdq.exterior_derivative(DEFAULT_FD_STEP).unwrap();
        assert!((d.coefficients(&[0.4, 0.9])[0] + 1.0).abs() < 1e-9);

        let c = KForm::coordinate(3, &[0], 2.0).unwrap();
        assert_eq!(c.exterior_derivative(DEFAULT_FD_STEP).unwrap().coefficients(&[1.0, 2.0, 3.0]), vec![0.0; 3]);

        let top = KForm::coordinate(2, &[0, 1], 1.0).unwrap();
        assert_eq!(top.exterior_derivative(DEFAULT_FD_STEP).unwrap_err(), FormError::TopDegree { degree: 2 });
    }

    #[test]
    fn pullback_examples() {
        // projection (x, t) -> t pulls d(theta) back to dt
        let dtheta = KForm::coordinate(1, &[0], 1.0).unwrap();
        let proj = ChartMap::projection(2, &[1]);
        assert_eq!(dtheta.pullback(&proj).unwrap().coefficients(&[0.3, 0.1]), vec![0.0, 1.0]);

        let xy = KForm::coordinate(2, &[0, 1], 1.0).unwrap();
        assert_eq!(xy.pullback(&ChartMap::identity(2)).unwrap().coefficients(&[0.5, 0.5]), vec![1.0]);

        // degree-2 circle map z -> 2z
        let double = ChartMap::affine(1, 1, vec![2.0], vec![0.0]);
        assert_eq!(dtheta.pullback(&double).unwrap().coefficients(&[0.2]), vec![2.0]);

        let err = xy.pullback(&ChartMap::identity(3)).unwrap_err();
        assert!(matches!(err, FormError::DimensionMismatch { .. }));
    }

    #[test]
    fn power_examples() {
        let w = KForm::coordinate(4, &[0, 1], 1.0)
            .unwrap()
            .add(&KForm::coordinate(4, &[2, 3], 1.0).unwrap())
            .unwrap();
        assert_eq!(w.power(2).unwrap().coefficients(&[0.0; 4]), vec![2.0]);
        let zero = w.power(0).unwrap();
        assert_eq!(zero.degree(), 0);
        assert_eq!(zero.value(&[0.0; 4]), 1.0);
        let single = KForm::coordinate(4, &[0, 1], 1.0).unwrap();
        assert_eq!(single.power(2).unwrap().coefficients(&[0.0; 4]), vec![0.0]);
        assert!(matches!(w.power(3), Err(FormError::DegreeOverflow { .. })));
    }

    #[test]
    fn analytic_d_squared_is_exactly_zero() {
        let f = KForm::scalar(3, |p| p[0].sin() * p[1].cos() + p[2], |p| {
            vec![p[0].cos() * p[1].cos(), -p[0].sin() * p[1].sin(), 1.0]
        });
        let ddf = f.exterior_derivative(DEFAULT_FD_STEP).unwrap().exterior_derivative(DEFAULT_FD_STEP).unwrap();
        assert_eq!(ddf.coefficients(&[0.1, 0.2, 0.3]), vec![0.0; 3]);
    }
}
