//! Ordinary least squares per region, with rank-one refits.
//!
//! Every model carries an intercept; parameter vectors are laid out as
//! `[intercept, beta_1, .., beta_m]` and the design row of a unit is
//! `[1, x_1, .., x_m]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gram matrices whose eigenvalue ratio exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Rank-one updates whose denominator is this close to zero are replaced by
/// a refit from the accumulated normal equations.
pub const BREAKDOWN_EPS: f64 = 1e-12;

/// Covariates and response for `n` units, `m` covariates each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    covariate_names: Vec<String>,
    ids: Option<Vec<String>>,
    coords: Option<Vec<[f64; 2]>>,
}

impl Dataset {
    /// `x` is row-major, `n * m` values.
    pub fn from_flat(n: usize, m: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidDataset(format!(
                "need at least one unit and one covariate (n={n}, m={m})"
            )));
        }
        if x.len() != n * m {
            return Err(Error::SizeMismatch {
                what: "covariate matrix",
                got: x.len(),
                expected: n * m,
            });
        }
        if y.len() != n {
            return Err(Error::SizeMismatch {
                what: "response vector",
                got: y.len(),
                expected: n,
            });
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at flat position {i}"
            )));
        }
        Ok(Self {
            n,
            m,
            x,
            y,
            covariate_names: (1..=m).map(|c| format!("x{c}")).collect(),
            ids: None,
            coords: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::InvalidDataset(format!(
                "row {bad} has {} covariates, expected {m}",
                rows[bad].len()
            )));
        }
        Self::from_flat(rows.len(), m, rows.concat(), y)
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.m {
            return Err(Error::SizeMismatch {
                what: "covariate names",
                got: names.len(),
                expected: self.m,
            });
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::SizeMismatch {
                what: "unit ids",
                got: ids.len(),
                expected: self.n,
            });
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset(format!("duplicate unit id {:?}", w[0])));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::SizeMismatch {
                what: "coordinates",
                got: coords.len(),
                expected: self.n,
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        &self.x[unit * self.m..(unit + 1) * self.m]
    }

    pub fn y(&self, unit: usize) -> f64 {
        self.y[unit]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// External identifier of `unit`, or its index when no ids were given.
    pub fn id(&self, unit: usize) -> String {
        match &self.ids {
            Some(ids) => ids[unit].clone(),
            None => unit.to_string(),
        }
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    /// z-scores every covariate column and the response (population standard
    /// deviation). Ids and coordinates are kept.
    pub fn standardize(&self) -> Result<(Dataset, Standardization)> {
        let nf = self.n as f64;
        let moments = |values: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = values.collect();
            let mean = v.iter().sum::<f64>() / nf;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / nf;
            (mean, var.sqrt())
        };
        let mut x_mean = Vec::with_capacity(self.m);
        let mut x_sd = Vec::with_capacity(self.m);
        for c in 0..self.m {
            let (mean, sd) = moments(&mut (0..self.n).map(|i| self.x[i * self.m + c]));
            if sd <= 0.0 {
                return Err(Error::InvalidDataset(format!(
                    "covariate {:?} is constant and cannot be standardized",
                    self.covariate_names[c]
                )));
            }
            x_mean.push(mean);
            x_sd.push(sd);
        }
        let (y_mean, y_sd) = moments(&mut self.y.iter().copied());
        if y_sd <= 0.0 {
            return Err(Error::InvalidDataset(
                "response is constant and cannot be standardized".into(),
            ));
        }
        let x = self
            .x
            .iter()
            .enumerate()
            .map(|(k, v)| (v - x_mean[k % self.m]) / x_sd[k % self.m])
            .collect();
        let y = self.y.iter().map(|v| (v - y_mean) / y_sd).collect();
        let scaled = Dataset {
            x,
            y,
            ..self.clone()
        };
        Ok((
            scaled,
            Standardization {
                x_mean,
                x_sd,
                y_mean,
                y_sd,
            },
        ))
    }
}

/// Column means and standard deviations used to z-score a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl Standardization {
    /// Re-expresses raw-scale parameters `[a, b_1..b_m]` on the standardized
    /// scale, so that both describe the same linear relation.
    pub fn to_standardized(&self, params: &[f64]) -> Vec<f64> {
        let slopes = &params[1..];
        let shift: f64 = slopes.iter().zip(&self.x_mean).map(|(b, mu)| b * mu).sum();
        let mut out = Vec::with_capacity(params.len());
        out.push((params[0] + shift - self.y_mean) / self.y_sd);
        out.extend(
            slopes
                .iter()
                .zip(&self.x_sd)
                .map(|(b, sd)| b * sd / self.y_sd),
        );
        out
    }

    /// Inverse of [`Standardization::to_standardized`].
    pub fn to_raw(&self, params: &[f64]) -> Vec<f64> {
        let slopes: Vec<f64> = params[1..]
            .iter()
            .zip(&self.x_sd)
            .map(|(b, sd)| b * self.y_sd / sd)
            .collect();
        let shift: f64 = slopes.iter().zip(&self.x_mean).map(|(b, mu)| b * mu).sum();
        let mut out = Vec::with_capacity(params.len());
        out.push(params[0] * self.y_sd + self.y_mean - shift);
        out.extend(slopes);
        out
    }
}

/// Accumulated normal equations `X'X`, `X'y`, `y'y` over a member set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n_obs: usize,
}

impl NormalEquations {
    pub fn empty(m: usize) -> Self {
        Self {
            gram: DMatrix::zeros(m + 1, m + 1),
            xty: DVector::zeros(m + 1),
            yty: 0.0,
            n_obs: 0,
        }
    }

    pub fn from_members(dataset: &Dataset, members: &[usize]) -> Self {
        let mut eq = Self::empty(dataset.m());
        for &u in members {
            eq.accumulate(dataset.row(u), dataset.y(u), 1.0);
        }
        eq
    }

    fn accumulate(&mut self, x: &[f64], y: f64, sign: f64) {
        let dim = x.len() + 1;
        let at = |k: usize| if k == 0 { 1.0 } else { x[k - 1] };
        for a in 0..dim {
            let xa = at(a);
            for b in a..dim {
                let v = sign * xa * at(b);
                self.gram[(a, b)] += v;
                if a != b {
                    self.gram[(b, a)] += v;
                }
            }
            self.xty[a] += sign * xa * y;
        }
        self.yty += sign * y * y;
        if sign > 0.0 {
            self.n_obs += 1;
        } else {
            self.n_obs -= 1;
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        self.accumulate(x, y, 1.0);
    }

    pub fn remove(&mut self, x: &[f64], y: f64) {
        self.accumulate(x, y, -1.0);
    }

    /// Normal equations of the union of two disjoint member sets.
    pub fn merged(&self, other: &NormalEquations) -> NormalEquations {
        NormalEquations {
            gram: &self.gram + &other.gram,
            xty: &self.xty + &other.xty,
            yty: self.yty + other.yty,
            n_obs: self.n_obs + other.n_obs,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Least-squares solution (minimum-norm when singular).
    pub fn solve(&self) -> Solution {
        let dim = self.gram.nrows();
        let eig = SymmetricEigen::new(self.gram.clone());
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        let lmin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let well_posed = lmax > 0.0 && lmin > 0.0 && lmax / lmin <= MAX_CONDITION;
        if well_posed {
            if let Some(chol) = self.gram.clone().cholesky() {
                let params = chol.solve(&self.xty);
                let gram_inv = chol.inverse();
                return Solution {
                    params,
                    gram_inv,
                    degenerate: false,
                };
            }
        }
        let cutoff = lmax * MAX_CONDITION.recip();
        let inv_vals = eig
            .eigenvalues
            .map(|l| if l > cutoff && l > 0.0 { l.recip() } else { 0.0 });
        let q = &eig.eigenvectors;
        let gram_inv = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
        let params = &gram_inv * &self.xty;
        debug_assert_eq!(params.len(), dim);
        Solution {
            params,
            gram_inv,
            degenerate: true,
        }
    }

    /// Residual sum of squares of the least-squares fit, from the
    /// accumulated moments alone: `y'y - b'X'y`. Subject to cancellation when
    /// the fit is nearly exact; use it to rank candidates, not to report.
    pub fn fitted_ssr(&self) -> f64 {
        let sol = self.solve();
        (self.yty - sol.params.dot(&self.xty)).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub params: DVector<f64>,
    pub gram_inv: DMatrix<f64>,
    pub degenerate: bool,
}

/// Fitted linear model of one region, with the state needed for rank-one
/// refits.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    params: DVector<f64>,
    gram_inv: DMatrix<f64>,
    normal: NormalEquations,
    degenerate: bool,
}

/// Fits `y = a + x'b` by least squares over `members`.
pub fn fit_ols(dataset: &Dataset, members: &[usize]) -> Result<RegionModel> {
    let needed = dataset.m() + 1;
    if members.len() < needed {
        return Err(Error::TooFewObservations {
            got: members.len(),
            needed,
        });
    }
    let model = RegionModel::from_normal_equations(NormalEquations::from_members(dataset, members));
    if model.degenerate {
        log::warn!(
            "rank-deficient design over {} units; using minimum-norm solution",
            members.len()
        );
    }
    Ok(model)
}

/// `sum (y_i - predict(x_i))^2` over `members`.
pub fn region_ssr(model: &RegionModel, dataset: &Dataset, members: &[usize]) -> f64 {
    members
        .iter()
        .map(|&u| model.residual(dataset.row(u), dataset.y(u)).powi(2))
        .sum()
}

impl RegionModel {
    pub fn from_normal_equations(normal: NormalEquations) -> Self {
        let Solution {
            params,
            gram_inv,
            degenerate,
        } = normal.solve();
        Self {
            params,
            gram_inv,
            normal,
            degenerate,
        }
    }

    /// A model with the given parameters and no observations. It predicts
    /// but cannot be updated incrementally.
    pub fn from_params(params: &[f64]) -> Self {
        let dim = params.len();
        Self {
            params: DVector::from_column_slice(params),
            gram_inv: DMatrix::zeros(dim, dim),
            normal: NormalEquations::empty(dim.saturating_sub(1)),
            degenerate: true,
        }
    }

    pub fn intercept(&self) -> f64 {
        self.params[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.params.as_slice()[1..]
    }

    /// `[intercept, coefficients..]`.
    pub fn params(&self) -> &[f64] {
        self.params.as_slice()
    }

    pub fn m(&self) -> usize {
        self.params.len() - 1
    }

    pub fn n_obs(&self) -> usize {
        self.normal.n_obs
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Enough observations for a unique least-squares fit.
    pub fn is_valid(&self) -> bool {
        self.n_obs() > self.m()
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn normal_equations(&self) -> &NormalEquations {
        &self.normal
    }

    /// `max |G^-1 G - I|`.
    pub fn inverse_error(&self) -> f64 {
        let dim = self.params.len();
        let prod = &self.gram_inv * &self.normal.gram;
        (prod - DMatrix::identity(dim, dim)).abs().max()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.m() {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.m(),
            });
        }
        Ok(self.predict_row(x))
    }

    #[inline]
    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        let p = self.params.as_slice();
        p[0] + x.iter().zip(&p[1..]).map(|(a, b)| a * b).sum::<f64>()
    }

    #[inline]
    pub(crate) fn residual(&self, x: &[f64], y: f64) -> f64 {
        y - self.predict_row(x)
    }

    fn design(x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len() + 1, std::iter::once(1.0).chain(x.iter().copied()))
    }

    /// `x' G^-1 x` for the design row of `x`.
    pub fn leverage(&self, x: &[f64]) -> f64 {
        let d = Self::design(x);
        (&self.gram_inv * &d).dot(&d)
    }

    /// Increase of this region's fitted SSR if `(x, y)` joined it. `None`
    /// when the closed form does not apply (singular fit).
    pub fn ssr_increase_if_added(&self, x: &[f64], y: f64) -> Option<f64> {
        if self.degenerate {
            return None;
        }
        let denom = 1.0 + self.leverage(x);
        (denom.abs() > BREAKDOWN_EPS).then(|| self.residual(x, y).powi(2) / denom)
    }

    /// Decrease of this region's fitted SSR if member `(x, y)` left it.
    /// `None` when the closed form does not apply (singular fit, leverage
    /// one, or too few remaining members).
    pub fn ssr_decrease_if_removed(&self, x: &[f64], y: f64) -> Option<f64> {
        if self.degenerate || self.n_obs() <= self.m() + 1 {
            return None;
        }
        let denom = 1.0 - self.leverage(x);
        (denom.abs() > BREAKDOWN_EPS).then(|| self.residual(x, y).powi(2) / denom)
    }

    /// Refit as if `(x, y)` had been a member, via Sherman-Morrison on the
    /// cached inverse; falls back to a full solve when the update breaks down.
    pub fn add_unit(&self, x: &[f64], y: f64) -> Result<RegionModel> {
        self.check_dim(x)?;
        let mut normal = self.normal.clone();
        normal.add(x, y);
        Ok(self.rank_one(normal, x, y, 1.0))
    }

    /// Refit as if member `(x, y)` were absent (Sherman-Morrison downdate).
    pub fn remove_unit(&self, x: &[f64], y: f64) -> Result<RegionModel> {
        self.check_dim(x)?;
        let needed = self.m() + 1;
        if self.n_obs() < needed + 1 {
            return Err(Error::TooFewObservations {
                got: self.n_obs().saturating_sub(1),
                needed,
            });
        }
        let mut normal = self.normal.clone();
        normal.remove(x, y);
        Ok(self.rank_one(normal, x, y, -1.0))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m() {
            return Err(Error::DimensionMismatch {
                got: x.len(),
                expected: self.m(),
            });
        }
        Ok(())
    }

    fn rank_one(&self, normal: NormalEquations, x: &[f64], y: f64, sign: f64) -> RegionModel {
        if self.degenerate {
            return RegionModel::from_normal_equations(normal);
        }
        let d = Self::design(x);
        let gd = &self.gram_inv * &d;
        let denom = 1.0 + sign * gd.dot(&d);
        if denom.abs() <= BREAKDOWN_EPS {
            return RegionModel::from_normal_equations(normal);
        }
        let gram_inv = &self.gram_inv - (&gd * gd.transpose()) * (sign / denom);
        let residual = self.residual(x, y);
        // G_new^-1 d = G^-1 d / denom
        let params = &self.params + &gd * (sign * residual / denom);
        RegionModel {
            params,
            gram_inv,
            normal,
            degenerate: false,
        }
    }
}
