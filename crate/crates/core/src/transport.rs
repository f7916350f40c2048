//! Entropic optimal transport with KL-relaxed marginals between a source's
//! model band variances and its estimated band powers in one frame.
//!
//! For a frame with model variances `sigma2` and estimated powers `ypow`
//! (both length `F`), the plan `Q` minimizes
//!
//! ```text
//! <Q, C> + (1/lambda) sum Q log Q + gamma [ KL(Q 1 | sigma2) + KL(Q^T 1 | ypow) ]
//! ```
//!
//! with `C[f, f'] = |ypow[f] - sigma2[f']|` and generalized KL. Stationarity
//! gives `Q = diag(xi) K diag(nu)` with `K = exp(-lambda C - 1)`; the
//! scalings are found by the fixed-point iteration
//!
//! ```text
//! xi <- ( sigma2 / (K nu) )^p,   nu = ( ypow / (K^T xi) )^p,   p = lambda gamma / (lambda gamma + 1)
//! ```
//!
//! and the re-allocated variances are the row sums `sigma2_hat = Q 1`.
//!
//! The hyperparameter `r` is carried in [`SinkhornParams`] for configuration
//! compatibility but does not enter any computation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    /// Inverse entropic temperature.
    pub lambda: f64,
    /// Marginal relaxation weight.
    pub gamma: f64,
    /// Number of fixed-point iterations.
    pub inner_iters: usize,
    /// Floor applied to inputs, kernel entries and denominators.
    pub eps_floor: f64,
    /// Divide both vectors by their joint maximum before solving.
    pub normalize_scale: bool,
    /// Accepted and ignored.
    pub r: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            gamma: 1.0,
            inner_iters: 10,
            eps_floor: crate::EPS_FLOOR,
            normalize_scale: true,
            r: 2.0,
        }
    }
}

impl SinkhornParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be positive and finite"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig("gamma must be positive and finite"));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be at least 1"));
        }
        if !(self.eps_floor >= 0.0 && self.eps_floor.is_finite()) {
            return Err(Error::InvalidConfig("eps_floor must be nonnegative"));
        }
        Ok(())
    }

    /// `p = lambda gamma / (lambda gamma + 1)`, always in `(0, 1)`.
    pub fn exponent(&self) -> f64 {
        let lg = self.lambda * self.gamma;
        lg / (lg + 1.0)
    }

    /// Whether the sorted-kernel fast path reproduces the floored dense
    /// kernel exactly: normalized inputs keep every cost in `[0, 1]`, so no
    /// kernel entry falls below the floor as long as `lambda + 1` stays
    /// under `-ln(eps_floor)`.
    fn fast_path_exact(&self) -> bool {
        self.normalize_scale
            && (self.eps_floor == 0.0 || self.lambda + 1.0 <= -math::ln(self.eps_floor))
    }
}

/// Model variances and estimated powers of one source in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowerPair {
    pub sigma2: Vec<f64>,
    pub ypow: Vec<f64>,
}

impl BandPowerPair {
    /// Checks lengths and signs, then floors both vectors at `eps_floor`.
    pub fn new(sigma2: Vec<f64>, ypow: Vec<f64>, eps_floor: f64) -> Result<Self> {
        if sigma2.len() != ypow.len() {
            return Err(Error::shape("band power pair", sigma2.len(), ypow.len()));
        }
        check_nonneg(&sigma2, "sigma2")?;
        check_nonneg(&ypow, "ypow")?;
        let floor = |v: Vec<f64>| v.into_iter().map(|x| x.max(eps_floor)).collect();
        Ok(Self {
            sigma2: floor(sigma2),
            ypow: floor(ypow),
        })
    }

    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }
}

fn check_nonneg(v: &[f64], what: &'static str) -> Result<()> {
    for &x in v {
        if !x.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if x < 0.0 {
            return Err(Error::NegativeEntry(what));
        }
    }
    Ok(())
}

/// Nonnegative `F x F` coupling, row-major. Rows carry the `sigma2`
/// marginal, columns the `ypow` marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    size: usize,
    q: Vec<f64>,
}

impl TransportPlan {
    pub fn new(size: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != size * size {
            return Err(Error::shape("transport plan", size * size, q.len()));
        }
        check_nonneg(&q, "transport plan")?;
        Ok(Self { size, q })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.q[row * self.size + col]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.q.chunks(self.size.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for row in self.q.chunks(self.size.max(1)) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }
}

/// `C[f, f'] = |ypow[f] - sigma2[f']|`, row-major.
pub fn cost_matrix(pair: &BandPowerPair) -> Result<Vec<f64>> {
    if pair.sigma2.len() != pair.ypow.len() {
        return Err(Error::shape("band power pair", pair.sigma2.len(), pair.ypow.len()));
    }
    Ok(pair
        .ypow
        .iter()
        .flat_map(|&y| pair.sigma2.iter().map(move |&s| (y - s).abs()))
        .collect())
}

/// `K = max(exp(-lambda C - 1), eps_floor)` elementwise.
pub fn gibbs_kernel(cost: &[f64], lambda: f64, eps_floor: f64) -> Vec<f64> {
    cost.iter()
        .map(|&c| math::exp(-lambda * c - 1.0).max(eps_floor))
        .collect()
}

/// Output of [`optimal_mapping`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalMapping {
    pub plan: TransportPlan,
    /// Re-allocated variances `Q 1`, in the units of the inputs.
    pub sigma2_hat: Vec<f64>,
    /// Row scaling (normalized units).
    pub xi: Vec<f64>,
    /// Column scaling (normalized units).
    pub nu: Vec<f64>,
}

/// Matrix-free access to the Gibbs kernel.
trait KernelOp {
    /// `out = K v`
    fn apply(&self, v: &[f64], out: &mut [f64]);
    /// `out = K^T u`
    fn apply_t(&self, u: &[f64], out: &mut [f64]);
}

struct DenseKernel<'a> {
    n: usize,
    k: &'a [f64],
}

impl KernelOp for DenseKernel<'_> {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.k.chunks(self.n)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, &ui) in self.k.chunks(self.n).zip(u) {
            out.iter_mut().zip(row).for_each(|(o, k)| *o += k * ui);
        }
    }
}

/// Sums `sum_j exp(-lambda |q_i - p_j|) w_j` for fixed source positions
/// `p` and query positions `q` in `O(F)` per evaluation after an
/// `O(F log F)` setup, by sweeping the sorted sources left and right.
#[derive(Default)]
struct LaplaceSum {
    order: Vec<usize>,
    decay: Vec<f64>,
    slot: Vec<usize>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl LaplaceSum {
    fn prepare(&mut self, sources: &[f64], queries: &[f64], lambda: f64) {
        let n = sources.len();
        self.order.clear();
        self.order.extend(0..n);
        self.order
            .sort_unstable_by(|&a, &b| sources[a].total_cmp(&sources[b]));
        let pos = |k: usize| sources[self.order[k]];
        self.decay.clear();
        for k in 1..n {
            self.decay.push(math::exp(-lambda * (pos(k) - pos(k - 1))));
        }
        self.slot.clear();
        self.below.clear();
        self.above.clear();
        for &q in queries {
            let k = self.order.partition_point(|&j| sources[j] <= q);
            self.slot.push(k);
            self.below
                .push(if k > 0 { math::exp(-lambda * (q - pos(k - 1))) } else { 0.0 });
            self.above
                .push(if k < n { math::exp(-lambda * (pos(k) - q)) } else { 0.0 });
        }
    }

    fn eval(&self, weights: &[f64], scale: f64, out: &mut [f64], left: &mut [f64], right: &mut [f64]) {
        let n = self.order.len();
        if n == 0 {
            return;
        }
        left[0] = weights[self.order[0]];
        for k in 1..n {
            left[k] = left[k - 1] * self.decay[k - 1] + weights[self.order[k]];
        }
        right[n - 1] = weights[self.order[n - 1]];
        for k in (0..n - 1).rev() {
            right[k] = right[k + 1] * self.decay[k] + weights[self.order[k]];
        }
        for (i, o) in out.iter_mut().enumerate() {
            let k = self.slot[i];
            let lo = if k > 0 { left[k - 1] * self.below[i] } else { 0.0 };
            let hi = if k < n { right[k] * self.above[i] } else { 0.0 };
            *o = scale * (lo + hi);
        }
    }
}

/// Kernel `exp(-lambda |ypow_i - sigma2_j| - 1)` without forming it.
#[derive(Default)]
struct LaplaceKernel {
    rows: LaplaceSum,
    cols: LaplaceSum,
    scratch: core::cell::RefCell<(Vec<f64>, Vec<f64>)>,
}

impl LaplaceKernel {
    fn prepare(&mut self, row_pos: &[f64], col_pos: &[f64], lambda: f64) {
        // K v: sources are columns, queries are rows
        self.rows.prepare(col_pos, row_pos, lambda);
        // K^T u: sources are rows, queries are columns
        self.cols.prepare(row_pos, col_pos, lambda);
        let n = row_pos.len();
        let mut s = self.scratch.borrow_mut();
        s.0.resize(n, 0.0);
        s.1.resize(n, 0.0);
    }
}

const INV_E: f64 = 0.367_879_441_171_442_33;

impl KernelOp for LaplaceKernel {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        let (l, r) = &mut *s;
        self.rows.eval(v, INV_E, out, l, r);
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        let mut s = self.scratch.borrow_mut();
        let (l, r) = &mut *s;
        self.cols.eval(u, INV_E, out, l, r);
    }
}

/// Reusable buffers for repeated solves of the same size.
#[derive(Default)]
pub struct SinkhornWorkspace {
    sigma2: Vec<f64>,
    ypow: Vec<f64>,
    xi: Vec<f64>,
    nu: Vec<f64>,
    tmp: Vec<f64>,
    kernel: LaplaceKernel,
    dense: Vec<f64>,
}

fn load_scaled(dst: &mut Vec<f64>, src: &[f64], inv_scale: f64, eps: f64) {
    dst.clear();
    dst.extend(src.iter().map(|&v| v.max(eps) * inv_scale));
}

fn joint_max(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b).copied().fold(0.0, f64::max)
}

/// Runs the scaling iteration; on return `xi` and `nu` hold the final
/// scalings and `tmp` holds `K nu`. `observe` sees `(xi_old, xi_new)`.
#[allow(clippy::too_many_arguments)]
fn iterate_scalings<K: KernelOp>(
    kernel: &K,
    sigma2: &[f64],
    ypow: &[f64],
    params: &SinkhornParams,
    xi: &mut Vec<f64>,
    nu: &mut Vec<f64>,
    tmp: &mut Vec<f64>,
    mut observe: impl FnMut(&[f64], &[f64]),
) -> Result<()> {
    let n = sigma2.len();
    let p = params.exponent();
    let eps = params.eps_floor;
    xi.clear();
    xi.resize(n, 1.0);
    nu.resize(n, 0.0);
    tmp.resize(n, 0.0);
    let mut prev = Vec::with_capacity(n);
    let update_nu = |xi: &[f64], nu: &mut [f64], tmp: &mut [f64]| {
        kernel.apply_t(xi, tmp);
        for ((v, &y), &d) in nu.iter_mut().zip(ypow).zip(tmp.iter()) {
            *v = math::powf(y / d.max(eps), p);
        }
    };
    for _ in 0..params.inner_iters {
        update_nu(xi, nu, tmp);
        kernel.apply(nu, tmp);
        prev.clear();
        prev.extend_from_slice(xi);
        for ((x, &s), &d) in xi.iter_mut().zip(sigma2).zip(tmp.iter()) {
            *x = math::powf(s / d.max(eps), p);
        }
        observe(&prev, xi);
    }
    update_nu(xi, nu, tmp);
    kernel.apply(nu, tmp);
    if xi.iter().chain(nu.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transport scalings"));
    }
    Ok(())
}

fn solve_dense(
    pair: &BandPowerPair,
    params: &SinkhornParams,
    observe: impl FnMut(&[f64], &[f64]),
) -> Result<OptimalMapping> {
    params.validate()?;
    let n = pair.len();
    if pair.ypow.len() != n {
        return Err(Error::shape("band power pair", n, pair.ypow.len()));
    }
    check_nonneg(&pair.sigma2, "sigma2")?;
    check_nonneg(&pair.ypow, "ypow")?;
    let eps = params.eps_floor;
    let scale = if params.normalize_scale {
        joint_max(&pair.sigma2, &pair.ypow).max(eps).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    let mut scaled = BandPowerPair {
        sigma2: Vec::new(),
        ypow: Vec::new(),
    };
    load_scaled(&mut scaled.sigma2, &pair.sigma2, 1.0 / scale, eps);
    load_scaled(&mut scaled.ypow, &pair.ypow, 1.0 / scale, eps);
    // Kernel built directly from the inputs; it becomes the plan in place.
    let lambda = params.lambda;
    let mut k: Vec<f64> = scaled
        .ypow
        .iter()
        .flat_map(|&y| {
            scaled
                .sigma2
                .iter()
                .map(move |&s| math::exp(-lambda * (y - s).abs() - 1.0).max(eps))
        })
        .collect();
    let kernel = DenseKernel { n, k: &k };
    let (mut xi, mut nu, mut tmp) = (Vec::new(), Vec::new(), Vec::new());
    iterate_scalings(
        &kernel,
        &scaled.sigma2,
        &scaled.ypow,
        params,
        &mut xi,
        &mut nu,
        &mut tmp,
        observe,
    )?;
    for (row, &x) in k.chunks_mut(n.max(1)).zip(&xi) {
        let sx = scale * x;
        row.iter_mut().zip(&nu).for_each(|(v, &c)| *v *= sx * c);
    }
    let q = k;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transport plan"));
    }
    let sigma2_hat = xi.iter().zip(&tmp).map(|(x, kv)| scale * x * kv).collect();
    Ok(OptimalMapping {
        plan: TransportPlan { size: n, q },
        sigma2_hat,
        xi,
        nu,
    })
}

/// Solves for the transport plan and the re-allocated variances.
///
/// Builds the dense `F x F` kernel, so cost grows as `F^2` per iteration.
/// With `normalize_scale`, both vectors are divided by their joint maximum
/// `s` before solving; the returned plan and `sigma2_hat` are multiplied by
/// `s` afterwards so that `sigma2_hat == plan.row_sums()`.
pub fn optimal_mapping(pair: &BandPowerPair, params: &SinkhornParams) -> Result<OptimalMapping> {
    solve_dense(pair, params, |_, _| {})
}

/// `max_i |xi_new - xi_old|` after each fixed-point iteration.
pub fn fixed_point_increments(pair: &BandPowerPair, params: &SinkhornParams) -> Result<Vec<f64>> {
    let mut incs = Vec::with_capacity(params.inner_iters);
    solve_dense(pair, params, |old, new| {
        incs.push(
            old.iter()
                .zip(new)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    })?;
    Ok(incs)
}

/// Computes only `sigma2_hat = Q 1`, writing it into `out`.
///
/// When scale normalization is on and the kernel floor cannot bind, the
/// kernel is applied through sorted prefix sweeps in `O(F log F)` instead
/// of `O(F^2)`; otherwise this falls back to the dense solver. Both routes
/// agree to rounding.
pub fn reallocate(
    sigma2: &[f64],
    ypow: &[f64],
    params: &SinkhornParams,
    ws: &mut SinkhornWorkspace,
    out: &mut [f64],
) -> Result<()> {
    let n = sigma2.len();
    if ypow.len() != n {
        return Err(Error::shape("band power pair", n, ypow.len()));
    }
    if out.len() != n {
        return Err(Error::shape("reallocation output", n, out.len()));
    }
    let eps = params.eps_floor;
    let scale = if params.normalize_scale {
        joint_max(sigma2, ypow).max(eps).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    let inv = 1.0 / scale;
    load_scaled(&mut ws.sigma2, sigma2, inv, eps);
    load_scaled(&mut ws.ypow, ypow, inv, eps);
    if ws.sigma2.iter().chain(&ws.ypow).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("band powers"));
    }
    if params.fast_path_exact() {
        ws.kernel.prepare(&ws.ypow, &ws.sigma2, params.lambda);
        iterate_scalings(
            &ws.kernel,
            &ws.sigma2,
            &ws.ypow,
            params,
            &mut ws.xi,
            &mut ws.nu,
            &mut ws.tmp,
            |_, _| {},
        )?;
    } else {
        let pair = BandPowerPair {
            sigma2: core::mem::take(&mut ws.sigma2),
            ypow: core::mem::take(&mut ws.ypow),
        };
        ws.dense = gibbs_kernel(&cost_matrix(&pair)?, params.lambda, eps);
        let kernel = DenseKernel { n, k: &ws.dense };
        let res = iterate_scalings(
            &kernel,
            &pair.sigma2,
            &pair.ypow,
            params,
            &mut ws.xi,
            &mut ws.nu,
            &mut ws.tmp,
            |_, _| {},
        );
        ws.sigma2 = pair.sigma2;
        ws.ypow = pair.ypow;
        res?;
    }
    for ((o, x), kv) in out.iter_mut().zip(&ws.xi).zip(&ws.tmp) {
        *o = scale * x * kv;
    }
    Ok(())
}

/// `sum x log(x / y) - x + y`, with `0 log 0 = 0`.
fn generalized_kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let xlog = if x > 0.0 { x * math::ln(x / y) } else { 0.0 };
            xlog - x + y
        })
        .sum()
}

/// Evaluates the regularized transport objective at `plan`.
pub fn sinkhorn_objective(
    plan: &TransportPlan,
    pair: &BandPowerPair,
    params: &SinkhornParams,
) -> Result<f64> {
    let n = pair.len();
    if plan.size != n {
        return Err(Error::shape("transport plan", n, plan.size));
    }
    if plan.q.iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeEntry("transport plan"));
    }
    let cost = cost_matrix(pair)?;
    let transport: f64 = plan.q.iter().zip(&cost).map(|(q, c)| q * c).sum();
    let neg_entropy: f64 = plan
        .q
        .iter()
        .map(|&q| if q > 0.0 { q * math::ln(q) } else { 0.0 })
        .sum();
    let marg = generalized_kl(&plan.row_sums(), &pair.sigma2)
        + generalized_kl(&plan.col_sums(), &pair.ypow);
    Ok(transport + neg_entropy / params.lambda + params.gamma * marg)
}
