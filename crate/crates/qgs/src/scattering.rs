//! Schrödinger operators H = Δ_M + Q with finitely supported real potentials:
//! resolvent kernels by fiber eigenfunction expansion, Nyström discretization
//! of Y₀(k) = |Q|^{1/2} R₀(k) Q^{1/2}, trace formulas, Fredholm determinants
//! and the Birman–Krein phase.
//!
//! Everything runs over a torus quadrature: at each grid node the fiber
//! eigenfunctions of both families are assembled in closed form, mode
//! contributions are summed up to a ladder cutoff `jmax` with a recorded
//! closed-form tail bound, and nodes where the fiber data is ill-conditioned
//! (degenerate eigenvalues, sin z near zero, ϑ ≈ 0) donate their quadrature
//! weight to their grid neighbors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::eigenfunctions::{
    dirichlet_basis, measure_c_gamma, Parity, DEGENERACY_EPS, SIN_EPS,
};
use crate::error::{Error, Result};
use crate::floquet::{eigensystem, floquet_matrix, EigenSystem, QuasiMomentum, TorusGrid};
use crate::graph::{EdgeId, FundamentalGraph, LatticeVector};
use crate::metric::{ladder, z_map};
use crate::numfmt::json_num;

use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// potentials
// ---------------------------------------------------------------------------

/// One supported (edge, cell) pair: samples on a uniform grid over [0, 1]
/// with piecewise-linear interpolation in between.
#[derive(Debug, Clone)]
pub struct PotentialEntry {
    pub edge: EdgeId,
    pub cell: LatticeVector,
    pub samples: Vec<f64>,
}

impl PotentialEntry {
    /// Piecewise-linear value at t ∈ [0, 1].
    pub fn eval(&self, t: f64) -> f64 {
        let m = self.samples.len();
        if m < 2 {
            return self.samples.first().copied().unwrap_or(0.0);
        }
        let x = t.clamp(0.0, 1.0) * (m - 1) as f64;
        let i = (x.floor() as usize).min(m - 2);
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    fn has_support(&self) -> bool {
        self.samples.iter().any(|&q| q != 0.0)
    }

    /// Composite trapezoid of `f(sample)` on the sample grid.
    fn trapezoid(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = self.samples.len();
        let h = 1.0 / (m - 1) as f64;
        let mut acc = 0.5 * (f(self.samples[0]) + f(self.samples[m - 1]));
        for &q in &self.samples[1..m - 1] {
            acc += f(q);
        }
        acc * h
    }
}

/// A real potential with finite support, tied to a specific graph.
#[derive(Debug, Clone)]
pub struct Potential {
    entries: Vec<PotentialEntry>,
}

impl Potential {
    pub fn new(g: &FundamentalGraph, entries: Vec<PotentialEntry>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &entries {
            if e.edge >= g.edge_count() {
                return Err(Error::UnknownEdge(e.edge));
            }
            if e.cell.len() != g.dim() {
                return Err(Error::PotentialFormat(format!(
                    "cell has {} entries, expected dim {}",
                    e.cell.len(),
                    g.dim()
                )));
            }
            if e.samples.len() < 3 {
                return Err(Error::PotentialFormat(
                    "each entry needs at least 3 samples".into(),
                ));
            }
            if e.samples.iter().any(|q| !q.is_finite()) {
                return Err(Error::PotentialFormat("samples must be finite".into()));
            }
            if !seen.insert((e.edge, e.cell.clone())) {
                return Err(Error::PotentialFormat(format!(
                    "duplicate entry for edge {} cell {:?}",
                    e.edge, e.cell
                )));
            }
        }
        Ok(Potential { entries })
    }

    /// Parse the JSON wire format
    /// `{"edges": [{"edge": name, "cell": [m1,…,md], "samples": [q1,…,qM]}]}`.
    pub fn from_json_str(text: &str, g: &FundamentalGraph) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct RawEntry {
            edge: String,
            cell: Vec<i64>,
            samples: Vec<f64>,
        }
        #[derive(serde::Deserialize)]
        struct Raw {
            edges: Vec<RawEntry>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::PotentialFormat(e.to_string()))?;
        let entries = raw
            .edges
            .into_iter()
            .map(|r| {
                let edge = g
                    .edge_by_label(&r.edge)
                    .ok_or_else(|| Error::PotentialFormat(format!("unknown edge `{}`", r.edge)))?;
                Ok(PotentialEntry {
                    edge,
                    cell: r.cell,
                    samples: r.samples,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(g, entries)
    }

    pub fn entries(&self) -> &[PotentialEntry] {
        &self.entries
    }

    /// Entries that actually carry a nonzero sample.
    pub fn support(&self) -> impl Iterator<Item = &PotentialEntry> {
        self.entries.iter().filter(|e| e.has_support())
    }

    pub fn is_zero(&self) -> bool {
        self.support().next().is_none()
    }

    /// ‖Q‖_{L¹(Γ)} by composite trapezoid on the sample grids.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.trapezoid(f64::abs)).sum()
    }

    /// ‖Q‖_{L²(Γ)} by composite trapezoid on the sample grids.
    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.trapezoid(|q| q * q))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Potential {
        Potential {
            entries: self
                .entries
                .iter()
                .map(|e| PotentialEntry {
                    edge: e.edge,
                    cell: e.cell.clone(),
                    samples: e.samples.iter().map(|q| q * factor).collect(),
                })
                .collect(),
        }
    }
}

/// A spectral parameter k in the upper half plane (energy k²).
#[derive(Debug, Clone, Copy)]
pub struct SpectralEnergy {
    pub k: Complex64,
}

impl SpectralEnergy {
    pub fn new(k: Complex64) -> Result<Self> {
        if k.im < 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "Im k = {} must be at least 1e-6",
                k.im
            )));
        }
        Ok(SpectralEnergy { k })
    }

    pub fn energy(&self) -> Complex64 {
        self.k * self.k
    }
}

// ---------------------------------------------------------------------------
// shared context and truncation policy
// ---------------------------------------------------------------------------

/// Measured eigenfunction sup constant plus the geometry factors entering
/// the trace-class bounds.
#[derive(Debug, Clone)]
pub struct ScatteringContext {
    /// Measured sup of vertex-family sup norms (grid 32^d, j ≤ 6 by default).
    pub c_gamma: f64,
    nu: usize,
    nu_star: usize,
}

impl ScatteringContext {
    pub fn measure(g: &FundamentalGraph) -> Self {
        Self::measure_with(g, 32, 6)
    }

    pub fn measure_with(g: &FundamentalGraph, grid_n: usize, jmax: u32) -> Self {
        ScatteringContext {
            c_gamma: measure_c_gamma(g, grid_n, jmax),
            nu: g.vertex_count(),
            nu_star: g.edge_count(),
        }
    }

    /// 2(ν C_Γ² + ν* − ν)
    pub fn c0(&self) -> f64 {
        2.0 * self.c0_half()
    }

    fn c0_half(&self) -> f64 {
        self.nu as f64 * self.c_gamma * self.c_gamma + (self.nu_star - self.nu) as f64
    }
}

/// Closed-form bound on the kernel truncation error beyond ladder level
/// `jmax`, by an integral comparison: Σ_{j>J} 2(νC_Γ²+ν*−ν)/((πj)²−|k|²)
/// ≤ 2(νC_Γ²+ν*−ν) · ln((πJ+|k|)/(πJ−|k|)) / (2π|k|). Requires πJ > |k|.
pub fn kernel_tail_bound(ctx: &ScatteringContext, k: Complex64, jmax: u32) -> f64 {
    let a = k.norm();
    let pj = PI * jmax as f64;
    if pj <= a {
        return f64::INFINITY;
    }
    2.0 * ctx.c0_half() * ((pj + a) / (pj - a)).ln() / (2.0 * PI * a)
}

/// Scale of the full mode-sum bound, 2(νC_Γ²+ν*−ν)(4/q² + 2/|q|); the
/// truncation policy keeps the tail below `rel_tol` times this.
fn full_sum_scale(ctx: &ScatteringContext, k: Complex64) -> f64 {
    let q = k.im.abs();
    2.0 * ctx.c0_half() * (4.0 / (q * q) + 2.0 / q)
}

/// Smallest ladder cutoff whose tail bound is below `rel_tol` (relative to
/// the full mode-sum scale); returns (jmax, tail bound).
pub fn jmax_for_tolerance(
    ctx: &ScatteringContext,
    k: Complex64,
    rel_tol: f64,
) -> (u32, f64) {
    let target = rel_tol * full_sum_scale(ctx, k);
    let j_min = ((k.norm() / PI).floor() as u32 + 1).max(2);
    let mut j = j_min;
    while kernel_tail_bound(ctx, k, j) > target && j < 1_000_000 {
        // the tail decays like 1/j, so jump proportionally
        j = (j as f64 * (kernel_tail_bound(ctx, k, j) / target).max(1.1)).ceil() as u32;
    }
    while j > j_min && kernel_tail_bound(ctx, k, j - 1) <= target {
        j -= 1;
    }
    (j, kernel_tail_bound(ctx, k, j))
}

pub const DEFAULT_TAIL_REL_TOL: f64 = 1e-4;

/// Bound on Σ_j |z_{n,j}(ϑ) − k|^{-2}: 4/q² + 2/|q| with q = Im k.
pub fn fiber_sum_bound(k: Complex64) -> f64 {
    let q = k.im.abs();
    4.0 / (q * q) + 2.0 / q
}

/// Partial sum Σ_{j ≤ jmax} |z_{n,j}(ϑ) − k|^{-2} for band n (1-based).
pub fn fiber_sum_partial(
    g: &FundamentalGraph,
    theta: &QuasiMomentum,
    n: usize,
    k: Complex64,
    jmax: u32,
) -> Result<f64> {
    if n == 0 || n > g.vertex_count() {
        return Err(Error::InvalidParameter(format!(
            "band index {n} out of range 1..={}",
            g.vertex_count()
        )));
    }
    let vals = crate::floquet::band_values(g, theta);
    let z_n = z_map(vals[n - 1])?;
    let mut acc = 0.0;
    for j in 0..=jmax {
        let z = ladder(z_n, j);
        acc += 1.0 / (Complex64::from(z) - k).norm_sqr();
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// fiber data per torus node
// ---------------------------------------------------------------------------

/// Closed-form eigenfunction data of one fiber, precomputed for the mode
/// sweeps: per band the (A_e, B_e) coefficient arrays, per parity the
/// Dirichlet null basis.
struct FiberBasis {
    z: Vec<f64>,
    vertex_ab: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    dirichlet_even: Vec<DVector<Complex64>>,
    dirichlet_odd: Vec<DVector<Complex64>>,
}

fn fiber_basis(
    g: &FundamentalGraph,
    theta: &QuasiMomentum,
    es: &EigenSystem,
) -> Result<FiberBasis> {
    if theta.is_zero() {
        return Err(Error::ThetaZero);
    }
    let nu = g.vertex_count();
    let mut z = Vec::with_capacity(nu);
    let mut vertex_ab = Vec::with_capacity(nu);
    let root2 = 2.0f64.sqrt();
    for n in 1..=nu {
        let lambda = es.eigenvalue(n);
        if (lambda.abs() - 1.0).abs() < SIN_EPS || lambda.abs() > 1.0 {
            return Err(Error::SinSingular { band: n, lambda });
        }
        let gap = es.gap(n);
        if gap < DEGENERACY_EPS {
            return Err(Error::DegenerateFiber { band: n, gap });
        }
        let z_n = z_map(lambda)?;
        let sin_z = z_n.sin();
        let psi = es.vector(n);
        let mut a = Vec::with_capacity(g.edge_count());
        let mut b = Vec::with_capacity(g.edge_count());
        for e in g.edges() {
            a.push(psi[e.tail] * Complex64::from(root2 / ((g.degree(e.tail) as f64).sqrt() * sin_z)));
            b.push(
                psi[e.head]
                    * theta.phase(&e.index)
                    * Complex64::from(root2 / ((g.degree(e.head) as f64).sqrt() * sin_z)),
            );
        }
        z.push(z_n);
        vertex_ab.push((a, b));
    }
    Ok(FiberBasis {
        z,
        vertex_ab,
        dirichlet_even: dirichlet_basis(g, Parity::Even, theta)?,
        dirichlet_odd: dirichlet_basis(g, Parity::Odd, theta)?,
    })
}

impl FiberBasis {
    fn dirichlet(&self, parity: Parity) -> &[DVector<Complex64>] {
        match parity {
            Parity::Even => &self.dirichlet_even,
            Parity::Odd => &self.dirichlet_odd,
        }
    }
}

/// One torus sweep: per-node fiber data for good nodes, and quadrature
/// weights with the bad nodes' mass pushed onto their grid neighbors.
struct SweepPlan {
    grid: TorusGrid,
    basis: Vec<Option<FiberBasis>>,
    theta: Vec<QuasiMomentum>,
    weight: Vec<f64>,
    degenerate_count: usize,
}

fn sweep_plan(g: &FundamentalGraph, grid_n: usize) -> Result<SweepPlan> {
    let grid = TorusGrid::new(grid_n, g.dim());
    let len = grid.len();
    let theta: Vec<QuasiMomentum> = (0..len).map(|f| grid.theta(f)).collect();
    let basis: Vec<Option<FiberBasis>> = (0..len)
        .into_par_iter()
        .map(|f| {
            let th = &theta[f];
            let m = floquet_matrix(g, th).ok()?;
            let es = eigensystem(&m).ok()?;
            fiber_basis(g, th, &es).ok()
        })
        .collect();

    let base = 1.0 / len as f64;
    let mut weight = vec![0.0; len];
    let mut degenerate_count = 0;
    for f in 0..len {
        if basis[f].is_some() {
            weight[f] += base;
        } else {
            degenerate_count += 1;
        }
    }
    for f in 0..len {
        if basis[f].is_some() {
            continue;
        }
        let good: Vec<usize> = grid
            .neighbors(f)
            .into_iter()
            .filter(|&n| basis[n].is_some())
            .collect();
        if good.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "torus node {f} and all its neighbors are degenerate; refine the grid"
            )));
        }
        let share = base / good.len() as f64;
        for n in good {
            weight[n] += share;
        }
    }
    Ok(SweepPlan {
        grid,
        basis,
        theta,
        weight,
        degenerate_count,
    })
}

impl SweepPlan {
    fn degenerate_fraction(&self) -> f64 {
        self.degenerate_count as f64 / self.grid.len() as f64
    }
}

// ---------------------------------------------------------------------------
// resolvent kernels
// ---------------------------------------------------------------------------

/// Schedule-independent parallel sum: fixed chunks mapped in parallel, then
/// folded in order, so the float reduction tree never depends on stealing.
fn chunked_sum(len: usize, per_node: impl Fn(usize) -> Complex64 + Sync) -> Complex64 {
    let indices: Vec<usize> = (0..len).collect();
    let parts: Vec<Complex64> = indices
        .par_chunks(256)
        .map(|chunk| {
            chunk
                .iter()
                .fold(Complex64::from(0.0), |acc, &f| acc + per_node(f))
        })
        .collect();
    parts.into_iter().fold(Complex64::from(0.0), |a, b| a + b)
}

/// A point of the periodic graph: local coordinate t on the copy of `edge`
/// in lattice cell `cell`.
#[derive(Debug, Clone)]
pub struct GraphPoint {
    pub edge: EdgeId,
    pub cell: LatticeVector,
    pub t: f64,
}

impl GraphPoint {
    pub fn fundamental(edge: EdgeId, t: f64) -> Self {
        GraphPoint {
            edge,
            cell: Vec::new(),
            t,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

fn mode_value(
    basis: &FiberBasis,
    n0: usize,
    z: f64,
    edge: EdgeId,
    t: f64,
) -> Complex64 {
    let (a, b) = &basis.vertex_ab[n0];
    a[edge] * Complex64::from((z * (1.0 - t)).sin()) + b[edge] * Complex64::from((z * t).sin())
}

/// Kernel of (Δ_M(ϑ) − k²)^{-1} at two fundamental-domain points, by the
/// eigenfunction expansion truncated at ladder level `jmax`; the recorded
/// tail bound covers the dropped modes.
pub fn fiber_resolvent_kernel(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    theta: &QuasiMomentum,
    k: Complex64,
    x: (EdgeId, f64),
    xp: (EdgeId, f64),
    jmax: u32,
) -> Result<KernelValue> {
    SpectralEnergy::new(k)?;
    if x.0 >= g.edge_count() || xp.0 >= g.edge_count() {
        return Err(Error::UnknownEdge(x.0.max(xp.0)));
    }
    let m = floquet_matrix(g, theta)?;
    let es = eigensystem(&m)?;
    let basis = fiber_basis(g, theta, &es)?;
    let k2 = k * k;
    let mut acc = Complex64::from(0.0);
    let root2 = 2.0f64.sqrt();
    for n0 in 0..g.vertex_count() {
        for j in 0..=jmax {
            let z = ladder(basis.z[n0], j);
            let denom = Complex64::from(z * z) - k2;
            acc += mode_value(&basis, n0, z, x.0, x.1)
                * mode_value(&basis, n0, z, xp.0, xp.1).conj()
                / denom;
        }
    }
    for j in 1..=jmax {
        let z = PI * j as f64;
        let denom = Complex64::from(z * z) - k2;
        let s_x = root2 * (z * x.1).sin();
        let s_xp = root2 * (z * xp.1).sin();
        for xvec in basis.dirichlet(Parity::of(j)) {
            acc += xvec[x.0] * Complex64::from(s_x) * (xvec[xp.0] * Complex64::from(s_xp)).conj()
                / denom;
        }
    }
    Ok(KernelValue {
        value: acc,
        tail_bound: kernel_tail_bound(ctx, k, jmax),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GreenValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub degenerate_fraction: f64,
}

/// Green's function of Δ_M − k² between two points of the periodic graph:
/// torus average of e^{i⟨m−m',ϑ⟩} times the fiber kernel.
pub fn greens_function(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    k: Complex64,
    x: &GraphPoint,
    xp: &GraphPoint,
    grid_n: usize,
    jmax: u32,
) -> Result<GreenValue> {
    SpectralEnergy::new(k)?;
    let plan = sweep_plan(g, grid_n)?;
    let k2 = k * k;
    let root2 = 2.0f64.sqrt();
    let cell_diff: LatticeVector = {
        let d = g.dim();
        let mut v = vec![0i64; d];
        for (i, item) in v.iter_mut().enumerate() {
            *item = x.cell.get(i).copied().unwrap_or(0) - xp.cell.get(i).copied().unwrap_or(0);
        }
        v
    };
    let value = chunked_sum(plan.grid.len(), |f| {
        let Some(basis) = plan.basis[f].as_ref() else {
            return Complex64::from(0.0);
        };
        let w = plan.weight[f];
        if w == 0.0 {
            return Complex64::from(0.0);
        }
        let theta = &plan.theta[f];
        let phase = theta.phase(&cell_diff);
        let mut acc = Complex64::from(0.0);
        for n0 in 0..g.vertex_count() {
            for j in 0..=jmax {
                let z = ladder(basis.z[n0], j);
                let denom = Complex64::from(z * z) - k2;
                acc += mode_value(basis, n0, z, x.edge, x.t)
                    * mode_value(basis, n0, z, xp.edge, xp.t).conj()
                    / denom;
            }
        }
        for j in 1..=jmax {
            let z = PI * j as f64;
            let denom = Complex64::from(z * z) - k2;
            let s_x = root2 * (z * x.t).sin();
            let s_xp = root2 * (z * xp.t).sin();
            for xvec in basis.dirichlet(Parity::of(j)) {
                acc += xvec[x.edge] * Complex64::from(s_x)
                    * (xvec[xp.edge] * Complex64::from(s_xp)).conj()
                    / denom;
            }
        }
        acc * phase * Complex64::from(w)
    });
    Ok(GreenValue {
        value,
        tail_bound: kernel_tail_bound(ctx, k, jmax),
        degenerate_fraction: plan.degenerate_fraction(),
    })
}

// ---------------------------------------------------------------------------
// Nyström discretization of Y₀(k)
// ---------------------------------------------------------------------------

/// One quadrature node of the discretized kernel.
#[derive(Debug, Clone)]
pub struct QuadNode {
    pub edge: EdgeId,
    pub cell: LatticeVector,
    pub t: f64,
    pub weight: f64,
    pub q: f64,
}

/// Symmetrized Nyström matrix of |Q|^{1/2} R₀(k) Q^{1/2} on composite
/// Simpson nodes over the potential's support.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub nodes: Vec<QuadNode>,
    pub matrix: DMatrix<Complex64>,
    pub k: Complex64,
    pub jmax: u32,
    pub grid_n: usize,
    pub tail_bound: f64,
    pub degenerate_fraction: f64,
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn trace(&self) -> Complex64 {
        let mut acc = Complex64::from(0.0);
        for i in 0..self.dim() {
            acc += self.matrix[(i, i)];
        }
        acc
    }

    /// Sum of singular values (the discrete trace norm, approximating
    /// ‖Y₀‖ from below).
    pub fn singular_value_sum(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        nalgebra::SVD::new(self.matrix.clone(), false, false)
            .singular_values
            .iter()
            .sum()
    }
}

fn simpson_nodes(q: &Potential, pts_per_edge: usize) -> Result<Vec<QuadNode>> {
    if pts_per_edge < 3 || pts_per_edge.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "quadrature points per edge must be odd and at least 3, got {pts_per_edge}"
        )));
    }
    let h = 1.0 / (pts_per_edge - 1) as f64;
    let mut nodes = Vec::new();
    for entry in q.support() {
        for i in 0..pts_per_edge {
            let t = i as f64 * h;
            let w = if i == 0 || i == pts_per_edge - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            nodes.push(QuadNode {
                edge: entry.edge,
                cell: entry.cell.clone(),
                t,
                weight: w,
                q: entry.eval(t),
            });
        }
    }
    Ok(nodes)
}

/// The full-graph Green's matrix on the quadrature nodes, by the ±ϑ-paired
/// torus sweep: the contribution at -ϑ is the transpose of the one at ϑ, so
/// only representatives are evaluated.
fn greens_matrix(
    g: &FundamentalGraph,
    plan: &SweepPlan,
    nodes: &[QuadNode],
    k: Complex64,
    jmax: u32,
) -> DMatrix<Complex64> {
    let m = nodes.len();
    let k2 = k * k;
    let root2 = 2.0f64.sqrt();
    let reps: Vec<usize> = (0..plan.grid.len())
        .filter(|&f| {
            let pair = plan.grid.negate(f);
            f <= pair && (plan.basis[f].is_some() || plan.basis[pair].is_some())
        })
        .collect();

    let node_contribution = |f: usize| -> DMatrix<Complex64> {
        let basis = plan.basis[f].as_ref().unwrap();
        let theta = &plan.theta[f];
        let phases: Vec<Complex64> = nodes.iter().map(|n| theta.phase(&n.cell)).collect();
        let mut c = DMatrix::<Complex64>::zeros(m, m);
        let mut v = DVector::<Complex64>::zeros(m);
        for n0 in 0..g.vertex_count() {
            let (a, b) = &basis.vertex_ab[n0];
            for j in 0..=jmax {
                let z = ladder(basis.z[n0], j);
                let denom = Complex64::from(z * z) - k2;
                for (i, node) in nodes.iter().enumerate() {
                    v[i] = (a[node.edge] * Complex64::from((z * (1.0 - node.t)).sin())
                        + b[node.edge] * Complex64::from((z * node.t).sin()))
                        * phases[i];
                }
                c.gerc(Complex64::from(1.0) / denom, &v, &v, Complex64::from(1.0));
            }
        }
        for j in 1..=jmax {
            let z = PI * j as f64;
            let denom = Complex64::from(z * z) - k2;
            for xvec in basis.dirichlet(Parity::of(j)) {
                for (i, node) in nodes.iter().enumerate() {
                    v[i] = xvec[node.edge] * Complex64::from(root2 * (z * node.t).sin())
                        * phases[i];
                }
                c.gerc(Complex64::from(1.0) / denom, &v, &v, Complex64::from(1.0));
            }
        }
        c
    };

    // fixed-size chunks keep the reduction order independent of scheduling
    let partial: Vec<DMatrix<Complex64>> = reps
        .par_chunks(16)
        .map(|chunk| {
            let mut acc = DMatrix::<Complex64>::zeros(m, m);
            for &f in chunk {
                let pair = plan.grid.negate(f);
                if pair == f {
                    let c = node_contribution(f);
                    acc += (&c + c.transpose()) * Complex64::from(0.5 * plan.weight[f]);
                } else if plan.basis[f].is_some() {
                    // the contribution at -ϑ is exactly the transpose; the
                    // weights can differ only if one node of the pair was
                    // classified degenerate, so keep both factors
                    let c = node_contribution(f);
                    acc += &c * Complex64::from(plan.weight[f]);
                    acc += c.transpose() * Complex64::from(plan.weight[pair]);
                } else {
                    // only the mirrored node survived classification
                    let c = node_contribution(pair);
                    acc += &c * Complex64::from(plan.weight[pair]);
                }
            }
            acc
        })
        .collect();
    let mut total = DMatrix::<Complex64>::zeros(m, m);
    for p in partial {
        total += p;
    }
    total
}

/// Assemble the symmetrized Nyström matrix of Y₀(k): entries
/// √w_i |Q_i|^{1/2} G_k(x_i, x_j) sign(Q_j) |Q_j|^{1/2} √w_j.
#[allow(clippy::too_many_arguments)]
pub fn assemble_y0(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    q: &Potential,
    k: Complex64,
    quad_pts: usize,
    grid_n: usize,
    jmax: u32,
    tail_tol: Option<f64>,
) -> Result<KernelMatrix> {
    SpectralEnergy::new(k)?;
    if q.is_zero() {
        return Err(Error::EmptyPotential);
    }
    let tail_bound = kernel_tail_bound(ctx, k, jmax);
    if !tail_bound.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "jmax = {jmax} is below |k|/π = {:.3}; the tail bound diverges",
            k.norm() / PI
        )));
    }
    if let Some(tol) = tail_tol {
        if tail_bound > tol {
            return Err(Error::TailTooLarge {
                bound: tail_bound,
                tol,
            });
        }
    }
    let nodes = simpson_nodes(q, quad_pts)?;
    let plan = sweep_plan(g, grid_n)?;
    let green = greens_matrix(g, &plan, &nodes, k, jmax);
    let m = nodes.len();
    let mut matrix = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        let li = (nodes[i].weight * nodes[i].q.abs()).sqrt();
        for j in 0..m {
            let rj = (nodes[j].weight * nodes[j].q.abs()).sqrt() * nodes[j].q.signum();
            matrix[(i, j)] = Complex64::from(li) * green[(i, j)] * Complex64::from(rj);
        }
    }
    Ok(KernelMatrix {
        nodes,
        matrix,
        k,
        jmax,
        grid_n,
        tail_bound,
        degenerate_fraction: plan.degenerate_fraction(),
    })
}

// ---------------------------------------------------------------------------
// trace formula
// ---------------------------------------------------------------------------

/// ∫_{t0}^{t1} (a + bt) cos(wt) dt
fn int_linear_cos(a: f64, b: f64, t0: f64, t1: f64, w: f64) -> f64 {
    let part = |t: f64| (a + b * t) * (w * t).sin() / w + b * (w * t).cos() / (w * w);
    part(t1) - part(t0)
}

/// ∫_{t0}^{t1} (a + bt) sin(wt) dt
fn int_linear_sin(a: f64, b: f64, t0: f64, t1: f64, w: f64) -> f64 {
    let part = |t: f64| -(a + b * t) * (w * t).cos() / w + b * (w * t).sin() / (w * w);
    part(t1) - part(t0)
}

/// Exact ∫ Q(t) |Ψ(t)|² dt on one entry for a mode in the
/// P cos(zt) + R sin(zt) normal form: |Ψ|² = c₀ + c₂ cos(2zt) + s₂ sin(2zt)
/// integrated against the piecewise-linear samples.
fn entry_mode_integral(entry: &PotentialEntry, p: Complex64, r: Complex64, z: f64) -> f64 {
    let c0 = 0.5 * (p.norm_sqr() + r.norm_sqr());
    let c2 = 0.5 * (p.norm_sqr() - r.norm_sqr());
    let s2 = (p * r.conj()).re;
    let w = 2.0 * z;
    let m = entry.samples.len();
    let h = 1.0 / (m - 1) as f64;
    let mut acc = 0.0;
    for i in 0..m - 1 {
        let t0 = i as f64 * h;
        let t1 = t0 + h;
        let q0 = entry.samples[i];
        let q1 = entry.samples[i + 1];
        let b = (q1 - q0) / h;
        let a = q0 - b * t0;
        acc += c0 * (a * (t1 - t0) + 0.5 * b * (t1 * t1 - t0 * t0));
        acc += c2 * int_linear_cos(a, b, t0, t1, w);
        acc += s2 * int_linear_sin(a, b, t0, t1, w);
    }
    acc
}

/// Tr Y₀(k) by the weighted-integral route: the torus average over modes of
/// ∫ Q |Ψ_mode|² dt / (z² − k²), with the t-integrals done in closed form
/// against the piecewise-linear potential. Independent of the Nyström
/// assembly, so the two traces cross-validate each other.
pub fn trace_formula(
    g: &FundamentalGraph,
    _ctx: &ScatteringContext,
    q: &Potential,
    k: Complex64,
    grid_n: usize,
    jmax: u32,
) -> Result<Complex64> {
    SpectralEnergy::new(k)?;
    if q.is_zero() {
        return Ok(Complex64::from(0.0));
    }
    let plan = sweep_plan(g, grid_n)?;
    let k2 = k * k;
    let root2 = 2.0f64.sqrt();
    let support: Vec<&PotentialEntry> = q.support().collect();
    let total = chunked_sum(plan.grid.len(), |f| {
        let Some(basis) = plan.basis[f].as_ref() else {
            return Complex64::from(0.0);
        };
        let w = plan.weight[f];
        if w == 0.0 {
            return Complex64::from(0.0);
        }
        let mut acc = Complex64::from(0.0);
        for n0 in 0..g.vertex_count() {
            let (a, b) = &basis.vertex_ab[n0];
            for j in 0..=jmax {
                let z = ladder(basis.z[n0], j);
                let denom = Complex64::from(z * z) - k2;
                let (sz, cz) = (z.sin(), z.cos());
                let mut weighted = 0.0;
                for entry in &support {
                    let p = a[entry.edge] * Complex64::from(sz);
                    let r = b[entry.edge] - a[entry.edge] * Complex64::from(cz);
                    weighted += entry_mode_integral(entry, p, r, z);
                }
                acc += Complex64::from(weighted) / denom;
            }
        }
        for j in 1..=jmax {
            let z = PI * j as f64;
            let denom = Complex64::from(z * z) - k2;
            for xvec in basis.dirichlet(Parity::of(j)) {
                let mut weighted = 0.0;
                for entry in &support {
                    let r = xvec[entry.edge] * Complex64::from(root2);
                    weighted += entry_mode_integral(entry, Complex64::from(0.0), r, z);
                }
                acc += Complex64::from(weighted) / denom;
            }
        }
        acc * Complex64::from(w)
    });
    Ok(total)
}

// ---------------------------------------------------------------------------
// trace-norm bound, determinant, Birman–Krein phase
// ---------------------------------------------------------------------------

/// The closed-form trace-norm bound
/// C₀ ‖Q‖_{L¹} (2/(Im k)² + 1/Im k)^{1/2} (2/|k|² + 1/|k|)^{1/2},
/// C₀ = 2(ν C_Γ² + ν* − ν).
pub fn trace_norm_bound(ctx: &ScatteringContext, q: &Potential, k: Complex64) -> f64 {
    let im = k.im;
    let a = k.norm();
    ctx.c0()
        * q.l1_norm()
        * (2.0 / (im * im) + 1.0 / im).sqrt()
        * (2.0 / (a * a) + 1.0 / a).sqrt()
}

#[derive(Debug, Clone)]
pub struct DeterminantResult {
    pub k: Complex64,
    pub d: Complex64,
    /// Truncated log-determinant series and its term count, present only
    /// when the trace-norm bound is below 1.
    pub log_series: Option<Complex64>,
    pub series_terms: usize,
    pub remainder_bound: Option<f64>,
    /// Sum of singular values of the discretized kernel.
    pub trace_norm_estimate: f64,
    /// The closed-form trace-norm bound (the series is controlled by it).
    pub paper_bound: f64,
    pub jmax: u32,
    pub grid_n: usize,
    pub tail_bound: f64,
    pub degenerate_fraction: f64,
}

impl DeterminantResult {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "k": [json_num(self.k.re), json_num(self.k.im)],
            "D": [json_num(self.d.re), json_num(self.d.im)],
            "logD_series": self.log_series.map(|s| json!([json_num(s.re), json_num(s.im)]))
                .unwrap_or(serde_json::Value::Null),
            "N": self.series_terms,
            "remainder": self.remainder_bound.map(json_num).unwrap_or(serde_json::Value::Null),
            "trace_norm": json_num(self.trace_norm_estimate),
            "paper_bound": json_num(self.paper_bound),
            "jmax": self.jmax,
            "grid": self.grid_n,
        })
    }
}

fn zero_potential_result(k: Complex64, jmax: u32, grid_n: usize) -> DeterminantResult {
    DeterminantResult {
        k,
        d: Complex64::from(1.0),
        log_series: Some(Complex64::from(0.0)),
        series_terms: 0,
        remainder_bound: Some(0.0),
        trace_norm_estimate: 0.0,
        paper_bound: 0.0,
        jmax,
        grid_n,
        tail_bound: 0.0,
        degenerate_fraction: 0.0,
    }
}

/// Fredholm determinant D(k) = det(I + Y₀(k)) with the truncated
/// log-determinant series −Σ_{p≤N} Tr(−Y₀)ᵖ/p and its remainder bound
/// sᴺ⁺¹/((N+1)(1−𝒞)), populated when 𝒞(Q, k) < 1.
#[allow(clippy::too_many_arguments)]
pub fn determinant(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    q: &Potential,
    k: Complex64,
    quad_pts: usize,
    grid_n: usize,
    jmax: u32,
    series_terms: usize,
) -> Result<DeterminantResult> {
    SpectralEnergy::new(k)?;
    if q.is_zero() {
        return Ok(zero_potential_result(k, jmax, grid_n));
    }
    let km = assemble_y0(g, ctx, q, k, quad_pts, grid_n, jmax, None)?;
    let m = km.dim();
    let mut iy = km.matrix.clone();
    for i in 0..m {
        iy[(i, i)] += Complex64::from(1.0);
    }
    let d = iy.determinant();
    let trace_norm_estimate = km.singular_value_sum();
    let paper_bound = trace_norm_bound(ctx, q, k);

    let (log_series, remainder_bound) = if paper_bound < 1.0 && series_terms > 0 {
        let neg = -&km.matrix;
        let mut power = neg.clone();
        let mut series = Complex64::from(0.0);
        for p in 1..=series_terms {
            if p > 1 {
                power = &power * &neg;
            }
            let mut tr = Complex64::from(0.0);
            for i in 0..m {
                tr += power[(i, i)];
            }
            series -= tr / Complex64::from(p as f64);
        }
        let s = trace_norm_estimate;
        let remainder =
            s.powi(series_terms as i32 + 1) / ((series_terms as f64 + 1.0) * (1.0 - paper_bound));
        (Some(series), Some(remainder))
    } else {
        (None, None)
    };

    Ok(DeterminantResult {
        k,
        d,
        log_series,
        series_terms: if log_series.is_some() { series_terms } else { 0 },
        remainder_bound,
        trace_norm_estimate,
        paper_bound,
        jmax: km.jmax,
        grid_n: km.grid_n,
        tail_bound: km.tail_bound,
        degenerate_fraction: km.degenerate_fraction,
    })
}

/// Determinant only (no singular values, no series) — the inner loop of the
/// Birman–Krein evaluation.
fn determinant_value(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    q: &Potential,
    k: Complex64,
    quad_pts: usize,
    grid_n: usize,
    jmax: u32,
) -> Result<Complex64> {
    if q.is_zero() {
        return Ok(Complex64::from(1.0));
    }
    let km = assemble_y0(g, ctx, q, k, quad_pts, grid_n, jmax, None)?;
    let m = km.dim();
    let mut iy = km.matrix;
    for i in 0..m {
        iy[(i, i)] += Complex64::from(1.0);
    }
    Ok(iy.determinant())
}

#[derive(Debug, Clone, Copy)]
pub struct BkOptions {
    pub quad_pts: usize,
    pub grid_n: usize,
    pub jmax: u32,
}

impl Default for BkOptions {
    fn default() -> Self {
        BkOptions {
            quad_pts: 17,
            grid_n: 96,
            jmax: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BkPhase {
    pub energy: f64,
    /// Richardson-extrapolated det S(√E) = conj(D)/D over ε and ε/2.
    pub det_s: Complex64,
    pub at_eps: Complex64,
    pub at_half_eps: Complex64,
    pub eps: f64,
    /// |detS(ε/2) − detS(ε)|, the extrapolation's own error estimate.
    pub extrapolation_estimate: f64,
}

/// det S(k) for k² = E in the absolutely continuous spectrum, via boundary
/// values conj(D(√E + iε))/D(√E + iε) extrapolated over ε, ε/2. Refuses
/// energies within 10ε² of a band edge or a Dirichlet point.
pub fn birman_krein_phase(
    g: &FundamentalGraph,
    ctx: &ScatteringContext,
    q: &Potential,
    energy: f64,
    eps: f64,
    opts: &BkOptions,
) -> Result<BkPhase> {
    if !(1e-3..=1e-1).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside [1e-3, 1e-1]"
        )));
    }
    if energy <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "energy must be positive, got {energy}"
        )));
    }
    let guard = 10.0 * eps * eps;
    let jmax_guard = (energy.sqrt() / PI).ceil() as u32 + 1;
    let (spectrum, _) = crate::metric::metric_spectrum(g, jmax_guard, 32)?;
    let inside = spectrum.merged_ac.iter().any(|iv| iv.contains(energy));
    let mut dist = f64::INFINITY;
    for iv in &spectrum.merged_ac {
        dist = dist.min((energy - iv.lo).abs()).min((energy - iv.hi).abs());
    }
    for j in 1..=jmax_guard {
        dist = dist.min((energy - (PI * j as f64).powi(2)).abs());
    }
    if !inside || dist < guard {
        return Err(Error::NearSingularEnergy {
            energy,
            dist: if inside { dist } else { 0.0 },
        });
    }

    let root = energy.sqrt();
    let phase_at = |e: f64| -> Result<Complex64> {
        let d = determinant_value(
            g,
            ctx,
            q,
            Complex64::new(root, e),
            opts.quad_pts,
            opts.grid_n,
            opts.jmax,
        )?;
        Ok(d.conj() / d)
    };
    let at_eps = phase_at(eps)?;
    let at_half_eps = phase_at(eps / 2.0)?;
    let det_s = at_half_eps * Complex64::from(2.0) - at_eps;
    Ok(BkPhase {
        energy,
        det_s,
        at_eps,
        at_half_eps,
        eps,
        extrapolation_estimate: (at_half_eps - at_eps).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{builtin, BuiltinName};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn lattice_potential(g: &FundamentalGraph, amplitude: f64) -> Potential {
        Potential::new(
            g,
            vec![PotentialEntry {
                edge: 0,
                cell: vec![0, 0],
                samples: vec![amplitude; 5],
            }],
        )
        .unwrap()
    }

    fn ctx_for(g: &FundamentalGraph) -> ScatteringContext {
        ScatteringContext::measure_with(g, 16, 4)
    }

    #[test]
    fn potential_json_round_trip() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let text = r#"{"edges": [{"edge": "e1", "cell": [0, 0], "samples": [1.0, 0.5, 0.25]}]}"#;
        let q = Potential::from_json_str(text, &g).unwrap();
        assert_eq!(q.entries().len(), 1);
        assert_abs_diff_eq!(q.entries()[0].eval(0.25), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(q.l1_norm(), 0.5625, epsilon = 1e-15);

        assert!(Potential::from_json_str(r#"{"edges": []}"#, &g).unwrap().is_zero());
        assert!(Potential::from_json_str(r#"{"edges": [{"edge": "nope", "cell": [0,0], "samples": [1,1,1]}]}"#, &g).is_err());
        assert!(Potential::from_json_str(r#"{"edges": [{"edge": "e1", "cell": [0], "samples": [1,1,1]}]}"#, &g).is_err());
        assert!(Potential::from_json_str(r#"{"edges": [{"edge": "e1", "cell": [0,0], "samples": [1,1]}]}"#, &g).is_err());
    }

    #[test]
    fn tail_policy_monotone() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let k = Complex64::new(1.0, 1.0);
        let (j, tail) = jmax_for_tolerance(&ctx, k, 1e-4);
        assert!(j >= 2);
        assert!(tail <= 1e-4 * full_sum_scale(&ctx, k));
        let deeper = kernel_tail_bound(&ctx, k, 2 * j);
        assert!(deeper < tail);
    }

    #[test]
    fn fiber_sum_within_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        for name in [BuiltinName::Lattice(2), BuiltinName::Graphene, BuiltinName::Stanene] {
            let g = builtin(name).unwrap();
            for &k in &[Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)] {
                let bound = fiber_sum_bound(k);
                for _ in 0..20 {
                    let th: Vec<f64> = (0..g.dim()).map(|_| rng.gen_range(-PI..PI)).collect();
                    let theta = QuasiMomentum::new(&th);
                    let n = rng.gen_range(1..=g.vertex_count());
                    match fiber_sum_partial(&g, &theta, n, k, 400) {
                        Ok(partial) => assert!(partial <= bound, "{partial} > {bound}"),
                        Err(Error::OutOfRange(_)) => {}
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }

    #[test]
    fn fiber_kernel_structure() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let theta = QuasiMomentum::new(&[0.9, -1.4]);
        let k = Complex64::new(0.0, 2.0);
        // at a vertex point of a Dirichlet mode only the vertex family
        // contributes; verified indirectly: kernel is conjugate-symmetric at
        // purely imaginary k
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(73);
        for _ in 0..10 {
            let x = (rng.gen_range(0..2), rng.gen_range(0.0..1.0));
            let xp = (rng.gen_range(0..2), rng.gen_range(0.0..1.0));
            let a = fiber_resolvent_kernel(&g, &ctx, &theta, k, x, xp, 40).unwrap();
            let b = fiber_resolvent_kernel(&g, &ctx, &theta, k, xp, x, 40).unwrap();
            assert!((a.value - b.value.conj()).norm() < 1e-12);
        }
        // resolvent decay in q
        let x = (0usize, 0.3);
        let v1 = fiber_resolvent_kernel(&g, &ctx, &theta, Complex64::new(0.0, 2.0), x, x, 60)
            .unwrap()
            .value;
        let v2 = fiber_resolvent_kernel(&g, &ctx, &theta, Complex64::new(0.0, 8.0), x, x, 60)
            .unwrap()
            .value;
        assert!(v2.norm() < v1.norm());
    }

    #[test]
    fn greens_diagonal_positive_and_decaying() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let k = Complex64::new(0.0, 2.0);
        let x = GraphPoint {
            edge: 0,
            cell: vec![0, 0],
            t: 0.35,
        };
        let diag = greens_function(&g, &ctx, k, &x, &x, 12, 40).unwrap();
        assert!(diag.value.re > 0.0);
        assert!(diag.value.im.abs() < 1e-10);
        assert!(diag.degenerate_fraction <= 0.05);

        let mut mags = Vec::new();
        for dist in 0..4i64 {
            let xp = GraphPoint {
                edge: 0,
                cell: vec![dist, 0],
                t: 0.35,
            };
            mags.push(greens_function(&g, &ctx, k, &xp, &x, 12, 40).unwrap().value.norm());
        }
        for w in mags.windows(2) {
            assert!(w[1] < w[0], "{mags:?}");
        }
        // swap symmetry at purely imaginary k: conjugate
        let xp = GraphPoint {
            edge: 1,
            cell: vec![1, -1],
            t: 0.7,
        };
        let ab = greens_function(&g, &ctx, k, &x, &xp, 12, 40).unwrap().value;
        let ba = greens_function(&g, &ctx, k, &xp, &x, 12, 40).unwrap().value;
        assert!((ab - ba.conj()).norm() < 1e-12);
    }

    #[test]
    fn paired_assembly_matches_direct_greens_entries() {
        // trace and determinant are transpose-invariant, so validate the
        // ±ϑ-paired matrix assembly entrywise against the unpaired
        // single-point Green's function route
        let g = builtin(BuiltinName::Graphene).unwrap();
        let ctx = ctx_for(&g);
        let q = Potential::new(
            &g,
            vec![
                PotentialEntry {
                    edge: 0,
                    cell: vec![0, 0],
                    samples: vec![1.0; 3],
                },
                PotentialEntry {
                    edge: 2,
                    cell: vec![1, -1],
                    samples: vec![1.0; 3],
                },
            ],
        )
        .unwrap();
        let k = Complex64::new(0.8, 0.9);
        let km = assemble_y0(&g, &ctx, &q, k, 3, 10, 12, None).unwrap();
        for (i, j) in [(0usize, 4usize), (1, 5), (2, 3), (5, 0), (4, 4)] {
            let ni = &km.nodes[i];
            let nj = &km.nodes[j];
            let direct = greens_function(
                &g,
                &ctx,
                k,
                &GraphPoint {
                    edge: ni.edge,
                    cell: ni.cell.clone(),
                    t: ni.t,
                },
                &GraphPoint {
                    edge: nj.edge,
                    cell: nj.cell.clone(),
                    t: nj.t,
                },
                10,
                12,
            )
            .unwrap()
            .value;
            let from_matrix = km.matrix[(i, j)]
                / Complex64::from((ni.weight * nj.weight).sqrt());
            assert!(
                (direct - from_matrix).norm() < 1e-12,
                "({i},{j}): {direct} vs {from_matrix}"
            );
        }
    }

    #[test]
    fn greens_function_approaches_free_line_resolvent() {
        // far from the spectrum the graph looks locally one-dimensional:
        // G(x, x') → e^{-q|x-x'|}/(2q) for points on one edge, with vertex
        // corrections of order e^{-q·dist(x, vertices)}
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = 8.0;
        let k = Complex64::new(0.0, q);
        let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-5);
        let at = |t: f64| GraphPoint {
            edge: 0,
            cell: vec![0, 0],
            t,
        };
        let diag = greens_function(&g, &ctx, k, &at(0.5), &at(0.5), 16, jmax)
            .unwrap()
            .value;
        let free = 1.0 / (2.0 * q);
        assert!(
            (diag.re - free).abs() < 0.02 * free && diag.im.abs() < 1e-10,
            "diagonal {diag} vs free {free}"
        );
        let off = greens_function(&g, &ctx, k, &at(0.35), &at(0.65), 16, jmax)
            .unwrap()
            .value;
        let free_off = (-q * 0.3f64).exp() / (2.0 * q);
        assert!(
            (off.re - free_off).abs() < 0.05 * free_off,
            "off-diagonal {off} vs free {free_off}"
        );
    }

    #[test]
    fn zero_potential_short_circuits() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = Potential::new(&g, vec![]).unwrap();
        let k = Complex64::new(1.0, 1.0);
        assert!(matches!(
            assemble_y0(&g, &ctx, &q, k, 9, 8, 10, None).unwrap_err(),
            Error::EmptyPotential
        ));
        let det = determinant(&g, &ctx, &q, k, 9, 8, 10, 2).unwrap();
        assert_eq!(det.d, Complex64::from(1.0));
        assert_eq!(det.log_series, Some(Complex64::from(0.0)));
        assert_abs_diff_eq!(
            trace_formula(&g, &ctx, &q, k, 8, 10).unwrap().norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn trace_routes_agree() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let k = Complex64::new(1.0, 1.0);
        let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
        let km = assemble_y0(&g, &ctx, &q, k, 33, 24, jmax, None).unwrap();
        let by_matrix = km.trace();
        let by_formula = trace_formula(&g, &ctx, &q, k, 24, jmax).unwrap();
        let rel = (by_matrix - by_formula).norm() / by_formula.norm();
        assert!(rel < 0.02, "relative difference {rel}: {by_matrix} vs {by_formula}");
    }

    #[test]
    fn trace_decays_along_imaginary_axis() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let mut mags = Vec::new();
        for &qv in &[2.0, 4.0, 8.0] {
            let k = Complex64::new(0.0, qv);
            let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
            mags.push(trace_formula(&g, &ctx, &q, k, 12, jmax).unwrap().norm());
        }
        assert!(mags[1] < mags[0] && mags[2] < mags[1], "{mags:?}");
    }

    #[test]
    fn quadrature_doubling_stability() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let k = Complex64::new(1.0, 1.0);
        let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
        let coarse = assemble_y0(&g, &ctx, &q, k, 33, 16, jmax, None).unwrap().trace();
        let fine = assemble_y0(&g, &ctx, &q, k, 65, 16, jmax, None).unwrap().trace();
        let rel = (coarse - fine).norm() / fine.norm();
        assert!(rel < 0.005, "trace moved by {rel}");
    }

    #[test]
    fn trace_norm_bound_scaling_and_decay() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let k = Complex64::new(1.0, 1.0);
        let one = trace_norm_bound(&ctx, &q, k);
        let two = trace_norm_bound(&ctx, &q.scaled(2.0), k);
        assert_abs_diff_eq!(two, 2.0 * one, epsilon = 1e-12);
        // ~ const/q along the imaginary axis
        let c10 = trace_norm_bound(&ctx, &q, Complex64::new(0.0, 10.0));
        let c100 = trace_norm_bound(&ctx, &q, Complex64::new(0.0, 100.0));
        assert!(c100 < c10);
        let ratio = (c10 * 10.0) / (c100 * 100.0);
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn singular_sum_below_bound_and_decay() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let mut scaled_estimate = Vec::new();
        let mut scaled_bound = Vec::new();
        for &qv in &[5.0, 10.0, 20.0] {
            let k = Complex64::new(0.0, qv);
            let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
            let km = assemble_y0(&g, &ctx, &q, k, 17, 12, jmax, None).unwrap();
            let s = km.singular_value_sum();
            let bound = trace_norm_bound(&ctx, &q, k);
            assert!(s <= bound * 1.01, "sum {s} exceeds bound {bound}");
            scaled_estimate.push(s * qv);
            scaled_bound.push(bound * qv);
        }
        // the 1/q decay law: q times the estimate stays bounded (it climbs
        // toward the asymptote ‖Q‖_L1/2 from below), while q times the
        // closed-form bound is exactly non-increasing
        for &v in &scaled_estimate {
            assert!(v <= 0.55 * q.l1_norm(), "{scaled_estimate:?}");
        }
        assert!(scaled_bound[1] <= scaled_bound[0] + 1e-12, "{scaled_bound:?}");
        assert!(scaled_bound[2] <= scaled_bound[1] + 1e-12, "{scaled_bound:?}");
    }

    #[test]
    fn determinant_series_control() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let k = Complex64::new(1.0, 1.0);
        let base = lattice_potential(&g, 1.0);
        let bound_one = trace_norm_bound(&ctx, &base, k);
        let q = base.scaled(0.4 / bound_one);
        assert!(trace_norm_bound(&ctx, &q, k) < 0.5);
        let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
        for n_terms in 1..=3 {
            let det = determinant(&g, &ctx, &q, k, 17, 12, jmax, n_terms).unwrap();
            let log_d = det.d.ln();
            let err = (log_d - det.log_series.unwrap()).norm();
            assert!(
                err <= det.remainder_bound.unwrap() + 1e-12,
                "N={n_terms}: {err} > {:?}",
                det.remainder_bound
            );
        }
    }

    #[test]
    fn determinant_conjugation_symmetry() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 0.7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(79);
        for _ in 0..3 {
            let k = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(0.5..2.0));
            let mk = Complex64::new(-k.re, k.im);
            let a = determinant_value(&g, &ctx, &q, k, 17, 12, 30).unwrap();
            let b = determinant_value(&g, &ctx, &q, mk, 17, 12, 30).unwrap();
            assert!((a - b.conj()).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn weak_potential_first_order() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let k = Complex64::new(1.0, 1.0);
        let q = lattice_potential(&g, 0.05);
        let (jmax, _) = jmax_for_tolerance(&ctx, k, 1e-4);
        let det = determinant(&g, &ctx, &q, k, 33, 16, jmax, 1).unwrap();
        let log_d = det.d.ln();
        let first_order = trace_formula(&g, &ctx, &q, k, 16, jmax).unwrap();
        let err = (log_d - first_order).norm();
        assert!(
            err <= det.remainder_bound.unwrap() + 0.02 * first_order.norm(),
            "err {err}, remainder {:?}",
            det.remainder_bound
        );
    }

    #[test]
    fn tail_honesty_under_jmax_halving() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let k = Complex64::new(1.0, 1.0);
        let full = determinant(&g, &ctx, &q, k, 17, 12, 80, 0).unwrap();
        let half = determinant(&g, &ctx, &q, k, 17, 12, 40, 0).unwrap();
        // per-entry kernel perturbation bound: ‖ΔK‖_B1 ≤ √M ‖ΔK‖_F with
        // ‖ΔK‖_F ≤ tail · Σ w|Q|, then the determinant difference inequality
        let m_nodes = 17.0f64;
        let diff = (full.d - half.d).norm();
        let allowance = (half.tail_bound + full.tail_bound)
            * q.l1_norm()
            * m_nodes.sqrt()
            * (1.0 + 2.0 * full.paper_bound).exp();
        assert!(diff <= allowance, "diff {diff} > allowance {allowance}");
    }

    #[test]
    fn bk_phase_on_lattice() {
        let g = builtin(BuiltinName::Lattice(2)).unwrap();
        let ctx = ctx_for(&g);
        let q = lattice_potential(&g, 1.0);
        let opts = BkOptions {
            quad_pts: 17,
            grid_n: 96,
            jmax: 60,
        };
        let bk = birman_krein_phase(&g, &ctx, &q, 2.0, 0.05, &opts).unwrap();
        assert_abs_diff_eq!(bk.at_eps.norm(), 1.0, epsilon = 1e-12);
        assert!((bk.det_s.norm() - 1.0).abs() < 5e-3, "|detS| = {}", bk.det_s.norm());

        // halving ε moves the boundary value by less than the previous
        // extrapolation estimate
        let coarse = birman_krein_phase(&g, &ctx, &q, 2.0, 0.1, &opts).unwrap();
        assert!((coarse.at_half_eps - bk.at_eps).norm() < 1e-12);
        assert!(bk.extrapolation_estimate <= coarse.extrapolation_estimate);

        // zero potential: exactly 1
        let q0 = Potential::new(&g, vec![]).unwrap();
        let bk0 = birman_krein_phase(&g, &ctx, &q0, 2.0, 0.05, &opts).unwrap();
        assert_eq!(bk0.det_s, Complex64::from(1.0));

        // refuses Dirichlet points
        assert!(matches!(
            birman_krein_phase(&g, &ctx, &q, PI * PI, 0.05, &opts).unwrap_err(),
            Error::NearSingularEnergy { .. }
        ));
    }
}
