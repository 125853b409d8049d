//! The discrete Floquet (fiber) matrix Δ(ϑ) and its band structure.
//!
//! For a fundamental graph with ν vertices, Δ(ϑ) is the ν×ν Hermitian matrix
//! with entries
//!
//! ```text
//! Δ(ϑ)[u,v] = -(κ_u κ_v)^{-1/2} Σ_{e=(u,v)} e^{i⟨τ(e),ϑ⟩}
//! ```
//!
//! summed over both orientations of every edge joining u and v (so loops hit
//! the diagonal twice). Its sorted eigenvalues λ_1(ϑ) ≤ … ≤ λ_ν(ϑ) are the
//! band functions; sampling them over the torus and extremizing gives the
//! spectral bands of the discrete Laplacian on the periodic graph.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::FundamentalGraph;
use crate::numfmt::fmt_sig;
use crate::Interval;

/// A point of the Brillouin torus, componentwise wrapped into (-π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiMomentum {
    components: Vec<f64>,
}

impl QuasiMomentum {
    pub fn new(components: &[f64]) -> Self {
        let components = components
            .iter()
            .map(|&t| {
                let mut w = t.rem_euclid(2.0 * PI);
                if w > PI {
                    w -= 2.0 * PI;
                }
                w
            })
            .collect();
        QuasiMomentum { components }
    }

    pub fn zero(dim: usize) -> Self {
        QuasiMomentum {
            components: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.norm() <= 1e-8
    }

    /// ⟨τ, ϑ⟩ for an integer index vector τ.
    pub fn dot_index(&self, index: &[i64]) -> f64 {
        index
            .iter()
            .zip(&self.components)
            .map(|(&m, &t)| m as f64 * t)
            .sum()
    }

    /// e^{i⟨τ, ϑ⟩}
    pub fn phase(&self, index: &[i64]) -> Complex64 {
        Complex64::from_polar(1.0, self.dot_index(index))
    }
}

/// Dense Hermitian fiber matrix at a fixed quasimomentum.
#[derive(Debug, Clone)]
pub struct FloquetMatrix {
    theta: QuasiMomentum,
    entries: DMatrix<Complex64>,
}

impl FloquetMatrix {
    pub fn theta(&self) -> &QuasiMomentum {
        &self.theta
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// Assemble Δ(ϑ).
pub fn floquet_matrix(g: &FundamentalGraph, theta: &QuasiMomentum) -> Result<FloquetMatrix> {
    if theta.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: theta.dim(),
        });
    }
    let nu = g.vertex_count();
    let mut m = DMatrix::<Complex64>::zeros(nu, nu);
    for e in g.edges() {
        let w = -1.0 / ((g.degree(e.tail) as f64) * (g.degree(e.head) as f64)).sqrt();
        let ph = theta.phase(&e.index);
        // both orientations: (tail,head) with +τ and (head,tail) with -τ
        m[(e.tail, e.head)] += w * ph;
        m[(e.head, e.tail)] += w * ph.conj();
    }
    Ok(FloquetMatrix {
        theta: theta.clone(),
        entries: m,
    })
}

/// Sorted eigenvalues with orthonormal, phase-fixed eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    /// column n is the eigenvector of eigenvalue n
    vectors: DMatrix<Complex64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue of band `n` (1-based, ascending).
    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.eigenvalues[n - 1]
    }

    /// Eigenvector of band `n` (1-based).
    pub fn vector(&self, n: usize) -> DVector<Complex64> {
        self.vectors.column(n - 1).into_owned()
    }

    /// Distance from band `n` to its nearest neighbor band.
    pub fn gap(&self, n: usize) -> f64 {
        let i = n - 1;
        let mut gap = f64::INFINITY;
        if i > 0 {
            gap = gap.min(self.eigenvalues[i] - self.eigenvalues[i - 1]);
        }
        if i + 1 < self.eigenvalues.len() {
            gap = gap.min(self.eigenvalues[i + 1] - self.eigenvalues[i]);
        }
        gap
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues. Eigenvector
/// phases are fixed by making the first component of magnitude > 1e-8 real
/// positive.
pub fn eigensystem(m: &FloquetMatrix) -> Result<EigenSystem> {
    let asym = m.asymmetry();
    if asym > 1e-12 {
        return Err(Error::NonHermitianInput { max_asym: asym });
    }
    let n = m.dim();
    let mut h = m.entries.clone();
    for i in 0..n {
        for j in 0..n {
            let s = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            h[(i, j)] = s;
            h[(j, i)] = s.conj();
        }
    }
    let se = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(se.eigenvalues[src]);
        let mut v = se.eigenvectors.column(src).into_owned();
        if let Some(lead) = v.iter().find(|c| c.norm() > 1e-8) {
            let u = lead.conj() / lead.norm();
            v *= u;
        }
        vectors.set_column(col, &v);
    }
    Ok(EigenSystem {
        eigenvalues,
        vectors,
    })
}

/// Sorted band values at ϑ without the eigenvectors.
pub fn band_values(g: &FundamentalGraph, theta: &QuasiMomentum) -> Vec<f64> {
    let m = floquet_matrix(g, theta).expect("dimension checked by caller");
    let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(m.entries)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Uniform torus grid with nodes ϑ_k = 2πk/N − π per axis.
#[derive(Debug, Clone, Copy)]
pub struct TorusGrid {
    pub n: usize,
    pub dim: usize,
}

impl TorusGrid {
    pub fn new(n: usize, dim: usize) -> Self {
        TorusGrid { n, dim }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self, flat: usize) -> Vec<usize> {
        let mut k = Vec::with_capacity(self.dim);
        let mut rest = flat;
        for _ in 0..self.dim {
            k.push(rest % self.n);
            rest /= self.n;
        }
        k
    }

    pub fn theta(&self, flat: usize) -> QuasiMomentum {
        let comps: Vec<f64> = self
            .indices(flat)
            .iter()
            .map(|&k| 2.0 * PI * (k as f64) / (self.n as f64) - PI)
            .collect();
        QuasiMomentum { components: comps }
    }

    /// The 2·dim von-Neumann neighbors with periodic wrap.
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let k = self.indices(flat);
        let mut out = Vec::with_capacity(2 * self.dim);
        for ax in 0..self.dim {
            for delta in [self.n - 1, 1] {
                let mut kk = k.clone();
                kk[ax] = (kk[ax] + delta) % self.n;
                out.push(self.flatten(&kk));
            }
        }
        out
    }

    /// Node of the negated quasimomentum (-ϑ ≡ ϑ with k ↦ N−k mod N).
    pub fn negate(&self, flat: usize) -> usize {
        let k = self.indices(flat);
        let neg: Vec<usize> = k.iter().map(|&ki| (self.n - ki) % self.n).collect();
        self.flatten(&neg)
    }

    pub fn flatten(&self, k: &[usize]) -> usize {
        let mut flat = 0;
        for &ki in k.iter().rev() {
            flat = flat * self.n + ki;
        }
        flat
    }
}

/// Band functions sampled on a torus grid, with per-band edge intervals.
#[derive(Debug, Clone)]
pub struct BandSurface {
    pub grid: TorusGrid,
    /// `samples[node][band]` (band 0-based internally; see `band_interval`)
    pub samples: Vec<Vec<f64>>,
    /// per band: [λ_n^-, λ_n^+]
    pub band_edges: Vec<Interval>,
}

impl BandSurface {
    pub fn band_count(&self) -> usize {
        self.band_edges.len()
    }

    /// Edge interval of band `n` (1-based).
    pub fn band_interval(&self, n: usize) -> Interval {
        self.band_edges[n - 1]
    }

    /// CSV rows: ϑ_1..ϑ_d, λ_1..λ_ν per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for ax in 0..self.grid.dim {
            out.push_str(&format!("theta{},", ax + 1));
        }
        let nu = self.samples.first().map_or(0, |s| s.len());
        for n in 1..=nu {
            out.push_str(&format!("lambda{n}"));
            out.push(if n == nu { '\n' } else { ',' });
        }
        for (flat, vals) in self.samples.iter().enumerate() {
            let theta = self.grid.theta(flat);
            for t in theta.components() {
                out.push_str(&format!("{},", fmt_sig(*t)));
            }
            for (i, v) in vals.iter().enumerate() {
                out.push_str(&fmt_sig(*v));
                out.push(if i + 1 == vals.len() { '\n' } else { ',' });
            }
        }
        out
    }
}

/// Evaluate all bands at every node of an N^d torus grid.
pub fn band_sample(g: &FundamentalGraph, n: usize) -> BandSurface {
    assert!(n >= 4, "grid size must be at least 4");
    let grid = TorusGrid::new(n, g.dim());
    let samples: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| band_values(g, &grid.theta(flat)))
        .collect();
    let nu = g.vertex_count();
    let mut band_edges = Vec::with_capacity(nu);
    for b in 0..nu {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &samples {
            lo = lo.min(s[b]);
            hi = hi.max(s[b]);
        }
        band_edges.push(Interval::new(lo, hi));
    }
    BandSurface {
        grid,
        samples,
        band_edges,
    }
}

/// One golden-section line search minimizing `f` over [a, b].
fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn refine_extremum(
    g: &FundamentalGraph,
    band0: usize,
    start: &QuasiMomentum,
    span: f64,
    max_rounds: usize,
    maximize: bool,
) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut point: Vec<f64> = start.components().to_vec();
    let eval = |p: &[f64]| sign * band_values(g, &QuasiMomentum::new(p))[band0];
    let mut best = eval(&point);
    for _ in 0..max_rounds {
        let before = best;
        for ax in 0..point.len() {
            let center = point[ax];
            let f1 = |x: f64| {
                let mut p = point.clone();
                p[ax] = x;
                eval(&p)
            };
            let (x, v) = golden_min(f1, center - span, center + span, 1e-10);
            if v < best {
                best = v;
                point[ax] = x;
            }
        }
        if (before - best).abs() < 1e-13 {
            break;
        }
    }
    sign * best
}

/// Band edge interval [λ_n^-, λ_n^+] for band `n` (1-based): coarse N^d scan
/// followed by coordinate-wise golden-section refinement around the best
/// nodes. Rounds continue until the value stabilizes (≤ `rounds` sweeps).
pub fn band_edges(g: &FundamentalGraph, n: usize, grid_n: usize, rounds: usize) -> Interval {
    let surface = band_sample(g, grid_n);
    refine_band_edges(g, &surface, rounds).band_interval(n)
}

/// Refine every band's edges in place and return the updated surface.
pub fn refine_band_edges(
    g: &FundamentalGraph,
    surface: &BandSurface,
    rounds: usize,
) -> BandSurface {
    let grid = surface.grid;
    let span = 2.0 * PI / grid.n as f64;
    let nu = g.vertex_count();
    let refined: Vec<Interval> = (0..nu)
        .into_par_iter()
        .map(|b| {
            let mut min_node = 0;
            let mut max_node = 0;
            for (flat, s) in surface.samples.iter().enumerate() {
                if s[b] < surface.samples[min_node][b] {
                    min_node = flat;
                }
                if s[b] > surface.samples[max_node][b] {
                    max_node = flat;
                }
            }
            let mut lo = refine_extremum(g, b, &grid.theta(min_node), span, rounds, false);
            let mut hi = refine_extremum(g, b, &grid.theta(max_node), span, rounds, true);
            // all eigenvalues lie in [-1, 1]; snap edges that reach ±1 up to
            // rounding, since arccos amplifies ulp-level error near ±1 into
            // visible gaps between ladder levels
            if (lo + 1.0).abs() < 1e-12 {
                lo = -1.0;
            }
            if (hi - 1.0).abs() < 1e-12 {
                hi = 1.0;
            }
            Interval::new(lo.min(hi), hi.max(lo))
        })
        .collect();
    BandSurface {
        grid,
        samples: surface.samples.clone(),
        band_edges: refined,
    }
}

/// Bands whose sampled values vary by less than `tol`: returns (n, mean
/// value) pairs with 1-based n.
pub fn detect_flat_bands(surface: &BandSurface, tol: f64) -> Vec<(usize, f64)> {
    let nu = surface.samples.first().map_or(0, |s| s.len());
    let mut out = Vec::new();
    for b in 0..nu {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for s in &surface.samples {
            lo = lo.min(s[b]);
            hi = hi.max(s[b]);
            sum += s[b];
        }
        if hi - lo < tol {
            out.push((b + 1, sum / surface.samples.len() as f64));
        }
    }
    out
}

/// Geometric and spectral constants of a graph used by the uniform
/// eigenfunction bounds.
#[derive(Debug, Clone)]
pub struct GraphConstants {
    /// Distance from λ_1(0) = -1 to the rest of σ(Δ(0)); infinite for ν = 1.
    pub gap_at_zero: f64,
    /// max_{bridges} |τ(e)| plus the degree-weighted index sum term.
    pub bridge_bound: f64,
    /// Lower bound on the effective mass of the lowest band.
    pub mass_floor: f64,
    /// Σ_v κ_v
    pub total_degree: usize,
    /// Sampled sup of |ϑ| / sin z_1(ϑ) over the grid (origin and
    /// sin-singular nodes excluded).
    pub ratio_sup: f64,
}

pub fn graph_constants(g: &FundamentalGraph) -> GraphConstants {
    graph_constants_with_grid(g, 64)
}

pub fn graph_constants_with_grid(g: &FundamentalGraph, grid_n: usize) -> GraphConstants {
    // the index-dependent constants assume the zero-tree-index convention;
    // spectral quantities are unaffected by the re-indexing
    let tree = crate::graph::spanning_tree(g);
    let g = &crate::graph::normalize_indices(g, &tree);
    let kappa = g.total_degree();
    let nu = g.vertex_count();
    let d = g.dim();

    // gap of Δ(0) above λ_1(0)
    let at_zero = band_values(g, &QuasiMomentum::zero(d));
    let lowest = at_zero[0];
    let gap_at_zero = at_zero
        .iter()
        .copied()
        .filter(|&l| l > lowest + 1e-9)
        .map(|l| l - lowest)
        .fold(f64::INFINITY, f64::min);

    // bridge index bound
    let max_tau = g
        .bridges()
        .map(|e| e.index_norm())
        .fold(0.0f64, f64::max);
    let mut weighted = 0.0f64;
    for u in 0..nu {
        let mut sum = 0.0;
        for e in g.edges() {
            let w = e.index_norm() / ((g.degree(e.tail) as f64) * (g.degree(e.head) as f64)).sqrt();
            if e.tail == u {
                sum += w;
            }
            if e.head == u {
                sum += w;
            }
        }
        weighted = weighted.max(sum);
    }
    let bridge_bound = if gap_at_zero.is_finite() {
        max_tau + 2.0 / gap_at_zero * weighted
    } else {
        max_tau
    };

    // effective-mass floor from d independent bridges
    let picks = crate::graph::independent_bridges(g).expect("validated graph has full rank");
    let c_sum: f64 = picks
        .iter()
        .map(|&eid| {
            let e = g.edge(eid);
            e.index.iter().map(|&x| (x * x) as f64).sum::<f64>()
        })
        .sum();
    let mass_floor = 1.0 / (kappa as f64 * nu as f64 * d as f64)
        * ((d as f64 - 1.0) / c_sum).powi(d as i32 - 1);

    // sampled sup of |ϑ| / sin z_1(ϑ)
    let grid = TorusGrid::new(grid_n, d);
    let ratio_sup = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let theta = grid.theta(flat);
            if theta.is_zero() {
                return 0.0;
            }
            let l1 = band_values(g, &theta)[0];
            let sin_z = (1.0 - l1 * l1).max(0.0).sqrt();
            if sin_z <= 1e-8 {
                0.0
            } else {
                theta.norm() / sin_z
            }
        })
        .reduce(|| 0.0, f64::max);

    GraphConstants {
        gap_at_zero,
        bridge_bound,
        mass_floor,
        total_degree: kappa,
        ratio_sup,
    }
}

/// Effective mass of the lowest band at ϑ = 0 along the unit direction ω:
/// half the second derivative, by a Richardson-extrapolated central second
/// difference over steps h and h/2.
pub fn effective_mass(g: &FundamentalGraph, omega: &[f64], h: f64) -> Result<f64> {
    if omega.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: omega.len(),
        });
    }
    let norm: f64 = omega.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "direction must be a unit vector, |ω| = {norm}"
        )));
    }
    if !(1e-4..=1e-1).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "step h = {h} outside [1e-4, 1e-1]"
        )));
    }
    let f = |s: f64| {
        let p: Vec<f64> = omega.iter().map(|&w| s * w).collect();
        band_values(g, &QuasiMomentum::new(&p))[0]
    };
    let f0 = f(0.0);
    let d2 = |step: f64| (f(step) - 2.0 * f0 + f(-step)) / (2.0 * step * step);
    let coarse = d2(h);
    let fine = d2(h / 2.0);
    Ok((4.0 * fine - coarse) / 3.0)
}
