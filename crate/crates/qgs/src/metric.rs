//! From discrete bands to the metric Laplacian's spectrum.
//!
//! A discrete eigenvalue λ ∈ [-1, 1] maps to z = arccos(-λ) ∈ [0, π]; the
//! parity ladder z_{n,j} (z + πj for even j, (π - z) + πj for odd j) squares
//! to the metric energies. Dirichlet values (πj)² enter as flat bands of
//! multiplicity ν* - ν, and the complement of the merged absolutely
//! continuous part within the truncation window is reported as gaps.

use serde_json::json;

use crate::error::{Error, Result};
use crate::floquet::{band_sample, detect_flat_bands, refine_band_edges, BandSurface};
use crate::graph::FundamentalGraph;
use crate::numfmt::json_num;
use crate::Interval;

use std::f64::consts::PI;

/// z = arccos(-λ) for λ ∈ [-1, 1] (clamped within 1e-12).
pub fn z_map(lambda: f64) -> Result<f64> {
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&lambda) {
        return Err(Error::OutOfRange(lambda));
    }
    Ok((-lambda.clamp(-1.0, 1.0)).acos())
}

/// A z-value together with its source band and eigenvalue.
#[derive(Debug, Clone, Copy)]
pub struct ZValue {
    pub z: f64,
    pub band: usize,
    pub lambda: f64,
}

impl ZValue {
    pub fn new(band: usize, lambda: f64) -> Result<Self> {
        Ok(ZValue {
            z: z_map(lambda)?,
            band,
            lambda,
        })
    }
}

/// The parity ladder: z + πj for even j, (π - z) + πj for odd j.
pub fn ladder(z: f64, j: u32) -> f64 {
    if j.is_multiple_of(2) {
        z + PI * j as f64
    } else {
        (PI - z) + PI * j as f64
    }
}

/// One spectral band of the metric Laplacian at ladder level `j`.
#[derive(Debug, Clone, Copy)]
pub struct MetricBand {
    /// source discrete band (1-based)
    pub band: usize,
    /// ladder level j ≥ 0
    pub level: u32,
    pub interval: Interval,
}

/// Map a discrete band interval to the metric band at level `j`. For odd j
/// the endpoints swap roles: the lower metric edge comes from the upper
/// discrete edge.
pub fn metric_band(n: usize, j: u32, lambda_interval: Interval) -> Result<MetricBand> {
    let z_lo = z_map(lambda_interval.lo)?;
    let z_hi = z_map(lambda_interval.hi)?;
    let (e_lo, e_hi) = if j.is_multiple_of(2) {
        (ladder(z_lo, j), ladder(z_hi, j))
    } else {
        (ladder(z_hi, j), ladder(z_lo, j))
    };
    Ok(MetricBand {
        band: n,
        level: j,
        interval: Interval::new(e_lo * e_lo, e_hi * e_hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatKind {
    /// (πj)² values carried by edge-interior sine modes.
    Dirichlet,
    /// Images of flat discrete bands under the ladder.
    Mv,
}

#[derive(Debug, Clone)]
pub struct FlatBand {
    pub energy: f64,
    pub multiplicity: usize,
    pub kind: FlatKind,
}

/// Truncated spectrum of the metric Laplacian: absolutely continuous bands
/// up to ladder level `jmax`, flat bands, Dirichlet values and gaps within
/// the window [0, (π(jmax+1))²].
#[derive(Debug, Clone)]
pub struct MetricSpectrum {
    pub graph_name: String,
    pub jmax: u32,
    pub ac_bands: Vec<MetricBand>,
    pub merged_ac: Vec<Interval>,
    pub flat_mv: Vec<FlatBand>,
    pub dirichlet: Vec<FlatBand>,
    pub gaps: Vec<Interval>,
    /// Upper end of the reported window; the true spectrum continues above.
    pub energy_cap: f64,
}

const MERGE_TOL: f64 = 1e-9;

fn merge_intervals(mut parts: Vec<Interval>) -> Vec<Interval> {
    parts.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    let mut out: Vec<Interval> = Vec::new();
    for iv in parts {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi + MERGE_TOL => {
                last.hi = last.hi.max(iv.hi);
            }
            _ => out.push(iv),
        }
    }
    out
}

fn complement(merged: &[Interval], cap: f64) -> Vec<Interval> {
    let mut gaps = Vec::new();
    let mut cursor = 0.0;
    for iv in merged {
        if iv.lo > cursor + MERGE_TOL {
            gaps.push(Interval::new(cursor, iv.lo));
        }
        cursor = cursor.max(iv.hi);
    }
    if cursor + MERGE_TOL < cap {
        gaps.push(Interval::new(cursor, cap));
    }
    gaps
}

/// Assemble the truncated metric spectrum from a refined band surface.
pub fn metric_spectrum_from_surface(
    g: &FundamentalGraph,
    surface: &BandSurface,
    jmax: u32,
) -> Result<MetricSpectrum> {
    let nu = g.vertex_count();
    let flats = detect_flat_bands(surface, 1e-10);
    let flat_bands: std::collections::BTreeSet<usize> = flats.iter().map(|&(n, _)| n).collect();

    let mut ac_bands = Vec::new();
    for n in 1..=nu {
        if flat_bands.contains(&n) {
            continue;
        }
        for j in 0..=jmax {
            ac_bands.push(metric_band(n, j, surface.band_interval(n))?);
        }
    }
    let merged_ac = merge_intervals(ac_bands.iter().map(|b| b.interval).collect());

    // flat discrete bands climb the ladder as degenerate metric bands
    let mut flat_values: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for &(_, lambda) in &flats {
        let z = z_map(lambda.clamp(-1.0, 1.0))?;
        for j in 0..=jmax {
            let e = ladder(z, j).powi(2);
            let key = (e / 1e-9).round() as u64;
            let entry = flat_values.entry(key).or_insert((e, 0));
            entry.1 += 1;
        }
    }
    let flat_mv: Vec<FlatBand> = flat_values
        .into_values()
        .map(|(energy, multiplicity)| FlatBand {
            energy,
            multiplicity,
            kind: FlatKind::Mv,
        })
        .collect();

    let dirichlet: Vec<FlatBand> = (1..=jmax)
        .map(|j| FlatBand {
            energy: (PI * j as f64).powi(2),
            multiplicity: g.edge_count() - nu,
            kind: FlatKind::Dirichlet,
        })
        .collect();

    let energy_cap = (PI * (jmax as f64 + 1.0)).powi(2);
    let gaps = complement(&merged_ac, energy_cap);

    Ok(MetricSpectrum {
        graph_name: g.name().to_string(),
        jmax,
        ac_bands,
        merged_ac,
        flat_mv,
        dirichlet,
        gaps,
        energy_cap,
    })
}

/// Sample, refine band edges, and assemble the spectrum. Returns the refined
/// surface alongside so callers can run cross-checks against the same data.
pub fn metric_spectrum(
    g: &FundamentalGraph,
    jmax: u32,
    grid_n: usize,
) -> Result<(MetricSpectrum, BandSurface)> {
    let surface = band_sample(g, grid_n);
    let refined = refine_band_edges(g, &surface, 40);
    let spectrum = metric_spectrum_from_surface(g, &refined, jmax)?;
    Ok((spectrum, refined))
}

/// Membership of the energy E in the metric spectrum via the discrete bands:
/// true iff -cos √E lies in some band interval. Must agree with membership
/// of E in the merged absolutely continuous part.
pub fn bgp_check(energy: f64, surface: &BandSurface) -> Result<bool> {
    if energy < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "energy must be nonnegative, got {energy}"
        )));
    }
    let root = energy.sqrt();
    let j_near = (root / PI).round();
    if j_near >= 1.0 {
        let dirichlet = (PI * j_near).powi(2);
        if (energy - dirichlet).abs() < 1e-9 {
            return Err(Error::DirichletPoint {
                energy,
                j: j_near as u32,
            });
        }
    }
    let target = -root.cos();
    Ok((1..=surface.band_count()).any(|n| surface.band_interval(n).contains(target)))
}

impl MetricSpectrum {
    pub fn to_json(&self) -> serde_json::Value {
        let intervals = |list: &[Interval]| -> serde_json::Value {
            json!(list
                .iter()
                .map(|iv| json!([json_num(iv.lo), json_num(iv.hi)]))
                .collect::<Vec<_>>())
        };
        let mut flat: Vec<&FlatBand> = self.dirichlet.iter().chain(&self.flat_mv).collect();
        flat.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
        json!({
            "graph": self.graph_name,
            "jmax": self.jmax,
            "ac": intervals(&self.merged_ac),
            "flat": flat.iter().map(|f| json!({
                "E": json_num(f.energy),
                "multiplicity": f.multiplicity,
                "kind": match f.kind { FlatKind::Dirichlet => "dirichlet", FlatKind::Mv => "mv" },
            })).collect::<Vec<_>>(),
            "gaps": intervals(&self.gaps),
            "emax": json_num(self.energy_cap),
            "truncated": true,
        })
    }
}
