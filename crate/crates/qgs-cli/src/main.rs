//! `qgs` — spectra and scattering of periodic quantum graphs from the
//! command line. Emits CSV/JSON only; plotting is the caller's business.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde_json::json;

use qgs::eigenfunctions::{
    dirichlet_basis, dirichlet_eigenfunction, evaluate, vertex_condition_residual,
    vertex_eigenfunction, Parity,
};
use qgs::error::Error;
use qgs::floquet::{
    band_sample, eigensystem, floquet_matrix, graph_constants_with_grid, refine_band_edges,
    QuasiMomentum,
};
use qgs::graph::{build_graph, builtin, is_bipartite, spanning_tree, BuiltinName, FundamentalGraph};
use qgs::metric::metric_spectrum;
use qgs::numfmt::{fmt_sig, json_num};
use qgs::scattering::{
    birman_krein_phase, determinant, jmax_for_tolerance, BkOptions, Potential, ScatteringContext,
    DEFAULT_TAIL_REL_TOL,
};

#[derive(Parser)]
#[command(name = "qgs", version, about = "Band structure, metric spectra and scattering on Z^d-periodic equilateral quantum graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArg {
    /// Built-in name (lattice2, lattice3, ..., graphene, stanene) or a .qg file
    #[arg(long)]
    graph: String,
}

#[derive(Args)]
struct OutputArg {
    /// Write to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format where a choice exists
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph and report its structure
    Check {
        #[command(flatten)]
        graph: GraphArg,
        /// Seed for the random fiber spot-checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample band surfaces over the torus; CSV surface plus JSON band edges
    Bands {
        #[command(flatten)]
        graph: GraphArg,
        /// Torus grid nodes per axis
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[command(flatten)]
        output: OutputArg,
    },
    /// Assemble the metric Laplacian spectrum up to ladder level jmax
    Spectrum {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value_t = 3)]
        jmax: u32,
        #[arg(long, default_value_t = 48)]
        grid: usize,
        #[command(flatten)]
        output: OutputArg,
    },
    /// Sample a fiber eigenfunction to CSV (edge, t, Re, Im)
    Eigenfunction {
        #[command(flatten)]
        graph: GraphArg,
        /// Quasimomentum components, comma separated
        #[arg(long, allow_hyphen_values = true)]
        theta: String,
        /// Vertex-family band index (1-based); in Dirichlet mode the
        /// solution index s
        #[arg(long)]
        band: Option<usize>,
        /// Ladder level j (vertex family) or Dirichlet level j >= 1
        #[arg(long, default_value_t = 0)]
        j: u32,
        /// Select the Dirichlet family with this parity (even|odd); j must match
        #[arg(long)]
        parity: Option<String>,
        /// Sample points per edge
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[command(flatten)]
        output: OutputArg,
    },
    /// Fredholm determinant / Birman–Krein phase for a potential
    Scattering {
        #[command(flatten)]
        graph: GraphArg,
        /// Potential JSON file
        #[arg(long)]
        potential: PathBuf,
        /// Spectral parameter as `re,im` (upper half plane)
        #[arg(long, default_value = "1,1", allow_hyphen_values = true)]
        k: String,
        /// Torus grid nodes per axis (default 24; 96 for --bk-phase)
        #[arg(long)]
        grid: Option<usize>,
        /// Ladder cutoff; defaults to the tail-bound policy
        #[arg(long)]
        jmax: Option<u32>,
        /// Simpson points per supported edge (odd)
        #[arg(long, default_value_t = 33)]
        quad: usize,
        /// Log-determinant series terms
        #[arg(long, default_value_t = 3)]
        series: usize,
        /// Compute det S at energy --E instead of D(k)
        #[arg(long)]
        bk_phase: bool,
        /// Real energy inside the absolutely continuous spectrum
        #[arg(long = "E", alias = "e", allow_hyphen_values = true)]
        e: Option<f64>,
        /// Boundary-approach parameter for the phase
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        output: OutputArg,
    },
    /// Geometric and spectral constants of a graph
    Constants {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Ladder levels used for the measured sup constant
        #[arg(long, default_value_t = 6)]
        jmax: u32,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("QGS_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_graph(source: &str) -> Result<FundamentalGraph, Error> {
    if source.ends_with(".qg") {
        let text = std::fs::read_to_string(source)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {source}: {e}")))?;
        match qgs::dsl::parse(&text) {
            Ok(spec) => build_graph(&spec),
            Err(diags) => {
                for d in &diags {
                    eprintln!("{source}:{d}");
                }
                Err(Error::InvalidSpec(format!(
                    "{} parse diagnostic(s) in {source}",
                    diags.len()
                )))
            }
        }
    } else {
        builtin(source.parse::<BuiltinName>()?)
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_theta(text: &str, dim: usize) -> Result<QuasiMomentum, Error> {
    let comps: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let comps = comps.map_err(|e| Error::InvalidParameter(format!("bad --theta: {e}")))?;
    if comps.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: comps.len(),
        });
    }
    Ok(QuasiMomentum::new(&comps))
}

fn parse_k(text: &str) -> Result<Complex64, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "expected --k as `re,im`, got `{text}`"
        )));
    }
    let re = parts[0].trim().parse::<f64>();
    let im = parts[1].trim().parse::<f64>();
    match (re, im) {
        (Ok(re), Ok(im)) => Ok(Complex64::new(re, im)),
        _ => Err(Error::InvalidParameter(format!("bad --k `{text}`"))),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Check { graph, seed } => cmd_check(&graph.graph, seed),
        Command::Bands { graph, grid, output } => cmd_bands(&graph.graph, grid, &output),
        Command::Spectrum {
            graph,
            jmax,
            grid,
            output,
        } => cmd_spectrum(&graph.graph, jmax, grid, &output),
        Command::Eigenfunction {
            graph,
            theta,
            band,
            j,
            parity,
            samples,
            output,
        } => cmd_eigenfunction(&graph.graph, &theta, band, j, parity.as_deref(), samples, &output),
        Command::Scattering {
            graph,
            potential,
            k,
            grid,
            jmax,
            quad,
            series,
            bk_phase,
            e,
            eps,
            output,
        } => cmd_scattering(
            &graph.graph,
            &potential,
            &k,
            grid,
            jmax,
            quad,
            series,
            bk_phase,
            e,
            eps,
            &output,
        ),
        Command::Constants { graph, grid, jmax } => cmd_constants(&graph.graph, grid, jmax),
    }
}

fn cmd_check(source: &str, seed: u64) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    let tree = spanning_tree(&g);
    let bip = is_bipartite(&g);

    // seeded fiber spot-checks: Hermiticity and eigenvalue range
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_asym = 0.0f64;
    let mut max_abs_lambda = 0.0f64;
    for _ in 0..25 {
        let th: Vec<f64> = (0..g.dim())
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let m = floquet_matrix(&g, &QuasiMomentum::new(&th))?;
        max_asym = max_asym.max(m.asymmetry());
        let es = eigensystem(&m)?;
        for &l in es.eigenvalues() {
            max_abs_lambda = max_abs_lambda.max(l.abs());
        }
    }
    let hermitian_ok = max_asym <= 1e-14;
    let range_ok = max_abs_lambda <= 1.0 + 1e-12;

    let report = json!({
        "graph": g.name(),
        "dim": g.dim(),
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "degrees": (0..g.vertex_count()).map(|v| g.degree(v)).collect::<Vec<_>>(),
        "euler": format!("{} + {} <= {} + 1", g.vertex_count(), g.dim(), g.edge_count()),
        "bipartite": bip.is_some(),
        "tree_edges": tree.tree_edges.iter().map(|&e| g.edge_label(e)).collect::<Vec<_>>(),
        "hermitian_spot_check": hermitian_ok,
        "eigenvalue_range_ok": range_ok,
        "max_asymmetry": json_num(max_asym),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if hermitian_ok && range_ok {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn cmd_bands(source: &str, grid: usize, output: &OutputArg) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    if grid < 4 {
        return Err(Error::InvalidParameter("--grid must be at least 4".into()));
    }
    let surface = refine_band_edges(&g, &band_sample(&g, grid), 40);
    let edges_json = json!({
        "graph": g.name(),
        "grid": grid,
        "bands": (1..=g.vertex_count()).map(|n| {
            let iv = surface.band_interval(n);
            json!([json_num(iv.lo), json_num(iv.hi)])
        }).collect::<Vec<_>>(),
    });
    let edges_text = serde_json::to_string_pretty(&edges_json).unwrap();
    if output.format == "json" && output.out.is_none() {
        println!("{edges_text}");
        return Ok(ExitCode::SUCCESS);
    }
    emit(&output.out, &surface.to_csv())?;
    if output.out.is_some() {
        println!("{edges_text}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_spectrum(source: &str, jmax: u32, grid: usize, output: &OutputArg) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    let (spectrum, _) = metric_spectrum(&g, jmax, grid)?;
    let text = serde_json::to_string_pretty(&spectrum.to_json()).unwrap();
    emit(&output.out, &format!("{text}\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eigenfunction(
    source: &str,
    theta_text: &str,
    band: Option<usize>,
    j: u32,
    parity: Option<&str>,
    samples: usize,
    output: &OutputArg,
) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    let theta = parse_theta(theta_text, g.dim())?;
    let wf = match parity {
        Some(p) => {
            let parity = match p {
                "even" => Parity::Even,
                "odd" => Parity::Odd,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "--parity must be even or odd, got `{other}`"
                    )))
                }
            };
            if j < 1 || Parity::of(j) != parity {
                return Err(Error::InvalidParameter(format!(
                    "Dirichlet level --j {j} does not match --parity {p}"
                )));
            }
            let basis = dirichlet_basis(&g, parity, &theta)?;
            let s = band.unwrap_or(1);
            if s == 0 || s > basis.len() {
                return Err(Error::InvalidParameter(format!(
                    "Dirichlet solution index {s} out of range 1..={}",
                    basis.len()
                )));
            }
            dirichlet_eigenfunction(&theta, &basis[s - 1], j)
        }
        None => {
            let n = band.ok_or_else(|| {
                Error::InvalidParameter("either --band (vertex family) or --parity (Dirichlet family) is required".into())
            })?;
            if n == 0 || n > g.vertex_count() {
                return Err(Error::InvalidParameter(format!(
                    "--band {n} out of range 1..={}",
                    g.vertex_count()
                )));
            }
            let es = eigensystem(&floquet_matrix(&g, &theta)?)?;
            vertex_eigenfunction(&g, &theta, n, j, &es)?
        }
    };

    let mut csv = String::from("edge,t,re,im\n");
    for e in 0..g.edge_count() {
        for i in 0..samples {
            let t = i as f64 / (samples - 1).max(1) as f64;
            let v = evaluate(&wf, e, t)?;
            csv.push_str(&format!(
                "{},{},{},{}\n",
                g.edge_label(e),
                fmt_sig(t),
                fmt_sig(v.re),
                fmt_sig(v.im)
            ));
        }
    }
    let residual = vertex_condition_residual(&g, &wf);
    csv.push_str(&format!("# residual {}\n", fmt_sig(residual)));
    emit(&output.out, &csv)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_scattering(
    source: &str,
    potential: &PathBuf,
    k_text: &str,
    grid: Option<usize>,
    jmax: Option<u32>,
    quad: usize,
    series: usize,
    bk_phase: bool,
    energy: Option<f64>,
    eps: f64,
    output: &OutputArg,
) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    let text = std::fs::read_to_string(potential)
        .map_err(|e| Error::PotentialFormat(format!("cannot read {}: {e}", potential.display())))?;
    let q = Potential::from_json_str(&text, &g)?;
    let ctx = ScatteringContext::measure(&g);

    if bk_phase {
        let energy = energy.ok_or_else(|| {
            Error::InvalidParameter("--bk-phase requires --E <energy>".into())
        })?;
        let opts = BkOptions {
            quad_pts: quad,
            grid_n: grid.unwrap_or(96),
            jmax: jmax.unwrap_or(60),
        };
        let bk = birman_krein_phase(&g, &ctx, &q, energy, eps, &opts)?;
        let out = json!({
            "E": json_num(bk.energy),
            "detS": [json_num(bk.det_s.re), json_num(bk.det_s.im)],
            "abs": json_num(bk.det_s.norm()),
            "phase": json_num(bk.det_s.im.atan2(bk.det_s.re)),
            "eps": [json_num(bk.eps), json_num(bk.eps / 2.0)],
            "extrapolation_estimate": json_num(bk.extrapolation_estimate),
        });
        emit(&output.out, &format!("{}\n", serde_json::to_string_pretty(&out).unwrap()))?;
        return Ok(ExitCode::SUCCESS);
    }

    let k = parse_k(k_text)?;
    let jmax = match jmax {
        Some(j) => j,
        None => jmax_for_tolerance(&ctx, k, DEFAULT_TAIL_REL_TOL).0,
    };
    let det = determinant(&g, &ctx, &q, k, quad, grid.unwrap_or(24), jmax, series)?;
    emit(
        &output.out,
        &format!("{}\n", serde_json::to_string_pretty(&det.to_json()).unwrap()),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_constants(source: &str, grid: usize, jmax: u32) -> Result<ExitCode, Error> {
    let g = load_graph(source)?;
    let c = graph_constants_with_grid(&g, grid);
    let c_gamma = qgs::eigenfunctions::measure_c_gamma(&g, 32.min(grid), jmax);
    let out = json!({
        "graph": g.name(),
        "gap_at_zero": json_num(c.gap_at_zero),
        "bridge_bound": json_num(c.bridge_bound),
        "mass_floor": json_num(c.mass_floor),
        "total_degree": c.total_degree,
        "ratio_sup": json_num(c.ratio_sup),
        "c_gamma": json_num(c_gamma),
        "grid": grid,
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(ExitCode::SUCCESS)
}
