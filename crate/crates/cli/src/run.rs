//! Subcommand orchestration. Each subcommand writes its tables into the
//! output directory next to the echoed configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use faddeev::bound::{lowest_threshold, spectrum_scan, BoundStateResult};
use faddeev::dimer::{dimer_spectrum, morse_levels, scattering_length};
use faddeev::operators::{reduce_symmetry, ProblemAssembly, ReducedSystem};
use faddeev::pairpot::PotentialModel;
use faddeev::resonance::{fit_resonance, model_s, ElasticKinematics};
use faddeev::scatter::{energy_scan, ScanPoint, ScatteringProblem};
use faddeev::wavefield::{density_field, lattice};

use crate::config::{FieldSource, RunConfig};
use crate::output::{f, i, RunHeader, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Dimer,
    Bound,
    Scatter,
    Scan,
    FitResonance,
    Wavefunction,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dimer => "dimer",
            Self::Bound => "bound",
            Self::Scatter => "scatter",
            Self::Scan => "scan",
            Self::FitResonance => "fit-resonance",
            Self::Wavefunction => "wavefunction",
        }
    }
}

/// Runs one subcommand; returns the artifacts written.
pub fn run(cmd: Subcommand, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let echo = cfg.echo();
    let echo_path = out.join("config.toml");
    std::fs::write(&echo_path, &echo).map_err(|e| CliError::Io(format!("{}: {e}", echo_path.display())))?;
    let mut header = RunHeader::new(cmd.name(), &echo);
    let mut written = vec![echo_path];
    let files = match cmd {
        Subcommand::Dimer => dimer(cfg, out, &mut header)?,
        Subcommand::Bound => bound(cfg, out, &mut header)?,
        Subcommand::Scatter => scatter(cfg, out, &mut header, false)?,
        Subcommand::Scan => scatter(cfg, out, &mut header, true)?,
        Subcommand::FitResonance => resonance(cfg, out, &mut header)?,
        Subcommand::Wavefunction => wavefunction(cfg, out, &mut header)?,
    };
    written.extend(files);
    Ok(written)
}

fn dimer(cfg: &RunConfig, out: &Path, header: &mut RunHeader) -> Result<Vec<PathBuf>, CliError> {
    let masses = cfg.masses()?;
    let model = cfg.potential()?;
    let mu = masses.pair_reduced(0);
    let t = Instant::now();
    let spectrum = dimer_spectrum(&model, mu, cfg.dimer.j_max, &cfg.x_grid()?)?;
    header.time("levels", t.elapsed());
    let analytic = match model {
        PotentialModel::Morse { depth, a, .. } => Some(morse_levels(depth, a, mu)),
        _ => None,
    };
    let mut table = if analytic.is_some() {
        Table::new("pair levels with the analytic Morse spectrum", &["v", "j", "energy[K]", "analytic[K]", "deviation[K]"])
    } else {
        Table::new("pair levels", &["v", "j", "energy[K]"])
    };
    table.note("pair_reduced_mass[Da]", mu);
    if cfg.dimer.scattering_length {
        let t = Instant::now();
        let a = scattering_length(&model, mu)?;
        header.time("scattering_length", t.elapsed());
        table.note("scattering_length[bohr]", format!("{a:.6}"));
    }
    for s in &spectrum.states {
        let mut row = vec![i(s.v), i(s.j), f(s.energy)];
        if let Some(levels) = &analytic {
            match levels.get(s.v).filter(|_| s.j == 0) {
                Some(e) => row.extend([f(*e), f(s.energy - e)]),
                None => row.extend(["nan".into(), "nan".into()]),
            }
        }
        table.push(row);
    }
    Ok(vec![table.write(out, "dimer_levels.dat", header)?])
}

fn assemble(cfg: &RunConfig, header: &mut RunHeader) -> Result<(ProblemAssembly, ReducedSystem), CliError> {
    let a = cfg.assembly()?;
    let t = Instant::now();
    let sys = reduce_symmetry(&a);
    header.time("assembly", t.elapsed());
    let n = sys.dim();
    header.note("dimension", n);
    header.note("channels_per_component", cfg.channel_count());
    header.note("reduction", format!("{:?}", a.mode));
    header.note("indicator_density", format!("{:.6}", sys.indicator.density()));
    header.note("local_density", format!("{:.6}", sys.local.density()));
    header.note("kernel_density", format!("{:.6}", sys.kernel.density()));
    header.note("kernel_nnz", sys.kernel.nnz());
    let st = sys.kernel_stats;
    header.note(
        "kernel_quadrature",
        format!("evaluations={} dropped={} max_dropped_weight={:.3e}", st.evaluations, st.dropped, st.max_dropped_weight),
    );
    Ok((a, sys))
}

fn scan_states(
    cfg: &RunConfig,
    a: &ProblemAssembly,
    sys: &ReducedSystem,
    header: &mut RunHeader,
) -> Result<(Vec<BoundStateResult>, f64), CliError> {
    let threshold = lowest_threshold(a)?;
    header.note("dimer_ground[K]", f(threshold));
    let t = Instant::now();
    let states = spectrum_scan(sys, &cfg.scan_options(), threshold)?;
    header.time("spectrum_scan", t.elapsed());
    Ok((states, threshold))
}

fn bound(cfg: &RunConfig, out: &Path, header: &mut RunHeader) -> Result<Vec<PathBuf>, CliError> {
    let (a, sys) = assemble(cfg, header)?;
    let (states, _) = scan_states(cfg, &a, &sys, header)?;
    let mut table = Table::new("trimer spectrum", &["index", "energy[K]", "kind", "residual", "iterations", "shift[K]", "monotone_tail"]);
    let mut history = Table::new("iteration histories", &["index", "iteration", "estimate[K]"]);
    for (k, s) in states.iter().enumerate() {
        table.push(vec![
            i(k),
            f(s.energy),
            format!("{:?}", s.kind).to_lowercase(),
            format!("{:.3e}", s.residual),
            i(s.iterations),
            f(s.shift),
            i(s.monotone_tail(1e-12)),
        ]);
        for (it, e) in s.history.iter().enumerate() {
            history.push(vec![i(k), i(it + 1), f(*e)]);
        }
    }
    let mut files = vec![table.write(out, "bound_states.dat", header)?, history.write(out, "bound_history.dat", header)?];
    if cfg.bound.dump_vectors {
        let mut vecs = Table::new("coefficient vectors", &["index", "component", "channel", "y_index", "x_index", "coefficient"]);
        for (k, s) in states.iter().enumerate() {
            for (idx, c) in s.vector.iter().enumerate() {
                let (comp, alpha, m, n) = a.split_index(idx);
                vecs.push(vec![i(k), i(comp), i(alpha), i(m), i(n), f(*c)]);
            }
        }
        files.push(vecs.write(out, "bound_vectors.dat", header)?);
    }
    Ok(files)
}

fn scattering_scan(
    cfg: &RunConfig,
    energies: &[f64],
    header: &mut RunHeader,
) -> Result<(ProblemAssembly, ReducedSystem, Vec<ScanPoint>), CliError> {
    let (a, sys) = assemble(cfg, header)?;
    let points = {
        let problem = ScatteringProblem::new(&a, &sys, cfg.scatter.options())?;
        let t = Instant::now();
        let points = energy_scan(&problem, energies)?;
        header.time("energy_scan", t.elapsed());
        points
    };
    Ok((a, sys, points))
}

fn scatter(cfg: &RunConfig, out: &Path, header: &mut RunHeader, compact: bool) -> Result<Vec<PathBuf>, CliError> {
    let energies = cfg.scatter.energies.values();
    let (_, _, points) = scattering_scan(cfg, &energies, header)?;
    let mut quality = Table::new(
        "scattering quality and observables",
        &[
            "energy[K]",
            "open",
            "eta_u",
            "eta_r",
            "eigenphase_sum[rad]",
            "sigma_el[bohr^2]",
            "fit_residual",
            "unreliable",
            "re_s11",
            "im_s11",
            "abs_s12",
        ],
    );
    let mut failures = Table::new("failed energies", &["energy[K]", "error"]);
    let mut smat = Table::new("S and T matrix elements", &["energy[K]", "row", "col", "re_s", "im_s", "abs_s", "re_t", "im_t"]);
    let mut chans = Table::new("open channels", &["energy[K]", "index", "v", "j", "lambda", "threshold[K]", "q[1/bohr]"]);
    for p in &points {
        match &p.result {
            Ok(r) => {
                let s11 = r.s[(0, 0)];
                let s12 = if r.channels.len() > 1 { r.s[(0, 1)].norm() } else { 0.0 };
                quality.push(vec![
                    f(p.energy),
                    i(r.channels.len()),
                    f(r.eta_u),
                    f(r.eta_r),
                    f(r.eigenphase_sum),
                    f(r.sigma_el),
                    f(r.fit_residual),
                    i(r.unreliable),
                    f(s11.re),
                    f(s11.im),
                    f(s12),
                ]);
                if !compact {
                    for (k, c) in r.channels.iter().enumerate() {
                        chans.push(vec![f(p.energy), i(k), i(c.v), i(c.j), i(c.lambda), f(c.threshold), f(c.q)]);
                    }
                    for row in 0..r.s.nrows() {
                        for col in 0..r.s.ncols() {
                            let (s, t) = (r.s[(row, col)], r.t[(row, col)]);
                            smat.push(vec![f(p.energy), i(row), i(col), f(s.re), f(s.im), f(s.norm()), f(t.re), f(t.im)]);
                        }
                    }
                }
            }
            Err(e) => failures.push(vec![f(p.energy), format!("{e:?}")]),
        }
    }
    let stem = if compact { "scan" } else { "scatter" };
    let mut files = vec![quality.write(out, &format!("{stem}_quality.dat"), header)?];
    if !compact {
        files.push(smat.write(out, "scatter_smatrix.dat", header)?);
        files.push(chans.write(out, "scatter_channels.dat", header)?);
    }
    if !failures.rows.is_empty() {
        files.push(failures.write(out, &format!("{stem}_failures.dat"), header)?);
    }
    Ok(files)
}

fn resonance(cfg: &RunConfig, out: &Path, header: &mut RunHeader) -> Result<Vec<PathBuf>, CliError> {
    let energies = cfg.resonance.energies.values();
    let (a, _, points) = scattering_scan(cfg, &energies, header)?;
    let mut threshold = None;
    let samples: Vec<(f64, Complex64)> = points
        .iter()
        .filter_map(|p| p.result.as_ref().ok())
        .map(|r| {
            threshold.get_or_insert(r.channels[0].threshold);
            let s = r.s[(0, 0)];
            (r.energy, Complex64::new(s.re, s.im))
        })
        .collect();
    let threshold = threshold.ok_or_else(|| faddeev::Error::NoResonance("no energy in the scan succeeded".into()))?;
    let kin = ElasticKinematics { threshold, mu: a.masses.atom_pair_reduced(0) };
    let t = Instant::now();
    let fit = fit_resonance(&samples, &kin, cfg.resonance.window.map(|[lo, hi]| (lo, hi)))?;
    header.time("fit", t.elapsed());
    let mut table = Table::new("elastic S-matrix element and pole fit", &["energy[K]", "re_s11", "im_s11", "re_model", "im_model"]);
    table.note("resonance_energy[K]", format!("{:.6} - {:.6}i", fit.energy.0, -fit.energy.1));
    table.note("width[K]", format!("{:.6}", fit.width));
    table.note("lifetime[s]", format!("{:.4e}", fit.lifetime));
    table.note(
        "uncertainty",
        format!(
            "position={:.2e} K half_width={:.2e} K alpha={:.2e} bohr beta={:.2e}",
            fit.uncertainty[0], fit.uncertainty[1], fit.uncertainty[2], fit.uncertainty[3]
        ),
    );
    table.note("background", format!("alpha={:.6} bohr beta={:.6}", fit.params.alpha, fit.params.beta));
    table.note("fit_window[K]", format!("{} {}", fit.window.0, fit.window.1));
    table.note("fit_rms", format!("{:.3e}", fit.residual));
    table.note("iterations", fit.iterations);
    for (e, s) in &samples {
        let m = model_s(&fit.params, *e, kin.q(*e));
        table.push(vec![f(*e), f(s.re), f(s.im), f(m.re), f(m.im)]);
    }
    Ok(vec![table.write(out, "resonance.dat", header)?])
}

fn wavefunction(cfg: &RunConfig, out: &Path, header: &mut RunHeader) -> Result<Vec<PathBuf>, CliError> {
    let w = &cfg.wavefunction;
    let (a, sys) = assemble(cfg, header)?;
    let (coeffs, energy) = match w.source {
        FieldSource::Energy(e) => {
            let problem = ScatteringProblem::new(&a, &sys, cfg.scatter.options())?;
            let t = Instant::now();
            let r = faddeev::scatter::solve_scattering(&problem, e)?;
            header.time("scattering", t.elapsed());
            header.note("normalization", "elastic incident wave j_lambda(q y) with unit amplitude");
            (r.elastic_field()?, e)
        }
        FieldSource::State(k) => {
            let (states, _) = scan_states(cfg, &a, &sys, header)?;
            let s = states
                .get(k)
                .ok_or_else(|| faddeev::Error::InvalidInput(format!("bound state {k} not found ({} converged)", states.len())))?;
            header.note("normalization", "unit Euclidean norm of the coefficient vector");
            (s.vector.iter().map(|&x| Complex64::new(x, 0.0)).collect(), s.energy)
        }
    };
    header.note("energy[K]", f(energy));
    let extent = w.extent.unwrap_or_else(|| a.x_basis.grid().x_max().min(a.y_basis.grid().x_max()));
    let xs = lattice(extent, w.lattice);
    let thetas: Vec<f64> = w.thetas_deg.iter().map(|d| d.to_radians()).collect();
    let t = Instant::now();
    let grid = density_field(&coeffs, &a, energy, &thetas, &xs, &xs)?;
    header.time("density", t.elapsed());
    let mut density = Table::new("scaled density |rho^2 Psi|^2", &["theta[deg]", "x[bohr]", "y[bohr]", "value"]);
    let mut contour =
        Table::new("classical boundary V_total = E, straight segments", &["theta[deg]", "x1[bohr]", "y1[bohr]", "x2[bohr]", "y2[bohr]"]);
    for (s, deg) in grid.slices.iter().zip(&w.thetas_deg) {
        for (iy, y) in grid.y.iter().enumerate() {
            for (ix, x) in grid.x.iter().enumerate() {
                density.push(vec![f(*deg), f(*x), f(*y), f(s.values[iy][ix])]);
            }
        }
        for ((x1, y1), (x2, y2)) in &s.boundary {
            contour.push(vec![f(*deg), f(*x1), f(*y1), f(*x2), f(*y2)]);
        }
    }
    Ok(vec![density.write(out, "wavefunction_density.dat", header)?, contour.write(out, "wavefunction_boundary.dat", header)?])
}
