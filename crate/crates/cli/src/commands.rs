//! Subcommand implementations. Each builds a JSON result, writes it, then reports contract violations.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use bcslab_core::bdg::{bdg_scaling, BdgModel, MAX_BDG_DIM};
use bcslab_core::cert::{apriori_scaling, reference_pair, theorem_certificate, StateFamily, DEFAULT_C1, DEFAULT_C2};
use bcslab_core::decomp::{extract_psi, gradient_bound_gap, phi_tail, residual_xi, split_bounds_report, PairField};
use bcslab_core::entropy::{run_suite, BlockState, InequalityId};
use bcslab_core::foundation::{
    build_radial_grid, gaussian_potential, table_potential, BoxGrid, Potential, QuadratureRule, RadialGrid,
    SampledProfile,
};
use bcslab_core::kernels::{zeta_kernel, KernelMethod};
use bcslab_core::tibcs::{state_from_delta, GapOptions, GapProblem};
use bcslab_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{require, Family, Format, Method, Settings};
use crate::CliError;

const SCHEMA: u32 = 1;
const DEFAULT_H_LIST: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Lower bound on the a-priori exponents checked by `apriori`.
const APRIORI_MIN_EXPONENT: f64 = 0.4;

pub fn dispatch(command: &str, suite: Option<&str>, s: &Settings) -> Result<(), CliError> {
    if s.format == Some(Format::Csv) && command != "gap" {
        return Err(CliError::Usage("field 'format': csv output is only available for gap".into()));
    }
    match command {
        "tc" => tc(s),
        "gap" => gap(s),
        "verify" => verify(suite.unwrap_or_default(), s),
        "kernel" => kernel(s),
        "bdg-scaling" => bdg(s),
        "decompose" => decompose(s),
        "certify" => certify(s),
        "apriori" => apriori(s),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn write_text(s: &Settings, text: &str) -> Result<(), CliError> {
    match &s.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("field 'out': cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Failure(format!("stdout: {e}")))
        }
    }
}

/// Writes {schema, command, inputs, ...result}.
fn emit(s: &Settings, command: &str, result: Map<String, Value>) -> Result<(), CliError> {
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert("command".into(), json!(command));
    // The destination is not an input, so runs differing only in --out produce identical files.
    let inputs = Settings { out: None, ..s.clone() };
    doc.insert("inputs".into(), serde_json::to_value(inputs).unwrap_or(Value::Null));
    doc.extend(result);
    let mut text = serde_json::to_string_pretty(&Value::Object(doc))
        .map_err(|e| CliError::Failure(format!("serialization: {e}")))?;
    text.push('\n');
    write_text(s, &text)
}

fn potential(s: &Settings) -> Result<Potential, CliError> {
    match s.kind.as_deref().unwrap_or("gaussian-well") {
        "gaussian-well" => Ok(gaussian_potential(s.depth.unwrap_or(-5.0), s.width.unwrap_or(1.0))?),
        "user-table" => {
            let table = s.table.clone().ok_or_else(|| {
                CliError::Usage("field 'table': required for kind user-table (config file only)".into())
            })?;
            Ok(table_potential(table)?)
        }
        other => Err(CliError::Usage(format!("field 'kind': unknown potential kind '{other}'"))),
    }
}

fn radial_grid(s: &Settings) -> Result<RadialGrid, CliError> {
    Ok(build_radial_grid(s.pmax.unwrap_or(12.0), s.count.unwrap_or(256), QuadratureRule::default())?)
}

fn gap_options(s: &Settings, tc: Option<f64>) -> GapOptions {
    GapOptions {
        damping: s.damping.unwrap_or(0.5),
        tol: s.tol.unwrap_or(1e-10),
        maxiter: s.maxiter.unwrap_or(200_000),
        anderson: Some(s.anderson.unwrap_or(5)).filter(|d| *d > 0),
        tc,
        ..Default::default()
    }
}

/// Tc of the problem, or None when no sign change of the lowest eigenvalue is found.
fn critical_temperature(problem: &GapProblem, tol: f64) -> Result<Option<f64>, CliError> {
    match problem.tc_bracket() {
        Ok(b) => Ok(Some(problem.critical_temperature(b, tol)?)),
        Err(Error::Bracket { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// T from --T or --beta, defaulting to 0.9·Tc.
fn temperature(s: &Settings, tc: Option<f64>) -> Result<f64, CliError> {
    match (s.t, s.beta) {
        (Some(t), Some(b)) => {
            require((t * b - 1.0).abs() <= 1e-12, "beta", "inconsistent with T (beta must equal 1/T)")?;
            Ok(t)
        }
        (Some(t), None) => Ok(t),
        (None, Some(b)) => Ok(1.0 / b),
        (None, None) => tc
            .map(|tc| 0.9 * tc)
            .ok_or_else(|| CliError::Usage("field 'T': required when the model has no critical temperature".into())),
    }
}

/// Translation-invariant reference solution (Δ̂₀, α̂₀) at the run temperature.
struct Reference {
    grid: RadialGrid,
    v: Potential,
    mu: f64,
    tc: Option<f64>,
    t: f64,
    delta: Vec<f64>,
    alpha: Vec<f64>,
}

impl Reference {
    fn build(s: &Settings) -> Result<Self, CliError> {
        let v = potential(s)?;
        let grid = radial_grid(s)?;
        let mu = s.mu.unwrap_or(1.0);
        let problem = GapProblem::new(&v, mu, &grid)?;
        let tc = critical_temperature(&problem, 1e-10)?;
        let t = temperature(s, tc)?;
        let sol = problem.solve(t, &gap_options(s, tc))?;
        if !sol.converged {
            return Err(CliError::Failure(format!(
                "reference gap equation did not converge (residual {:e})",
                sol.residual
            )));
        }
        let alpha = state_from_delta(&grid, &sol.delta, t, mu)?.alpha;
        Ok(Reference { grid, v, mu, tc, t, delta: sol.delta, alpha })
    }

    fn delta(&self) -> SampledProfile<'_> {
        SampledProfile::new(&self.grid, &self.delta).expect("solution lives on the grid")
    }

    fn alpha0(&self) -> SampledProfile<'_> {
        SampledProfile::new(&self.grid, &self.alpha).expect("solution lives on the grid")
    }

    fn describe(&self, m: &mut Map<String, Value>) {
        m.insert("T".into(), json!(self.t));
        m.insert("Tc".into(), json!(self.tc));
    }
}

fn external_potential(s: &Settings) -> Result<Potential, CliError> {
    Ok(gaussian_potential(s.w_depth.unwrap_or(1.0), s.w_width.unwrap_or(1.0))?)
}

fn h_list(s: &Settings) -> Vec<f64> {
    s.h_list.clone().unwrap_or_else(|| DEFAULT_H_LIST.to_vec())
}

fn check_bdg_cap(n: usize, dims: usize) -> Result<(), CliError> {
    let dim = (n as u128).checked_pow(dims as u32).unwrap_or(u128::MAX).saturating_mul(2);
    require(
        dim <= MAX_BDG_DIM as u128,
        "n",
        &format!("BdG dimension 2·n^dims = {dim} exceeds the cap {MAX_BDG_DIM}"),
    )
}

/// Box from the settings with the given defaults; h defaults to the first entry of the h list.
fn box_grid(s: &Settings, length: f64, n: usize, dims: usize) -> Result<BoxGrid, CliError> {
    let (n, dims) = (s.n.unwrap_or(n), s.dims.unwrap_or(dims));
    require((1..=3).contains(&dims), "dims", "must be 1, 2 or 3")?;
    check_bdg_cap(n, dims)?;
    let h = s.h.unwrap_or(h_list(s)[0]);
    Ok(BoxGrid::new(s.length.unwrap_or(length), n, dims, h)?)
}

fn tc(s: &Settings) -> Result<(), CliError> {
    let v = potential(s)?;
    let grid = radial_grid(s)?;
    let problem = GapProblem::new(&v, s.mu.unwrap_or(1.0), &grid)?;
    let tol = s.tol.unwrap_or(1e-10);
    let tc = critical_temperature(&problem, tol)?;
    let mut m = Map::new();
    m.insert("Tc".into(), json!(tc));
    m.insert("tolerance".into(), json!(tol));
    emit(s, "tc", m)
}

fn gap(s: &Settings) -> Result<(), CliError> {
    let t = s.t.ok_or_else(|| CliError::Usage("field 'T': required for gap".into()))?;
    let v = potential(s)?;
    let grid = radial_grid(s)?;
    let mu = s.mu.unwrap_or(1.0);
    let problem = GapProblem::new(&v, mu, &grid)?;
    let tc = critical_temperature(&problem, 1e-10)?;
    let sol = problem.solve(t, &gap_options(s, tc))?;
    match s.format.unwrap_or(Format::Json) {
        Format::Csv => write_text(s, &sol.to_csv(&grid, mu)?)?,
        Format::Json => {
            let mut m = to_map(&sol.to_json(&grid));
            m.insert("normal".into(), json!(sol.is_normal()));
            emit(s, "gap", m)?;
        }
    }
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "gap iteration did not converge after {} iterations (residual {:e})",
            sol.iterations, sol.residual
        )))
    }
}

fn verify(suite: &str, s: &Settings) -> Result<(), CliError> {
    let id: InequalityId = suite.parse()?;
    let tol = s.tol.unwrap_or(1e-10);
    let report = run_suite(id, s.samples.unwrap_or(100), s.dim.unwrap_or(4), s.seed.unwrap_or(1))?;
    let passed = report.min_slack >= -tol;
    let mut m = to_map(&report);
    m.insert("tolerance".into(), json!(tol));
    m.insert("passed".into(), json!(passed));
    emit(s, "verify", m)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "inequality violated: min slack {:e} at sample {}",
            report.min_slack, report.argmin_seed
        )))
    }
}

fn kernel(s: &Settings) -> Result<(), CliError> {
    let ep = s.ep.ok_or_else(|| CliError::Usage("field 'ep': required for kernel".into()))?;
    let eq = s.eq.ok_or_else(|| CliError::Usage("field 'eq': required for kernel".into()))?;
    let t = s.t.ok_or_else(|| CliError::Usage("field 'T': required for kernel".into()))?;
    let method = match s.method.unwrap_or(Method::Closed) {
        Method::Closed => KernelMethod::ClosedForm,
        Method::Series => KernelMethod::Series { terms: s.terms.unwrap_or(10_000) },
    };
    let k = zeta_kernel(ep, eq, t, method)?;
    let mut m = Map::new();
    m.insert("method".into(), serde_json::to_value(k.method).unwrap_or(Value::Null));
    m.insert("value".into(), json!(k.value));
    m.insert("tail".into(), json!(k.tail_bound));
    emit(s, "kernel", m)
}

fn bdg(s: &Settings) -> Result<(), CliError> {
    let bx = box_grid(s, 8.0, 8, 3)?;
    let hs = h_list(s);
    let w = external_potential(s)?;
    let r = Reference::build(s)?;
    let model = BdgModel { w: &w, delta: r.delta(), mu: r.mu, t: r.t };
    let scaling = bdg_scaling(&hs, &bx, &model)?;
    let mut m = to_map(&scaling);
    r.describe(&mut m);
    emit(s, "bdg-scaling", m)
}

fn decompose(s: &Settings) -> Result<(), CliError> {
    let path = s.field.as_ref().ok_or_else(|| CliError::Usage("field 'field': required for decompose".into()))?;
    let length = s.length.ok_or_else(|| CliError::Usage("field 'L': required for decompose".into()))?;
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("field 'field': cannot open {}: {e}", path.display())))?;
    let alpha = PairField::read_binary(BufReader::new(file), length)?;
    let bx = *alpha.grid();
    let h = bx.h;
    let r_default = h.powf(-0.5).min(bx.nyquist());
    let cut = s.r.unwrap_or(r_default);
    require(
        cut <= bx.nyquist(),
        "r",
        &format!("{cut} exceeds the box Nyquist momentum {}", bx.nyquist()),
    )?;
    let split_s = s.s.unwrap_or(cut / 2.0);
    let r = Reference::build(s)?;
    let psi = extract_psi(&alpha, r.alpha0(), h)?;
    let xi = residual_xi(&alpha, r.alpha0(), &psi, h)?;
    let mut m = Map::new();
    m.insert("h".into(), json!(h));
    m.insert("field_l2".into(), json!(alpha.l2_norm()));
    m.insert("psi_l2".into(), json!(psi.l2_norm()));
    m.insert("xi_l2".into(), json!(xi.l2_norm()));
    m.insert("gradient_bound_gap".into(), json!(gradient_bound_gap(&alpha, r.alpha0(), h)?));
    m.insert("split".into(), Value::Object(to_map(&split_bounds_report(&psi, split_s)?)));
    m.insert("phi_tail".into(), Value::Object(to_map(&phi_tail(&psi, cut)?)));
    r.describe(&mut m);
    emit(s, "decompose", m)
}

/// A BCS state on a box, as read and written by `certify`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    schema: u32,
    #[serde(rename = "L")]
    length: f64,
    n: usize,
    dims: usize,
    h: f64,
    /// Row-major 2M×2M entries as [re, im].
    matrix: Vec<[f64; 2]>,
}

fn read_state(path: &Path) -> Result<(BoxGrid, BlockState), CliError> {
    let usage = |m: String| CliError::Usage(format!("field 'state': {}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| usage(e.to_string()))?;
    let f: StateFile = serde_json::from_str(&text).map_err(|e| usage(e.to_string()))?;
    if f.schema != SCHEMA {
        return Err(usage(format!("schema {} is not {SCHEMA}", f.schema)));
    }
    check_bdg_cap(f.n, f.dims)?;
    let bx = BoxGrid::new(f.length, f.n, f.dims, f.h)?;
    let dim = 2 * bx.size();
    if f.matrix.len() != dim * dim {
        return Err(usage(format!("matrix has {} entries, expected {}", f.matrix.len(), dim * dim)));
    }
    let m = DMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = f.matrix[r * dim + c];
        Complex64::new(re, im)
    });
    Ok((bx, BlockState::new(m)?))
}

fn write_state(path: &Path, bx: &BoxGrid, g: &BlockState) -> Result<(), CliError> {
    let m = g.matrix();
    let dim = m.nrows();
    let matrix = (0..dim * dim).map(|k| m[(k / dim, k % dim)]).map(|z| [z.re, z.im]).collect();
    let f = StateFile { schema: SCHEMA, length: bx.length, n: bx.n, dims: bx.dims, h: bx.h, matrix };
    let file = File::create(path)
        .map_err(|e| CliError::Usage(format!("field 'save_state': cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &f)
        .map_err(|e| CliError::Failure(format!("writing state: {e}")))?;
    w.flush().map_err(|e| CliError::Failure(format!("writing state: {e}")))
}

/// Flags that describe the box must agree with a loaded state.
fn check_against_state(s: &Settings, bx: &BoxGrid) -> Result<(), CliError> {
    let same = |a: Option<f64>, b: f64| a.is_none_or(|a| (a - b).abs() <= 1e-12 * b.abs());
    require(same(s.length, bx.length), "L", "differs from the state file")?;
    require(s.n.is_none_or(|n| n == bx.n), "n", "differs from the state file")?;
    require(s.dims.is_none_or(|d| d == bx.dims), "dims", "differs from the state file")?;
    require(same(s.h, bx.h), "h", "differs from the state file")
}

fn certify(s: &Settings) -> Result<(), CliError> {
    let loaded = match &s.state {
        Some(p) => {
            let (bx, g) = read_state(p)?;
            check_against_state(s, &bx)?;
            Some((bx, g))
        }
        None => None,
    };
    let bx = match &loaded {
        Some((bx, _)) => *bx,
        None => box_grid(s, 6.0, 6, 3)?,
    };
    let w = external_potential(s)?;
    let r = Reference::build(s)?;
    let model = BdgModel { w: &w, delta: r.delta(), mu: r.mu, t: r.t };
    let (_, g0w) = reference_pair(&bx, &model, bx.h)?;
    let g = match &loaded {
        Some((_, g)) => {
            require(g.n() == g0w.n(), "state", "dimension does not match the box")?;
            g
        }
        None => &g0w,
    };
    if let Some(path) = &s.save_state {
        write_state(path, &bx, g)?;
    }
    let (c1, c2) = (s.c1.unwrap_or(DEFAULT_C1), s.c2.unwrap_or(DEFAULT_C2));
    let cert = theorem_certificate(g, &g0w, &r.v, bx.h, 1.0 / r.t, &bx, r.alpha0(), c1, c2)?;
    let mut m = to_map(&cert);
    m.insert("beta".into(), json!(1.0 / r.t));
    r.describe(&mut m);
    emit(s, "certify", m)?;
    match cert.bound_holds {
        Some(false) => Err(CliError::Failure(format!(
            "lower bound violated: F = {:e} < rhs = {:e}",
            cert.f_value, cert.rhs
        ))),
        _ => Ok(()),
    }
}

fn apriori(s: &Settings) -> Result<(), CliError> {
    let bx = box_grid(s, 6.0, 6, 3)?;
    let hs = h_list(s);
    let family = match s.family.unwrap_or(Family::Perturbed) {
        Family::Reference => StateFamily::Reference,
        Family::Perturbed => StateFamily::Perturbed { amplitude: s.amplitude.unwrap_or(1.0) },
    };
    let w = external_potential(s)?;
    let r = Reference::build(s)?;
    let model = BdgModel { w: &w, delta: r.delta(), mu: r.mu, t: r.t };
    let scaling = apriori_scaling(&hs, family, &bx, &model, &r.v, r.alpha0())?;
    let checked = matches!(family, StateFamily::Perturbed { .. });
    let meets = scaling.meets(APRIORI_MIN_EXPONENT);
    let mut m = to_map(&scaling);
    m.insert("min_exponent".into(), json!(APRIORI_MIN_EXPONENT));
    m.insert("meets".into(), json!(meets));
    r.describe(&mut m);
    emit(s, "apriori", m)?;
    if checked && !meets {
        return Err(CliError::Failure(format!(
            "exponents below {APRIORI_MIN_EXPONENT}: xi {:.4}, q {:?}",
            scaling.xi_exponent, scaling.q_exponent
        )));
    }
    Ok(())
}
