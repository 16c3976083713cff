//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p nematic-core --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nematic_core::certificates::{gronwall_accumulate, relative_energy, transfer_state, ReferenceSample};
use nematic_core::experiments::{experiment_catalogue, ExperimentConfig};
use nematic_core::fem::{assemble_isotropic_stiffness, assemble_stiffness_aniso};
use nematic_core::linalg::audit_m_matrix;
use nematic_core::mesh::{build_structured_mesh, BoxDomain, Pattern, TriMesh};
use nematic_core::scheme::{charge_matrix, effective_field, run, solve_potential, ChargeInputs, RunError, Trajectory};
use nematic_core::state::{DiscreteState, PhysParams};
use nematic_core::Vec3;

const NORM_TOL: f64 = 1e-8;
const ENERGY_TOL: f64 = 1e-8;
const BOUND_TOL: f64 = 1e-10;
const CHARGE_TOL: f64 = 1e-10;
const DIVERGENCE_TOL: f64 = 1e-12;
const POTENTIAL_RATE: f64 = 1.8;
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_TRIALS: usize = 100;
const GRONWALL_TRIALS: usize = 1000;
const UNIFORMIZATION: f64 = 0.05;

struct Outcome {
    pass: bool,
    details: String,
}

impl Outcome {
    fn new(pass: bool, details: String) -> Self {
        Outcome { pass, details }
    }
}

struct Run {
    label: String,
    mesh: TriMesh,
    params: PhysParams,
    /// Complete trajectory, or everything computed before a failure.
    traj: Trajectory,
    error: Option<String>,
}

impl Run {
    /// Failure outcome for criteria that need the complete run.
    fn incomplete(&self) -> Option<Outcome> {
        self.error
            .as_ref()
            .map(|e| Outcome::new(false, format!("{}: run failed after {} steps: {e}", self.label, self.traj.certificates.len())))
    }
}

fn simulate(label: &str, cfg: &ExperimentConfig, n_steps: usize) -> Run {
    let mesh = cfg.build_mesh().expect("mesh");
    let (traj, error) = match run(&mesh, &cfg.params, &cfg.solver, &cfg.initial_data(), n_steps) {
        Ok(t) => (t, None),
        Err(RunError::Step { partial, source, step }) => (*partial, Some(format!("step {step}: {source}"))),
        Err(e) => panic!("{label}: initialization failed: {e}"),
    };
    Run {
        label: label.to_string(),
        mesh,
        params: cfg.params.clone(),
        traj,
        error,
    }
}

fn preset(name: &str) -> ExperimentConfig {
    experiment_catalogue(name).expect("catalogue preset")
}

fn defect_flow(n: usize, k: f64) -> ExperimentConfig {
    let mut cfg = preset("defect_flow");
    cfg.n_per_side = n;
    cfg.params.k = k;
    cfg
}

fn director_dirichlet(mesh: &TriMesh, d: &[Vec3]) -> f64 {
    let k = assemble_isotropic_stiffness(mesh);
    (0..3)
        .map(|c| {
            let x: Vec<f64> = d.iter().map(|v| v[c]).collect();
            k.mul_vec(&x).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

/// Node maximizing `|d_z|` among those accepted by `keep`.
fn defect_location(mesh: &TriMesh, state: &DiscreteState, keep: impl Fn(&[f64; 3]) -> bool) -> Option<(usize, f64)> {
    (0..mesh.n_nodes())
        .filter(|&z| keep(&mesh.nodes[z]))
        .map(|z| (z, state.director.values[z].z.abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sphere_constraint(r: &Run) -> Outcome {
    if let Some(o) = r.incomplete() {
        return o;
    }
    let worst = r
        .traj
        .states
        .iter()
        .map(|s| s.director.max_norm_deviation().0)
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= NORM_TOL,
        format!("{}: max ||d|-1|| = {worst:.3e} over {} steps", r.label, r.traj.certificates.len()),
    )
}

fn energy_law(r: &Run) -> Outcome {
    if let Some(o) = r.incomplete() {
        return o;
    }
    let e0 = r.traj.certificates.first().map_or(0.0, |c| c.energy_before);
    let tol = ENERGY_TOL * e0.max(1.0);
    let worst_residual = r.traj.certificates.iter().map(|c| c.energy_residual().abs()).fold(0.0, f64::max);
    let worst_increase = r
        .traj
        .certificates
        .iter()
        .map(|c| c.energy_after - c.energy_before)
        .fold(f64::NEG_INFINITY, f64::max);
    let certified = r.traj.certificates.iter().all(|c| c.energy_law.is_some());
    Outcome::new(
        certified && worst_residual <= tol && worst_increase <= tol,
        format!(
            "{}: stabilization {}, max |residual| = {worst_residual:.3e}, max increase = {worst_increase:.3e}, tol = {tol:.3e}",
            r.label,
            if r.params.stabilization_on { "on" } else { "off" }
        ),
    )
}

fn bounds(r: &Run) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &r.traj.states {
        for v in s.n_plus.values.iter().chain(&s.n_minus.values) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (lo, hi)
}

/// M-matrix audits of both charge matrices assembled from the initial state.
fn initial_audits(r: &Run) -> (bool, bool, f64) {
    let s = &r.traj.states[0];
    let p = &r.params;
    let k_eps = assemble_stiffness_aniso(&r.mesh, &s.director.values, p.eps_perp, p.eps_a, p.mu_phi);
    let field = effective_field(&r.mesh, &s.phi.values, &p.applied_field.at(s.t));
    let inputs = ChargeInputs {
        velocity: &s.velocity,
        director: &s.director.values,
        field: &field,
        densities: (&s.n_plus.values, &s.n_minus.values),
        gamma: p.truncation_gamma(&r.mesh),
    };
    let audit = |sign: f64| {
        let b = charge_matrix(&r.mesh, p, &k_eps, &inputs, sign).transpose();
        audit_m_matrix(&b, 1e-12 * b.max_abs())
    };
    let (ap, am) = (audit(1.0), audit(-1.0));
    (ap.pass, am.pass, ap.max_offdiag.max(am.max_offdiag))
}

fn maximum_principle(on: &Run, off: &Run) -> Outcome {
    let audits: Vec<bool> = on
        .traj
        .certificates
        .iter()
        .flat_map(|c| {
            let (p, m) = c.m_matrix_pass();
            [p.unwrap_or(false), m.unwrap_or(false)]
        })
        .collect();
    let failed = audits.iter().filter(|&&p| !p).count();
    let worst_off_diag = on
        .traj
        .certificates
        .iter()
        .flat_map(|c| [&c.m_matrix_plus, &c.m_matrix_minus])
        .flatten()
        .map(|a| a.max_offdiag)
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = bounds(on);
    let in_bounds = lo >= -BOUND_TOL && hi <= 1.0 + BOUND_TOL;
    let (lo_off, hi_off) = bounds(off);
    let (ip, im, ioff) = initial_audits(on);
    let status = |r: &Run| match &r.error {
        Some(e) => format!("run failed after {} steps ({e})", r.traj.certificates.len()),
        None => format!("{} steps", r.traj.certificates.len()),
    };
    Outcome::new(
        on.error.is_none() && failed == 0 && in_bounds && ip && im,
        format!(
            "{}: k = {:.3e}, initial B+/B- audits {}/{} (max off-diagonal {ioff:.3e}), {}, {failed}/{} step audits failed (max off-diagonal {worst_off_diag:.3e}), n in [{lo:.3e}, {hi:.6}]; \
             stabilization off: {}, n in [{lo_off:.3e}, {hi_off:.6}]",
            on.label,
            on.params.k,
            if ip { "pass" } else { "fail" },
            if im { "pass" } else { "fail" },
            status(on),
            audits.len(),
            status(off)
        ),
    )
}

fn charge_conservation(runs: &[&Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    for r in runs {
        let (p0, m0) = r.traj.states[0].charge_masses(&r.mesh);
        for s in &r.traj.states {
            let (p, m) = s.charge_masses(&r.mesh);
            for (a, a0) in [(p, p0), (m, m0)] {
                let rel = if a0 == 0.0 { (a - a0).abs() } else { (a - a0).abs() / a0.abs() };
                if rel > worst {
                    worst = rel;
                    worst_label = r.label.clone();
                }
            }
        }
    }
    Outcome::new(
        worst <= CHARGE_TOL,
        format!("{} runs, worst relative mass change {worst:.3e} ({worst_label})", runs.len()),
    )
}

fn divergence(runs: &[&Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut steps = 0;
    for r in runs {
        for c in &r.traj.certificates {
            worst = worst.max(c.divergence_norm);
            steps += 1;
        }
    }
    Outcome::new(worst <= DIVERGENCE_TOL, format!("{steps} steps, max |(div v, q)| = {worst:.3e}"))
}

fn potential_convergence() -> Outcome {
    let mut params = PhysParams::defaults(2);
    params.eps_perp = 1.0;
    params.eps_a = 0.0;
    params.mu_phi = 1.0;
    let exact = |x: &[f64; 3]| (PI * x[0]).cos() * (PI * x[1]).cos();
    let mut errors = Vec::new();
    for n in [8usize, 16, 32] {
        let mesh = build_structured_mesh(n, &BoxDomain::unit(2), Pattern::Crisscross).unwrap();
        let d = vec![Vec3::z(); mesh.n_nodes()];
        let np: Vec<f64> = mesh.nodes.iter().map(|x| 2.0 * PI * PI * exact(x)).collect();
        let nm = vec![0.0; mesh.n_nodes()];
        let phi = solve_potential(&mesh, &params, &d, &np, &nm, None).expect("potential solve");
        errors.push(common::l2_error(&mesh, &phi, exact));
    }
    let rates: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Outcome::new(
        rates.iter().all(|&r| r >= POTENTIAL_RATE),
        format!("L2 errors [{}], rates {rates:.3?}", sci(&errors)),
    )
}

fn assembly_oracle() -> Outcome {
    let mut worst: Vec<(String, f64)> = Vec::new();
    for dim in [2usize, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + dim as u64);
        for _ in 0..ORACLE_TRIALS {
            for (name, err) in common::assembly_discrepancies(dim, &mut rng) {
                let key = format!("{dim}d {name}");
                match worst.iter_mut().find(|(n, _)| *n == key) {
                    Some(w) => w.1 = w.1.max(err),
                    None => worst.push((key, err)),
                }
            }
        }
    }
    let (name, err) = worst.iter().max_by(|a, b| a.1.total_cmp(&b.1)).cloned().unwrap();
    Outcome::new(
        err <= ORACLE_TOL,
        format!("{} operators x {ORACLE_TRIALS} trials per dimension, worst {err:.3e} ({name})", worst.len()),
    )
}

fn self_convergence(runs: &[Run]) -> Outcome {
    if let Some(o) = runs.iter().find_map(Run::incomplete) {
        return o;
    }
    let finest = runs.last().unwrap();
    let reference = ReferenceSample::from_state(finest.traj.last());
    let mut rs = Vec::new();
    for r in &runs[..runs.len() - 1] {
        let moved = transfer_state(r.traj.last(), &r.mesh, &finest.mesh).expect("nested meshes");
        rs.push(relative_energy(&moved, &reference, &finest.mesh, &finest.params));
    }
    Outcome::new(
        rs.windows(2).all(|w| w[1] < w[0]),
        format!("R(T) of the coarse runs against the finest: [{}]", sci(&rs)),
    )
}

fn gronwall() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut verified = 0;
    let mut caught = 0;
    for _ in 0..GRONWALL_TRIALS {
        let n = rng.gen_range(2..40);
        let k = rng.gen_range(1e-3..0.1);
        let mut y = vec![rng.gen_range(0.0..2.0)];
        let mut f = vec![0.0];
        let mut g1 = vec![0.0];
        let mut g2 = vec![0.0];
        for j in 1..n {
            let a = rng.gen_range(0.0..0.9 / k);
            let b = rng.gen_range(0.0..5.0);
            // Forcing and slack stay below the budget so y remains nonnegative.
            let budget = (1.0 + k * b) * y[j - 1] / k;
            let fj = rng.gen_range(0.0..=0.5 * budget);
            let sj = rng.gen_range(0.0..=0.5 * budget);
            y.push(((1.0 + k * b) * y[j - 1] - k * fj - k * sj) / (1.0 - k * a));
            f.push(fj);
            g1.push(a);
            g2.push(b);
        }
        let mut phi: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.0..1.0)).collect();
        phi.sort_by(|a, b| b.total_cmp(a));
        phi[n] = 0.0;
        let r = gronwall_accumulate(&y, &f, &g1, &g2, &phi, k).unwrap();
        if r.verified {
            verified += 1;
        }
        // Raise y_j past its slack in the hypothesis.
        let j = rng.gen_range(1..n);
        let slack = g1[j] * y[j] + g2[j] * y[j - 1] - (y[j] - y[j - 1]) / k - f[j];
        let mut bad = y.clone();
        bad[j] += 2.0 * k * (slack + 1.0) / (1.0 - k * g1[j]);
        let r = gronwall_accumulate(&bad, &f, &g1, &g2, &phi, k).unwrap();
        if !r.verified {
            caught += 1;
        }
    }
    Outcome::new(
        verified == GRONWALL_TRIALS && caught == GRONWALL_TRIALS,
        format!("{verified}/{GRONWALL_TRIALS} admissible verified, {caught}/{GRONWALL_TRIALS} perturbed rejected"),
    )
}

fn qualitative(defects: &Run, rotating: &Run, t_rotation: f64) -> Outcome {
    if let Some(o) = defects.incomplete().or_else(|| rotating.incomplete()) {
        return o;
    }
    // Defects: track the |d_z| maximum in each half while it is pronounced.
    let mesh = &defects.mesh;
    let mut separations = Vec::new();
    for s in &defects.traj.states {
        let left = defect_location(mesh, s, |x| x[0] < 0.0);
        let right = defect_location(mesh, s, |x| x[0] > 0.0);
        match (left, right) {
            (Some((l, a)), Some((r, b))) if a >= 0.5 && b >= 0.5 => {
                separations.push(dist(&mesh.nodes[l], &mesh.nodes[r]));
            }
            _ => break,
        }
    }
    let approach = separations.len() > 1 && separations.last() < separations.first();
    let g0 = director_dirichlet(mesh, &defects.traj.states[0].director.values);
    let g1 = director_dirichlet(mesh, &defects.traj.last().director.values);
    let uniform = g1 < UNIFORMIZATION * g0;

    // Rotation: follow the defect starting in x > 0 with a local search.
    let mesh = &rotating.mesh;
    let s0 = &rotating.traj.states[0];
    let (mut z, _) = defect_location(mesh, s0, |x| x[0] > 0.0).unwrap();
    let angle_of = |z: usize| mesh.nodes[z][1].atan2(mesh.nodes[z][0]);
    let mut angle = angle_of(z);
    let start = angle;
    let mut max_turn = 0.0f64;
    let radius = 0.15;
    for s in rotating.traj.states.iter().skip(1) {
        if s.t > t_rotation + 1e-12 {
            break;
        }
        let here = mesh.nodes[z];
        let (next, _) = defect_location(mesh, s, |x| dist(x, &here) <= radius).unwrap();
        let mut delta = angle_of(next) - angle_of(z);
        if delta > PI {
            delta -= 2.0 * PI;
        } else if delta < -PI {
            delta += 2.0 * PI;
        }
        angle += delta;
        z = next;
        max_turn = max_turn.max((angle - start).abs());
    }
    let rotates = max_turn > PI / 4.0;
    Outcome::new(
        approach && uniform && rotates,
        format!(
            "separation {:.3} -> {:.3} over {} tracked states; |grad d|^2 {g0:.3} -> {g1:.3} (ratio {:.3}); \
             rotation {max_turn:.3} rad by t={t_rotation}",
            separations.first().copied().unwrap_or(f64::NAN),
            separations.last().copied().unwrap_or(f64::NAN),
            separations.len(),
            g1 / g0
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("criterion {id} ({name}): {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.details);
        results.push((id, name, o));
    };

    // Defect flow at n=16, k=1e-3, 40 steps, stabilization off.
    let mut cfg = defect_flow(16, 1e-3);
    cfg.params.stabilization_on = false;
    let base = simulate("defect flow n=16 k=1e-3", &cfg, 40);
    report(1, "sphere constraint", sphere_constraint(&base));
    report(2, "discrete energy law", energy_law(&base));

    let mut cfg = preset("anisotropic_diffusion");
    cfg.set_dim(2);
    cfg.n_per_side = 16;
    cfg.pattern = Pattern::Crisscross;
    let h = cfg.build_mesh().unwrap().h;
    cfg.params.k = 0.5 * h.powf(cfg.dim as f64 / 2.0);
    cfg.params.stabilization_on = true;
    let steps = cfg.params.n_steps();
    let aniso_on = simulate("2-d anisotropic diffusion, stabilization on", &cfg, steps);
    cfg.params.stabilization_on = false;
    let aniso_off = simulate("2-d anisotropic diffusion, stabilization off", &cfg, steps);
    report(3, "maximum principle and M-matrix", maximum_principle(&aniso_on, &aniso_off));

    let mut cfg = preset("applied_field");
    cfg.n_per_side = 4;
    let field3d = simulate("3-d applied field n=4", &cfg, 5);

    let levels = [(8usize, 2e-3), (16, 1e-3), (32, 5e-4)];
    let convergence: Vec<Run> = levels
        .iter()
        .map(|&(n, k)| {
            let cfg = defect_flow(n, k);
            simulate(&format!("defect flow n={n} k={k}"), &cfg, (0.02 / k).round() as usize)
        })
        .collect();

    let cfg = preset("defect_flow");
    let full_defects = simulate("defect flow preset", &cfg, cfg.params.n_steps());
    let t_rotation = 0.15;
    let cfg = preset("velocity_flow");
    let rotating = simulate("velocity flow preset", &cfg, (t_rotation / cfg.params.k).round() as usize);

    let mut all: Vec<&Run> = vec![&base, &aniso_on, &aniso_off, &field3d, &full_defects, &rotating];
    all.extend(convergence.iter());
    report(4, "charge conservation", charge_conservation(&all));
    report(5, "discrete divergence", divergence(&all));
    report(6, "potential convergence rate", potential_convergence());
    report(7, "assembly oracle", assembly_oracle());
    report(8, "self-convergence in relative energy", self_convergence(&convergence));
    report(9, "Gronwall accumulation", gronwall());
    report(10, "qualitative defect dynamics", qualitative(&full_defects, &rotating, t_rotation));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s{}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
