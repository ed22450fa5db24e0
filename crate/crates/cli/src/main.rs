//! Command-line driver: solves, studies and verification reports.
//!
//! Exit status: 0 when every requested check passes, 1 when a numerical
//! check fails, 2 on usage errors.

use clap::{Args, Parser, Subcommand};
use curldiv::complexcheck;
use curldiv::elements::{sigma_tn_local, TetEntities, TracelessFrame};
use curldiv::mesh::TetMesh;
use curldiv::quadcurl::{self, SolverOptions};
use curldiv::rng::SplitMix64;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "quadcurl",
    about = "Distributional curl-div finite element toolkit for the quad-curl problem"
)]
struct Cli {
    /// Optional key=value config file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Method order (1..=3).
    #[arg(long)]
    k: Option<usize>,
    /// Gradient order, k-1 (first kind) or k (second kind).
    #[arg(long)]
    l: Option<usize>,
    /// Refinement levels for studies.
    #[arg(long)]
    levels: Option<usize>,
    /// Cube subdivisions per axis for single-mesh commands.
    #[arg(long)]
    n: Option<usize>,
    /// Interior-vertex perturbation amplitude in [0, 0.5).
    #[arg(long)]
    perturb: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Quadrature degree for loads and error norms.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Output directory for CSV/markdown artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative SVD tolerance for rank decisions.
    #[arg(long)]
    tol_rank: Option<f64>,
    /// Relative residual target of direct solves.
    #[arg(long)]
    tol_solve: Option<f64>,
    /// Write assembled operators in `row col value` format.
    #[arg(long, default_value_t = false)]
    dump_matrices: bool,
}

#[derive(Clone, Debug)]
struct Config {
    k: usize,
    l: usize,
    levels: usize,
    n: usize,
    perturb: f64,
    seed: u64,
    quad_degree: usize,
    out: PathBuf,
    tol_rank: f64,
    tol_solve: f64,
    dump_matrices: bool,
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

impl Config {
    fn resolve(common: &Common, file: &Option<PathBuf>) -> Config {
        let mut kv = std::collections::HashMap::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .unwrap_or_else(|e| usage_error(&format!("cannot read config {path:?}: {e}")));
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                match line.split_once('=') {
                    Some((key, val)) => {
                        kv.insert(key.trim().to_string(), val.trim().to_string());
                    }
                    None => usage_error(&format!("bad config line `{line}` (want key=value)")),
                }
            }
        }
        fn from_kv<T: std::str::FromStr>(
            kv: &std::collections::HashMap<String, String>,
            key: &str,
        ) -> Option<T> {
            kv.get(key).map(|s| {
                s.parse::<T>()
                    .unwrap_or_else(|_| usage_error(&format!("bad config value for {key}: {s}")))
            })
        }
        let k = common.k.or(from_kv(&kv, "k")).unwrap_or(1);
        let l = common.l.or(from_kv(&kv, "l")).unwrap_or(k - 1);
        let cfg = Config {
            k,
            l,
            levels: common.levels.or(from_kv(&kv, "levels")).unwrap_or(3),
            n: common.n.or(from_kv(&kv, "n")).unwrap_or(2),
            perturb: common.perturb.or(from_kv(&kv, "perturb")).unwrap_or(0.2),
            seed: common.seed.or(from_kv(&kv, "seed")).unwrap_or(42),
            quad_degree: common
                .quad_degree
                .or(from_kv(&kv, "quad-degree"))
                .unwrap_or(10),
            out: common
                .out
                .clone()
                .or(from_kv::<PathBuf>(&kv, "out"))
                .unwrap_or_else(|| PathBuf::from("out")),
            tol_rank: common.tol_rank.or(from_kv(&kv, "tol-rank")).unwrap_or(1e-8),
            tol_solve: common
                .tol_solve
                .or(from_kv(&kv, "tol-solve"))
                .unwrap_or(1e-10),
            dump_matrices: common.dump_matrices,
        };
        if cfg.k < 1 || cfg.k > 3 {
            usage_error(&format!("k = {} outside the supported range 1..=3", cfg.k));
        }
        if cfg.l + 1 != cfg.k && cfg.l != cfg.k {
            usage_error(&format!("l = {} must be k-1 or k (k = {})", cfg.l, cfg.k));
        }
        if cfg.levels < 1 {
            usage_error("levels must be at least 1");
        }
        if !(0.0..0.5).contains(&cfg.perturb) {
            usage_error("perturbation amplitude must be in [0, 0.5)");
        }
        cfg
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            quad_degree: self.quad_degree,
            solve_tol: self.tol_solve,
            ..Default::default()
        }
    }

    fn build_mesh(&self) -> Arc<TetMesh> {
        let mesh = TetMesh::build_cube_mesh(self.n)
            .unwrap_or_else(|e| usage_error(&e.to_string()))
            .perturb(self.perturb, self.seed)
            .unwrap_or_else(|e| {
                eprintln!("mesh perturbation failed: {e}");
                std::process::exit(1);
            });
        Arc::new(mesh)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve once on a perturbed cube mesh with both methods and check
    /// their agreement and structural invariants.
    Solve(Common),
    /// Refinement study with CSV and markdown tables.
    Converge(Common),
    /// Certify the discrete complex: ranks, commuting identities, Poincaré
    /// constants and the norm equivalence.
    VerifyComplex(Common),
    /// Certify local elements: duality, unisolvence, bubbles.
    CheckElements(CheckElementsArgs),
    /// Solve and post-process, reporting the improved errors.
    Postprocess(Common),
}

#[derive(Args)]
struct CheckElementsArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random shape-regular tets.
    #[arg(long, default_value_t = 100)]
    tets: usize,
}

fn main() -> ExitCode {
    curldiv::install_thread_cap();
    let cli = Cli::parse();
    let ok = match &cli.command {
        Command::Solve(c) => cmd_solve(&Config::resolve(c, &cli.config), false),
        Command::Postprocess(c) => cmd_solve(&Config::resolve(c, &cli.config), true),
        Command::Converge(c) => cmd_converge(&Config::resolve(c, &cli.config)),
        Command::VerifyComplex(c) => cmd_verify_complex(&Config::resolve(c, &cli.config)),
        Command::CheckElements(a) => {
            cmd_check_elements(&Config::resolve(&a.common, &cli.config), a.tets)
        }
    };
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn ensure_out(cfg: &Config) {
    std::fs::create_dir_all(&cfg.out)
        .unwrap_or_else(|e| usage_error(&format!("cannot create {:?}: {e}", cfg.out)));
}

fn cmd_solve(cfg: &Config, with_star: bool) -> bool {
    ensure_out(cfg);
    let exact = quadcurl::manufactured();
    let opts = cfg.solver_options();
    let mesh = cfg.build_mesh();
    println!(
        "mesh: n={} perturb={} seed={} -> {} tets, h={:.4}",
        cfg.n,
        cfg.perturb,
        cfg.seed,
        mesh.tets.len(),
        mesh.mesh_size()
    );
    let hybrid = match quadcurl::solve_hybrid(&mesh, cfg.k, cfg.l, &exact, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("hybrid solve failed: {e}");
            return false;
        }
    };
    let mut ok = true;
    let checks = quadcurl::check_solution(&hybrid);
    println!(
        "hybrid: dofs u/lambda/phi = {}/{}/{}  residual {:.3e}",
        hybrid.dofs_u, hybrid.dofs_lambda, hybrid.dofs_phi, hybrid.residual
    );
    println!(
        "  phi_rel {:.3e}  trace {:.3e}  tn_jump {:.3e}",
        checks.phi_rel, checks.trace_max, checks.tn_jump_rel
    );
    ok &= checks.phi_rel <= 1e-8 && checks.trace_max <= 1e-12 && checks.tn_jump_rel <= 1e-9;

    // Mixed solve and equivalence on meshes small enough for the
    // monolithic system.
    let sigma_dim_estimate = 2 * mesh.faces.len() * (cfg.k) * (cfg.k + 1)
        + mesh.tets.len() * 8 * cfg.k * (cfg.k + 1) * (cfg.k + 2) / 6;
    if sigma_dim_estimate < 60_000 {
        match quadcurl::solve_mixed(&mesh, cfg.k, cfg.l, &exact, &opts) {
            Ok(mixed) => {
                let diff = quadcurl::compare_solutions(&mixed, &hybrid);
                println!(
                    "equivalence mixed vs hybrid: sigma {:.3e}  u {:.3e}  phi {:.3e}",
                    diff.sigma, diff.u, diff.phi
                );
                ok &= diff.sigma <= 1e-9 && diff.u <= 1e-9 && diff.phi <= 1e-9;
            }
            Err(e) => {
                eprintln!("mixed solve failed: {e}");
                ok = false;
            }
        }
    }

    let star = if with_star {
        match quadcurl::postprocess(&hybrid, cfg.k) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("post-processing failed: {e}");
                return false;
            }
        }
    } else {
        None
    };
    let errs = quadcurl::compute_errors(&hybrid, &exact, star.as_ref(), cfg.quad_degree);
    println!("errors:");
    for (name, val) in quadcurl::ErrorNorms::FIELDS.iter().zip(errs.values()) {
        if !with_star && name.contains("star") {
            continue;
        }
        println!("  {name:24} {val:.6e}");
    }
    let report = cfg.out.join(if with_star {
        "postprocess_report.txt"
    } else {
        "solve_report.txt"
    });
    let mut text = String::new();
    for (name, val) in quadcurl::ErrorNorms::FIELDS.iter().zip(errs.values()) {
        text.push_str(&format!("{name} {val:e}\n"));
    }
    std::fs::write(&report, text).ok();
    println!("report written to {report:?}");
    ok
}

fn cmd_converge(cfg: &Config) -> bool {
    ensure_out(cfg);
    let opts = cfg.solver_options();
    let record =
        match quadcurl::convergence_study(cfg.levels, cfg.k, cfg.l, cfg.seed, cfg.perturb, &opts) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("convergence study failed: {e}");
                return false;
            }
        };
    let base = format!("converge_k{}_l{}", cfg.k, cfg.l);
    let csv_path = cfg.out.join(format!("{base}.csv"));
    let md_path = cfg.out.join(format!("{base}.md"));
    let mut csv = Vec::new();
    record.write_csv(&mut csv).unwrap();
    std::fs::write(&csv_path, &csv).unwrap_or_else(|e| usage_error(&e.to_string()));
    let mut md = Vec::new();
    record.write_markdown(&mut md).unwrap();
    std::fs::write(&md_path, &md).unwrap_or_else(|e| usage_error(&e.to_string()));
    println!("{}", String::from_utf8_lossy(&md));
    println!("written: {csv_path:?} {md_path:?}");
    true
}

fn cmd_verify_complex(cfg: &Config) -> bool {
    ensure_out(cfg);
    let mesh = if cfg.perturb > 0.0 {
        cfg.build_mesh()
    } else {
        Arc::new(TetMesh::build_cube_mesh(cfg.n).unwrap_or_else(|e| usage_error(&e.to_string())))
    };
    let mut ok = true;
    let report = match complexcheck::verify_complex(&mesh, cfg.k, cfg.l, cfg.tol_rank) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("verify-complex failed: {e}");
            return false;
        }
    };
    print!("{report}");
    ok &= report.all_pass();

    match complexcheck::verify_commuting(&mesh, cfg.k, cfg.l, 20, cfg.seed) {
        Ok(entries) => {
            for e in &entries {
                println!(
                    "  [{}] {}: {:.3e} (<= {:.3e})",
                    if e.pass { "pass" } else { "FAIL" },
                    e.name,
                    e.value,
                    e.threshold
                );
                ok &= e.pass;
            }
            let mut csv = Vec::new();
            report.write_csv(&mut csv).unwrap();
            for e in &entries {
                csv.extend_from_slice(
                    format!("{},{:e},{:e},{}\n", e.name, e.value, e.threshold, e.pass).as_bytes(),
                );
            }
            let path = cfg.out.join(format!("complex_k{}_l{}.csv", cfg.k, cfg.l));
            std::fs::write(&path, &csv).ok();
            println!("report written to {path:?}");
        }
        Err(e) => {
            eprintln!("verify-commuting failed: {e}");
            ok = false;
        }
    }

    if cfg.dump_matrices {
        // Operator dumps for debugging, coordinate text format.
        use curldiv::assembly::*;
        use curldiv::elements::Family;
        let sigma = FESpace::build(Family::SigmaTn { k: cfg.k - 1 }, mesh.clone(), false).unwrap();
        let v = FESpace::build(
            Family::Nedelec { k: cfg.k, l: cfg.l },
            mesh.clone(),
            true,
        )
        .unwrap();
        let b = assemble_b(&sigma, &v).unwrap();
        let mut buf = Vec::new();
        b.write_coo(&mut buf).unwrap();
        std::fs::write(cfg.out.join("B.coo"), &buf).ok();
    }

    // Poincaré constants over `levels` uniform refinements.
    let mut meshes = vec![Arc::new(
        TetMesh::build_cube_mesh(cfg.n).unwrap_or_else(|e| usage_error(&e.to_string())),
    )];
    for _ in 1..cfg.levels.min(3) {
        let next = meshes.last().unwrap().refine_uniform().unwrap();
        meshes.push(Arc::new(next));
    }
    match complexcheck::poincare_monitor(&meshes, cfg.k, cfg.l) {
        Ok(consts) => {
            for (i, (a, b)) in consts.iter().enumerate() {
                println!("  poincare level {i}: curl {a:.5e}  grad-curl {b:.5e}");
                ok &= *a > 0.0 && *b > 0.0;
            }
            for w in consts.windows(2) {
                let (r1, r2) = (w[1].0 / w[0].0, w[1].1 / w[0].1);
                println!("  ratios: {r1:.3} {r2:.3}");
                ok &= (0.5..=2.0).contains(&r1) && (0.5..=2.0).contains(&r2);
            }
        }
        Err(e) => {
            eprintln!("poincare monitor failed: {e}");
            ok = false;
        }
    }

    match complexcheck::norm_equivalence_monitor(&mesh, cfg.k, cfg.l, 50, cfg.seed) {
        Ok((lo, hi)) => {
            println!("  norm equivalence ratios in [{lo:.3e}, {hi:.3e}]");
            ok &= lo > 1.0 / 50.0 && hi < 50.0;
        }
        Err(e) => {
            eprintln!("norm equivalence failed: {e}");
            ok = false;
        }
    }
    ok
}

fn cmd_check_elements(cfg: &Config, ntets: usize) -> bool {
    let mut rng = SplitMix64::new(cfg.seed);
    let mut ok = true;

    let mut worst_duality = 0.0f64;
    for _ in 0..ntets {
        let ents = random_tet(&mut rng);
        let frame = TracelessFrame::new(&ents.geom);
        worst_duality = worst_duality.max(frame.duality_defect());
    }
    println!("duality defect over {ntets} random tets: {worst_duality:.3e} (<= 1e-13)");
    ok &= worst_duality <= 1e-13;

    let families: Vec<(String, Box<dyn Fn(&TetEntities) -> f64>)> = vec![
        (
            "sigma k=0".into(),
            Box::new(|e| sigma_tn_local(0, e).unwrap().vandermonde_condition(&e.geom)),
        ),
        (
            "sigma k=1".into(),
            Box::new(|e| sigma_tn_local(1, e).unwrap().vandermonde_condition(&e.geom)),
        ),
        (
            "sigma k=2".into(),
            Box::new(|e| sigma_tn_local(2, e).unwrap().vandermonde_condition(&e.geom)),
        ),
    ];
    let mut table: Vec<(String, f64)> = Vec::new();
    for (name, f) in &families {
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let ents = random_tet(&mut rng);
            worst = worst.max(f(&ents));
        }
        table.push((name.clone(), worst));
    }
    use curldiv::elements::{lagrange_local, nedelec_local};
    for (kk, ll) in [(1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (3, 3)] {
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let ents = random_tet(&mut rng);
            worst = worst.max(
                nedelec_local(kk, ll, &ents)
                    .unwrap()
                    .vandermonde_condition(&ents.geom),
            );
        }
        table.push((format!("nedelec ({kk},{ll})"), worst));
    }
    for m in 1..=4 {
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let ents = random_tet(&mut rng);
            worst = worst.max(
                lagrange_local(m, &ents)
                    .unwrap()
                    .vandermonde_condition(&ents.geom),
            );
        }
        table.push((format!("lagrange m={m}"), worst));
    }
    for (name, cond) in &table {
        let pass = *cond < 1e8;
        println!(
            "  [{}] {name}: condition {cond:.3e} (< 1e8)",
            if pass { "pass" } else { "FAIL" }
        );
        ok &= pass;
    }

    // Bubble space: dimension by rank, vanishing tangential-normal trace.
    use curldiv::elements::{bubble_basis, matpoly_rank, tn_trace_norm};
    for k in 1..=2usize {
        let mut worst_trace = 0.0f64;
        let mut rank_ok = true;
        for _ in 0..5 {
            let ents = random_tet(&mut rng);
            let bubbles = bubble_basis(k, &ents.geom);
            rank_ok &= matpoly_rank(&bubbles) == bubbles.len();
            for b in &bubbles {
                worst_trace = worst_trace.max(tn_trace_norm(b, &ents) / (1.0 + b.max_abs()));
            }
        }
        let pass = rank_ok && worst_trace < 1e-12;
        println!(
            "  [{}] bubbles k={k}: independent {rank_ok}, trace {worst_trace:.3e} (< 1e-12)",
            if pass { "pass" } else { "FAIL" }
        );
        ok &= pass;
    }
    ok
}

fn random_tet(rng: &mut SplitMix64) -> TetEntities {
    use curldiv::mesh::{TetGeometry, V3};
    loop {
        let v: [V3; 4] = std::array::from_fn(|_| {
            V3::new(
                rng.uniform(0.0, 1.0),
                rng.uniform(0.0, 1.0),
                rng.uniform(0.0, 1.0),
            )
        });
        let vol = (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0;
        if vol < 0.02 {
            continue;
        }
        let g = TetGeometry::new(v);
        if g.diameter / g.inradius() < 15.0 {
            return TetEntities::from_verts(v);
        }
    }
}
