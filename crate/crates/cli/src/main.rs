use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use wforge_core::lemma::{run_lemma, LemmaConfig, RunStatus, Status};
use wforge_core::planar::PlanarRegion;
use wforge_core::report::{
    self, mesh_from_samples, sample_grid, to_csv, to_obj, Channel, LemmaLedgerFile, ReportError, RunManifest,
};
use wforge_core::theorem::{run_theorem, TheoremConfig};

const EXIT_INVALID: u8 = 4;

#[derive(Parser)]
#[command(name = "wforge", version, about = "Construct and verify minimal immersions from Weierstrass data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lemma on a config and write its ledger.
    Lemma {
        #[arg(long)]
        config: PathBuf,
        /// Also write OBJ meshes of X and Y over Int Q.
        #[arg(long)]
        mesh: bool,
        #[arg(long, default_value = "wforge-out")]
        out: PathBuf,
    },
    /// Run the stage recursion and write the stage archive.
    Theorem {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stages: usize,
        #[arg(long, default_value = "wforge-out")]
        out: PathBuf,
    },
    /// Export an archived field over a region as OBJ and CSV.
    Export {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        resolution: usize,
        #[arg(long, default_value = "wforge-out")]
        out: PathBuf,
    },
}

/// Seed from `WFORGE_SEED`, if set and valid.
fn env_seed() -> Result<Option<u64>, String> {
    parse_seed(std::env::var("WFORGE_SEED").ok())
}

fn parse_seed(v: Option<String>) -> Result<Option<u64>, String> {
    match v {
        Some(v) => v.trim().parse().map(Some).map_err(|_| format!("WFORGE_SEED is not an unsigned integer: {v:?}")),
        None => Ok(None),
    }
}

fn fail(msg: impl std::fmt::Display, code: u8) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn manifest(command: &str, config: Option<&Path>, seed: u64, started: Instant, outputs: &[PathBuf], exit_code: i32) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        config_path: config.map(|p| p.display().to_string()),
        rng_seed: seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        exit_code,
    }
}

fn write_manifest(out: &Path, m: &RunManifest) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(m)?;
    let p = out.join("manifest.json");
    fs::write(&p, text + "\n").map_err(|source| ReportError::Io { path: p, source })
}

fn create_out(out: &Path) -> Result<(), u8> {
    fs::create_dir_all(out).map_err(|e| fail(format!("cannot create {}: {e}", out.display()), EXIT_INVALID))
}

fn cmd_lemma(config: &Path, mesh: bool, out: &Path) -> u8 {
    let started = Instant::now();
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", config.display()), EXIT_INVALID),
    };
    let mut cfg = match LemmaConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    match env_seed() {
        Ok(Some(seed)) => cfg.options.rng_seed = seed,
        Ok(None) => {}
        Err(e) => return fail(e, EXIT_INVALID),
    }
    let problem = match cfg.problem() {
        Ok(p) => p,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    if let Err(code) = create_out(out) {
        return code;
    }
    let run = run_lemma(&problem);
    let rep = &run.report;
    for e in &rep.ledger.entries {
        let idx = e.index.map(|i| format!(" i={i}")).unwrap_or_default();
        let margin = e.margin.map(|m| format!("{m:.6e}")).unwrap_or_else(|| "-".into());
        println!("{:<6}{:<7} {:<9} margin {margin} ({} samples)", e.label, idx, status_word(e.status), e.samples);
    }
    if let Some(err) = &rep.error {
        println!("error [{}]: {}", err.kind, err.message);
    }
    if !rep.missing.is_empty() {
        println!("{} expected entries missing or skipped", rep.missing.len());
    }
    println!("status: {:?} (exit {})", rep.status, rep.status.exit_code());

    let mut outputs = Vec::new();
    let ledger = LemmaLedgerFile {
        report: rep.clone(),
        q: run.output.as_ref().map(|o| o.q.vertices().to_vec()),
    };
    let lp = out.join("ledger.json");
    if let Err(e) = report::write_json(&lp, &ledger) {
        return fail(e, EXIT_INVALID);
    }
    outputs.push(lp);
    if mesh {
        match &run.output {
            Some(o) => {
                let region = PlanarRegion::Polygon(o.q.as_simple().clone());
                for (name, field) in [("x", &problem.x), ("y", &o.y)] {
                    match sample_grid(field, &region, 64, problem.options.quad_tol) {
                        Ok((samples, tris)) => {
                            let p = out.join(format!("{name}_mesh.obj"));
                            if let Err(e) = fs::write(&p, to_obj(&mesh_from_samples(&samples, tris, Channel::Norm), name)) {
                                return fail(format!("{}: {e}", p.display()), EXIT_INVALID);
                            }
                            outputs.push(p);
                        }
                        Err(e) => eprintln!("warning: mesh of {name} skipped: {e}"),
                    }
                }
            }
            None => eprintln!("warning: no output field, --mesh skipped"),
        }
    }
    let code = rep.status.exit_code();
    let m = manifest("lemma", Some(config), problem.options.rng_seed, started, &outputs, code);
    if let Err(e) = write_manifest(out, &m) {
        return fail(e, EXIT_INVALID);
    }
    code as u8
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Verified => "verified",
        Status::Violated => "VIOLATED",
        Status::Skipped => "skipped",
    }
}

fn cmd_theorem(config: &Path, stages: usize, out: &Path) -> u8 {
    let started = Instant::now();
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", config.display()), EXIT_INVALID),
    };
    let mut cfg = match TheoremConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    cfg.stages = stages;
    match env_seed() {
        Ok(Some(seed)) => {
            cfg.rng_seed = seed;
            cfg.lemma.rng_seed = seed;
        }
        Ok(None) => {}
        Err(e) => return fail(e, EXIT_INVALID),
    }
    if let Err(e) = cfg.validate() {
        return fail(e, EXIT_INVALID);
    }
    if let Err(code) = create_out(out) {
        return code;
    }
    let run = run_theorem(&cfg);
    println!("{}", run.flag);
    for st in &run.stages {
        for e in &st.ledger.entries {
            let margin = e.margin.map(|m| format!("{m:.6e}")).unwrap_or_else(|| "-".into());
            println!("stage {} {:<5} {:<9} margin {margin}", st.index, e.label, status_word(e.status));
        }
    }
    for s in &run.steps {
        println!(
            "step {}: lemma r = {}, s = {}, r + s − r_n = {:e}, (d) floor − (T3) floor = {:e}",
            s.n, s.r, s.s, s.level_defect, s.floor_defect
        );
    }
    println!("properness table: k, r_k, radius floor r_(k-1)/2 - 1/(2k) - 2");
    for row in &run.properness {
        println!("  {:>3}  {:<20}  {}", row.k, row.r_k, row.floor);
    }
    for c in &run.cauchy {
        println!("cauchy {}–{}: max {:e} vs bound {:e} {}", c.m, c.n, c.max_distance, c.bound, if c.passed { "ok" } else { "VIOLATED" });
    }
    if let Some(err) = &run.error {
        println!("error [{}]: {}", err.kind, err.message);
    }
    println!("status: {:?} (exit {})", run.status, run.exit_code());
    let outputs = match report::write_stage_archive(out, &run) {
        Ok(o) => o,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    let code = run.exit_code();
    let m = manifest("theorem", Some(config), cfg.rng_seed, started, &outputs, code);
    if let Err(e) = write_manifest(out, &m) {
        return fail(e, EXIT_INVALID);
    }
    code as u8
}

fn cmd_export(archive: &Path, region: &Path, resolution: usize, out: &Path) -> u8 {
    let started = Instant::now();
    let field = match report::read_field_archive(archive) {
        Ok(f) => f,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    let region = match report::read_region(region) {
        Ok(r) => r,
        Err(e) => return fail(e, EXIT_INVALID),
    };
    let (samples, tris) = match sample_grid(&field, &region, resolution, 1e-12) {
        Ok(s) => s,
        Err(ReportError::Resolution(r)) => return fail(format!("resolution must be at least 8, got {r}"), EXIT_INVALID),
        Err(e) => return fail(e, RunStatus::ConstructionFailed.exit_code() as u8),
    };
    if samples.is_empty() {
        eprintln!("warning: no grid point lies in the region; writing an empty mesh");
    }
    if let Err(code) = create_out(out) {
        return code;
    }
    let obj = out.join("mesh.obj");
    let csv = out.join("field.csv");
    let mesh = mesh_from_samples(&samples, tris, Channel::Norm);
    for (p, text) in [(&obj, to_obj(&mesh, "field")), (&csv, to_csv(&samples))] {
        if let Err(e) = fs::write(p, text) {
            return fail(format!("{}: {e}", p.display()), EXIT_INVALID);
        }
    }
    println!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    let m = manifest("export", Some(archive), 0, started, &[obj, csv], 0);
    if let Err(e) = write_manifest(out, &m) {
        return fail(e, EXIT_INVALID);
    }
    0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::Lemma { config, mesh, out } => cmd_lemma(&config, mesh, &out),
        Command::Theorem { config, stages, out } => cmd_theorem(&config, stages, &out),
        Command::Export {
            archive,
            region,
            resolution,
            out,
        } => cmd_export(&archive, &region, resolution, &out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn configs() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }

    fn read_json(p: &Path) -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seed(None), Ok(None));
        assert_eq!(parse_seed(Some(" 42 ".into())), Ok(Some(42)));
        assert!(parse_seed(Some("seven".into())).is_err());
        assert!(parse_seed(Some("-1".into())).is_err());
    }

    #[test]
    fn negative_control_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_lemma(&configs().join("desk_negative.json"), false, dir.path()), 2);
        let m = read_json(&dir.path().join("manifest.json"));
        assert_eq!(m["exit_code"], 2);
        assert_eq!(m["command"], "lemma");
        let ledger = read_json(&dir.path().join("ledger.json"));
        assert_eq!(ledger["report"]["status"], "violated");
    }

    #[test]
    fn desk_run_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_lemma(&configs().join("desk.json"), false, dir.path()), 3);
    }

    #[test]
    fn invalid_inputs_exit_four() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_lemma(&configs().join("invalid_s.json"), false, dir.path()), 4);
        assert_eq!(cmd_lemma(&dir.path().join("nope.json"), false, dir.path()), 4);
        assert_eq!(cmd_theorem(&dir.path().join("nope.json"), 1, dir.path()), 4);
        assert_eq!(cmd_theorem(&configs().join("theorem_desk.json"), 0, dir.path()), 4);
    }

    #[test]
    fn theorem_stage_archive() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(cmd_theorem(&configs().join("theorem_desk.json"), 1, dir.path()), 0);
        for f in ["stage_1.json", "stage_1_field.json", "theorem.json", "manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let summary = read_json(&dir.path().join("theorem.json"));
        assert_eq!(summary["flag"], wforge_core::theorem::NONCONFORMING_FLAG);
    }

    #[test]
    fn export_writes_mesh_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let archive = configs().join("archives/enneper_unit_disk.json");
        let region = configs().join("regions/unit_disk.json");
        assert_eq!(cmd_export(&archive, &region, 16, dir.path()), 0);
        let obj = fs::read_to_string(dir.path().join("mesh.obj")).unwrap();
        assert!(obj.lines().any(|l| l.starts_with("f ")));
        let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
        assert!(csv.starts_with(report::CSV_HEADER));
    }

    #[test]
    fn export_rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let archive = configs().join("archives/enneper_unit_disk.json");
        let region = configs().join("regions/unit_disk.json");
        assert_eq!(cmd_export(&archive, &region, 4, dir.path()), 4);
        assert_eq!(cmd_export(&dir.path().join("missing.json"), &region, 16, dir.path()), 4);
    }

    #[test]
    fn far_region_gives_empty_mesh() {
        let dir = tempfile::tempdir().unwrap();
        let archive = configs().join("archives/enneper_unit_disk.json");
        let region = configs().join("regions/far_square.json");
        assert_eq!(cmd_export(&archive, &region, 16, dir.path()), 0);
        let obj = fs::read_to_string(dir.path().join("mesh.obj")).unwrap();
        assert!(!obj.lines().any(|l| l.starts_with("v ")));
    }
}
