//! The four subcommands. Each returns a process exit code on success;
//! hard failures carry their exit class in [`Failure`].
//!
//! Exit codes: 0 = done, 2 = validation, 3 = numerical gate, 4 = twistor
//! signal, 5 = constant-map (minimal) signal, 6 = I/O. Codes 4 and 5 are
//! classifications, not crashes: the report is still written, so scripted
//! sweeps can branch on the code without parsing it.

use crate::config::{ExportFormat, RunConfig, TransformKind};
use serde_json::json;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use willmore::backlund::{self, AffineFrame, BacklundError, SphereRelation};
use willmore::mcs::{self, Mcs, SurfaceChart};
use willmore::quat::ProjPoint;
use willmore::report::{self, Report};
use willmore::sequence::{self, StepSignal, TerminationKind};

pub const EXIT_TWISTOR: u8 = 4;
pub const EXIT_MINIMAL: u8 = 5;

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or config: nothing was computed.
    Validation(String),
    /// A numerical gate rejected the input or a transform step.
    Gate(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Gate(_) => 3,
            Failure::Io(_) => 6,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Gate(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

fn gate(e: impl fmt::Display) -> Failure {
    Failure::Gate(e.to_string())
}

fn build_surface(cfg: &RunConfig) -> Result<SurfaceChart, Failure> {
    let s = cfg
        .spec
        .build()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    match cfg.invert {
        None => Ok(s),
        Some(q) => backlund::moebius_apply(&backlund::invert_at(q), &s)
            .map_err(|e| Failure::Gate(format!("inversion at {q:?} failed: {e}"))),
    }
}

fn ensure_out(cfg: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", cfg.out.display())))
}

fn out_path(cfg: &RunConfig, suffix: &str, ext: &str) -> PathBuf {
    cfg.out
        .join(format!("{}-{}-{suffix}.{ext}", cfg.spec.name, cfg.spec.res))
}

fn write_report(cfg: &RunConfig, rep: &Report, suffix: &str) -> Result<PathBuf, Failure> {
    ensure_out(cfg)?;
    let path = out_path(cfg, suffix, "json");
    let io_err = |e| Failure::Io(format!("cannot write {}: {e}", path.display()));
    let f = fs::File::create(&path).map_err(io_err)?;
    rep.write_json(BufWriter::new(f)).map_err(io_err)?;
    Ok(path)
}

fn write_obj_file(cfg: &RunConfig, s: &SurfaceChart, suffix: &str) -> Result<PathBuf, Failure> {
    ensure_out(cfg)?;
    let path = out_path(cfg, suffix, "obj");
    let io_err = |e| Failure::Io(format!("cannot write {}: {e}", path.display()));
    let f = fs::File::create(&path).map_err(io_err)?;
    let mut w = BufWriter::new(f);
    report::write_obj(s, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    Ok(path)
}

/// `eps` is the scale below which the affine read is meaningless — pass
/// the same gate that declared the line constant, so a line within
/// classification noise of `(1,0)ᵀH` serializes as infinity (`null`).
fn line_json(p: &ProjPoint, eps: f64) -> serde_json::Value {
    let r = p.rep();
    json!({
        "rep": [r.a.w, r.a.x, r.a.y, r.a.z, r.b.w, r.b.x, r.b.y, r.b.z],
        "affine": p.affine(eps).map(|q| [q.w, q.x, q.y, q.z]),
    })
}

pub fn analyze(cfg: &RunConfig) -> Result<u8, Failure> {
    let s = build_surface(cfg)?;
    let m = mcs::analyze(&s).map_err(gate)?;
    let mut rep = report::analysis_report(&m, cfg.seed);
    rep.result("h_norm", m.h.max_in(m.interior()));
    let path = write_report(cfg, &rep, "analyze")?;
    println!("surface: {}  res: {}", m.name, cfg.spec.res);
    println!("W = {:.8}", m.willmore_energy());
    let deg = m.degree();
    match deg.rounded {
        Some(d) => println!(
            "deg = {d} (defect {:.3e})",
            deg.rounding_residual.unwrap_or(0.0)
        ),
        None => println!("deg = {:.6} (chart-restricted)", deg.value),
    }
    println!("harmonicity = {:.3e}", m.harmonicity().max());
    println!("report: {}", path.display());
    Ok(0)
}

/// The Willmore gate shared by the transform kinds that need a harmonic
/// congruence. The dual construction is purely algebraic and skips it.
fn willmore_gate(cfg: &RunConfig, m: &Mcs) -> Result<f64, Failure> {
    let n = m.chart.nx.min(m.chart.ny);
    let harm = m.harmonicity().max();
    let allowed = cfg.tol.harmonicity_gate(n);
    if harm > allowed {
        return Err(Failure::Gate(format!(
            "input fails the Willmore gate: harmonicity {harm:.3e} exceeds {allowed:.3e}"
        )));
    }
    Ok(harm)
}

pub fn transform(cfg: &RunConfig) -> Result<u8, Failure> {
    let kind = cfg.kind.ok_or_else(|| {
        Failure::Validation(
            "kind: required for transform (--kind one-step | forward | backward | dual)".into(),
        )
    })?;
    let s = build_surface(cfg)?;
    let m = mcs::analyze(&s).map_err(gate)?;
    let mut rep = Report::new(&m.name, cfg.spec.res, cfg.seed);
    rep.result("kind", kind.name());
    rep.residual("harmonicity_input", m.harmonicity().max());

    match kind {
        TransformKind::OneStep => {
            willmore_gate(cfg, &m)?;
            one_step_block(cfg, &s, &mut rep)
        }
        TransformKind::Dual => {
            let d = backlund::dual_surface(&m, &cfg.tol).map_err(gate)?;
            rep.result("classification", "dual");
            rep.residual("s_match", d.s_match);
            rep.residual("ker_vs_im", d.ker_vs_im);
            let obj = write_obj_file(cfg, &d.surface, "dual")?;
            let path = write_report(cfg, &rep, "dual")?;
            println!("dual surface: S-match {:.3e}, ker-vs-im {:.3e}", d.s_match, d.ker_vs_im);
            println!("mesh: {}", obj.display());
            println!("report: {}", path.display());
            Ok(0)
        }
        TransformKind::Forward | TransformKind::Backward => {
            willmore_gate(cfg, &m)?;
            let forward = kind == TransformKind::Forward;
            let signal = sequence::classify_step(&m, forward, &cfg.tol).map_err(gate)?;
            match signal {
                StepSignal::DegenerateRoundSphere { a_norm, q_norm } => Err(Failure::Gate(format!(
                    "degenerate round sphere: both Hopf fields at the floor \
                     (|A| = {a_norm:.3e}, |Q| = {q_norm:.3e}); no transform is available"
                ))),
                StepSignal::Twistor {
                    ratio,
                    gate: g,
                    a_norm,
                    q_norm,
                } => {
                    rep.result("classification", "twistor");
                    rep.result("hopf_ratio", ratio);
                    rep.result("gate", g);
                    rep.result("a_norm", a_norm);
                    rep.result("q_norm", q_norm);
                    let path = write_report(cfg, &rep, kind.name())?;
                    println!("classification: twistor (Hopf ratio {ratio:.3e} below gate {g:.3e})");
                    println!("report: {}", path.display());
                    Ok(EXIT_TWISTOR)
                }
                StepSignal::Minimal {
                    spread,
                    gate: g,
                    line,
                } => {
                    rep.result("classification", "minimal");
                    rep.result("spread", spread);
                    rep.result("gate", g);
                    rep.result("line", line_json(&line, g));
                    let path = write_report(cfg, &rep, kind.name())?;
                    let where_ = match line.affine(g) {
                        None => "infinity".to_string(),
                        Some(q) => format!(
                            "({:.6}, {:.6}, {:.6}, {:.6})",
                            q.w, q.x, q.y, q.z
                        ),
                    };
                    println!(
                        "classification: minimal (transform is the constant line at {where_}; spread {spread:.3e})"
                    );
                    println!("report: {}", path.display());
                    Ok(EXIT_MINIMAL)
                }
                StepSignal::Proceed => {
                    let t = if forward {
                        backlund::backlund_forward(&m, &cfg.tol, cfg.seed)
                    } else {
                        backlund::backlund_backward(&m, &cfg.tol, cfg.seed)
                    }
                    .map_err(gate)?;
                    let mt = mcs::analyze(&t.surface).map_err(gate)?;
                    rep.result("classification", "transformed");
                    rep.result("attempts", t.attempts);
                    rep.result("energy_input", m.willmore_energy());
                    rep.result("energy_new", mt.willmore_energy());
                    let transport =
                        backlund::hopf_transport_residual(&m, &t, forward).map_err(gate)?;
                    rep.residual(
                        if forward {
                            "hopf_transport_qtilde_vs_a"
                        } else {
                            "hopf_transport_ahat_vs_q"
                        },
                        transport,
                    );
                    let rel = if forward {
                        SphereRelation::ForwardQuotient
                    } else {
                        SphereRelation::BackwardRestriction
                    };
                    rep.residual(
                        "sphere_relation",
                        backlund::sphere_relation_residual(&m, &t, rel).map_err(gate)?,
                    );
                    if forward {
                        rep.residual(
                            "involution",
                            backlund::involution_residual(&m, &t, &cfg.tol).map_err(gate)?,
                        );
                    }
                    let obj = write_obj_file(cfg, &t.surface, kind.name())?;
                    let path = write_report(cfg, &rep, kind.name())?;
                    println!(
                        "transformed: {} (W {:.8} -> {:.8}, transport residual {transport:.3e})",
                        mt.name,
                        m.willmore_energy(),
                        mt.willmore_energy()
                    );
                    println!("mesh: {}", obj.display());
                    println!("report: {}", path.display());
                    Ok(0)
                }
            }
        }
    }
}

fn one_step_block(cfg: &RunConfig, s: &SurfaceChart, rep: &mut Report) -> Result<u8, Failure> {
    // the standard frame fails when the surface meets its own point at
    // infinity (or the kernel line touches eH); fall back to the swapped
    // chart before giving up
    let frames = [
        (AffineFrame::standard(), "standard"),
        (AffineFrame::inverted(), "inverted"),
    ];
    let mut last = None;
    for (frame, frame_name) in frames {
        let attempt = backlund::one_step(s, &frame, &cfg.tol).and_then(|one| {
            let sharp = backlund::sharp_sphere_data(&one, &cfg.tol)?;
            let cons = backlund::sharp_consistency(&one, &sharp)?;
            Ok((one, sharp, cons))
        });
        match attempt {
            Ok((one, sharp, cons)) => {
                rep.result("frame", frame_name);
                rep.result("defect", one.defect);
                rep.result("allowed_defect", one.allowed_defect);
                rep.result("beta_margin", sharp.beta_margin);
                let periods: Vec<[f64; 4]> =
                    one.periods.iter().map(|p| [p.w, p.x, p.y, p.z]).collect();
                rep.result("periods", periods);
                rep.residual("n_sharp", cons.n_dist);
                rep.residual("r_sharp", cons.r_dist);
                rep.residual("h_sharp", cons.h_dist);
                rep.residual("frame_sharp", cons.frame_rel);
                rep.residual("mean_sharp_x", cons.mean_x);
                rep.residual("mean_sharp_y", cons.mean_y);
                let obj = write_obj_file(cfg, &one.surface, "one-step")?;
                let path = write_report(cfg, rep, "one-step")?;
                println!(
                    "one-step: defect {:.3e} (allowed {:.3e}), frame {frame_name}",
                    one.defect, one.allowed_defect
                );
                println!("mesh: {}", obj.display());
                println!("report: {}", path.display());
                return Ok(0);
            }
            Err(
                e @ (BacklundError::FrameCollision { .. } | BacklundError::BetaSingular { .. }),
            ) => last = Some(e),
            Err(e) => return Err(Failure::Gate(format!("one-step transform failed: {e}"))),
        }
    }
    Err(Failure::Gate(format!(
        "one-step transform failed in both affine frames: {}",
        last.expect("at least one frame was tried")
    )))
}

pub fn sequence(cfg: &RunConfig) -> Result<u8, Failure> {
    let s = build_surface(cfg)?;
    let led = sequence::run_sequence(&s, cfg.max_steps, &cfg.tol, cfg.seed).map_err(gate)?;
    let (kind, side) = led.overall();
    let mut rep = Report::new(&cfg.spec.name, cfg.spec.res, cfg.seed);
    rep.result("sequence", &led);
    rep.result("termination", json!({ "kind": kind, "side": side }));
    if let Some(e0) = led.entries.iter().find(|e| e.index == 0) {
        rep.residual("harmonicity_input", e0.harmonicity);
    }
    let path = write_report(cfg, &rep, "sequence")?;
    let table = report::ledger_table(&led);
    ensure_out(cfg)?;
    let tpath = out_path(cfg, "sequence", "txt");
    fs::write(&tpath, &table)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", tpath.display())))?;
    print!("{table}");
    println!("report: {}", path.display());
    println!("table: {}", tpath.display());
    Ok(match kind {
        TerminationKind::Twistor => EXIT_TWISTOR,
        TerminationKind::Minimal => EXIT_MINIMAL,
        _ => 0,
    })
}

pub fn export(cfg: &RunConfig) -> Result<u8, Failure> {
    let format = cfg.format.ok_or_else(|| {
        Failure::Validation("format: required for export (--format obj | csv | json)".into())
    })?;
    let s = build_surface(cfg)?;
    ensure_out(cfg)?;
    let path = out_path(cfg, "export", format.extension());
    let io_err = |e| Failure::Io(format!("cannot write {}: {e}", path.display()));
    let f = fs::File::create(&path).map_err(io_err)?;
    let mut w = BufWriter::new(f);
    match format {
        ExportFormat::Obj => report::write_obj(&s, &mut w).map_err(io_err)?,
        ExportFormat::Csv => {
            let m = mcs::analyze(&s).map_err(gate)?;
            report::write_csv(&m, &mut w).map_err(io_err)?;
        }
        ExportFormat::Json => {
            let m = mcs::analyze(&s).map_err(gate)?;
            report::analysis_report(&m, cfg.seed)
                .write_json(&mut w)
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    println!("wrote {}", path.display());
    Ok(0)
}
