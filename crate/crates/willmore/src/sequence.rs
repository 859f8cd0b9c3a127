//! The Willmore sequence driver: iterate the forward and backward
//! Bäcklund transforms from a seed surface until a termination signal,
//! with an auditable ledger of energies, degrees, and residuals.
//!
//! Termination follows the dichotomy for sequences of Willmore surfaces:
//! a direction stops when its Hopf field vanishes (twistor case: the
//! surface is the projection of a holomorphic or antiholomorphic curve),
//! when the transform collapses to a constant point (minimal case, up to
//! Möbius), when both Hopf fields sit at the round-sphere floor, or when
//! the step budget runs out.

use crate::backlund::{
    self, all_zero_floor, backlund_backward, backlund_forward, BacklundError,
};
use crate::linefield::{image_line_field_smooth, kernel_line_field_smooth, LineFieldError};
use crate::mcs::{self, Mcs, McsError, SurfaceChart};
use crate::quat::ProjPoint;
use crate::tol::{Tolerances, EPS_ZERO_REL, ROUND_SPHERE_FLOOR};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error(
        "input surface is not Willmore at this resolution: harmonicity {harmonicity:.3e} exceeds gate {gate:.3e}"
    )]
    NonWillmoreInput { harmonicity: f64, gate: f64 },
    #[error(transparent)]
    Mcs(#[from] McsError),
    #[error("transform failed at step {step} ({side}): {source}")]
    Step {
        step: usize,
        side: &'static str,
        source: BacklundError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationKind {
    /// The relevant Hopf field vanished: the surface lifts to a
    /// (anti)holomorphic curve in the twistor space.
    Twistor,
    /// The transform collapsed to a constant point: the surface is
    /// Möbius-equivalent to a minimal surface with that point at ∞.
    Minimal,
    /// Both Hopf fields at the numerical floor: a round sphere, whose
    /// congruence is constant and admits no further transforms.
    DegenerateRoundSphere,
    /// Step budget exhausted while transforms were still available.
    MaxSteps,
    /// No geometric termination in either direction.
    NotTerminated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Forward,
    Backward,
    Both,
}

/// Why one direction of the sequence stopped, with numeric evidence.
#[derive(Clone, Debug, Serialize)]
pub struct Termination {
    pub kind: TerminationKind,
    /// Surfaces added in this direction before stopping.
    pub steps: usize,
    /// Named residuals backing the classification.
    pub evidence: Vec<(String, f64)>,
}

/// One surface in the sequence.
#[derive(Clone, Debug, Serialize)]
pub struct SequenceEntry {
    /// 0 = input; +k at the k-th forward transform, −k backward.
    pub index: i64,
    pub name: String,
    /// Willmore energy over the chart (exact lattice quadrature on tori,
    /// chart-restricted otherwise).
    pub energy: f64,
    pub harmonicity: f64,
    pub a_norm: f64,
    pub q_norm: f64,
    /// Normal bundle degree (torus charts only).
    pub degree: Option<i64>,
    pub degree_value: Option<f64>,
    pub degree_defect: Option<f64>,
    pub masked: usize,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantizationReport {
    /// `(left index, ΔW, v, |ΔW − 4πv|)` per consecutive pair.
    pub pairs: Vec<(i64, f64, i64, f64)>,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthBoundReport {
    /// `n·v + W/4π + 2n(n+1)·deg K`
    pub lhs: f64,
    pub realized_length: i64,
    pub v0: i64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceLedger {
    /// Ascending by index: backward chain, input, forward chain.
    pub entries: Vec<SequenceEntry>,
    pub genus: u8,
    /// Degree of the canonical bundle, `2g − 2`.
    pub deg_k: i64,
    /// True when the chart is not closed: energies and classifications
    /// are chart-restricted statements only.
    pub local: bool,
    pub forward: Termination,
    pub backward: Termination,
    pub quantization: Option<QuantizationReport>,
    pub length_bound: Option<LengthBoundReport>,
}

impl SequenceLedger {
    /// Overall classification: a geometric termination on either side
    /// wins; otherwise the budget ran out.
    pub fn overall(&self) -> (TerminationKind, Side) {
        use TerminationKind::*;
        let (f, b) = (self.forward.kind, self.backward.kind);
        if f == DegenerateRoundSphere || b == DegenerateRoundSphere {
            return (DegenerateRoundSphere, Side::Both);
        }
        for kind in [Twistor, Minimal] {
            match (f == kind, b == kind) {
                (true, true) => return (kind, Side::Both),
                (true, false) => return (kind, Side::Forward),
                (false, true) => return (kind, Side::Backward),
                _ => {}
            }
        }
        (NotTerminated, Side::Both)
    }
}

/// What one direction of the transform sees when it looks at a surface:
/// either a termination signal or a go-ahead.
#[derive(Clone, Debug)]
pub enum StepSignal {
    /// Both Hopf fields at the numerical floor.
    DegenerateRoundSphere { a_norm: f64, q_norm: f64 },
    /// The field to transform along vanishes relative to the other.
    Twistor {
        ratio: f64,
        gate: f64,
        a_norm: f64,
        q_norm: f64,
    },
    /// The transform line is constant: the next surface is a point.
    Minimal {
        spread: f64,
        gate: f64,
        line: ProjPoint,
    },
    /// A genuine transform is available.
    Proceed,
}

/// Classify what the forward (kernel of `A`) or backward (image of `Q`)
/// transform would do at `m`, without building anything.
pub fn classify_step(
    m: &Mcs,
    forward: bool,
    tol: &Tolerances,
) -> Result<StepSignal, LineFieldError> {
    let w = m.interior();
    let a_norm = m.hopf.a.max_in(w);
    let q_norm = m.hopf.q.max_in(w);
    if a_norm < ROUND_SPHERE_FLOOR && q_norm < ROUND_SPHERE_FLOOR {
        return Ok(StepSignal::DegenerateRoundSphere { a_norm, q_norm });
    }
    let n = m.chart.nx.min(m.chart.ny);
    let gate = tol.twistor_ratio_gate(n);
    let (this_norm, other_norm) = if forward {
        (a_norm, q_norm)
    } else {
        (q_norm, a_norm)
    };
    if this_norm < gate * other_norm {
        return Ok(StepSignal::Twistor {
            ratio: this_norm / other_norm,
            gate,
            a_norm,
            q_norm,
        });
    }
    let floor = all_zero_floor(m, tol);
    let lf = if forward {
        kernel_line_field_smooth(&m.chart, &m.hopf.a, EPS_ZERO_REL, floor)
    } else {
        image_line_field_smooth(&m.chart, &m.hopf.q, EPS_ZERO_REL, floor)
    };
    let lf = match lf {
        Ok(lf) => lf,
        Err(LineFieldError::AllZero { max_norm, floor }) => {
            return Ok(StepSignal::Twistor {
                ratio: max_norm / floor.max(f64::MIN_POSITIVE),
                gate: 1.0,
                a_norm,
                q_norm,
            });
        }
        Err(e) => return Err(e),
    };
    let spread = lf.spread(w);
    let const_gate = tol.constant_map_tol(n);
    if let Some(line) = lf.constant_line(w, const_gate) {
        return Ok(StepSignal::Minimal {
            spread,
            gate: const_gate,
            line,
        });
    }
    Ok(StepSignal::Proceed)
}

fn entry_from(m: &Mcs, index: i64, flags: Vec<String>) -> SequenceEntry {
    let w = m.interior();
    let deg = m.degree();
    SequenceEntry {
        index,
        name: m.name.clone(),
        energy: m.willmore_energy(),
        harmonicity: m.harmonicity().max(),
        a_norm: m.hopf.a.max_in(w),
        q_norm: m.hopf.q.max_in(w),
        degree: deg.rounded,
        degree_value: if deg.chart_restricted {
            None
        } else {
            Some(deg.value)
        },
        degree_defect: deg.rounding_residual,
        masked: m.masked_count,
        flags,
    }
}

/// Walk one direction. Returns the new entries (step order) and the
/// termination record.
fn walk(
    f0: &SurfaceChart,
    forward: bool,
    max_steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<(Vec<SequenceEntry>, Termination), SequenceError> {
    let side = if forward { "forward" } else { "backward" };
    let mut entries = Vec::new();
    let mut current = mcs::analyze(f0)?;
    for step in 1..=max_steps {
        let signal = classify_step(&current, forward, tol).map_err(|e| SequenceError::Step {
            step,
            side,
            source: BacklundError::LineField(e),
        })?;
        match signal {
            StepSignal::DegenerateRoundSphere { a_norm, q_norm } => {
                return Ok((
                    entries,
                    Termination {
                        kind: TerminationKind::DegenerateRoundSphere,
                        steps: step - 1,
                        evidence: vec![
                            ("a_norm".into(), a_norm),
                            ("q_norm".into(), q_norm),
                            ("floor".into(), ROUND_SPHERE_FLOOR),
                        ],
                    },
                ));
            }
            StepSignal::Twistor {
                ratio,
                gate,
                a_norm,
                q_norm,
            } => {
                return Ok((
                    entries,
                    Termination {
                        kind: TerminationKind::Twistor,
                        steps: step - 1,
                        evidence: vec![
                            ("hopf_ratio".into(), ratio),
                            ("gate".into(), gate),
                            ("a_norm".into(), a_norm),
                            ("q_norm".into(), q_norm),
                        ],
                    },
                ));
            }
            StepSignal::Minimal { spread, gate, .. } => {
                return Ok((
                    entries,
                    Termination {
                        kind: TerminationKind::Minimal,
                        steps: step - 1,
                        evidence: vec![("spread".into(), spread), ("gate".into(), gate)],
                    },
                ));
            }
            StepSignal::Proceed => {}
        }
        // rebuild the next surface and re-derive its data from scratch
        let t = match if forward {
            backlund_forward(&current, tol, seed)
        } else {
            backlund_backward(&current, tol, seed)
        } {
            Ok(t) => t,
            Err(BacklundError::LineField(LineFieldError::AllZero { max_norm, floor })) => {
                return Ok((
                    entries,
                    Termination {
                        kind: TerminationKind::Twistor,
                        steps: step - 1,
                        evidence: vec![
                            ("field_norm".into(), max_norm),
                            ("floor".into(), floor),
                        ],
                    },
                ));
            }
            Err(BacklundError::RoundSphere { a_norm, q_norm }) => {
                return Ok((
                    entries,
                    Termination {
                        kind: TerminationKind::DegenerateRoundSphere,
                        steps: step - 1,
                        evidence: vec![("a_norm".into(), a_norm), ("q_norm".into(), q_norm)],
                    },
                ));
            }
            Err(source) => return Err(SequenceError::Step { step, side, source }),
        };
        let next = mcs::analyze(&t.surface)?;
        // the transform shortcut (forward: Q̃ reproduces A; backward: Â
        // reproduces Q) must agree with the re-derivation at stencil order
        let transport = backlund::hopf_transport_residual(&current, &t, forward)
            .map_err(|source| SequenceError::Step { step, side, source })?;
        let h = current.chart.hx.max(current.chart.hy);
        assert!(
            transport <= (100.0 * h * h * tol.scale).max(1e-9),
            "hopf transport residual {transport:.3e} out of bounds at step {step} ({side})"
        );
        let mut flags = vec![format!("hopf_transport={transport:.3e}")];
        if t.moebius != crate::quat::HMat2::IDENTITY {
            flags.push("moebius-normalized".into());
        }
        if t.offset != (0, 0) {
            flags.push("chart-shrunk".into());
        }
        let index = if forward { step as i64 } else { -(step as i64) };
        entries.push(entry_from(&next, index, flags));
        current = next;
    }
    let w = current.interior();
    Ok((
        entries,
        Termination {
            kind: TerminationKind::MaxSteps,
            steps: max_steps,
            evidence: vec![
                ("a_norm".into(), current.hopf.a.max_in(w)),
                ("q_norm".into(), current.hopf.q.max_in(w)),
            ],
        },
    ))
}

/// Run the sequence from `f0` in both directions for up to `max_steps`
/// each. Only the input is gated on harmonicity; transformed surfaces are
/// recorded as they come.
pub fn run_sequence(
    f0: &SurfaceChart,
    max_steps: usize,
    tol: &Tolerances,
    seed: u64,
) -> Result<SequenceLedger, SequenceError> {
    let m0 = mcs::analyze(f0)?;
    let n = m0.chart.nx.min(m0.chart.ny);
    let harmonicity = m0.harmonicity().max();
    let gate = tol.harmonicity_gate(n);
    if harmonicity > gate {
        return Err(SequenceError::NonWillmoreInput { harmonicity, gate });
    }
    let genus: u8 = if m0.chart.is_torus() { 1 } else { 0 };
    let deg_k = 2 * genus as i64 - 2;
    let local = !m0.chart.is_torus();

    let w = m0.interior();
    let a0 = m0.hopf.a.max_in(w);
    let q0 = m0.hopf.q.max_in(w);
    let entry0 = entry_from(&m0, 0, Vec::new());

    if a0 < ROUND_SPHERE_FLOOR && q0 < ROUND_SPHERE_FLOOR {
        let term = Termination {
            kind: TerminationKind::DegenerateRoundSphere,
            steps: 0,
            evidence: vec![("a_norm".into(), a0), ("q_norm".into(), q0)],
        };
        return Ok(SequenceLedger {
            entries: vec![entry0],
            genus,
            deg_k,
            local,
            forward: term.clone(),
            backward: term,
            quantization: None,
            length_bound: None,
        });
    }

    let (fwd_entries, mut forward) = walk(f0, true, max_steps, tol, seed)?;
    let (bwd_entries, mut backward) = walk(f0, false, max_steps, tol, seed)?;
    attach_rigidity_evidence(&m0, tol, seed, &mut forward, &mut backward);

    let mut entries: Vec<SequenceEntry> = bwd_entries.into_iter().rev().collect();
    entries.push(entry0);
    entries.extend(fwd_entries);

    let mut ledger = SequenceLedger {
        entries,
        genus,
        deg_k,
        local,
        forward,
        backward,
        quantization: None,
        length_bound: None,
    };
    ledger.quantization = quantization_check(&ledger);
    ledger.length_bound = length_bound_check(&ledger);
    Ok(ledger)
}

/// Attach the rigidity cross-checks behind a classification:
/// a minimal stop on both sides must name the *same* constant point,
/// and a twistor stop is backed by the `Ŝ = −S` congruence flip of the
/// backward transform when one exists.
fn attach_rigidity_evidence(
    m0: &Mcs,
    tol: &Tolerances,
    seed: u64,
    forward: &mut Termination,
    backward: &mut Termination,
) {
    let w = m0.interior();
    if forward.kind == TerminationKind::Minimal && backward.kind == TerminationKind::Minimal {
        let floor = all_zero_floor(m0, tol);
        let fc = kernel_line_field_smooth(&m0.chart, &m0.hopf.a, EPS_ZERO_REL, floor)
            .ok()
            .and_then(|lf| constant_of(&lf, w, tol, m0));
        let bc = image_line_field_smooth(&m0.chart, &m0.hopf.q, EPS_ZERO_REL, floor)
            .ok()
            .and_then(|lf| constant_of(&lf, w, tol, m0));
        if let (Some(f), Some(b)) = (fc, bc) {
            let d = f.chordal(&b);
            forward
                .evidence
                .push(("constant_coincidence".into(), d));
            backward
                .evidence
                .push(("constant_coincidence".into(), d));
        }
    }
    if forward.kind == TerminationKind::Twistor && forward.steps == 0 {
        if let Ok(t) = backlund_backward(m0, tol, seed) {
            if let Ok(r) =
                backlund::sphere_relation_residual(m0, &t, backlund::SphereRelation::FullMatrix)
            {
                forward.evidence.push(("sphere_flip".into(), r));
            }
        }
    }
}

fn constant_of(
    lf: &crate::linefield::LineField,
    w: crate::chart::Window,
    tol: &Tolerances,
    m: &Mcs,
) -> Option<ProjPoint> {
    let n = m.chart.nx.min(m.chart.ny);
    lf.constant_line(w, tol.constant_map_tol(n))
}

/// Energy quantization across steps: `ΔW = 4πv` with `v` the normal
/// bundle degree. Only meaningful on closed (torus) charts.
pub fn quantization_check(ledger: &SequenceLedger) -> Option<QuantizationReport> {
    if ledger.local {
        return None;
    }
    let mut pairs = Vec::new();
    let mut max_residual = 0.0f64;
    for pair in ledger.entries.windows(2) {
        let (l, r) = (&pair[0], &pair[1]);
        let v = l.degree?;
        let dw = r.energy - l.energy;
        let residual = (dw - 4.0 * std::f64::consts::PI * v as f64).abs();
        max_residual = max_residual.max(residual);
        pairs.push((l.index, dw, v, residual));
    }
    Some(QuantizationReport {
        pairs,
        max_residual,
    })
}

/// Lower bound on sequence data: `n·v + W/4π + 2n(n+1)·deg K ≥ 0` with
/// `n` the realized forward length and `v` the input's degree. Skipped
/// (`None`) on open charts, where only local statements hold.
pub fn length_bound_check(ledger: &SequenceLedger) -> Option<LengthBoundReport> {
    if ledger.local {
        return None;
    }
    let f0 = ledger.entries.iter().find(|e| e.index == 0)?;
    let v0 = f0.degree?;
    let n = ledger.forward.steps as i64;
    let lhs = (n * v0) as f64
        + f0.energy / (4.0 * std::f64::consts::PI)
        + (2 * n * (n + 1) * ledger.deg_k) as f64;
    Some(LengthBoundReport {
        lhs,
        realized_length: n,
        v0,
        satisfied: lhs >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn round_sphere_degenerate() {
        let s = gallery::round_sphere(32).unwrap();
        let led = run_sequence(&s, 3, &tol(), 7).unwrap();
        assert_eq!(led.entries.len(), 1);
        assert_eq!(
            led.overall(),
            (TerminationKind::DegenerateRoundSphere, Side::Both)
        );
    }

    #[test]
    fn catenoid_minimal_both_sides() {
        let s = gallery::catenoid_patch(65, 1.5).unwrap();
        let led = run_sequence(&s, 3, &tol(), 7).unwrap();
        assert_eq!(led.entries.len(), 1, "minimal input should not transform");
        assert_eq!(led.forward.kind, TerminationKind::Minimal);
        assert_eq!(led.backward.kind, TerminationKind::Minimal);
        assert_eq!(led.overall(), (TerminationKind::Minimal, Side::Both));
        // both directions collapse to the same constant point
        let coincidence = led
            .forward
            .evidence
            .iter()
            .find(|(k, _)| k == "constant_coincidence")
            .expect("rigidity evidence present")
            .1;
        assert!(coincidence < 1e-3, "constant points differ by {coincidence}");
        assert!(led.quantization.is_none(), "open chart is local-only");
        assert!(led.length_bound.is_none());
    }

    #[test]
    fn twistor_cubic_length_two() {
        let s = gallery::twistor_projection_default(65).unwrap();
        let led = run_sequence(&s, 3, &tol(), 7).unwrap();
        assert_eq!(led.forward.kind, TerminationKind::Twistor);
        assert_eq!(led.forward.steps, 0);
        assert_eq!(led.backward.kind, TerminationKind::Twistor);
        assert_eq!(led.backward.steps, 1);
        assert_eq!(led.entries.len(), 2, "sequence is exactly {{f̂, f}}");
        assert_eq!(led.entries[0].index, -1);
        let flip = led
            .forward
            .evidence
            .iter()
            .find(|(k, _)| k == "sphere_flip")
            .expect("congruence flip evidence present")
            .1;
        assert!(flip < 5e-2, "Ŝ + S residual {flip}");
    }

    #[test]
    fn clifford_runs_to_budget() {
        let s = gallery::clifford_torus(32).unwrap();
        let led = run_sequence(&s, 2, &tol(), 7).unwrap();
        assert_eq!(led.forward.kind, TerminationKind::MaxSteps);
        assert_eq!(led.backward.kind, TerminationKind::MaxSteps);
        assert_eq!(led.overall(), (TerminationKind::NotTerminated, Side::Both));
        assert_eq!(led.entries.len(), 5);
        assert_eq!(led.genus, 1);
        assert!(!led.local);
        // all five surfaces carry the same energy and degree zero
        let q = led.quantization.as_ref().expect("torus quantization");
        assert!(
            q.max_residual < 1e-6,
            "ΔW vs 4πv residual {}",
            q.max_residual
        );
        for e in &led.entries {
            assert_eq!(e.degree, Some(0));
        }
        let lb = led.length_bound.as_ref().expect("torus length bound");
        assert!(lb.satisfied);
    }

    #[test]
    fn control_surface_gated() {
        let s = gallery::control_surface(65).unwrap();
        match run_sequence(&s, 2, &tol(), 7) {
            Err(SequenceError::NonWillmoreInput { harmonicity, gate }) => {
                assert!(harmonicity > gate);
            }
            other => panic!("expected non-Willmore gate, got {other:?}"),
        }
    }

    #[test]
    fn quantization_negative_control() {
        let s = gallery::clifford_torus(32).unwrap();
        let mut led = run_sequence(&s, 1, &tol(), 7).unwrap();
        // corrupt one energy by a non-multiple of 4π: the residual must
        // light up
        led.entries[0].energy += 1.0;
        let q = quantization_check(&led).unwrap();
        assert!(
            q.max_residual > 0.9,
            "corrupted energy not detected: {}",
            q.max_residual
        );
    }

    #[test]
    fn ledger_reproducible() {
        let s = gallery::clifford_torus(32).unwrap();
        let a = run_sequence(&s, 2, &tol(), 7).unwrap();
        let b = run_sequence(&s, 2, &tol(), 7).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb, "ledger must be bit-exact reproducible");
    }
}
