//! Acceptance suite: one test per advertised guarantee of the library and
//! binary, each printing the measured evidence it was judged on (visible
//! with `--nocapture`).
//!
//! Convergence policy. A quantity is certified second-order over a
//! refinement sequence when every halving of `h` either divides the
//! residual by at least 3 (a clean O(h²) term gives 4; curvature terms
//! with symmetric stencils often superconverge past 5) or has already hit
//! the roundoff floor of the pipeline that produced it. The floors are
//! calibrated an order of magnitude above the worst roundoff measured on
//! spectrally exact data at 128² and at least three decades below the
//! smallest genuine discretization signal gated here:
//!
//! * pointwise quaternion algebra maxima roundoff ≤ 3e-14,
//! * one stencil application amplifies by 1/h² to ≤ 6e-12,
//! * extraction → Möbius rebuild → re-analysis chains reach ≤ 9e-9.

use std::process::Command;

use willmore::backlund::{
    self, all_zero_floor, backlund_backward, backlund_forward, moebius_apply, AffineFrame,
    SphereRelation,
};
use willmore::gallery;
use willmore::linefield::{
    image_line_field, image_line_field_smooth, kernel_line_field, kernel_line_field_smooth,
};
use willmore::mcs::{self, Mcs};
use willmore::oracle;
use willmore::quat::{HMat2, HVec2, ProjPoint, Quat};
use willmore::sequence::{self, Side, TerminationKind};
use willmore::tol::{Tolerances, EPS_ZERO_REL};

const FLOOR_ALG: f64 = 1e-12;
const FLOOR_DIFF: f64 = 1e-10;
const FLOOR_CHAIN: f64 = 1e-7;

fn evidence(vals: &[f64]) -> String {
    let seq = vals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" -> ");
    let ratios = vals
        .windows(2)
        .map(|p| {
            let r = p[0] / p[1];
            if r.is_finite() { format!("{r:.2}") } else { "-".into() }
        })
        .collect::<Vec<_>>()
        .join(", ");
    format!("{seq} (ratios {ratios})")
}

/// Assert second-order decay of `vals` over successive mesh halvings.
fn assert_decays(label: &str, vals: &[f64], floor: f64) {
    println!("  {label}: {}", evidence(vals));
    for (k, pair) in vals.windows(2).enumerate() {
        assert!(
            pair[1] <= floor || pair[0] / pair[1] >= 3.0,
            "{label}: pair {k} fails second order: {:.3e} -> {:.3e} (ratio {:.2}, floor {floor:.0e})",
            pair[0],
            pair[1],
            pair[0] / pair[1]
        );
    }
}

/// Assert a residual converges to a nonzero level instead of decaying:
/// every halving changes it by less than 2x and the final value stays
/// above `level`.
fn assert_plateaus(label: &str, vals: &[f64], level: f64) {
    println!("  {label}: {} (expected plateau)", evidence(vals));
    for pair in vals.windows(2) {
        let r = pair[0] / pair[1];
        assert!(
            (0.5..2.0).contains(&r),
            "{label}: expected an O(1) plateau, got ratio {r:.2}"
        );
    }
    let last = *vals.last().unwrap();
    assert!(last > level, "{label}: plateau level {last:.3e} <= {level:.0e}");
}

fn analyzed(name: &str, res: usize) -> Mcs {
    mcs::analyze(&gallery::by_name(name, res).unwrap()).unwrap()
}

/// Disk charts use 2^k + 1 nodes so the mesh width halves exactly.
fn res_for(name: &str, base: usize) -> usize {
    if name == "clifford-torus" {
        base
    } else {
        base + 1
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_willmore"))
}

#[test]
fn criterion_1_energy_calibration() {
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let s = gallery::clifford_torus(128).unwrap();
    let w = mcs::analyze(&s).unwrap().willmore_energy();
    let ora = oracle::euclidean_oracle(&s).energy();
    println!("  W(clifford,128) = {w:.6}, oracle = {ora:.6}, 2pi^2 = {two_pi_sq:.6}");
    assert!(
        (w - ora).abs() <= 0.02 * ora,
        "quaternionic energy {w} vs euclidean oracle {ora} disagree beyond 2%"
    );
    assert!((w - two_pi_sq).abs() <= 0.02 * two_pi_sq, "W = {w} not 2pi^2 within 2%");
    assert!((ora - two_pi_sq).abs() <= 0.02 * two_pi_sq, "oracle = {ora} not 2pi^2 within 2%");

    let ws = analyzed("round-sphere", 65).willmore_energy();
    println!("  W(round sphere chart) = {ws:.3e}");
    assert!(ws.abs() <= 1e-6, "round sphere energy {ws:.3e} exceeds 1e-6");
}

/// Per-node maximum of `1/2 S dS - (A + Q)`; zero by construction of the
/// type splitting, so any excess is stored-field corruption.
fn derivation_residual(m: &Mcs) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.chart.nx {
        for j in 0..m.chart.ny {
            let s = m.s.at(i, j);
            let rx = (s * m.ds.cx.at(i, j)) * 0.5 - (m.hopf.a.cx.at(i, j) + m.hopf.q.cx.at(i, j));
            let ry = (s * m.ds.cy.at(i, j)) * 0.5 - (m.hopf.a.cy.at(i, j) + m.hopf.q.cy.at(i, j));
            worst = worst.max(rx.norm()).max(ry.norm());
        }
    }
    worst
}

#[test]
fn criterion_2_structural_identities() {
    // The control chart is deliberately non-conformal, so the identities
    // that characterize the mean curvature sphere of a *conformal* map
    // (Q psi = 0, im A inside L, the normal identity) converge to its
    // nonzero model defect instead of to zero; the suite pins that
    // plateau. On twistor-type charts A itself vanishes at O(h²), so the
    // image of A is pure extraction noise and the inclusion im A in L is
    // vacuous; the suite pins the vanishing instead.
    for name in gallery::NAMES {
        println!("{name}:");
        let ms: Vec<Mcs> = [32usize, 64, 128]
            .iter()
            .map(|&b| analyzed(name, res_for(name, b)))
            .collect();
        for m in &ms {
            let s2 = m.s_square_residual();
            assert!(s2 < 1e-10, "{name}: |S^2 + 1| = {s2:.3e} at {}", m.chart.nx);
            let dv = derivation_residual(m);
            assert!(dv < 1e-12, "{name}: 1/2 S dS != A + Q ({dv:.3e}) at {}", m.chart.nx);
        }
        let st: Vec<_> = ms.iter().map(|m| m.structure_residuals()).collect();
        let take = |f: fn(&willmore::mcs::StructureReport) -> f64| -> Vec<f64> {
            st.iter().map(f).collect()
        };
        assert_decays(&format!("{name} *A-SA"), &take(|r| r.star_a_minus_sa), FLOOR_ALG);
        assert_decays(&format!("{name} *A+AS"), &take(|r| r.star_a_plus_as), FLOOR_ALG);
        assert_decays(&format!("{name} *Q+SQ"), &take(|r| r.star_q_plus_sq), FLOOR_ALG);
        assert_decays(&format!("{name} *Q-QS"), &take(|r| r.star_q_minus_qs), FLOOR_ALG);

        let qpsi = take(|r| r.q_psi);
        let ima = take(|r| r.im_a_dist);
        let nid: Vec<f64> = ms.iter().map(|m| m.normal_identity_check()).collect();
        if name == "control" {
            assert_plateaus("control Q.psi", &qpsi, 1e-3);
            assert_plateaus("control im A", &ima, 1e-3);
            assert_plateaus("control normal identity", &nid, 1e-3);
            continue;
        }
        assert_decays(&format!("{name} Q.psi"), &qpsi, FLOOR_ALG);
        assert_decays(&format!("{name} normal identity"), &nid, FLOOR_DIFF);
        let fine = ms.last().unwrap();
        let a_fine = fine.hopf.a.max_in(fine.interior());
        let q_fine = fine.hopf.q.max_in(fine.interior());
        if q_fine > 0.0 && a_fine / q_fine < 1e-2 {
            // A -> 0: its image is noise and the inclusion is vacuous.
            println!("  {name} im A: vacuous, |A|/|Q| = {:.1e} at finest", a_fine / q_fine);
        } else {
            assert_decays(&format!("{name} im A"), &ima, FLOOR_ALG);
        }
    }
}

#[test]
fn criterion_3_harmonicity_certification() {
    for name in ["round-sphere", "clifford-torus", "catenoid", "twistor-cubic"] {
        let hs: Vec<_> = [32usize, 64, 128]
            .iter()
            .map(|&b| analyzed(name, res_for(name, b)).harmonicity())
            .collect();
        let da: Vec<f64> = hs.iter().map(|h| h.dstar_a).collect();
        let dq: Vec<f64> = hs.iter().map(|h| h.dstar_q).collect();
        assert_decays(&format!("{name} d*A"), &da, FLOOR_DIFF);
        assert_decays(&format!("{name} d*Q"), &dq, FLOOR_DIFF);
    }
    let hs: Vec<_> = [33usize, 65, 129]
        .iter()
        .map(|&n| analyzed("control", n).harmonicity())
        .collect();
    assert_plateaus("control d*A", &hs.iter().map(|h| h.dstar_a).collect::<Vec<_>>(), 1e-2);
    assert_plateaus("control d*Q", &hs.iter().map(|h| h.dstar_q).collect::<Vec<_>>(), 1e-2);
}

#[test]
fn criterion_4_twistor_dichotomy() {
    let tol = Tolerances::default();
    let mut a = Vec::new();
    let mut q = Vec::new();
    let mut flip = Vec::new();
    for n in [33usize, 65, 129] {
        let m = analyzed("twistor-cubic", n);
        let w = m.interior();
        a.push(m.hopf.a.max_in(w));
        q.push(m.hopf.q.max_in(w));
        // The backward transform exists (Q != 0) and its congruence must
        // be the orientation flip -S of the input, as a full matrix.
        let bwd = backlund_backward(&m, &tol, 7).unwrap();
        flip.push(backlund::sphere_relation_residual(&m, &bwd, SphereRelation::FullMatrix).unwrap());
    }
    assert_decays("cubic |A|", &a, FLOOR_ALG);
    let spread = q.iter().cloned().fold(f64::MIN, f64::max)
        / q.iter().cloned().fold(f64::MAX, f64::min);
    println!("  cubic |Q|: {} (max/min {spread:.3})", evidence(&q));
    assert!(spread < 2.0, "|Q| should stay O(1), got {q:?}");
    assert_decays("cubic S-hat vs -S", &flip, FLOOR_CHAIN);

    let led = sequence::run_sequence(&gallery::by_name("twistor-cubic", 65).unwrap(), 3, &tol, 7)
        .unwrap();
    println!(
        "  sequence: {} entries, forward {:?} after {} steps, backward {:?} after {} steps",
        led.entries.len(),
        led.forward.kind,
        led.forward.steps,
        led.backward.kind,
        led.backward.steps
    );
    assert_eq!(led.entries.len(), 2, "twistor sequence must have exactly two elements");
    assert_eq!(led.forward.kind, TerminationKind::Twistor);
    assert_eq!(led.forward.steps, 0);
    assert_eq!(led.backward.steps, 1);

    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["sequence", "twistor-cubic", "--res", "65", "--out"])
        .arg(dir.path())
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    println!("  binary exit code: {:?}", status.code());
    assert_eq!(status.code(), Some(4), "twistor termination must exit 4");
}

#[test]
fn criterion_5_minimal_dichotomy() {
    let tol = Tolerances::default();
    let hs: Vec<f64> = [33usize, 65, 129]
        .iter()
        .map(|&n| {
            let m = analyzed("catenoid", n);
            m.h.max_in(m.interior())
        })
        .collect();
    assert_decays("catenoid |H|", &hs, FLOOR_ALG);

    // Line fields at exactly 128^2, both extractors of both fields.
    let m = mcs::analyze(&gallery::catenoid_patch(128, 1.5).unwrap()).unwrap();
    let w = m.interior();
    let floor = all_zero_floor(&m, &tol);
    let inf = ProjPoint::new(HVec2::new(Quat::ONE, Quat::ZERO)).unwrap();
    let ker = kernel_line_field_smooth(&m.chart, &m.hopf.a, EPS_ZERO_REL, floor).unwrap();
    let im = image_line_field_smooth(&m.chart, &m.hopf.q, EPS_ZERO_REL, floor).unwrap();
    let ker_pin = kernel_line_field(&m.chart, &m.hopf.a, EPS_ZERO_REL, floor).unwrap();
    let im_pin = image_line_field(&m.chart, &m.hopf.q, EPS_ZERO_REL, floor).unwrap();
    let dk = ker.max_distance_to(&inf, w);
    let di = im.max_distance_to(&inf, w);
    println!(
        "  chordal distance to infinity at 128^2: ker A {dk:.3e}, im Q {di:.3e} \
         (per-node extractors: {:.3e}, {:.3e})",
        ker_pin.max_distance_to(&inf, w),
        im_pin.max_distance_to(&inf, w)
    );
    assert!(dk <= 1e-4, "ker A distance to infinity {dk:.3e} > 1e-4");
    assert!(di <= 1e-4, "im Q distance to infinity {di:.3e} > 1e-4");

    let led =
        sequence::run_sequence(&gallery::by_name("catenoid", 65).unwrap(), 3, &tol, 7).unwrap();
    let (kind, side) = led.overall();
    assert_eq!(kind, TerminationKind::Minimal);
    assert_eq!(side, Side::Both, "minimal termination must hold in both directions");
    let coincide = led
        .forward
        .evidence
        .iter()
        .find(|(k, _)| k == "constant_coincidence")
        .map(|(_, v)| *v)
        .expect("coincidence evidence");
    println!("  both directions constant, chordal coincidence {coincide:.3e}");
    assert!(coincide < 1e-3, "forward/backward constants differ by {coincide:.3e}");

    // A Moebius image of the catenoid has its constant transform point
    // moved off infinity; inverting at that point must return a minimal
    // chart, |H| = O(h^2).
    let g = HMat2::new(
        Quat::ONE,
        Quat::new(0.0, 0.0, 0.5, 0.0),
        Quat::new(0.0, 0.0, 0.0, 0.25),
        Quat::new(1.0, 0.5, 0.0, 0.0),
    );
    let mut hinv = Vec::new();
    for n in [33usize, 65, 129] {
        let moeb = moebius_apply(&g, &gallery::catenoid_patch(n, 1.5).unwrap()).unwrap();
        let mm = mcs::analyze(&moeb).unwrap();
        let fl = all_zero_floor(&mm, &tol);
        let lf = kernel_line_field_smooth(&mm.chart, &mm.hopf.a, EPS_ZERO_REL, fl).unwrap();
        // Take the constant with a loose spread gate: the conjugated
        // extraction is noisier than the driver's classification gate,
        // but the point it scatters around is still the right one.
        let q = lf
            .constant_line(mm.interior(), 0.5)
            .expect("constant transform point")
            .affine(1e-9)
            .expect("finite point");
        let inv = moebius_apply(&backlund::invert_at(q), &moeb).unwrap();
        let mi = mcs::analyze(&inv).unwrap();
        hinv.push(mi.h.max_in(mi.interior()));
    }
    assert_decays("inverted Moebius catenoid |H|", &hinv, FLOOR_ALG);
}

#[test]
fn criterion_6_transform_involution_suite() {
    let tol = Tolerances::default();
    let mut t_fwd = Vec::new();
    let mut t_bwd = Vec::new();
    let mut rel = Vec::new();
    let mut harm_t = Vec::new();
    for n in [32usize, 64, 128] {
        let m = analyzed("clifford-torus", n);
        let fwd = backlund_forward(&m, &tol, 7).unwrap();
        let bwd = backlund_backward(&m, &tol, 7).unwrap();
        t_fwd.push(backlund::hopf_transport_residual(&m, &fwd, true).unwrap());
        t_bwd.push(backlund::hopf_transport_residual(&m, &bwd, false).unwrap());
        rel.push(
            backlund::sphere_relation_residual(&m, &fwd, SphereRelation::ForwardQuotient).unwrap(),
        );
        harm_t.push(mcs::analyze(&fwd.surface).unwrap().harmonicity().max());
        let inv = backlund::involution_residual(&m, &fwd, &tol).unwrap();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let gate = 5.0 * h * h * tol.scale;
        println!("  n={n}: involution {inv:.3e} (gate {gate:.3e})");
        assert!(inv <= gate, "involution residual {inv:.3e} > 5 h^2 = {gate:.3e} at {n}");
    }
    // The Clifford torus is spectrally exact under centered stencils, so
    // the whole transform chain sits at the roundoff floor.
    assert_decays("clifford Q-tilde vs A", &t_fwd, FLOOR_CHAIN);
    assert_decays("clifford A-hat vs Q", &t_bwd, FLOOR_CHAIN);
    assert_decays("clifford S-tilde on V/L-tilde", &rel, FLOOR_CHAIN);
    assert_decays("clifford harmonicity of f-tilde", &harm_t, FLOOR_CHAIN);
}

#[test]
fn criterion_7_one_step_suite() {
    let tol = Tolerances::default();
    // Torus, standard affine frame: full refinement triple.
    let mut cons: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for n in [32usize, 64, 128] {
        let s = gallery::clifford_torus(n).unwrap();
        let one = backlund::one_step(&s, &AffineFrame::standard(), &tol).unwrap();
        println!("  clifford n={n}: defect {:.3e} (allowed {:.3e})", one.defect, one.allowed_defect);
        assert!(one.defect <= one.allowed_defect, "closedness defect over gate at {n}");
        let sharp = backlund::sharp_sphere_data(&one, &tol).unwrap();
        let c = backlund::sharp_consistency(&one, &sharp).unwrap();
        for (k, v) in [c.n_dist, c.r_dist, c.h_dist, c.frame_rel, c.mean_x, c.mean_y]
            .into_iter()
            .enumerate()
        {
            cons[k].push(v);
        }
    }
    for (k, label) in ["N# = -R", "R# = <beta,Se>", "H# mean", "R#H# = H#N#", "mean-sharp x", "mean-sharp y"]
        .into_iter()
        .enumerate()
    {
        assert_decays(&format!("clifford {label}"), &cons[k], FLOOR_CHAIN);
    }
    // Disk chart, inverted frame: the 33^2 chart is pre-asymptotic for
    // integrated quantities (the rebuilt chart's margin is a fixed cell
    // count, a third of the chart there), so the order is certified on
    // the 65 -> 129 halving.
    let mut cons: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::new());
    for n in [65usize, 129] {
        let s = gallery::catenoid_patch(n, 1.5).unwrap();
        let one = backlund::one_step(&s, &AffineFrame::inverted(), &tol).unwrap();
        println!("  catenoid n={n}: defect {:.3e} (allowed {:.3e})", one.defect, one.allowed_defect);
        assert!(one.defect <= one.allowed_defect, "closedness defect over gate at {n}");
        let sharp = backlund::sharp_sphere_data(&one, &tol).unwrap();
        let c = backlund::sharp_consistency(&one, &sharp).unwrap();
        for (k, v) in [c.n_dist, c.r_dist, c.h_dist, c.frame_rel, c.mean_x, c.mean_y]
            .into_iter()
            .enumerate()
        {
            cons[k].push(v);
        }
    }
    for (k, label) in ["N# = -R", "R# = <beta,Se>", "H# mean", "R#H# = H#N#", "mean-sharp x", "mean-sharp y"]
        .into_iter()
        .enumerate()
    {
        assert_decays(&format!("catenoid {label}"), &cons[k], FLOOR_CHAIN);
    }
}

#[test]
fn criterion_8_quantization() {
    let tol = Tolerances::default();
    let m = analyzed("clifford-torus", 128);
    let deg = m.degree();
    let rounded = deg.rounded.expect("degree is defined on the torus");
    let defect = deg.rounding_residual.expect("rounding defect");
    println!("  deg(V,S) = {:.6} rounds to {rounded} (defect {defect:.3e})", deg.value);
    assert!(defect < 0.05, "degree defect {defect:.3e}");

    let m = analyzed("clifford-torus", 64);
    let w0 = m.willmore_energy();
    let v = m.degree().rounded.expect("degree is defined on the torus");
    let fwd = backlund_forward(&m, &tol, 7).unwrap();
    let w1 = mcs::analyze(&fwd.surface).unwrap().willmore_energy();
    let resid = (w1 - w0 - 4.0 * std::f64::consts::PI * v as f64).abs();
    println!("  one forward step: W {w0:.6} -> {w1:.6}, v = {v}, |dW - 4 pi v| = {resid:.3e}");
    assert!(resid <= 0.02 * w0, "energy step violates quantization: {resid:.3e}");
}

#[test]
fn criterion_9_determinism() {
    let run = |threads: &str| -> (Vec<u8>, serde_json::Value) {
        let dir = tempfile::tempdir().unwrap();
        let status = bin()
            .args(["analyze", "clifford-torus", "--res", "48", "--seed", "3"])
            .args(["--threads", threads, "--out"])
            .arg(dir.path())
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let bytes = std::fs::read(dir.path().join("clifford-torus-48-analyze.json")).unwrap();
        let v = serde_json::from_slice(&bytes).unwrap();
        (bytes, v)
    };
    let (a, va) = run("1");
    let (b, _) = run("1");
    assert_eq!(a, b, "single-threaded reports are not byte-identical");
    let (c, vc) = run("4");
    let mut drift = 0.0f64;
    for key in ["results", "residuals"] {
        for (k, x) in va[key].as_object().unwrap() {
            if let (Some(x), Some(y)) = (x.as_f64(), vc[key][k].as_f64()) {
                drift = drift.max((x - y).abs());
            }
        }
    }
    println!(
        "  run-to-run: byte-identical; threads 1 vs 4: numeric drift {drift:.1e}, byte-identical: {}",
        a == c
    );
    assert!(drift <= 1e-12, "thread count changed results by {drift:.1e}");
}
