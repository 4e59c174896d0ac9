//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every tolerance used below is pinned in `tol`.

use std::f64::consts::FRAC_2_PI;
use std::process::ExitCode;
use std::time::Instant;

use photon_wigner::calibration::{calibrate, rebin_counts};
use photon_wigner::detector::{acquire, derive_seed, DetectorModel};
use photon_wigner::experiment::commands::{Summary, SECTION_JSON};
use photon_wigner::experiment::{self, RunConfig};
use photon_wigner::field_states::{mixed_cutoff, ProbeSetting, SignalState};
use photon_wigner::photon_statistics::{
    default_cutoff, phase_avg_coherent_dist, poisson_dist, thermal_dist, ProbDist,
};
use photon_wigner::wigner::{
    analytic_gaussian_wigner, analytic_phase_avg_wigner, loss_smoothed_wigner, wigner_from_dist,
    PhaseSpacePoint, WignerSection,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

mod tol {
    pub const GAMMA_REL: f64 = 0.02;
    pub const SLOPE_SIGMAS: f64 = 3.0;
    pub const MIN_SEEDS_OK: usize = 95;
    pub const SEEDS: u64 = 100;
    pub const VACUUM_FIDELITY: f64 = 0.999;
    pub const ABS_MEAN_ERROR: f64 = 5e-3;
    pub const ORIGIN_SIGMAS: f64 = 3.0;
    pub const CLOSED_FORM: f64 = 1e-12;
    pub const LOSS_FORM: f64 = 1e-6;
    pub const LOSS_QUADRATURE: f64 = 1e-8;
    pub const BESSEL_SERIES: f64 = 1e-6;
    pub const THINNING: f64 = 1e-12;
    pub const MANDEL_Q: f64 = 1e-9;
    pub const CONVOLUTION: f64 = 1e-12;
    pub const PROPERTY_CASES: u32 = 1000;
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn calibration_recovery() -> Outcome {
    let cfg = RunConfig::preset("vacuum").map_err(|e| e.to_string())?;
    let probe = ProbeSetting::new(cfg.probe.calibration_amplitude.unwrap(), 0.0, 1.0).unwrap();
    let mut ok = 0;
    let mut worst = 0.0f64;
    for s in 0..tol::SEEDS {
        let master = derive_seed(0xCA11_B0A7, s);
        let records: Vec<_> = cfg
            .detector
            .etas
            .iter()
            .enumerate()
            .map(|(k, &eta)| {
                let det = DetectorModel::with_noise(eta, 1.0, 0.1).unwrap();
                acquire(
                    &SignalState::Vacuum,
                    &probe,
                    &det,
                    30_000,
                    derive_seed(master, k as u64),
                )
                .unwrap()
            })
            .collect();
        let Ok(rep) = calibrate(&records) else {
            continue;
        };
        let r = rep.result;
        let rel = (r.gamma_hat - 1.0).abs();
        worst = worst.max(rel);
        if rel <= tol::GAMMA_REL && r.slope_consistent_with_zero(tol::SLOPE_SIGMAS) {
            ok += 1;
        }
    }
    check(
        ok >= tol::MIN_SEEDS_OK,
        format!(
            "{ok}/{} seeds with |gamma_hat - 1| <= {} and slope within {} sigma of 0 (need {}); worst |gamma_hat - 1| = {worst:.4}",
            tol::SEEDS,
            tol::GAMMA_REL,
            tol::SLOPE_SIGMAS,
            tol::MIN_SEEDS_OK
        ),
    )
}

struct PresetRun {
    summary: Summary,
    section: WignerSection,
}

fn run_preset(name: &str) -> Result<PresetRun, String> {
    let mut cfg = RunConfig::preset(name).map_err(|e| e.to_string())?;
    // thresholds are judged here, not by the pipeline
    cfg.acceptance = None;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let summary = experiment::pipeline(&cfg, dir.path(), None).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.path().join(SECTION_JSON)).map_err(|e| e.to_string())?;
    let section = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    Ok(PresetRun { summary, section })
}

fn origin_check(section: &WignerSection, expected: f64) -> (bool, String) {
    let Some(s) = section.samples.iter().find(|s| s.point.beta_mag() == 0.0) else {
        return (false, "no sample at beta = 0".into());
    };
    let dev = (s.w_est - expected).abs();
    (
        dev <= tol::ORIGIN_SIGMAS * s.stderr + s.trunc_bound,
        format!(
            "w_est(0) = {:.5} vs {expected:.5} (|d| = {dev:.2e}, {} SE = {:.2e})",
            s.w_est,
            tol::ORIGIN_SIGMAS,
            tol::ORIGIN_SIGMAS * s.stderr
        ),
    )
}

fn vacuum_section() -> Outcome {
    let run = run_preset("vacuum")?;
    let s = &run.summary;
    let min_f = s
        .points
        .iter()
        .map(|p| p.fidelity_corrected)
        .fold(f64::INFINITY, f64::min);
    let (origin_ok, origin) = origin_check(&run.section, FRAC_2_PI);
    check(
        s.points.len() == 15
            && min_f >= tol::VACUUM_FIDELITY
            && s.mean_error.abs() <= tol::ABS_MEAN_ERROR
            && origin_ok,
        format!(
            "{} points, min fidelity {min_f:.6} (>= {}), epsilon = {:.3e} (|eps| <= {}), {origin}",
            s.points.len(),
            tol::VACUUM_FIDELITY,
            s.mean_error,
            tol::ABS_MEAN_ERROR
        ),
    )
}

fn gap(s: &Summary) -> f64 {
    s.mean_fidelity_corrected - s.mean_fidelity_uncorrected
}

fn phase_averaged_section(run: &PresetRun) -> Outcome {
    let s = &run.summary;
    check(
        gap(s) > 0.0 && s.mean_error.abs() <= tol::ABS_MEAN_ERROR,
        format!(
            "mean fidelity {:.6} corrected vs {:.6} uncorrected, epsilon = {:.3e} (|eps| <= {})",
            s.mean_fidelity_corrected,
            s.mean_fidelity_uncorrected,
            s.mean_error,
            tol::ABS_MEAN_ERROR
        ),
    )
}

fn thermal_section(run: &PresetRun, phase_averaged_gap: Option<f64>) -> Outcome {
    let s = &run.summary;
    let expected = FRAC_2_PI / (1.0 + 2.0 * 1.96);
    let (origin_ok, origin) = origin_check(&run.section, expected);
    let wider = phase_averaged_gap.is_none_or(|g| gap(s) > g);
    check(
        gap(s) > 0.0 && wider && origin_ok && s.mean_error.abs() <= tol::ABS_MEAN_ERROR,
        format!(
            "mean fidelity {:.6} corrected vs {:.6} uncorrected (gap {:.2e}, phase-averaged gap {}), {origin}, epsilon = {:.3e}",
            s.mean_fidelity_corrected,
            s.mean_fidelity_uncorrected,
            gap(s),
            phase_averaged_gap.map_or("n/a".into(), |g| format!("{g:.2e}")),
            s.mean_error
        ),
    )
}

fn analytic_oracles() -> Outcome {
    let mut worst = [0.0f64; 5];

    for mu in [0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let p = poisson_dist(mu, default_cutoff(mu, mu)).unwrap();
        let d = (wigner_from_dist(&p).w_est - FRAC_2_PI * (-2.0 * mu).exp()).abs();
        worst[0] = worst[0].max(d);
    }
    for m_th in [0.0, 0.1, 0.5, 1.0, 1.96, 4.0] {
        // long enough that the geometric tail is far below the tolerance
        let p = thermal_dist(m_th, 600).unwrap();
        let d = (wigner_from_dist(&p).w_est - FRAC_2_PI / (1.0 + 2.0 * m_th)).abs();
        worst[1] = worst[1].max(d);
    }

    let betas = [
        PhaseSpacePoint::origin(),
        PhaseSpacePoint::new(0.5, 0.0),
        PhaseSpacePoint::new(-0.3, 0.8),
        PhaseSpacePoint::new(1.2, 0.4),
        PhaseSpacePoint::from_polar(2.0, 2.3),
    ];
    for beta0 in [PhaseSpacePoint::origin(), PhaseSpacePoint::new(0.6, -0.3)] {
        for m_th in [0.0, 0.5, 2.0] {
            for eta in [0.1f64, 0.31, 0.9] {
                let w = |b| analytic_gaussian_wigner(m_th, beta0, b).unwrap();
                for &beta in &betas {
                    let got = match loss_smoothed_wigner(w, eta, beta, tol::LOSS_QUADRATURE) {
                        Ok(v) => v,
                        Err(e) => return Err(format!("loss smoothing failed: {e}")),
                    };
                    let want = analytic_gaussian_wigner(eta * m_th, beta0.scaled(eta.sqrt()), beta)
                        .unwrap();
                    worst[2] = worst[2].max((got - want).abs());
                }
            }
        }
    }

    let mut bessel_ok = true;
    for b0 in [0.0, 0.5, 1.0, 1.41f64.sqrt(), 2.0] {
        for b in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let state = SignalState::phase_averaged(b0).unwrap();
            let cutoff = mixed_cutoff(&state, num_complex::Complex64::new(b, 0.0), 1.0);
            let est = wigner_from_dist(&phase_avg_coherent_dist(b0 * b0, b * b, cutoff).unwrap());
            let d = (est.w_est - analytic_phase_avg_wigner(b0, b).unwrap()).abs();
            bessel_ok &= d <= tol::BESSEL_SERIES + est.trunc_bound;
            worst[3] = worst[3].max(d);
        }
    }

    for mu in [0.5, 3.0, 12.0, 30.0] {
        let m = default_cutoff(mu, mu);
        for eta in [0.05, 0.31, 0.9] {
            let thinned = poisson_dist(mu, m).unwrap().bernoulli_loss(eta).unwrap();
            let direct = poisson_dist(eta * mu, m).unwrap();
            for k in 0..=m {
                worst[4] = worst[4].max((thinned.get(k) - direct.get(k)).abs());
            }
        }
    }

    check(
        worst[0] <= tol::CLOSED_FORM
            && worst[1] <= tol::CLOSED_FORM
            && worst[2] <= tol::LOSS_FORM
            && bessel_ok
            && worst[4] <= tol::THINNING,
        format!(
            "max deviations: Poisson parity {:.1e}, thermal parity {:.1e}, loss-channel Gaussian {:.1e}, Bessel vs series {:.1e}, Poisson thinning {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn arb_dist() -> impl Strategy<Value = ProbDist> {
    prop::collection::vec(0.0f64..1.0, 2..30)
        .prop_filter("positive mass", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| {
            let total: f64 = w.iter().sum();
            ProbDist::new(w.into_iter().map(|x| x / total).collect()).unwrap()
        })
}

fn arb_state() -> impl Strategy<Value = SignalState> {
    prop_oneof![
        Just(SignalState::Vacuum),
        (0.0f64..3.0, 0.0f64..6.0).prop_map(|(a, p)| SignalState::coherent(a, p).unwrap()),
        (0.0f64..4.0).prop_map(|m| SignalState::thermal(m).unwrap()),
        (0.0f64..3.0).prop_map(|a| SignalState::phase_averaged(a).unwrap()),
    ]
}

fn runner() -> TestRunner {
    let config = Config {
        cases: tol::PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn max_diff(a: &ProbDist, b: &ProbDist) -> f64 {
    (0..=a.cutoff().max(b.cutoff()))
        .map(|m| (a.get(m) - b.get(m)).abs())
        .fold(0.0, f64::max)
}

fn property_suite() -> Outcome {
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };

    record(
        "thinning composition",
        runner()
            .run(&(arb_dist(), 0.0f64..=1.0, 0.0f64..=1.0), |(p, a, b)| {
                let twice = p.bernoulli_loss(a).unwrap().bernoulli_loss(b).unwrap();
                let once = p.bernoulli_loss(a * b).unwrap();
                prop_assert!(max_diff(&twice, &once) <= tol::THINNING);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    record(
        "mean and Q scaling",
        runner()
            .run(&(arb_dist(), 0.01f64..=1.0), |(p, eta)| {
                let q = p.bernoulli_loss(eta).unwrap();
                prop_assert!((q.mean() - eta * p.mean()).abs() <= tol::THINNING);
                let (mp, mq) = (p.moments(), q.moments());
                if let (Some(a), Some(b)) = (mp.mandel_q, mq.mandel_q) {
                    prop_assert!((b - eta * a).abs() <= tol::MANDEL_Q, "{b} vs {}", eta * a);
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    record(
        "convolution algebra",
        runner()
            .run(&(arb_dist(), arb_dist(), arb_dist()), |(a, b, c)| {
                prop_assert!(max_diff(&a.convolve(&b), &b.convolve(&a)) <= tol::CONVOLUTION);
                let left = a.convolve(&b).convolve(&c);
                let right = a.convolve(&b.convolve(&c));
                prop_assert!(max_diff(&left, &right) <= tol::CONVOLUTION);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    record(
        "rebin exactness",
        runner()
            .run(
                &(prop::collection::vec(0u64..60, 1..400), 0.05f64..20.0),
                |(ms, gamma)| {
                    let v: Vec<f64> = ms.iter().map(|&m| gamma * m as f64).collect();
                    let counts = rebin_counts(&v, gamma).unwrap();
                    let top = *ms.iter().max().unwrap() as usize;
                    prop_assert_eq!(counts.len(), top + 1);
                    for (m, &c) in counts.iter().enumerate() {
                        prop_assert_eq!(
                            c as usize,
                            ms.iter().filter(|&&x| x as usize == m).count()
                        );
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    );

    record(
        "determinism",
        runner()
            .run(
                &(
                    arb_state(),
                    any::<u64>(),
                    1usize..300,
                    0.0f64..3.0,
                    0.01f64..=1.0,
                ),
                |(state, seed, n, alpha, eta)| {
                    let probe = ProbeSetting::new(alpha, 0.4, 0.8).unwrap();
                    let det = DetectorModel::new(eta, 1.0).unwrap();
                    let a = acquire(&state, &probe, &det, n, seed).unwrap();
                    let b = acquire(&state, &probe, &det, n, seed).unwrap();
                    prop_assert_eq!(a.to_csv(), b.to_csv());
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    );

    record(
        "|w_est| bound",
        runner()
            .run(&arb_dist(), |p| {
                let w = wigner_from_dist(&p).w_est;
                prop_assert!(w.abs() <= FRAC_2_PI * p.total_mass() + 1e-15);
                Ok(())
            })
            .map_err(|e| e.to_string()),
    );

    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "6 properties x {} cases: thinning composition, mean/Q scaling, convolution algebra, rebin exactness, determinism, |w_est| bound",
                tol::PROPERTY_CASES
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let mut all_ok = true;
    let mut report = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                all_ok = false;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {id} ({name}, {secs:.1}s): {detail}");
    };

    report(1, "calibration recovery", &mut calibration_recovery);
    report(2, "vacuum section", &mut vacuum_section);

    let phase = run_preset("phase-averaged");
    let phase_gap = phase.as_ref().ok().map(|r| gap(&r.summary));
    report(3, "phase-averaged section", &mut || {
        phase
            .as_ref()
            .map_err(Clone::clone)
            .and_then(phase_averaged_section)
    });
    report(4, "thermal section", &mut || {
        run_preset("thermal").and_then(|r| thermal_section(&r, phase_gap))
    });
    report(5, "analytic oracles", &mut analytic_oracles);
    report(6, "property suite", &mut property_suite);

    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
