//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use airy_epr::biphoton::{
    apply_arm, coincidence_map, conditional_slice, make_source, Arm, CoincidenceMap, SourceSpec,
};
use airy_epr::config::ExperimentConfig;
use airy_epr::experiment::{
    airy_ballistics, calibrate, gaussian_beam_oracle, quadrature_oracle, run_campaign, witness_saturation_oracle,
    Campaign,
};
use airy_epr::grid::{ComplexField, Domain, TransverseGrid};
use airy_epr::mask::{airy_mask, apply_mask, AiryMaskSpec, MaskPlacement};
use airy_epr::measurement::{simulate_scan, Basis, DetectorSpec, ScanSpec};
use airy_epr::propagation::{fourier_lens, fresnel_transfer, OpticalElement, OpticalSystem};
use airy_epr::witness::{joint_variances, UnitConvention};
use common::{pearson, AiryTable, FIFTH_ZERO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const LAMBDA: f64 = 810e-9;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn timed(f: impl FnOnce() -> Verdict) -> (Verdict, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn k() -> f64 {
    2.0 * PI / LAMBDA
}

// 1. Fresnel transfer vs direct quadrature, and Gaussian-beam widths.
fn propagator() -> Verdict {
    let cfg = ExperimentConfig::default();
    let quad = quadrature_oracle(&cfg);
    let beam = gaussian_beam_oracle(LAMBDA);
    match (quad, beam) {
        (Ok((q, _)), Ok((b, _))) => verdict(
            q < 1e-6 && b < 1e-3,
            format!("quadrature max error {q:.2e} (< 1e-6), beam width error {b:.2e} (< 1e-3)"),
        ),
        (q, b) => verdict(false, format!("oracle error: {:?} / {:?}", q.err(), b.err())),
    }
}

// 2. Plane wave through the cubic-phase mask and a Fourier lens.
fn airy_generation() -> Verdict {
    let n = 4096;
    let focal = 0.3;
    let slm = TransverseGrid::new(n, 8e-6, 0.0).unwrap();
    let out_dx = slm.dq() * focal / k();
    let spec = AiryMaskSpec::new(5.0 * out_dx, 0.0, 0.0, k()).unwrap();
    let mask = airy_mask(&spec, &slm, MaskPlacement::LensInput { focal }).unwrap();
    let plane = ComplexField::new(slm, vec![Complex64::new(1.0, 0.0); n]).unwrap();
    let out = fourier_lens(&apply_mask(&plane, &mask).unwrap(), focal, k()).unwrap();
    let table = AiryTable::new(-9.0, 3.5);
    let (sim, exact): (Vec<f64>, Vec<f64>) = (0..n)
        .filter_map(|j| {
            let s = out.grid().x(j) / spec.x0;
            (FIFTH_ZERO..=3.0)
                .contains(&s)
                .then(|| (out.values()[j].norm_sqr(), table.eval(s).powi(2)))
        })
        .collect();
    let r = pearson(&sim, &exact);
    verdict(r > 0.99, format!("correlation with |Ai(x/x0)|² over five lobes {r:.6} (> 0.99)"))
}

// 3. Parabolic deflection and mask-Z / free-space equivalence.
fn ballistics() -> Verdict {
    let b = match airy_ballistics(LAMBDA, 9, 4.0) {
        Ok(b) => b,
        Err(e) => return verdict(false, e.to_string()),
    };
    let coef_err = (b.coefficient / b.expected - 1.0).abs();

    let g = TransverseGrid::new(2048, 4e-6, 0.0).unwrap();
    let x0 = 16e-6;
    let input = ComplexField::from_fn(g, |x| Complex64::new((-(x / 6e-4).powi(2)).exp(), 0.0)).unwrap();
    let (zs, z) = (0.004, 0.003);
    let with_z = airy_mask(&AiryMaskSpec::new(x0, 0.05, zs, k()).unwrap(), &g, MaskPlacement::Spectral).unwrap();
    let plain = airy_mask(&AiryMaskSpec::new(x0, 0.05, 0.0, k()).unwrap(), &g, MaskPlacement::Spectral).unwrap();
    let a = fresnel_transfer(&apply_mask(&input, &with_z).unwrap(), z, k());
    let c = fresnel_transfer(&apply_mask(&input, &plain).unwrap(), z + zs, k());
    let scale = a.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let equiv = a
        .values()
        .iter()
        .zip(c.values())
        .map(|(u, v)| (u - v).norm())
        .fold(0.0, f64::max)
        / scale;
    verdict(
        b.distances.len() >= 8 && coef_err < 0.02 && b.r_squared > 0.999 && equiv < 1e-8,
        format!(
            "{} planes, coefficient error {:.2}% (< 2%), R² {:.6} (> 0.999), Z-equivalence {equiv:.1e} (< 1e-8)",
            b.distances.len(),
            100.0 * coef_err,
            b.r_squared
        ),
    )
}

// 4. Ideal EPR source with the Airy mask acting on the idler spectrum.
fn epr_airy_map() -> Verdict {
    let n = 512;
    let dx = 2e-6;
    let g = TransverseGrid::new(n, dx, 0.0).unwrap();
    let source = make_source(SourceSpec::IdealEpr { sigma_minus: None }, g, g).unwrap();
    let x0 = 2.9 * dx;
    let mask = match airy_mask(&AiryMaskSpec::new(x0, 0.0, 0.0, k()).unwrap(), &g, MaskPlacement::Spectral) {
        Ok(m) => m,
        Err(e) => return verdict(false, e.to_string()),
    };
    let idler = OpticalSystem::new(LAMBDA, vec![OpticalElement::Mask(mask)]).unwrap();
    let state = apply_arm(&source, Arm::Idler, &idler).unwrap().to_position();
    let map = coincidence_map(&state);
    // coincidence rate summed along x_s + x_i, as a function of x_i - x_s
    let mut diff = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            diff[j + n - 1 - i] += map.values()[i * n + j];
        }
    }
    let table = AiryTable::new(-9.0, 3.5);
    let (sim, exact): (Vec<f64>, Vec<f64>) = diff
        .iter()
        .enumerate()
        .filter_map(|(m, v)| {
            let u = (m as f64 - (n - 1) as f64) * map.grid(Arm::Idler).dx() / x0;
            (FIFTH_ZERO..=3.0).contains(&u).then(|| (*v, table.eval(u).powi(2)))
        })
        .collect();
    let r = pearson(&sim, &exact);
    let slice = conditional_slice(&map, Arm::Signal, 0.0).unwrap();
    let (s_sim, s_exact): (Vec<f64>, Vec<f64>) = (0..n)
        .filter_map(|j| {
            let u = slice.coordinate(j) / x0;
            (FIFTH_ZERO..=3.0)
                .contains(&u)
                .then(|| (slice.values[j], table.eval(u).powi(2)))
        })
        .collect();
    let rs = pearson(&s_sim, &s_exact);
    verdict(
        r > 0.99 && rs > 0.99,
        format!("n = {n}: correlation with |Ai((x_i - x_s)/x0)|² {r:.6} (difference profile), {rs:.6} (slice at x_s = 0), both > 0.99"),
    )
}

// Random 1D wavefunction: a few Gaussian packets with random centres,
// widths, chirps, kicks and phases.
fn random_packet(rng: &mut ChaCha20Rng, g: TransverseGrid) -> ComplexField {
    let terms = rng.random_range(1..=3);
    let packets: Vec<(f64, f64, f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            (
                rng.random_range(-12.0..12.0) * g.dx(),
                rng.random_range(2.0..8.0) * g.dx(),
                rng.random_range(-0.05..0.05) / (g.dx() * g.dx()),
                rng.random_range(-0.2..0.2) * g.q_nyquist(),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    ComplexField::from_fn(g, |x| {
        packets
            .iter()
            .map(|&(c, w, chirp, kick, phase, amp)| {
                let s = (x - c) / w;
                Complex64::from_polar(amp * (-0.5 * s * s).exp(), chirp * (x - c).powi(2) + kick * x + phase)
            })
            .sum()
    })
    .unwrap()
}

fn product_maps(f: &ComplexField, h: &ComplexField) -> (Vec<f64>, Vec<f64>) {
    let outer = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
        a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
    };
    let pos = outer(f.intensity(), h.intensity());
    let mom = outer(f.spectrum().power(), h.spectrum().power());
    (pos, mom)
}

// 5. Two-mode vacuum saturates the bound; separable states never violate it.
fn witness_soundness() -> Verdict {
    let vacuum = match witness_saturation_oracle() {
        Ok((err, _)) => err,
        Err(e) => return verdict(false, e.to_string()),
    };
    let g = TransverseGrid::new(128, 1e-5, 0.0).unwrap();
    let units = UnitConvention::new(1e-5).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let normalize = |mut v: Vec<f64>| {
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        v
    };
    for i in 0..1000 {
        // even index: pure product; odd: mixture of up to four products
        let parts = if i % 2 == 0 { 1 } else { rng.random_range(2..=4) };
        let mut pos = vec![0.0; 128 * 128];
        let mut mom = vec![0.0; 128 * 128];
        for _ in 0..parts {
            let w: f64 = rng.random_range(0.1..1.0);
            let (p, m) = product_maps(&random_packet(&mut rng, g), &random_packet(&mut rng, g));
            let (p, m) = (normalize(p), normalize(m));
            pos.iter_mut().zip(&p).for_each(|(a, b)| *a += w * b);
            mom.iter_mut().zip(&m).for_each(|(a, b)| *a += w * b);
        }
        let pmap = CoincidenceMap::from_weights([g, g], [Domain::Position; 2], pos).unwrap();
        let mmap = CoincidenceMap::from_weights([g, g], [Domain::Wavenumber; 2], mom).unwrap();
        let (vx, vp) = joint_variances(&pmap, &mmap, &units, None).unwrap();
        let product = vx * vp;
        worst = worst.min(product);
        if product < 0.99 {
            violations += 1;
        }
    }
    verdict(
        vacuum < 0.01 && violations == 0,
        format!(
            "vacuum |product - 1| = {vacuum:.1e} (< 0.01); 1000 separable states, {violations} below 0.99, minimum product {worst:.4}"
        ),
    )
}

struct CampaignNumbers {
    free: f64,
    crystal: Vec<f64>,
    propagated: Vec<f64>,
    peaks: Vec<(f64, f64)>,
    ratio: f64,
}

fn campaigns() -> Result<CampaignNumbers, String> {
    let mut cfg = ExperimentConfig::default();
    let cal = calibrate(&cfg).map_err(|e| e.to_string())?;
    cfg.sigma_minus = cal.sigma_minus;
    let run = |c| run_campaign(&cfg, c).map_err(|e| e.to_string());
    let free = run(Campaign::Free)?;
    let crystal = run(Campaign::CrystalFaceAiry)?;
    let propagated = run(Campaign::PropagatedPlaneAiry)?;
    Ok(CampaignNumbers {
        free: free.products()[0],
        crystal: crystal.products(),
        propagated: propagated.products(),
        peaks: crystal.entries.iter().map(|e| (e.z, e.momentum_peak)).collect(),
        ratio: cal.ratio,
    })
}

// 6. Calibrated free baseline and the crystal-face Airy campaign.
fn calibration(nums: &Result<CampaignNumbers, String>) -> Verdict {
    let n = match nums {
        Ok(n) => n,
        Err(e) => return verdict(false, e.clone()),
    };
    let max = n.crystal.iter().cloned().fold(f64::MIN, f64::max);
    let min = n.crystal.iter().cloned().fold(f64::MAX, f64::min);
    let ok = (n.free - 0.090).abs() <= 0.005 && max < 1.0 && min > n.free && max - min < 0.05;
    verdict(
        ok,
        format!(
            "σ₋/σ₊ = {:.4}; free {:.4} (0.090 ± 0.005); crystal face {:?}: all < 1, all > free, spread {:.4} (< 0.05)",
            n.ratio,
            n.free,
            n.crystal.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>(),
            max - min
        ),
    )
}

// 7. Propagated-plane campaign stays entangled and above the crystal face.
fn propagated(nums: &Result<CampaignNumbers, String>) -> Verdict {
    let n = match nums {
        Ok(n) => n,
        Err(e) => return verdict(false, e.clone()),
    };
    let crystal_max = n.crystal.iter().cloned().fold(f64::MIN, f64::max);
    let ok = n.propagated.iter().all(|&p| p < 1.0 && p > crystal_max);
    verdict(
        ok,
        format!(
            "propagated {:?}: all < 1 and above the crystal-face maximum {crystal_max:.3}",
            n.propagated.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()
        ),
    )
}

// 8. Width coverage of the fit over seeded repeats, and byte determinism.
fn measurement_statistics() -> Verdict {
    let g = TransverseGrid::new(256, 10e-6, 0.0).unwrap();
    let (sp, sm) = (8.0 * g.dq(), 24.0 * g.dq());
    let source = make_source(
        SourceSpec::GaussianSpdc {
            sigma_plus: sp,
            sigma_minus: sm,
        },
        g,
        g,
    )
    .unwrap();
    let map = coincidence_map(&source.to_position());
    let aperture = 8.0 * g.dx();
    // conditional width of |c|² at x_s = 0, widened by the idler aperture
    let truth = (1.0 / (sp * sp + sm * sm) + aperture * aperture).sqrt();
    let idler = DetectorSpec::new(aperture, 1.0).unwrap();
    let signal = DetectorSpec::ideal();
    let positions: Vec<f64> = (98..=158).map(|j| g.x(j)).collect();
    let scan = |seed| {
        let spec = ScanSpec {
            positions: positions.clone(),
            fixed_position: 0.0,
            integration_time: 10.0,
            mean_rate_at_peak: 100.0,
            rng_seed: seed,
        };
        simulate_scan(&map, Arm::Idler, &spec, &signal, &idler, Basis::Position, 0.0).unwrap()
    };
    let mut covered = 0;
    let mut peak = 0.0;
    for seed in 0..200 {
        let r = scan(seed);
        peak += r.expected.iter().cloned().fold(0.0, f64::max) / 200.0;
        if r.fit.converged && (r.fit.sigma.value - truth).abs() <= r.fit.sigma.uncertainty {
            covered += 1;
        }
    }
    let coverage = covered as f64 / 200.0;
    let bytes = |seed| {
        let r = scan(seed);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        (csv, r.sidecar_json().unwrap())
    };
    let deterministic = bytes(42) == bytes(42);
    verdict(
        (coverage - 0.68).abs() <= 0.07 && deterministic,
        format!(
            "peak ≈ {peak:.0} counts, 1σ width coverage {:.1}% (68 ± 7%), same seed identical bytes: {deterministic}",
            100.0 * coverage
        ),
    )
}

// 9. Momentum coincidence peaks shift monotonically, as Z².
fn peak_displacement(nums: &Result<CampaignNumbers, String>) -> Verdict {
    let n = match nums {
        Ok(n) => n,
        Err(e) => return verdict(false, e.clone()),
    };
    let (z0, p0) = n.peaks[0];
    let shifts: Vec<(f64, f64)> = n.peaks[1..].iter().map(|&(z, p)| (z, p - p0)).collect();
    let monotone = shifts.windows(2).all(|w| w[1].1.abs() > w[0].1.abs())
        && shifts.iter().all(|s| s.1.signum() == shifts[0].1.signum() && s.1 != 0.0);
    let &(zr, dr) = shifts.last().unwrap();
    let worst = shifts
        .iter()
        .map(|&(z, d)| ((d / dr) / ((z - z0) / (zr - z0)).powi(2) - 1.0).abs())
        .fold(0.0, f64::max);
    verdict(
        z0 == 0.0 && monotone && worst < 0.05,
        format!(
            "shifts {:?} m: monotone {monotone}, worst deviation from Z² scaling {:.2}% (< 5%)",
            shifts.iter().map(|s| format!("{:.2e}", s.1)).collect::<Vec<_>>(),
            100.0 * worst
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Verdict, Duration, Option<Duration>)> = Vec::new();
    let mut push = |id, name, (v, t): (Verdict, Duration), limit| results.push((id, name, v, t, limit));
    push(1, "propagator", timed(propagator), Some(Duration::from_secs(5)));
    push(2, "airy generation", timed(airy_generation), Some(Duration::from_secs(5)));
    push(3, "ballistics", timed(ballistics), None);
    push(4, "EPR Airy map", timed(epr_airy_map), Some(Duration::from_secs(30)));
    push(5, "witness", timed(witness_soundness), Some(Duration::from_secs(60)));
    let t = Instant::now();
    let nums = campaigns();
    let shared = t.elapsed();
    push(6, "calibration", (calibration(&nums), shared), None);
    push(7, "propagated plane", (propagated(&nums), shared), None);
    push(8, "measurement", timed(measurement_statistics), None);
    push(9, "peak displacement", (peak_displacement(&nums), shared), None);

    let mut failed = 0;
    for (id, name, v, t, limit) in &results {
        let in_time = limit.is_none_or(|l| *t < l);
        let ok = v.passed && in_time;
        if !ok {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" (< {} s)", l.as_secs()));
        println!(
            "{} criterion {id} [{name}]: {}; {:.2} s{budget}",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            t.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
