mod common;

use std::f64::consts::PI;

use dampwave::certify::{self, certify_boundedness, certify_ellipticity, dyadic_grid, CertifyOptions};
use dampwave::config::ExperimentConfig;
use dampwave::damping::{assemble, Coefficient, DampingOperator, DampingSpec, MFunction};
use dampwave::fit;
use dampwave::generator::{build_generator, pencil_inverse_norm, GeneratorMatrix};
use dampwave::linalg::{self, C64};
use dampwave::presets::{preset, Geometry, Preset, PresetParams};
use dampwave::scan;
use dampwave::semigroup;
use dampwave::spectral::{OperatorKind, SpectralModel};
use faer::Mat;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DAMPED: [&str; 5] = ["water-constant", "water-degenerate", "dw-fractional", "kelvin-voigt", "pdo-anisotropic"];
const ALL: [&str; 6] = ["water-constant", "water-degenerate", "dw-fractional", "kelvin-voigt", "pdo-anisotropic", "undamped"];

/// Preset at cutoff `k`, capped at 6 in two dimensions.
fn small(name: &str, k: usize) -> (Preset, SpectralModel, DampingOperator) {
    let p = preset(name, &PresetParams::default()).unwrap();
    let k = if p.geometry.d == 2 { k.min(6) } else { k };
    at_cutoff(p, k)
}

fn at_cutoff(p: Preset, k: usize) -> (Preset, SpectralModel, DampingOperator) {
    let p = p.clone().with_geometry(Geometry { cutoff: k, ..p.geometry });
    let model = p.model().unwrap();
    let g = p.assemble(&model).unwrap();
    (p, model, g)
}

fn random_vec(n: usize, seed: u64) -> Vec<C64> {
    linalg::complex_gaussian(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

/// Symmetric distance between two eigenvalue multisets.
fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    let one = |x: &[C64], y: &[C64]| x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    one(a, b).max(one(b, a))
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn parseval_on_grid(d in 1usize..=2, k in 1usize..=8, seed: u64) {
        let k = if d == 2 { k.min(5) } else { k };
        let m = SpectralModel::new(d, k, OperatorKind::Laplacian, 4).unwrap();
        let u = m.state(random_vec(m.len(), seed)).unwrap();
        let g = m.to_grid(&u).unwrap();
        let n = m.grid_size() as f64;
        let quad = ((2.0 / n).powi(d as i32) * g.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        prop_assert!((quad - u.norm()).abs() <= 1e-10 * u.norm());
        let back = m.from_grid(&g).unwrap();
        let err = back.coeffs.iter().zip(&u.coeffs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * u.norm());
    }

    #[test]
    fn negative_powers_contract(k in 1usize..=32, n in 0.0f64..4.0, half in any::<bool>(), seed: u64) {
        let kind = if half { OperatorKind::HalfLaplacian } else { OperatorKind::Laplacian };
        let m = SpectralModel::new(1, k, kind, 2).unwrap();
        let u = m.state(random_vec(m.len(), seed)).unwrap();
        prop_assert!(m.norm_hs(-n, &u).unwrap() <= u.norm() * (1.0 + 1e-15));
    }

    #[test]
    fn generator_is_dissipative(which in 0usize..6, k in 2usize..=16, seed: u64) {
        let (_, model, g) = small(ALL[which], k);
        let gen = build_generator(&model, &g).unwrap();
        let z = random_vec(gen.dim(), seed);
        let az = gen.apply(&z).unwrap();
        let re = linalg::dot(&z, &az).re;
        prop_assert!(re <= 1e-10 * linalg::vec_norm(&z).powi(2), "Re<Az,z> = {re}");
    }

    #[test]
    fn spectrum_matches_dense_oracle(which in 0usize..6, k in 2usize..=8) {
        let (_, model, g) = small(ALL[which], k);
        let gen = build_generator(&model, &g).unwrap();
        let ours = gen.spectrum().unwrap();
        let oracle = linalg::eigenvalues(common::dense_generator(&model, &g).as_ref()).unwrap();
        prop_assert_eq!(ours.len(), oracle.len());
        let scale = ours.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!(spectrum_distance(&ours, &oracle) <= 1e-8 * scale);
    }

    #[test]
    fn damping_is_hermitian_psd_and_deterministic(
        mean in 0.0f64..3.0, amp in -1.0f64..1.0, n in 0i32..4, k in 2usize..=16, which in 0usize..3,
    ) {
        let a = Coefficient::Cosine { mean: mean + amp.abs(), amplitude: amp, wavenumber: n };
        let (spec, kind) = match which {
            0 => (DampingSpec::Multiplication(a), OperatorKind::Laplacian),
            1 => (DampingSpec::KelvinVoigt(a), OperatorKind::Laplacian),
            _ => (DampingSpec::WaterWave(a), OperatorKind::HalfLaplacian),
        };
        let model = SpectralModel::new(1, k, kind, 4).unwrap();
        let g = assemble(&spec, &model).unwrap();
        prop_assert!(g.hermitian_defect() <= 1e-12 * g.max_abs().max(1.0));
        let (lo, hi) = g.eigen_range().unwrap();
        prop_assert!(lo >= -1e-10 * hi.max(1.0));
        let again = assemble(&spec, &model).unwrap();
        let (x, y) = (g.dense(), again.dense());
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                prop_assert_eq!(x[(i, j)].re.to_bits(), y[(i, j)].re.to_bits());
                prop_assert_eq!(x[(i, j)].im.to_bits(), y[(i, j)].im.to_bits());
            }
        }
    }

    #[test]
    fn multiplication_is_bounded_below(c in 0.01f64..2.0, amp in -1.0f64..1.0, n in 1i32..5, k in 2usize..=24) {
        let a = Coefficient::Cosine { mean: c + amp.abs(), amplitude: amp, wavenumber: n };
        let model = SpectralModel::new(1, k, OperatorKind::Laplacian, 4).unwrap();
        let g = assemble(&DampingSpec::Multiplication(a), &model).unwrap();
        prop_assert!(g.eigen_range().unwrap().0 >= c - 1e-8);
    }

    #[test]
    fn stronger_damping_keeps_ellipticity(mean in 0.2f64..2.0, frac in 0.0f64..0.9, k in 64usize..=96) {
        let a = Coefficient::Cosine { mean, amplitude: frac * mean, wavenumber: 1 };
        let model = SpectralModel::new(1, k, OperatorKind::Laplacian, 4).unwrap();
        let lo = assemble(&DampingSpec::Multiplication(a.clone()), &model).unwrap();
        let hi = assemble(&DampingSpec::Multiplication(a.times(2.0)), &model).unwrap();
        // ⟨G_- u,u⟩ ≤ C⟨G_+ u,u⟩ on the basis
        let c = (0..model.len()).map(|i| lo.get(i, i).re / hi.get(i, i).re).fold(0.0, f64::max);
        let grid = dyadic_grid(3, 5);
        let opts = CertifyOptions::default();
        let r_lo = certify_ellipticity(&model, &lo, MFunction::ONE, &grid, opts).unwrap();
        let r_hi = certify_ellipticity(&model, &hi, MFunction::ONE, &grid, opts).unwrap();
        prop_assert!(r_hi.c >= r_lo.c / c * (1.0 - 1e-12), "{} vs {} / {c}", r_hi.c, r_lo.c);
    }

    #[test]
    fn smaller_m_gives_no_smaller_constants(which in 0usize..5, e in 0.0f64..2.0, de in 0.0f64..1.0, f in 1.0f64..4.0) {
        let (_, model, g) = small(DAMPED[which], 96);
        let grid = dyadic_grid(3, 5);
        let opts = CertifyOptions::default();
        let m_lo = MFunction::Power { coeff: 1.0, exponent: e };
        let m_hi = MFunction::Power { coeff: f, exponent: e + de };
        for (kind, lo, hi) in [
            ("ellipticity", certify_ellipticity(&model, &g, m_lo, &grid, opts).unwrap(), certify_ellipticity(&model, &g, m_hi, &grid, opts).unwrap()),
            ("boundedness", certify_boundedness(&model, &g, m_lo, &grid, opts).unwrap(), certify_boundedness(&model, &g, m_hi, &grid, opts).unwrap()),
        ] {
            for (a, b) in lo.rows.iter().zip(&hi.rows) {
                if let (Some(x), Some(y)) = (a.ratio, b.ratio) {
                    prop_assert!(x >= y, "{kind} h={}: {x} < {y}", a.h);
                }
            }
            if kind == "ellipticity" && !lo.c.is_infinite() {
                prop_assert!(lo.c >= hi.c);
            }
            if kind == "boundedness" && lo.big_c.is_finite() {
                prop_assert!(hi.big_c <= lo.big_c);
            }
        }
    }

    #[test]
    fn doubling_m_halves_every_ratio(which in 0usize..5, e in 0.0f64..2.0) {
        let (_, model, g) = small(DAMPED[which], 64);
        let grid = dyadic_grid(2, 5);
        let m = MFunction::power(e);
        let opts = CertifyOptions::default();
        let a = certify_ellipticity(&model, &g, m, &grid, opts).unwrap();
        let b = certify_ellipticity(&model, &g, m.scaled(2.0), &grid, opts).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(x.ratio.map(|r| r * 0.5), y.ratio);
        }
    }

    #[test]
    fn a_priori_boundedness(which in 0usize..5, k in 16usize..=64) {
        let (_, model, g) = small(DAMPED[which], k);
        let eig = model.eigenvalues();
        let w = |i: usize| (1.0 + eig[i]).powf(-0.5);
        let n = model.len();
        let gd = g.dense();
        let scaled = Mat::from_fn(n, n, |i, j| gd[(i, j)] * (w(i) * w(j)));
        let top = linalg::hermitian_eigenvalues(scaled.as_ref()).unwrap();
        let norm = top.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let r = certify_boundedness(&model, &g, MFunction::power(2.0), &dyadic_grid(1, 6), CertifyOptions::default()).unwrap();
        for row in &r.rows {
            if let Some(x) = row.ratio {
                prop_assert!(x <= norm + 1e-8, "h={}: {x} > {norm}", row.h);
            }
        }
    }

    #[test]
    fn scan_is_pointwise(which in 0usize..5, picks in proptest::collection::vec(any::<bool>(), 24)) {
        let (_, model, g) = small(DAMPED[which], 24);
        let gen = build_generator(&model, &g).unwrap();
        let full = scan::default_grid(&gen, 0.5, gen.guard(), 12, true).unwrap();
        let sub: Vec<f64> = full.iter().zip(picks.iter().cycle()).filter(|(_, &p)| p).map(|(&l, _)| l).collect();
        let whole = scan::scan(&gen, &full).unwrap();
        let part = scan::scan(&gen, &sub).unwrap();
        for row in &part.rows {
            let same = whole.at(row.lambda).unwrap();
            prop_assert_eq!(row.u.to_bits(), same.u.to_bits());
            prop_assert_eq!(row.peak, same.peak);
        }
    }

    #[test]
    fn energy_never_grows_and_semigroup_composes(which in 0usize..6, seed: u64) {
        let (_, model, g) = small(ALL[which], 12);
        let gen = build_generator(&model, &g).unwrap();
        let modes: Vec<Vec<i32>> = (0..model.len()).map(|i| model.mode(i).to_vec()).collect();
        let z0 = semigroup::random_state(&gen, &modes, seed, None).unwrap();
        let dt = 0.05;
        let whole = semigroup::evolve(&gen, &z0, 2.0, dt).unwrap();
        for w in whole.energy.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
        let first = semigroup::evolve(&gen, &z0, 1.0, dt).unwrap();
        let second = semigroup::evolve(&gen, &first.final_state, 1.0, dt).unwrap();
        let (e1, e2) = (whole.energy[whole.energy.len() - 1], second.energy[second.energy.len() - 1]);
        prop_assert!((e1 - e2).abs() <= 1e-8 * e1.max(f64::MIN_POSITIVE), "{e1} vs {e2}");
    }

    #[test]
    fn config_round_trips(which in 0usize..6, k in 8usize..=512, dt in 0.001f64..0.5, seed in 0u64..(1 << 62), per_decade in 1usize..200) {
        let mut c = ExperimentConfig::for_preset(ALL[which], &PresetParams::default()).unwrap();
        if c.geometry.d == 1 {
            c.geometry.cutoff = k;
        }
        c.sim.dt = dt;
        c.sim.seed = seed;
        c.scan.per_decade = per_decade;
        let text = c.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, c);
    }
}

fn generator_for(name: &str, k: usize) -> (SpectralModel, DampingOperator, GeneratorMatrix) {
    let (_, model, g) = at_cutoff(preset(name, &PresetParams::default()).unwrap(), k);
    let gen = build_generator(&model, &g).unwrap();
    (model, g, gen)
}

/// Peak exponent of `U` against that of `λ^{-1}‖P_{1/λ}^{-1}‖`, using
/// `(P − λ² − iλG)^{-1} = λ^{-2} P_{1/λ}^{-1}`.
fn conversion_exponents(name: &str, k: usize) -> (f64, f64) {
    let (model, g, gen) = generator_for(name, k);
    let tab = scan::peak_sample(&gen, PI, f64::INFINITY).unwrap();
    let direct = scan::fit_exponent(&tab, PI, f64::INFINITY).unwrap().slope;
    let (x, y): (Vec<f64>, Vec<f64>) = tab
        .peaks()
        .map(|r| (r.lambda.ln(), (pencil_inverse_norm(&model, &g, 1.0 / r.lambda).unwrap().value / r.lambda).ln()))
        .unzip();
    (direct, fit::line(&x, &y, 5).unwrap().slope)
}

#[test]
fn resolvent_and_pencil_exponents_agree() {
    for (name, k) in [("water-degenerate", 256), ("dw-fractional", 128), ("kelvin-voigt", 128), ("pdo-anisotropic", 12)] {
        let (a, b) = conversion_exponents(name, k);
        assert!((a - b).abs() <= 0.1, "{name}: {a} vs {b}");
    }
}

#[test]
fn water_constant_conversion_within_start_up_lag() {
    // U's peak slope approaches −1 slowly (−1.16, −1.15, −1.13 at K = 128, 256, 512).
    let (a, b) = conversion_exponents("water-constant", 256);
    assert!((b + 1.0).abs() <= 0.01, "pencil side {b}");
    assert!((a - b).abs() <= 0.2, "{a} vs {b}");
}

#[test]
fn degenerate_water_classically_elliptic_and_stable() {
    let c: Vec<f64> = [64usize, 128]
        .iter()
        .map(|&k| {
            let (_, model, g) = small("water-degenerate", k);
            certify::estimate_classical_ellipticity(&model, &g, 0.0, 1.0).unwrap()
        })
        .collect();
    assert!(c.iter().all(|x| x.is_finite()));
    assert!((c[1] / c[0] - 1.0).abs() <= 0.1, "{c:?}");
}

#[test]
fn quotient_generator_is_injective() {
    for name in DAMPED {
        let (_, _, gen) = generator_for(name, if name == "pdo-anisotropic" { 6 } else { 16 });
        let smin = gen.spectrum().unwrap().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!(smin > 0.0, "{name}");
        assert!(!gen.resolvent_norm(0.0).unwrap().singular, "{name}");
    }
}

#[test]
fn bounded_resolvent_presets_decay_exponentially() {
    for name in ["water-constant", "kelvin-voigt"] {
        let (model, _, gen) = generator_for(name, 32);
        let modes: Vec<Vec<i32>> = (0..model.len()).map(|i| model.mode(i).to_vec()).collect();
        let z0 = semigroup::random_state(&gen, &modes, 7, None).unwrap();
        let traj = semigroup::evolve(&gen, &z0, 10.0, 0.05).unwrap();
        let fit = semigroup::fit_exponential_rate(&traj, 2.0, 10.0).unwrap();
        assert!(fit.rate > 0.0, "{name}: {}", fit.rate);
    }
}
