//! End-to-end acceptance checks, one test per shipped claim. Each test
//! prints a single pass/fail line (visible with `--nocapture`) and asserts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectrop::catalog;
use spectrop::decomposition::{self, BlockPartition, Tolerances};
use spectrop::jacobian;
use spectrop::mapping::{self, MappingMetadata, SymmetricMapping};
use spectrop::operator;
use spectrop::solver::{self, MeasurementMap};
use spectrop::space::{BlockKind, SpaceSignature};
use spectrop::verify;
use std::rc::Rc;

fn report(number: u32, name: &str, pass: bool, detail: String) {
    println!(
        "acceptance {number:02} {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance {number:02} {name} failed: {detail}");
}

fn tols() -> Tolerances {
    Tolerances::default()
}

fn randm(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn unit(mat: DMatrix<f64>) -> DMatrix<f64> {
    let n = mat.norm();
    if n > 0.0 {
        mat / n
    } else {
        mat
    }
}

fn sym_unit(mat: DMatrix<f64>) -> DMatrix<f64> {
    unit((&mat + mat.transpose()) * 0.5)
}

/// Random orthogonal pair assembling a rectangular matrix with the given
/// singular values.
fn assemble(values: &[f64], n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = values.len();
    let u = verify::haar_orthogonal(m, rng);
    let v = verify::haar_orthogonal(n, rng);
    let v1 = v.columns(0, m).into_owned();
    u * DMatrix::from_diagonal(&DVector::from_row_slice(values)) * v1.transpose()
}

/// Random congruence assembling a symmetric matrix with the given
/// eigenvalues.
fn sym_assemble(values: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = verify::haar_orthogonal(values.len(), rng);
    &q * DMatrix::from_diagonal(&DVector::from_row_slice(values)) * q.transpose()
}

/// Positive singular values staying clear of each other and of the 0.5
/// threshold kink, so every catalog mapping is differentiable and stays in
/// one regime over the slope-fit radii.
fn margin_rect_values(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut vals: Vec<f64> = (0..m).map(|_| 0.2 + 2.8 * rng.random::<f64>()).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let gaps = vals.windows(2).all(|w| w[0] - w[1] >= 0.15);
        let kink = vals.iter().all(|&v| (v - 0.5).abs() >= 0.12);
        if gaps && kink {
            return vals;
        }
    }
}

/// Signed eigenvalues with the same margins, also clear of zero.
fn margin_sym_values(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut vals: Vec<f64> = (0..k)
            .map(|_| {
                let v = 0.2 + 2.8 * rng.random::<f64>();
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let gaps = vals.windows(2).all(|w| w[0] - w[1] >= 0.15);
        let kink = vals.iter().all(|&v| (v.abs() - 0.5).abs() >= 0.12);
        if gaps && kink {
            return vals;
        }
    }
}

fn eval_g(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    hermitian: bool,
) -> spectrop::Result<DMatrix<f64>> {
    if hermitian {
        operator::apply_hermitian(g, x, &tols())
    } else {
        operator::apply(g, x, &tols())
    }
}

fn deriv_g(
    g: &SymmetricMapping,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    hermitian: bool,
) -> spectrop::Result<DMatrix<f64>> {
    if hermitian {
        let out = operator::frechet_apply_mixed(g, &[x.clone()], &[h.clone()], &tols())?;
        Ok(out.into_iter().next().unwrap())
    } else {
        operator::frechet_apply(g, x, h, &tols())
    }
}

/// A point of differentiability with margin spectra, plus a unit direction.
fn smooth_instance(
    g: &SymmetricMapping,
    hermitian: bool,
    m: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    for _ in 0..50 {
        let x = if hermitian {
            sym_assemble(&margin_sym_values(m, rng), rng)
        } else {
            assemble(&margin_rect_values(m, rng), n, rng)
        };
        if jacobian::is_smooth_point(g, &x, &tols()).unwrap_or(false) {
            let raw = randm(x.nrows(), x.ncols(), rng);
            let h = if hermitian { sym_unit(raw) } else { unit(raw) };
            return (x, h);
        }
    }
    panic!("no differentiable margin instance found for {}", g.name());
}

fn loglog_slope(radii: &[f64], residuals: &[f64]) -> (f64, f64) {
    let xs: Vec<f64> = radii.iter().map(|t| t.log10()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.max(1e-300).log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[test]
fn acceptance_01_gauge_invariance() {
    let shapes = [(4usize, 4usize), (4, 7), (6, 6)];
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let mut worst = 0.0_f64;
    for i in 0..100u64 {
        let (m, n) = shapes[(i % 3) as usize];
        let mut vals: Vec<f64> = (0..m).map(|_| 0.3 + 2.7 * rng.random::<f64>()).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if i % 2 == 0 {
            vals[1] = vals[0]; // constructed double tie
        }
        if i % 3 == 0 {
            vals[m - 1] = 0.0; // constructed rank deficiency
        }
        let x = assemble(&vals, n, &mut rng);
        let sig = SpaceSignature::rect(m, n).unwrap();
        let mappings = [
            catalog::soft_threshold(0.7, sig.clone()).unwrap(),
            catalog::rank_correction(1.0, 1.0, sig.clone()).unwrap(),
            catalog::identity(sig).unwrap(),
        ];
        for g in &mappings {
            let dev = verify::invariance_check(g, &x, 30, 0xBEEF + i).unwrap();
            worst = worst.max(dev);
        }
    }
    report(
        1,
        "gauge invariance",
        worst <= 1e-10,
        format!("max deviation {worst:.3e} over 100 instances x 3 mappings"),
    );
}

#[test]
fn acceptance_02_diagonal_reduction() {
    let shapes = [(4usize, 7usize), (5, 5), (3, 6)];
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    let mut worst = 0.0_f64;
    for i in 0..100u64 {
        let (m, n) = shapes[(i % 3) as usize];
        let mut y: Vec<f64> = (0..m).map(|_| 2.0 * rng.random::<f64>()).collect();
        y[0] += 1.0;
        if i % 4 == 0 {
            y[1] = y[0];
        }
        if i % 5 == 0 {
            y[m - 1] = 0.0;
        }
        let u = verify::haar_orthogonal(m, &mut rng);
        let v1 = verify::haar_orthogonal(n, &mut rng).columns(0, m).into_owned();
        let yd = DVector::from_row_slice(&y);
        let x = &u * DMatrix::from_diagonal(&yd) * v1.transpose();
        let sig = SpaceSignature::rect(m, n).unwrap();
        let mappings = [
            catalog::soft_threshold(0.7, sig.clone()).unwrap(),
            catalog::rank_correction(1.0, 1.0, sig.clone()).unwrap(),
            catalog::identity(sig).unwrap(),
        ];
        for g in &mappings {
            let got = operator::apply(g, &x, &tols()).unwrap();
            let expect = &u * DMatrix::from_diagonal(&g.eval(&yd).unwrap()) * v1.transpose();
            worst = worst.max((got - expect).amax());
        }
    }
    report(
        2,
        "diagonal reduction",
        worst <= 1e-10,
        format!("max deviation {worst:.3e} over 100 factored spectra"),
    );
}

#[test]
fn acceptance_03_derivative_slopes_and_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC03);
    let mut entries = catalog::standard_entries(&SpaceSignature::rect(3, 4).unwrap()).unwrap();
    entries.extend(catalog::standard_entries(&SpaceSignature::sym(4).unwrap()).unwrap());
    let mut pass = true;
    let mut worst_rel = 0.0_f64;
    let mut slope_range = (f64::INFINITY, 0.0_f64);
    for entry in &entries {
        let hermitian = entry.mapping.signature().is_single_sym();
        let (m, n) = if hermitian { (4, 4) } else { (3, 4) };
        for k in 0..20 {
            let (x, h) = smooth_instance(&entry.mapping, hermitian, m, n, &mut rng);
            let rep =
                verify::fd_frechet_slope(&entry.mapping, &x, &h, &verify::DEFAULT_RADII).unwrap();
            let ok = rep.at_floor
                || (rep.fitted_slope >= 1.8
                    && rep.fitted_slope <= 2.3
                    && rep.r_squared >= verify::MIN_R_SQUARED);
            if !rep.at_floor {
                slope_range.0 = slope_range.0.min(rep.fitted_slope);
                slope_range.1 = slope_range.1.max(rep.fitted_slope);
            }
            if !ok {
                println!(
                    "  entry {} instance {k}: slope {} r2 {}",
                    entry.name, rep.fitted_slope, rep.r_squared
                );
                pass = false;
            }
            if k < 5 {
                let d = deriv_g(&entry.mapping, &x, &h, hermitian).unwrap();
                let eps = 1e-5;
                let plus = eval_g(&entry.mapping, &(&x + &h * eps), hermitian).unwrap();
                let minus = eval_g(&entry.mapping, &(&x - &h * eps), hermitian).unwrap();
                let cd = (plus - minus) / (2.0 * eps);
                let rel = (&d - cd).amax() / (1.0 + d.amax());
                worst_rel = worst_rel.max(rel);
            }
        }
    }
    pass = pass && worst_rel <= 1e-6;
    report(
        3,
        "derivative slope and pointwise agreement",
        pass,
        format!(
            "slopes in [{:.3}, {:.3}] over {} entries x 20 instances, worst pointwise rel err {worst_rel:.3e}",
            slope_range.0,
            slope_range.1,
            entries.len()
        ),
    );
}

#[test]
fn acceptance_04_directional_quotients_at_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC04);
    let g = catalog::soft_threshold(0.5, SpaceSignature::rect(3, 4).unwrap()).unwrap();
    let cases: [(&str, [f64; 3]); 3] = [
        ("tied nonzero pair", [1.5, 1.5, 0.8]),
        ("value at threshold", [2.0, 1.0, 0.5]),
        ("zero singular values", [1.7, 0.9, 0.0]),
    ];
    let mut pass = true;
    let mut worst_slope = f64::INFINITY;
    for (label, vals) in &cases {
        for s in 0..10 {
            let x = assemble(vals, 4, &mut rng);
            let h = unit(randm(3, 4, &mut rng));
            let rep = verify::dir_quotient_check(&g, &x, &h, &verify::DEFAULT_RADII).unwrap();
            if !rep.at_floor {
                worst_slope = worst_slope.min(rep.fitted_slope);
            }
            if !rep.passed {
                println!(
                    "  case '{label}' seed {s}: slope {} r2 {}",
                    rep.fitted_slope, rep.r_squared
                );
                pass = false;
            }
        }
    }
    report(
        4,
        "directional quotient at nonsmooth points",
        pass,
        format!("min fitted slope {worst_slope:.3} over 3 cases x 10 seeds"),
    );
}

#[test]
fn acceptance_05_derivative_directional_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC05);
    let sig = SpaceSignature::rect(3, 4).unwrap();
    let mappings = [
        catalog::soft_threshold(0.5, sig.clone()).unwrap(),
        catalog::identity(sig.clone()).unwrap(),
        catalog::loewner_cube(sig).unwrap(),
    ];
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let g = &mappings[i % 3];
        let (x, h) = smooth_instance(g, false, 3, 4, &mut rng);
        let a = operator::frechet_apply(g, &x, &h, &tols()).unwrap();
        let b = operator::dir_derivative(g, &x, &h, &tols()).unwrap();
        worst = worst.max((a - b).amax());
    }
    report(
        5,
        "derivative and directional derivative agree when differentiable",
        worst <= 1e-9,
        format!("max deviation {worst:.3e} over 50 instances"),
    );
}

#[test]
fn acceptance_06_low_memory_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC06);
    let g_small = catalog::soft_threshold(0.5, SpaceSignature::rect(5, 40).unwrap()).unwrap();
    let mut worst_small = 0.0_f64;
    for _ in 0..3 {
        let x = randm(5, 40, &mut rng);
        let h = randm(5, 40, &mut rng);
        let dense = operator::frechet_apply(&g_small, &x, &h, &tols()).unwrap();
        let low = operator::frechet_apply_lowmem(&g_small, &x, &h, &tols()).unwrap();
        worst_small = worst_small.max((dense - low).amax());
    }

    let g_big = catalog::soft_threshold(0.5, SpaceSignature::rect(20, 2000).unwrap()).unwrap();
    let x = randm(20, 2000, &mut rng);
    let h = randm(20, 2000, &mut rng);
    let dense = operator::frechet_apply(&g_big, &x, &h, &tols()).unwrap();
    let low = operator::frechet_apply_lowmem(&g_big, &x, &h, &tols()).unwrap();
    let worst_big = (dense - low).amax();

    // Structural witness that the low-memory route never materializes the
    // trailing n x (n-m) basis.
    let (fact, _) = decomposition::svd_lowmem(&x, &tols()).unwrap();
    let no_tail = fact.v2.is_none();

    report(
        6,
        "low-memory derivative equivalence",
        worst_small <= 1e-12 && worst_big <= 1e-12 && no_tail,
        format!(
            "5x40 deviation {worst_small:.3e}, 20x2000 deviation {worst_big:.3e}, trailing basis absent: {no_tail}"
        ),
    );
}

#[test]
fn acceptance_07_semismoothness_at_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC07);
    let mut pass = true;
    let mut worst_slope = f64::INFINITY;

    let soft = catalog::soft_threshold(0.5, SpaceSignature::rect(3, 4).unwrap()).unwrap();
    for s in 0..10u64 {
        let x = assemble(&[1.3, 1.3, 0.5], 4, &mut rng);
        let dirs = [unit(randm(3, 4, &mut rng)), unit(randm(3, 4, &mut rng))];
        let rep = verify::semismooth_slope(&soft, &x, &dirs, &verify::DEFAULT_RADII, 0x700 + s)
            .unwrap();
        if !rep.at_floor {
            worst_slope = worst_slope.min(rep.fitted_slope);
        }
        if !rep.passed {
            println!(
                "  soft seed {s}: slope {} r2 {}",
                rep.fitted_slope, rep.r_squared
            );
            pass = false;
        }
    }

    let clip = catalog::psd_clip(SpaceSignature::sym(4).unwrap()).unwrap();
    for s in 0..10u64 {
        let y = sym_assemble(&[1.1, 1.1, 0.0, -0.8], &mut rng);
        let dirs = [sym_unit(randm(4, 4, &mut rng)), sym_unit(randm(4, 4, &mut rng))];
        let rep =
            verify::semismooth_slope(&clip, &y, &dirs, &verify::DEFAULT_RADII, 0x800 + s).unwrap();
        if !rep.at_floor {
            worst_slope = worst_slope.min(rep.fitted_slope);
        }
        if !rep.passed {
            println!(
                "  clip seed {s}: slope {} r2 {}",
                rep.fitted_slope, rep.r_squared
            );
            pass = false;
        }
    }
    report(
        7,
        "strong semismoothness at kinks and ties",
        pass,
        format!("min fitted slope {worst_slope:.3} over 2 mappings x 10 seeds"),
    );
}

#[test]
fn acceptance_08_sampled_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC08);

    // Smooth collapse: every seed reproduces the derivative.
    let g = catalog::soft_threshold(0.3, SpaceSignature::rect(3, 4).unwrap()).unwrap();
    let x = assemble(&[2.0, 1.2, 0.7], 4, &mut rng);
    let h = unit(randm(3, 4, &mut rng));
    let reference = operator::frechet_apply(&g, &x, &h, &tols()).unwrap();
    let mut worst_ref = 0.0_f64;
    for seed in 0..1000 {
        let e = jacobian::clarke_element(&g, &x, seed, None, &tols()).unwrap();
        worst_ref = worst_ref.max((e.apply(&h).unwrap() - &reference).amax());
    }
    // Pairwise distance is at most twice the worst single distance.
    let pairwise = 2.0 * worst_ref;

    // At a kink: every sampled element is the limit of derivatives along
    // its own constructed sequence of differentiability points.
    let gk = catalog::soft_threshold(0.5, SpaceSignature::rect(2, 2).unwrap()).unwrap();
    let xk = assemble(&[2.0, 0.5], 2, &mut rng);
    let (fact, _) = decomposition::svd_full(&xk, &tols()).unwrap();
    let t0 = 1e-5 * (1.0 + xk.norm());
    let mut worst_limit = 0.0_f64;
    for seed in 0..20 {
        let e = jacobian::clarke_element(&gk, &xk, seed, None, &tols()).unwrap();
        let w = e.witness().expect("sampled elements carry a witness");
        let along = |t: f64| -> DMatrix<f64> {
            let d = DMatrix::from_diagonal(&(&fact.sigma + &w.kappa * t));
            &fact.u * &w.m_rot * d * w.n_rot.transpose() * fact.v1.transpose()
        };
        for hs in [unit(randm(2, 2, &mut rng)), unit(randm(2, 2, &mut rng))] {
            let d1 = operator::frechet_apply(&gk, &along(t0), &hs, &tols()).unwrap();
            let d2 = operator::frechet_apply(&gk, &along(2.0 * t0), &hs, &tols()).unwrap();
            let limit = d1 * 2.0 - d2; // first-order extrapolation to t -> 0
            worst_limit = worst_limit.max((limit - e.apply(&hs).unwrap()).amax());
        }
    }
    report(
        8,
        "sampled generalized derivative elements",
        pairwise <= 1e-10 && worst_limit <= 1e-8,
        format!(
            "1000-seed smooth pairwise spread {pairwise:.3e}, kink limit deviation {worst_limit:.3e}"
        ),
    );
}

#[test]
fn acceptance_09_lipschitz_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC09);
    let g = catalog::soft_threshold(0.5, SpaceSignature::rect(3, 4).unwrap()).unwrap();
    let x = randm(3, 4, &mut rng);
    let est = verify::lipschitz_estimate(&g, &x, 500, 0x900).unwrap();
    report(
        9,
        "nonexpansiveness transfer",
        est <= 1.0 + 1e-8,
        format!("estimated modulus {est:.12} over 500 pairs"),
    );
}

#[test]
fn acceptance_10_envelope_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC10);
    let tau = 0.7;
    let prox = catalog::soft_threshold(tau, SpaceSignature::rect(3, 4).unwrap()).unwrap();
    let theta = move |v: &DVector<f64>| -> spectrop::Result<f64> {
        Ok(tau * v.iter().map(|t| t.abs()).sum::<f64>())
    };
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let x = assemble(&margin_rect_values(3, &mut rng), 4, &mut rng);
        let (_, grad) = operator::moreau_gradient(&theta, &prox, &x, &tols()).unwrap();
        let eps = 1e-5;
        let mut fd = DMatrix::zeros(3, 4);
        for i in 0..3 {
            for j in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[(i, j)] += eps;
                xm[(i, j)] -= eps;
                let vp = operator::moreau_gradient(&theta, &prox, &xp, &tols()).unwrap().0;
                let vm = operator::moreau_gradient(&theta, &prox, &xm, &tols()).unwrap().0;
                fd[(i, j)] = (vp - vm) / (2.0 * eps);
            }
        }
        worst = worst.max((&grad - fd).amax() / (1.0 + grad.amax()));
    }
    report(
        10,
        "envelope gradient identity",
        worst <= 1e-6,
        format!("max relative deviation {worst:.3e} over 20 points"),
    );
}

#[test]
fn acceptance_11_mixed_space_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC11);
    let sig = SpaceSignature::new(vec![BlockKind::Sym(2), BlockKind::Rect(2, 3)]).unwrap();
    let clip = catalog::psd_clip(SpaceSignature::sym(2).unwrap()).unwrap();
    let soft = catalog::soft_threshold(0.5, SpaceSignature::rect(2, 3).unwrap()).unwrap();

    // A block-separable map assembled by hand from the two references.
    let (c1, s1) = (clip.clone(), soft.clone());
    let eval = Rc::new(move |v: &DVector<f64>| -> spectrop::Result<DVector<f64>> {
        let a = c1.eval(&v.rows(0, 2).into_owned())?;
        let b = s1.eval(&v.rows(2, 2).into_owned())?;
        Ok(DVector::from_iterator(4, a.iter().chain(b.iter()).copied()))
    });
    let (c2, s2) = (clip.clone(), soft.clone());
    let jac = Rc::new(move |v: &DVector<f64>| -> spectrop::Result<DMatrix<f64>> {
        let ja = c2.jacobian(&v.rows(0, 2).into_owned())?;
        let jb = s2.jacobian(&v.rows(2, 2).into_owned())?;
        let mut j = DMatrix::zeros(4, 4);
        j.view_mut((0, 0), (2, 2)).copy_from(&ja);
        j.view_mut((2, 2), (2, 2)).copy_from(&jb);
        Ok(j)
    });
    let (c3, s3) = (clip.clone(), soft.clone());
    let smooth = Rc::new(move |v: &DVector<f64>| -> bool {
        c3.is_smooth(&v.rows(0, 2).into_owned()).unwrap_or(false)
            && s3.is_smooth(&v.rows(2, 2).into_owned()).unwrap_or(false)
    });
    let sep = SymmetricMapping::new(
        "separable",
        sig.clone(),
        eval,
        MappingMetadata {
            lipschitz: Some(1.0),
            directionally_differentiable: true,
            psi_hypothesis: true,
        },
    )
    .with_jacobian(jac, smooth);

    let mut worst_sep = 0.0_f64;
    for _ in 0..10 {
        let y = sym_assemble(&margin_sym_values(2, &mut rng), &mut rng);
        let x = assemble(&margin_rect_values(2, &mut rng), 3, &mut rng);
        let vals = operator::apply_mixed(&sep, &[y.clone(), x.clone()], &tols()).unwrap();
        let ry = operator::apply_hermitian(&clip, &y, &tols()).unwrap();
        let rx = operator::apply(&soft, &x, &tols()).unwrap();
        worst_sep = worst_sep.max((&vals[0] - ry).amax()).max((&vals[1] - rx).amax());

        let hy = sym_unit(randm(2, 2, &mut rng));
        let hx = unit(randm(2, 3, &mut rng));
        let ds = operator::frechet_apply_mixed(
            &sep,
            &[y.clone(), x.clone()],
            &[hy.clone(), hx.clone()],
            &tols(),
        )
        .unwrap();
        let dy = operator::frechet_apply_mixed(&clip, &[y.clone()], &[hy.clone()], &tols())
            .unwrap()
            .remove(0);
        let dx = operator::frechet_apply(&soft, &x, &hx, &tols()).unwrap();
        worst_sep = worst_sep.max((&ds[0] - dy).amax()).max((&ds[1] - dx).amax());
    }

    // A genuinely coupled smooth map against central differences.
    let coupled = catalog::rank_correction(1.0, 1.0, sig).unwrap();
    let mut worst_fd = 0.0_f64;
    for _ in 0..5 {
        let y = sym_assemble(&[2.4, -1.1], &mut rng);
        let x = assemble(&[1.6, 0.9], 3, &mut rng);
        let hy = sym_unit(randm(2, 2, &mut rng));
        let hx = unit(randm(2, 3, &mut rng));
        let d = operator::frechet_apply_mixed(
            &coupled,
            &[y.clone(), x.clone()],
            &[hy.clone(), hx.clone()],
            &tols(),
        )
        .unwrap();
        let eps = 1e-6;
        let plus = operator::apply_mixed(
            &coupled,
            &[&y + &hy * eps, &x + &hx * eps],
            &tols(),
        )
        .unwrap();
        let minus = operator::apply_mixed(
            &coupled,
            &[&y - &hy * eps, &x - &hx * eps],
            &tols(),
        )
        .unwrap();
        for b in 0..2 {
            let cd = (&plus[b] - &minus[b]) / (2.0 * eps);
            worst_fd = worst_fd.max((&d[b] - cd).amax());
        }
    }
    report(
        11,
        "mixed-space consistency",
        worst_sep <= 1e-12 && worst_fd <= 1e-6,
        format!(
            "block-separable deviation {worst_sep:.3e}, coupled finite-difference deviation {worst_fd:.3e}"
        ),
    );
}

#[test]
fn acceptance_12_newton_demo() {
    // Scalar hand-checked case: one Newton step.
    let a1 = MeasurementMap::new(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap();
    let b1 = DVector::from_element(1, 0.3);
    let c1 = DMatrix::zeros(1, 1);
    let (y1, _, t1) = solver::newton_solve(
        &a1,
        &b1,
        &c1,
        0.5,
        &DVector::from_element(1, 1.0),
        1e-10,
        10,
        1,
    )
    .unwrap();
    let scalar_ok = t1.converged && t1.step_norms.len() == 1 && (y1[0] - 0.8).abs() <= 1e-10;

    // Seeded 10x10 instance with 5 measurements.
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC12);
    let (m, n, p, tau) = (10, 10, 5, 0.5);
    let a = MeasurementMap::random(p, m, n, 0x121).unwrap();
    let c = randm(m, n, &mut rng);
    let y_true = DVector::from_fn(p, |i, _| 0.3 * ((i as f64) - 2.0) / 2.0);
    let g = catalog::soft_threshold(tau, SpaceSignature::rect(m, n).unwrap()).unwrap();
    let x_true = operator::apply(&g, &(&c + a.adjoint(&y_true).unwrap()), &tols()).unwrap();
    let b = a.forward(&x_true).unwrap();
    let (_, x_star, trace) =
        solver::newton_solve(&a, &b, &c, tau, &DVector::zeros(p), 1e-8, 30, 0x122).unwrap();
    let k = trace.residual_norms.len();
    let iterations = k - 1;
    let r = &trace.residual_norms;
    let superlinear = k >= 3 && r[k - 1] / r[k - 2] <= 0.1 && r[k - 2] / r[k - 3] <= 0.1;
    let feasible = (a.forward(&x_star).unwrap() - &b).norm() <= 1e-8;
    report(
        12,
        "semismooth Newton demo",
        scalar_ok && trace.converged && iterations <= 30 && superlinear && feasible,
        format!(
            "scalar one-step: {scalar_ok}; seeded instance: {iterations} iterations, final residual {:.3e}, last ratios {:.3e}/{:.3e}",
            r[k - 1],
            r[k - 1] / r[k - 2],
            r[k - 2] / r[k - 3]
        ),
    );
}

#[test]
fn acceptance_13_smooth_part_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC13);
    let vals = [3.0, 3.0, 1.5, 0.5];
    let gbar = [1.0, 0.6, 0.2];
    let radii = [1e-2, 1e-3, 1e-4, 1e-5];
    let restructure = |base: &BlockPartition| BlockPartition {
        groups: base.groups.clone(),
        zeros: base.zeros.clone(),
        tie_tol: base.tie_tol,
        zero_tol: base.zero_tol,
    };
    let mut worst_slope = f64::INFINITY;
    let mut worst_fd = 0.0_f64;
    for _ in 0..10 {
        let x = assemble(&vals, 6, &mut rng);
        let h = unit(randm(4, 6, &mut rng));
        let (fact, part) = decomposition::svd_full(&x, &tols()).unwrap();
        assert_eq!(part.groups.len(), 3, "expected three tied groups");
        let smooth_sum = |point: &DMatrix<f64>| -> DMatrix<f64> {
            let (f, p_raw) = decomposition::svd_full(point, &tols()).unwrap();
            let p = restructure(&part);
            let _ = p_raw;
            let mut acc = DMatrix::zeros(4, 6);
            for (l, &gl) in gbar.iter().enumerate() {
                acc += decomposition::block_subspace_map(&f, &p, l).unwrap() * gl;
            }
            acc
        };
        let base_val = smooth_sum(&x);
        let mut dval = DMatrix::zeros(4, 6);
        for (l, &gl) in gbar.iter().enumerate() {
            dval += decomposition::block_subspace_derivative(&fact, &part, l, &h).unwrap() * gl;
        }
        let residuals: Vec<f64> = radii
            .iter()
            .map(|&t| (smooth_sum(&(&x + &h * t)) - &base_val - &dval * t).norm())
            .collect();
        let (slope, r2) = loglog_slope(&radii, &residuals);
        worst_slope = worst_slope.min(slope);
        assert!(r2 >= 0.98, "smooth-part fit quality r2 = {r2}");

        let eps = 1e-5;
        for l in 0..3 {
            let plus = decomposition::svd_full(&(&x + &h * eps), &tols()).unwrap().0;
            let minus = decomposition::svd_full(&(&x - &h * eps), &tols()).unwrap().0;
            let pp = restructure(&part);
            let fd = (decomposition::block_subspace_map(&plus, &pp, l).unwrap()
                - decomposition::block_subspace_map(&minus, &pp, l).unwrap())
                / (2.0 * eps);
            let an = decomposition::block_subspace_derivative(&fact, &part, l, &h).unwrap();
            worst_fd = worst_fd.max((an - fd).amax());
        }
    }
    report(
        13,
        "smooth-part expansion",
        worst_slope >= 1.8 && worst_fd <= 1e-6,
        format!(
            "min residual slope {worst_slope:.3}, worst subspace-derivative deviation {worst_fd:.3e} over 10 instances"
        ),
    );
}

#[test]
fn acceptance_14_symmetry_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC14);
    let mut entries = catalog::standard_entries(&SpaceSignature::rect(3, 4).unwrap()).unwrap();
    entries.extend(catalog::standard_entries(&SpaceSignature::sym(4).unwrap()).unwrap());
    let mut worst_violation = 0.0_f64;
    let mut structure_ok = true;
    for entry in &entries {
        let dim = entry.mapping.signature().spectral_len();
        let points: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal) * 1.5))
            .collect();
        let rep =
            mapping::check_mixed_symmetry(&entry.mapping, &points, 200, 0x1400 + dim as u64)
                .unwrap();
        worst_violation = worst_violation.max(rep.max_violation);
        if rep.max_violation > 1e-12 {
            println!(
                "  entry {}: symmetry violation {:.3e}",
                entry.name, rep.max_violation
            );
        }

        let mut checked = 0;
        let mut attempts = 0;
        while checked < 50 {
            attempts += 1;
            assert!(
                attempts < 5000,
                "could not collect smooth points for {}",
                entry.name
            );
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal) * 1.5);
            if entry.mapping.is_smooth(&v).unwrap() {
                if !mapping::jacobian_structure_check(&entry.mapping, &v).unwrap() {
                    println!("  entry {}: structure violation at {v:?}", entry.name);
                    structure_ok = false;
                }
                checked += 1;
            }
        }
    }
    report(
        14,
        "mixed-symmetry suite",
        worst_violation <= 1e-12 && structure_ok,
        format!(
            "max equivariance violation {worst_violation:.3e} over {} entries x 1000 trials; structure checks at 50 smooth points each: {structure_ok}",
            entries.len()
        ),
    );
}
