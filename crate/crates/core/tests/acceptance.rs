//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crystal_accuracy::accuracy::{
    max_accuracy, scalar_dilation, sufficient_check, verify_equivalence,
};
use crystal_accuracy::cascade::{
    cascade_iterate, covariance_residual, empirical_accuracy, refinement_residual, sample_points,
    CascadeOptions, REPRODUCTION_TOL,
};
use crystal_accuracy::crystal::{catalog_group, CrystalElement, CrystalTriple, Dilation};
use crystal_accuracy::linalg::{rational, Exact, Mat, Rational, Scalar};
use crystal_accuracy::mask::{check_gamma_a_symmetry, extract_scalar, lift_scalar_to_matrix, Mask};
use crystal_accuracy::multiidx::{build_a_s, build_q_st, eval_x, GradedOps, VCollection};

type Outcome = Result<String, String>;

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    rational(rng.random_range(-9..=9), rng.random_range(1..=9))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn line_triple() -> CrystalTriple {
    catalog_group("p1", 1).unwrap()
}

fn line_dilation(triple: &CrystalTriple) -> Dilation {
    Dilation::new(scalar_dilation(1, 2), triple).unwrap()
}

fn ex(n: i64, d: i64) -> Exact {
    Exact::from_rational(&rational(n, d))
}

fn classical_masks() -> Vec<(&'static str, Mask<Exact>, usize)> {
    vec![
        ("hat", Mask::from_1d(&[ex(1, 2), ex(1, 1), ex(1, 2)]), 2),
        ("haar", Mask::from_1d(&[ex(1, 1), ex(1, 1)]), 1),
        (
            "b-spline-4",
            Mask::from_1d(&[ex(1, 8), ex(1, 2), ex(3, 4), ex(1, 2), ex(1, 8)]),
            4,
        ),
        ("(1,1,1)", Mask::from_1d(&[ex(1, 1), ex(1, 1), ex(1, 1)]), 0),
    ]
}

fn cascade_options() -> CascadeOptions {
    CascadeOptions {
        iterations: 12,
        grid_exponent: 8,
        ..CascadeOptions::default()
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checks = 0;
    for d in 1..=3 {
        for _ in 0..20 {
            let x: Vec<Rational> = (0..d).map(|_| random_rational(&mut rng)).collect();
            let y: Vec<Rational> = (0..d).map(|_| random_rational(&mut rng)).collect();
            let z: Vec<Rational> = (0..d).map(|_| random_rational(&mut rng)).collect();
            let a = loop {
                let a = Mat::from_fn(d, d, |_, _| random_rational(&mut rng));
                if a.inverse().is_some() {
                    break a;
                }
            };
            let az = a.mul_vec(&z);
            let diff: Vec<Rational> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            for s in 0..=4 {
                let lhs = eval_x(s, &diff);
                let mut rhs = vec![Rational::from_integer(0.into()); lhs.len()];
                for t in 0..=s {
                    let term = build_q_st(&y, s, t).unwrap().mul_vec(&eval_x(t, &x));
                    for (acc, v) in rhs.iter_mut().zip(term) {
                        *acc += v;
                    }
                }
                ensure(lhs == rhs, || {
                    format!("shift identity fails at d={d}, s={s}")
                })?;
                for t in 0..=s {
                    let lhs = build_q_st(&az, s, t).unwrap();
                    let a_t_inv = build_a_s(&a, t).inverse().expect("A_[t] invertible");
                    let rhs = &(&build_a_s(&a, s) * &build_q_st(&z, s, t).unwrap()) * &a_t_inv;
                    ensure(lhs == rhs, || {
                        format!("dilation identity fails at d={d}, s={s}, t={t}")
                    })?;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} exact block identities"))
}

fn random_element(triple: &CrystalTriple, rng: &mut ChaCha8Rng) -> CrystalElement {
    let g = rng.random_range(0..triple.order());
    let k = (0..triple.dim())
        .map(|_| rng.random_range(-4..=4))
        .collect();
    CrystalElement::new(g, k)
}

fn criterion_2() -> Outcome {
    let triple = catalog_group("pm", 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let max_s = 3;
    let ops = GradedOps::<Rational>::new(&triple, None, max_s);
    let blocks = (0..=max_s)
        .map(|s| Mat::from_fn(s + 1, 1, |_, _| random_rational(&mut rng)))
        .collect();
    let v = VCollection::new(2, 1, blocks).unwrap();
    for _ in 0..100 {
        let g1 = random_element(&triple, &mut rng);
        let g2 = random_element(&triple, &mut rng);
        let prod = triple.compose(&g1, &g2);
        for s in 0..=max_s {
            let lhs = ops.eval_y(&prod, &v, s).unwrap();
            let mut rhs = Mat::zeros(s + 1, 1);
            for t in 0..=s {
                rhs = &rhs + &(&ops.q_tilde(&g2, s, t) * &ops.eval_y(&g1, &v, t).unwrap());
            }
            ensure(lhs == rhs, || {
                format!("cocycle fails for {g1:?}, {g2:?}, s={s}")
            })?;
        }
    }
    Ok("100 pairs, s <= 3".into())
}

fn criterion_3() -> Outcome {
    let triple = catalog_group("pm", 2).map_err(|e| e.to_string())?;
    let dil = Dilation::new(scalar_dilation(2, 2), &triple).map_err(|e| e.to_string())?;
    let ball: Vec<CrystalElement> = triple.ball(5).into_iter().take(200).collect();
    ensure(ball.len() == 200, || "ball too small".into())?;
    for gamma in &ball {
        let hits: Vec<usize> = dil
            .digits()
            .iter()
            .enumerate()
            .filter(|(_, delta)| {
                dil.in_conjugate_subgroup(&triple.compose(&triple.inverse(delta), gamma))
            })
            .map(|(i, _)| i)
            .collect();
        ensure(hits.len() == 1, || {
            format!("{gamma:?} lies in cosets {hits:?}")
        })?;
        ensure(dil.coset_index(gamma, &triple) == hits[0], || {
            format!("coset index disagrees at {gamma:?}")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let a = random_element(&triple, &mut rng);
        let b = random_element(&triple, &mut rng);
        let x: Vec<Rational> = (0..2).map(|_| random_rational(&mut rng)).collect();
        let lhs = triple.apply(&triple.compose(&a, &b), &x);
        let rhs = triple.apply(&a, &triple.apply(&b, &x));
        ensure(lhs == rhs, || {
            format!("composition disagrees for {a:?}, {b:?}")
        })?;
    }
    Ok(format!("m = {}, 200-element ball partitioned", dil.m()))
}

fn criterion_4_and_5() -> (Outcome, Outcome) {
    let start = Instant::now();
    let triple = line_triple();
    let dil = line_dilation(&triple);
    let opts = cascade_options();
    let sample: Vec<CrystalElement> = (-5..=5)
        .map(|k| CrystalElement::translation(vec![k]))
        .collect();
    let mut summary4 = Vec::new();
    let mut summary5 = Vec::new();
    let mut fail4 = None;
    let mut fail5 = None;
    for (name, mask, expected) in classical_masks() {
        let cert = match max_accuracy(&mask, &triple, &dil, 6) {
            Ok(c) => c,
            Err(e) => return (Err(format!("{name}: {e}")), Err("skipped".into())),
        };
        let emp = match empirical_accuracy(&mask, &triple, &dil, 6, &opts) {
            Ok(e) => e,
            Err(e) => return (Err(format!("{name}: {e}")), Err("skipped".into())),
        };
        summary4.push(format!("{name} p={} emp={}", cert.p, emp.accuracy));
        if cert.p != expected || emp.accuracy != expected {
            fail4.get_or_insert(format!(
                "{name}: solver {} empirical {} expected {expected}",
                cert.p, emp.accuracy
            ));
        }
        if let Some(w) = &cert.witness {
            match verify_equivalence(&mask, &triple, &dil, w, &sample) {
                Ok(rep) if rep.all_zero && rep.condition_d_holds => {
                    summary5.push(format!("{name} s<{}", w.degrees()))
                }
                Ok(rep) => {
                    fail5.get_or_insert(format!(
                        "{name}: max (b) {:e}, max (c) {:e}",
                        rep.max_b, rep.max_c
                    ));
                }
                Err(e) => {
                    fail5.get_or_insert(format!("{name}: {e}"));
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        fail4.get_or_insert(format!("runtime {elapsed:.1}s"));
    }
    let r4 = match fail4 {
        None => Ok(format!(
            "{} in {elapsed:.2}s (tol {REPRODUCTION_TOL:e})",
            summary4.join(", ")
        )),
        Some(f) => Err(f),
    };
    let r5 = match fail5 {
        None => Ok(format!("zero residuals: {}", summary5.join(", "))),
        Some(f) => Err(f),
    };
    (r4, r5)
}

/// Scalar p1m mask satisfying the sum and moment conditions through degree
/// `p − 1`, built by solving for two (or four) entries per point element.
fn constrained_p1m_mask(rng: &mut ChaCha8Rng, p: usize) -> Mask<Exact> {
    let zero = || Rational::from_integer(0.into());
    let beta0 = random_rational(rng);
    let betas = [beta0.clone(), Rational::from_integer(1.into()) - beta0];
    let mut entries = Vec::new();
    for (b, beta_b0) in betas.iter().enumerate() {
        let beta_b1 = random_rational(rng);
        // values at σ = (b, l), stored at σ⁻¹
        let mut values: Vec<(i64, Rational)> =
            (-3..=2).map(|l| (l, random_rational(rng))).collect();
        for parity in 0..2i64 {
            let free: Vec<i64> = [3i64, 4, 5, 6]
                .into_iter()
                .filter(|l| l.rem_euclid(2) == parity)
                .take(p)
                .collect();
            let fixed = values.iter().filter(|(l, _)| l.rem_euclid(2) == parity);
            let (s0, s1) = fixed.fold((zero(), zero()), |(a, b), (l, c)| {
                (a + c, b + Rational::from_integer((*l).into()) * c)
            });
            let r0 = beta_b0 - &s0;
            if p == 1 {
                values.push((free[0], r0));
            } else {
                let r1 = &beta_b1 - &s1;
                let (l1, l2) = (
                    Rational::from_integer(free[0].into()),
                    Rational::from_integer(free[1].into()),
                );
                let y = (&r1 - &l1 * &r0) / (&l2 - &l1);
                let x = &r0 - &y;
                values.push((free[0], x));
                values.push((free[1], y));
            }
        }
        for (l, c) in values {
            let sigma = CrystalElement::new(b, vec![l]);
            entries.push((sigma, Exact::from_rational(&c)));
        }
    }
    let triple = catalog_group("p1m", 1).unwrap();
    Mask::scalar(1, entries.into_iter().map(|(s, c)| (triple.inverse(&s), c))).unwrap()
}

fn criterion_6() -> Outcome {
    let triple = catalog_group("p1m", 1).map_err(|e| e.to_string())?;
    let dil = line_dilation(&triple);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut passes = 0;
    for n in 0..50 {
        let p = 1 + n % 2;
        let mask = constrained_p1m_mask(&mut rng, p);
        let rep = sufficient_check(&mask, &triple, &dil, p).map_err(|e| e.to_string())?;
        ensure(rep.sum_ok && rep.moments_ok, || {
            format!("mask {n} not normalized")
        })?;
        if rep.pass {
            passes += 1;
            let cert = max_accuracy(&mask, &triple, &dil, p + 1).map_err(|e| e.to_string())?;
            ensure(cert.p >= p, || {
                format!("mask {n}: sufficient for p={p}, solver {}", cert.p)
            })?;
        }
    }
    ensure(passes > 0, || "no mask passed the sufficient test".into())?;
    Ok(format!("{passes}/50 sufficient passes, 0 counterexamples"))
}

/// Random pm mask with every coset sum of `c_{σ⁻¹}` equal to one.
fn coset_normalized_pm_mask(
    rng: &mut ChaCha8Rng,
    triple: &CrystalTriple,
    dil: &Dilation,
) -> Mask<Exact> {
    let mut entries = std::collections::BTreeMap::new();
    for sigma in triple.ball(1) {
        if rng.random_bool(0.6) {
            entries.insert(sigma, random_rational(rng));
        }
    }
    for (i, delta) in dil.digits().iter().enumerate() {
        let sum: Rational = entries
            .iter()
            .filter(|(s, _)| dil.coset_index(s, triple) == i)
            .map(|(_, c)| c.clone())
            .sum();
        let slot = entries
            .entry(delta.clone())
            .or_insert_with(|| Rational::from_integer(0.into()));
        *slot = &*slot + Rational::from_integer(1.into()) - sum;
    }
    Mask::scalar(
        2,
        entries
            .into_iter()
            .map(|(s, c)| (triple.inverse(&s), Exact::from_rational(&c))),
    )
    .unwrap()
}

fn criterion_7() -> Outcome {
    let triple = catalog_group("pm", 2).map_err(|e| e.to_string())?;
    let dil = Dilation::new(scalar_dilation(2, 2), &triple).map_err(|e| e.to_string())?;
    let lattice_triple = CrystalTriple::translations(triple.lattice().clone());
    let lattice_dil =
        Dilation::new(scalar_dilation(2, 2), &lattice_triple).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ps = Vec::new();
    for n in 0..10 {
        let mask = if n % 2 == 0 {
            coset_normalized_pm_mask(&mut rng, &triple, &dil)
        } else {
            let mut entries = Vec::new();
            for sigma in triple.ball(1) {
                if rng.random_bool(0.5) {
                    entries.push((sigma, Exact::from_rational(&random_rational(&mut rng))));
                }
            }
            Mask::scalar(2, entries).unwrap()
        };
        let lifted = lift_scalar_to_matrix(&mask, &triple, &dil).map_err(|e| e.to_string())?;
        ensure(
            check_gamma_a_symmetry(&lifted, &triple, &dil) == Ok(true),
            || format!("mask {n}: lift is not symmetric"),
        )?;
        let back = extract_scalar(&lifted, &triple).map_err(|e| e.to_string())?;
        ensure(back == mask, || format!("mask {n}: extract(lift) differs"))?;
        let relifted = lift_scalar_to_matrix(&back, &triple, &dil).map_err(|e| e.to_string())?;
        ensure(relifted == lifted, || {
            format!("mask {n}: lift(extract) differs")
        })?;
        let p_scalar = max_accuracy(&mask, &triple, &dil, 3)
            .map_err(|e| e.to_string())?
            .p;
        let p_lift = max_accuracy(&lifted, &lattice_triple, &lattice_dil, 3)
            .map_err(|e| e.to_string())?
            .p;
        ensure(p_scalar == p_lift, || {
            format!("mask {n}: scalar p={p_scalar}, lift p={p_lift}")
        })?;
        ps.push(p_scalar);
    }
    Ok(format!("accuracies {ps:?} agree; round trips exact"))
}

fn criterion_8() -> Outcome {
    let triple = line_triple();
    let dil = line_dilation(&triple);
    let opts = cascade_options();
    let mut worst_fixed: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for (name, mask, _) in classical_masks().into_iter().take(2) {
        let result = cascade_iterate(&mask, &triple, &dil, &opts).map_err(|e| e.to_string())?;
        let fixed = refinement_residual(&result.field, &mask, &triple, &dil);
        ensure(fixed < 1e-6, || {
            format!("{name}: fixed-point residual {fixed:e}")
        })?;
        worst_fixed = worst_fixed.max(fixed);
        let cert = max_accuracy(&mask, &triple, &dil, 6).map_err(|e| e.to_string())?;
        let v = cert
            .witness
            .ok_or_else(|| format!("{name}: no witness"))?
            .convert(|x| x.to_c64());
        let points = sample_points(&result.field, &triple, opts.samples, opts.seed);
        for s in 0..v.degrees() {
            let cov = covariance_residual(&result, &triple, &dil, &v, s, &points);
            ensure(cov < 1e-5, || {
                format!("{name}: covariance residual {cov:e} at s={s}")
            })?;
            worst_cov = worst_cov.max(cov);
        }
    }
    Ok(format!(
        "fixed point {worst_fixed:e}, covariance {worst_cov:e}"
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, title: &str, outcome: Outcome, secs: f64| match outcome {
        Ok(detail) => println!("criterion {n} [{title}]: PASS ({detail}; {secs:.2}s)"),
        Err(detail) => {
            failed += 1;
            println!("criterion {n} [{title}]: FAIL ({detail}; {secs:.2}s)");
        }
    };
    let timed = |f: fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        (out, t.elapsed().as_secs_f64())
    };
    let (o, t) = timed(criterion_1);
    let o = if t >= 10.0 {
        Err(format!("runtime {t:.1}s"))
    } else {
        o
    };
    report(1, "monomial operator identities", o, t);
    let (o, t) = timed(criterion_2);
    report(2, "cocycle law", o, t);
    let (o, t) = timed(criterion_3);
    report(3, "group and digits", o, t);
    let start = Instant::now();
    let (o4, o5) = criterion_4_and_5();
    let t = start.elapsed().as_secs_f64();
    report(4, "classical masks", o4, t);
    report(5, "transfer equivalence", o5, t);
    let (o, t) = timed(criterion_6);
    report(6, "sufficient implies solver", o, t);
    let (o, t) = timed(criterion_7);
    report(7, "symmetry lift cross-check", o, t);
    let (o, t) = timed(criterion_8);
    report(8, "refinement fixed point", o, t);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
