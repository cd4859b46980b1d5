//! Scratch stress probe: audit exhaustive game trees over random states.

use mres_core::{
    analyze, audit_trace, default_max_steps, run, Axis, BiSeries, DevilStrategy, DivisorInfo,
    DriverError, FqCtx, Hypersurface, MonomialData, MonomialState,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_state(rng: &mut ChaCha8Rng, p: u32, m: u32, e: u32) -> Option<MonomialState> {
    let ctx = FqCtx::new(p, m).unwrap();
    let pe = p.pow(e);
    let prec = 40;
    let a = *[pe, pe, 2 * pe, pe + 1].choose(rng).unwrap();
    let ndiv = if rng.random_bool(0.5) { 1 } else { 2 };
    let mut divisors = Vec::new();
    let mut sum = 0u32;
    for k in 0..ndiv {
        let axis = if ndiv == 2 {
            [Axis::X, Axis::Y][k]
        } else if rng.random_bool(0.5) {
            Axis::X
        } else {
            Axis::Y
        };
        let mv = rng.random_range(1..=(2 * a + 3));
        sum += mv;
        divisors.push(DivisorInfo {
            axis,
            index: k as u32,
            m: mv,
        });
    }
    if sum <= a {
        // keep Σm > a
        divisors[0].m += a - sum + 1;
    }
    let mut coeffs = Vec::new();
    for i in 1..=pe {
        if i < pe && rng.random_bool(0.8) {
            coeffs.push(BiSeries::zero(&ctx, prec));
            continue;
        }
        let nterms = rng.random_range(1..=4);
        let mut terms = Vec::new();
        for _ in 0..nterms {
            let gx = rng.random_range(0..=10u32);
            let gy = rng.random_range(0..=10u32);
            let c = loop {
                let digits: Vec<u32> = (0..m).map(|_| rng.random_range(0..p)).collect();
                if let Some(c) = ctx.from_digits(&digits) {
                    if !c.is_zero() {
                        break c;
                    }
                }
            };
            terms.push(((gx, gy), c));
        }
        // Weierstrass order ord(a_i) > i plus coefficient control for
        // i < pe: x_D^{ceil(m_D i / a)} | a_i.
        let ok_terms: Vec<_> = terms
            .into_iter()
            .filter(|&((gx, gy), _)| {
                gx + gy > i
                    && divisors.iter().all(|d| {
                        let need = (d.m * i).div_ceil(a);
                        match d.axis {
                            Axis::X => i == pe || gx >= need,
                            Axis::Y => i == pe || gy >= need,
                        }
                    })
            })
            .collect();
        if i == pe && ok_terms.is_empty() {
            return None;
        }
        coeffs.push(BiSeries::from_terms(&ctx, prec, ok_terms));
    }
    let hyp = Hypersurface::new(p, e, coeffs).ok()?;
    let st = MonomialState::new(hyp, MonomialData { a, divisors }, 0);
    if !st.validate().ok() {
        return None;
    }
    analyze(&st).ok().map(|_| st)
}

#[test]
#[ignore]
fn probe_audit_over_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11D17);
    let mut games = 0usize;
    let mut audited = 0usize;
    let mut failures = 0usize;
    for trial in 0..4000 {
        let (p, m, e) = *[(2, 1, 1), (3, 1, 1), (2, 2, 1), (2, 1, 2), (3, 2, 1), (3, 1, 2)]
            .choose(&mut rng)
            .unwrap();
        let Some(st) = random_state(&mut rng, p, m, e) else {
            continue;
        };
        let steps = default_max_steps(&st);
        let traces = match run(&st, &DevilStrategy::Exhaustive { max_paths: 40 }, steps) {
            Ok(t) => t,
            Err(DriverError::PathBudget { .. }) => continue,
            Err(e) => panic!("trial {trial}: driver error {e}"),
        };
        games += 1;
        for t in &traces {
            audited += 1;
            let audit = audit_trace(t);
            let fails = audit.failures();
            if !fails.is_empty() {
                let root = &t.initial_state;
                println!(
                    "trial {trial} (p={p}, m={m}, e={e}): a={} divisors={:?}",
                    root.monomial.a, root.monomial.divisors
                );
                for i in 1..=root.pe() {
                    let c = root.hyp.coeff(i);
                    let terms: Vec<String> = c
                        .terms()
                        .map(|(&(gx, gy), v)| format!("x^{gx} y^{gy} * {v:?}"))
                        .collect();
                    println!("  a_{i} = {}", terms.join(" + "));
                }
                for (k, s) in t.steps.iter().enumerate() {
                    println!(
                        "  step {k}: {} fiber={:?} pre_cfg={:?} pre_spade={:?} post_spade={:?} outcome={}",
                        s.kind,
                        s.fiber,
                        s.pre.configuration,
                        s.pre.inv_spade,
                        s.post.as_ref().map(|p| &p.inv_spade),
                        s.outcome
                    );
                }
            }
            for l in fails {
                failures += 1;
                println!(
                    "trial {trial} (p={p}, m={m}, e={e}): step {} {:?} {} — {}",
                    l.step, l.fiber, l.name, l.detail
                );
            }
        }
    }
    println!("{games} games, {audited} traces audited, {failures} failures");
    assert!(games > 100, "probe generated too few games: {games}");
    assert_eq!(failures, 0);
}
