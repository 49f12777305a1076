//! Fast checks of the oracles, estimators and learner. The printed form of
//! the threshold recursion is expected to disagree with brute force; that is
//! reported, not treated as a failure.

use anyhow::{bail, Result};
use qfb_core::feedback::{analytic_goodput, empirical_goodput};
use qfb_core::kest::{moment_estimator_1, moment_estimator_2, moment_estimator_3, MomentFeatures, NUM_MOMENTS};
use qfb_core::numeric::quad::integrate_pieces;
use qfb_core::oracle::{brute_force, ergodic_capacity, threshold_recursion_with, RecursionVariant};
use qfb_core::rl::{KSource, RlConfig, RlEnvironment, Segment};
use qfb_core::{sample_gammas, RicianSpec};

const SNR_DB: f64 = 20.0;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("ok    {name}: {detail}");
        } else {
            println!("FAIL  {name}: {detail}");
            self.failures += 1;
        }
    }
}

/// E1 by its power series; adequate for the small arguments used here.
fn e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..60 {
        term *= -x / k as f64;
        sum -= term / k as f64;
    }
    -EULER - x.ln() + sum
}

fn population_features(k: f64) -> Result<MomentFeatures<f64>> {
    let spec = RicianSpec::new(k, 1.0, 1.0)?;
    let mut pts = vec![0.0];
    for p in [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.9999, 1.0 - 1e-8, 1.0 - 1e-14] {
        pts.push(spec.quantile(p)?);
    }
    // g^n weights the tail heavily; carry the range well past the last quantile
    pts.push(2.0 * pts[pts.len() - 1]);
    let moment = |n: i32| integrate_pieces(|g: f64| g.powi(n) * spec.pdf(g).unwrap_or(0.0), &pts, 1e-16, 1e-14);
    let m2 = moment(2)?;
    let mut raw = [0.0; NUM_MOMENTS];
    for (i, r) in raw.iter_mut().enumerate() {
        *r = moment(i as i32 + 1)? / m2.powf((i + 1) as f64 / 2.0);
    }
    Ok(MomentFeatures { raw_moments: raw, sample_count: usize::MAX })
}

pub fn run() -> Result<()> {
    let mut r = Report { failures: 0 };

    let snr: f64 = 100.0;
    let erg = ergodic_capacity(&RicianSpec::new(0.0, 1.0, snr)?)?;
    let closed = std::f64::consts::LOG2_E * (1.0 / snr).exp() * e1(1.0 / snr);
    r.check("ergodic capacity, Rayleigh", (erg - closed).abs() < 1e-6, format!("{erg:.9} vs {closed:.9}"));

    for k in [0.0, 10.0] {
        let spec = RicianSpec::new(k, 1.0, 10f64.powf(SNR_DB / 10.0))?;
        let mut g = Vec::new();
        for l in 1..=4 {
            g.push(brute_force(&spec, l, 256)?.goodput);
        }
        g.push(ergodic_capacity(&spec)?);
        let ok = g.windows(2).all(|w| w[1] - w[0] >= 1e-4);
        r.check(&format!("goodput increases with Λ, K={k}"), ok, format!("{g:.5?}"));

        for l in 2..=4 {
            let bf = g[l - 1];
            let pd = threshold_recursion_with(&spec, l, RecursionVariant::PowerDomain)?.goodput;
            let gap = (bf - pd).abs() / bf;
            r.check(&format!("power-domain recursion, K={k} Λ={l}"), gap < 1e-3, format!("relative gap {gap:.2e}"));
            match threshold_recursion_with(&spec, l, RecursionVariant::Printed) {
                Ok(sol) => {
                    let gap = (bf - sol.goodput).abs() / bf;
                    let verdict = if gap < 1e-3 { "agrees" } else { "DISCREPANCY, brute force is the reference" };
                    println!("note  printed recursion, K={k} Λ={l}: relative gap {gap:.2e} ({verdict})");
                }
                Err(e) => println!("note  printed recursion, K={k} Λ={l}: no solution ({e}); brute force is the reference"),
            }
        }

        let best = brute_force(&spec, 4, 256)?;
        let analytic = analytic_goodput(&best.scheme, &spec);
        let draws: Vec<f64> = sample_gammas(&spec, 200_000, 5)?.into_iter().map(|s| s.gamma()).collect();
        let emp = empirical_goodput(&best.scheme, &draws)?;
        let max_rate = best.scheme.rates().iter().cloned().fold(0.0, f64::max);
        let tol = 5.0 * max_rate / (draws.len() as f64).sqrt();
        r.check(
            &format!("empirical goodput of the optimal scheme, K={k}"),
            (emp.goodput - analytic.goodput).abs() < tol,
            format!("analytic {:.5}, empirical {:.5}", analytic.goodput, emp.goodput),
        );
    }

    for k in [0.0, 1.0, 5.0, 10.0, 50.0] {
        let f = population_features(k)?;
        let est = [moment_estimator_1(&f), moment_estimator_2(&f), moment_estimator_3(&f)];
        let worst = est.iter().map(|e| (e.k_hat - k).abs()).fold(0.0, f64::max);
        r.check(&format!("moment estimators on exact moments, K={k}"), worst < 1e-6, format!("worst error {worst:.1e}"));
    }

    let env = RlEnvironment::new(RlConfig { samples_per_iteration: 50, ..RlConfig::default() }, KSource::MomentOne)?;
    let sched = [Segment { k_db: 0.0, iterations: 400 }, Segment { k_db: 20.0, iterations: 400 }];
    let a = env.run_schedule(&sched, 3)?;
    let b = env.run_schedule(&sched, 3)?;
    let ordered = a.iter().all(|x| x.indices.windows(2).all(|w| w[0] < w[1]));
    r.check("learner is deterministic and keeps thresholds ordered", a == b && ordered, format!("{} iterations", a.len()));

    if r.failures > 0 {
        bail!("{} self-test check(s) failed", r.failures);
    }
    println!("all checks passed");
    Ok(())
}
