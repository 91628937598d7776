//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stvo_esn::ddtea::{alpha, beta, n_exponent, steady_state, step};
use stvo_esn::{pseudoinverse, CoreState};

pub fn rhs(j: f64, s: f64) -> f64 {
    alpha(j) * s + beta(j) * s.powf(n_exponent(j) + 1.0)
}

/// Classical fourth-order Runge-Kutta with a fixed number of substeps.
pub fn rk4(j: f64, s0: f64, d_t: f64, substeps: usize) -> f64 {
    let h = d_t / substeps as f64;
    let mut s = s0;
    for _ in 0..substeps {
        let k1 = rhs(j, s);
        let k2 = rhs(j, s + 0.5 * h * k1);
        let k3 = rhs(j, s + 0.5 * h * k2);
        let k4 = rhs(j, s + h * k3);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    s
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn st(s: f64) -> CoreState {
    CoreState::new(s).expect("state in range")
}

fn stepv(s: f64, j: f64, d_t: f64) -> Result<f64, String> {
    step(st(s), j, d_t)
        .map(CoreState::value)
        .map_err(|e| format!("step(s={s}, j={j}, d_t={d_t}): {e}"))
}

/// One randomized property over `cases` draws; returns the first violation.
pub struct PropertyOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub result: Result<(), String>,
}

fn run(
    name: &'static str,
    cases: usize,
    seed: u64,
    mut f: impl FnMut(&mut ChaCha8Rng) -> Result<(), String>,
) -> PropertyOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = (0..cases).try_for_each(|_| f(&mut rng));
    PropertyOutcome { name, cases, result }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Fixed point, semigroup, integration oracle, monotone relaxation and the
/// vanishing-interval limit of the propagator.
pub fn dynamics_suite(cases: usize, seed: u64) -> Vec<PropertyOutcome> {
    vec![
        run("fixed point (1e-10)", cases, seed, |rng| {
            let j = rng.gen_range(6.1..9.0);
            let d_t = 10f64.powf(rng.gen_range(-7.0..-1.0));
            let s_inf = steady_state(j).map_err(|e| e.to_string())?.value();
            let next = stepv(s_inf, j, d_t)?;
            ensure((next - s_inf).abs() <= 1e-10, || {
                format!("j={j} d_t={d_t}: {s_inf} -> {next}")
            })
        }),
        run("semigroup (rel 1e-9)", cases, seed + 1, |rng| {
            let j = rng.gen_range(5.0..9.0);
            let s0 = rng.gen_range(0.05..0.999);
            let (a, b) = (rng.gen_range(1e-6..4e-3), rng.gen_range(1e-6..4e-3));
            let two = stepv(stepv(s0, j, a)?, j, b)?;
            let one = stepv(s0, j, a + b)?;
            ensure(rel(two, one) <= 1e-9, || {
                format!("j={j} s0={s0} a={a} b={b}: {two} vs {one}")
            })
        }),
        run("ODE oracle (rel 1e-6)", cases, seed + 2, |rng| {
            let j = rng.gen_range(5.0..9.0);
            let s0 = rng.gen_range(0.05..0.999);
            let d_t = rng.gen_range(1e-6..5e-3);
            let closed = stepv(s0, j, d_t)?;
            let oracle = rk4(j, s0, d_t, 4000);
            ensure(rel(closed, oracle) <= 1e-6, || {
                format!("j={j} s0={s0} d_t={d_t}: {closed} vs {oracle}")
            })
        }),
        run("monotone relaxation", cases, seed + 3, |rng| {
            let j = rng.gen_range(6.1..9.0);
            let s0 = rng.gen_range(0.05..0.999);
            let d_t = rng.gen_range(1e-5..2e-3);
            let s_inf = steady_state(j).map_err(|e| e.to_string())?.value();
            let mut s = s0;
            for _ in 0..50 {
                let next = stepv(s, j, d_t)?;
                let ok = if s0 < s_inf {
                    next >= s - 1e-15 && next <= s_inf + 1e-12
                } else {
                    next <= s + 1e-15 && next >= s_inf - 1e-12
                };
                ensure(ok, || format!("j={j} s0={s0} d_t={d_t}: {s} -> {next}, s_inf {s_inf}"))?;
                s = next;
            }
            Ok(())
        }),
        run("d_t -> 0 identity", cases, seed + 4, |rng| {
            let j = rng.gen_range(5.0..9.0);
            let s0 = rng.gen_range(0.05..0.999);
            ensure(stepv(s0, j, 0.0)? == s0, || {
                format!("j={j} s0={s0}: zero interval moved the state")
            })?;
            let tiny = stepv(s0, j, 1e-14)?;
            ensure(rel(tiny, s0) <= 1e-9, || format!("j={j} s0={s0}: {tiny}"))
        }),
    ]
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
}

pub fn fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral norm by power iteration on `A^T A`, independent of any SVD.
pub fn spectral(a: &Array2<f64>) -> f64 {
    let ata = a.t().dot(a);
    let mut v = Array2::<f64>::ones((ata.ncols(), 1));
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = ata.dot(&v);
        lambda = fro(&w);
        if lambda == 0.0 {
            return 0.0;
        }
        v = w / lambda;
    }
    lambda.sqrt()
}

/// Tall, wide and rank-deficient test matrices in rotation.
pub fn penrose_case(i: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let r = rng.gen_range(1..40);
    let c = rng.gen_range(1..40);
    match i % 4 {
        0 => uniform(rng, r.max(c), r.min(c)),
        1 => uniform(rng, r.min(c), r.max(c)),
        _ => {
            let k = rng.gen_range(1..=r.min(c));
            uniform(rng, r, k).dot(&uniform(rng, k, c))
        }
    }
}

/// Checks the four Penrose conditions on `count` matrices, tolerance
/// `1e-8 * max(||A||_2, 1)`.
pub fn penrose_suite(count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let a = penrose_case(i, &mut rng);
        let p = pseudoinverse(a.view()).map_err(|e| e.to_string())?;
        if p.dim() != (a.ncols(), a.nrows()) {
            return Err(format!("matrix {i}: pseudoinverse has shape {:?}", p.dim()));
        }
        let tol = 1e-8 * spectral(&a).max(1.0);
        let ap = a.dot(&p);
        let pa = p.dot(&a);
        let conds = [
            ("A A+ A = A", fro(&(ap.dot(&a) - &a))),
            ("A+ A A+ = A+", fro(&(pa.dot(&p) - &p))),
            ("(A A+)^T = A A+", fro(&(ap.t().to_owned() - &ap))),
            ("(A+ A)^T = A+ A", fro(&(pa.t().to_owned() - &pa))),
        ];
        for (name, err) in conds {
            if err.is_nan() || err > tol {
                return Err(format!("matrix {i} {:?}: {name} residual {err:e} > {tol:e}", a.dim()));
            }
        }
    }
    Ok(())
}
