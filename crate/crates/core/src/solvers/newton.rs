use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Damping, EvalTimes, NewtonConfig, NewtonReport, RefinementRecord, SolverError, SplitJacobian, SplitSystem,
    Variant,
};
use crate::linalg::{factorize_dense, factorize_sparse, norm2, Factorization};

const MAX_HALVINGS: usize = 20;
const DIVERGENCE_PATIENCE: usize = 5;

/// Runs the variant selected in `cfg`.
pub fn solve<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    match cfg.variant {
        Variant::Exact => newton_exact(sys, y0, cfg),
        Variant::Quasi => newton_quasi(sys, y0, cfg),
        Variant::Inexact => newton_inexact(sys, y0, cfg),
    }
}

pub fn newton_exact<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    drive(sys, y0, cfg, Variant::Exact)
}

pub fn newton_quasi<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    drive(sys, y0, cfg, Variant::Quasi)
}

pub fn newton_inexact<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    drive(sys, y0, cfg, Variant::Inexact)
}

fn drive<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    cfg: &NewtonConfig,
    variant: Variant,
) -> Result<(Vec<f64>, NewtonReport), SolverError> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: y0.len(),
        });
    }
    let mut times = EvalTimes::default();
    let mut report = NewtonReport::default();
    let mut y = y0.to_vec();
    let mut f = sys.residual(&y, &mut times)?;
    let mut norm_f = norm2(&f);
    let mut best = (norm_f, y.clone());
    let mut increases = 0;
    report.residual_history.push(norm_f);
    if cfg.record_iterates {
        report.iterates.push(y.clone());
    }

    let result = loop {
        if norm_f <= cfg.tol {
            report.converged = true;
            break Ok(());
        }
        if report.newton_steps >= cfg.max_steps {
            break Err(());
        }
        let dy = match direction(sys, &y, &f, norm_f, cfg, variant, &mut times, &mut report) {
            Ok(d) => d,
            Err(e) => {
                finish(&mut report, &times);
                return Err(e);
            }
        };
        let (alpha, y_new, f_new) = match cfg.damping {
            Damping::FullStep => {
                let y_new: Vec<f64> = y.iter().zip(&dy).map(|(a, d)| a + d).collect();
                let f_new = sys.residual(&y_new, &mut times)?;
                (1.0, y_new, f_new)
            }
            Damping::Armijo => armijo_search(&mut |x: &[f64]| sys.residual(x, &mut times), &y, &dy, cfg.armijo_c, norm_f)?,
        };
        let norm_new = norm2(&f_new);
        report.newton_steps += 1;
        report.step_lengths.push(alpha);
        report.residual_history.push(norm_new);
        if cfg.record_iterates {
            report.iterates.push(y_new.clone());
        }
        if norm_new > norm_f {
            increases += 1;
        } else {
            increases = 0;
        }
        y = y_new;
        f = f_new;
        norm_f = norm_new;
        if norm_f < best.0 || !best.0.is_finite() {
            best = (norm_f, y.clone());
        }
        if variant == Variant::Quasi && increases >= DIVERGENCE_PATIENCE {
            finish(&mut report, &times);
            return Err(SolverError::Divergence {
                increases,
                report: Box::new(report),
            });
        }
    };
    finish(&mut report, &times);
    match result {
        Ok(()) => Ok((y, report)),
        Err(()) => Err(SolverError::MaxStepsExceeded {
            best: best.1,
            report: Box::new(report),
        }),
    }
}

fn finish(report: &mut NewtonReport, times: &EvalTimes) {
    report.eval_uvlm = times.uvlm;
    report.eval_structure = times.structure;
}

#[allow(clippy::too_many_arguments)]
fn direction<S: SplitSystem + ?Sized>(
    sys: &mut S,
    y: &[f64],
    f: &[f64],
    norm_f: f64,
    cfg: &NewtonConfig,
    variant: Variant,
    times: &mut EvalTimes,
    report: &mut NewtonReport,
) -> Result<Vec<f64>, SolverError> {
    match variant {
        Variant::Exact => {
            let jac = sys.split_jacobian(y, times)?;
            let t = Instant::now();
            let fact = if jac.has_aero() {
                factorize_dense(&jac.materialize())?
            } else {
                factorize_sparse(&jac.structural)?
            };
            let dy = first_correction(&fact, f)?;
            report.linear_solver += t.elapsed();
            Ok(dy)
        }
        Variant::Quasi => {
            let k_str = sys.structural_jacobian(y, times)?;
            let t = Instant::now();
            let fact = factorize_sparse(&k_str)?;
            let dy = first_correction(&fact, f)?;
            report.linear_solver += t.elapsed();
            Ok(dy)
        }
        Variant::Inexact => {
            let jac = sys.split_jacobian(y, times)?;
            let eta = cfg.forcing.eta(report.newton_steps, norm_f);
            let t = Instant::now();
            let fact = factorize_sparse(&jac.structural);
            let out = fact.map_err(SolverError::from).and_then(|fact| {
                refine(&fact, &jac, f, norm_f, eta, cfg.max_refinements)
            });
            report.linear_solver += t.elapsed();
            let (dy, record) = out?;
            report.refinement_steps += record.linear_residuals.len() - 1;
            report.refinements.push(record);
            Ok(dy)
        }
    }
}

/// `Δy = −B⁻¹F`, shared by every variant so the quasi-Newton step and the
/// first refinement are the same floating-point computation.
fn first_correction(fact: &Factorization, f: &[f64]) -> Result<Vec<f64>, SolverError> {
    let mut dy = fact.solve(f)?;
    for v in dy.iter_mut() {
        *v = -*v;
    }
    Ok(dy)
}

/// Iterative refinement `Δy^j = Δy^{j−1} − B⁻¹ r^{j−1}`, `r^j = F′Δy^j + F`.
fn refine(
    fact: &Factorization,
    jac: &SplitJacobian,
    f: &[f64],
    norm_f: f64,
    eta: f64,
    max_refinements: usize,
) -> Result<(Vec<f64>, RefinementRecord), SolverError> {
    let target = eta * norm_f;
    let mut record = RefinementRecord {
        eta,
        residual_norm: norm_f,
        linear_residuals: vec![norm_f],
    };
    let mut dy = first_correction(fact, f)?;
    if !jac.has_aero() {
        // B is the full Jacobian, so the first correction is exact.
        record.linear_residuals.push(0.0);
        return Ok((dy, record));
    }
    let mut r = linear_residual(jac, &dy, f)?;
    let mut r_norm = norm2(&r);
    record.linear_residuals.push(r_norm);
    let mut j = 1;
    while r_norm > target && j < max_refinements {
        let corr = fact.solve(&r)?;
        for (d, c) in dy.iter_mut().zip(&corr) {
            *d -= c;
        }
        j += 1;
        let r_new = linear_residual(jac, &dy, f)?;
        let new_norm = norm2(&r_new);
        record.linear_residuals.push(new_norm);
        if new_norm >= r_norm {
            if new_norm <= rounding_floor(jac, &dy, f) {
                // already as accurate as the arithmetic allows
                return Ok((dy, record));
            }
            return Err(SolverError::RefinementStall {
                refinement: j,
                current: new_norm,
                previous: r_norm,
            });
        }
        r = r_new;
        r_norm = new_norm;
    }
    Ok((dy, record))
}

fn linear_residual(jac: &SplitJacobian, dy: &[f64], f: &[f64]) -> Result<Vec<f64>, SolverError> {
    let mut r = jac.matvec(dy)?;
    for (a, b) in r.iter_mut().zip(f) {
        *a += b;
    }
    Ok(r)
}

/// Size of the rounding error committed when forming `F′Δy + F`.
fn rounding_floor(jac: &SplitJacobian, dy: &[f64], f: &[f64]) -> f64 {
    let scale: Vec<f64> = jac.abs_matvec(dy).iter().zip(f).map(|(a, b)| a + b.abs()).collect();
    16.0 * f64::EPSILON * norm2(&scale)
}

/// Backtracking on `‖F(y + αd)‖² ≤ (1 − c/2) ‖F(y)‖²` with `α = 1, ½, …, 2⁻²⁰`.
pub fn line_search_armijo<F>(mut residual: F, y: &[f64], d: &[f64], c: f64) -> Result<f64, SolverError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, SolverError>,
{
    if y.len() != d.len() {
        return Err(SolverError::DimensionMismatch {
            expected: y.len(),
            found: d.len(),
        });
    }
    let norm0 = norm2(&residual(y)?);
    armijo_search(&mut residual, y, d, c, norm0).map(|(a, _, _)| a)
}

fn armijo_search(
    residual: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>, SolverError>,
    y: &[f64],
    d: &[f64],
    c: f64,
    norm0: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>), SolverError> {
    let bound = (1.0 - 0.5 * c) * norm0 * norm0;
    let mut alpha = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let trial: Vec<f64> = y.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let f = residual(&trial)?;
        let n = norm2(&f);
        if n * n <= bound {
            return Ok((alpha, trial, f));
        }
        alpha *= 0.5;
    }
    Err(SolverError::LineSearchFailed {
        halvings: MAX_HALVINGS,
    })
}

/// Power-iteration estimate of `ρ(B⁻¹F′ − I)`, the refinement contraction factor.
pub fn estimate_contraction(fact: &Factorization, jac: &SplitJacobian, iters: usize, seed: u64) -> Result<f64, SolverError> {
    let n = jac.dim();
    if fact.dim() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: fact.dim(),
        });
    }
    if !jac.has_aero() || n == 0 {
        return Ok(0.0);
    }
    let apply = |x: &[f64]| -> Result<Vec<f64>, SolverError> {
        let mut cx = vec![0.0; n];
        for b in &jac.blocks {
            b.add_product(x, &mut cx);
        }
        Ok(fact.solve(&cx)?)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let normalize = |v: &mut Vec<f64>| -> f64 {
        let s = norm2(v);
        if s > 0.0 {
            v.iter_mut().for_each(|a| *a /= s);
        }
        s
    };
    normalize(&mut x);
    for _ in 0..iters.max(1) {
        x = apply(&x)?;
        if normalize(&mut x) == 0.0 {
            return Ok(0.0);
        }
    }
    // two applications average out sign-alternating dominant pairs
    let t2 = apply(&apply(&x)?)?;
    Ok(norm2(&t2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseBlock, DenseMatrix, SparseMatrix};
    use crate::solvers::ForcingSequence;

    /// Componentwise `F(y) = y² − 4`, all Jacobian in the structural part.
    struct Square;

    impl SplitSystem for Square {
        fn dim(&self) -> usize {
            3
        }
        fn residual(&mut self, y: &[f64], _: &mut EvalTimes) -> Result<Vec<f64>, SolverError> {
            Ok(y.iter().map(|v| v * v - 4.0).collect())
        }
        fn structural_jacobian(&mut self, y: &[f64], _: &mut EvalTimes) -> Result<SparseMatrix, SolverError> {
            Ok(SparseMatrix::from_diagonal(&y.iter().map(|v| 2.0 * v).collect::<Vec<_>>()))
        }
        fn aero_blocks(&mut self, _: &[f64], _: &mut EvalTimes) -> Result<Vec<DenseBlock>, SolverError> {
            Ok(vec![])
        }
    }

    /// Linear `(B + C) y = b` with `C` a dense block.
    struct Linear {
        b: DenseMatrix,
        c: DenseMatrix,
        rhs: Vec<f64>,
    }

    impl SplitSystem for Linear {
        fn dim(&self) -> usize {
            self.rhs.len()
        }
        fn residual(&mut self, y: &[f64], _: &mut EvalTimes) -> Result<Vec<f64>, SolverError> {
            let by = self.b.matvec(y)?;
            let cy = self.c.matvec(y)?;
            Ok(by.iter().zip(&cy).zip(&self.rhs).map(|((a, c), r)| a + c - r).collect())
        }
        fn structural_jacobian(&mut self, _: &[f64], _: &mut EvalTimes) -> Result<SparseMatrix, SolverError> {
            Ok(SparseMatrix::from_dense(&self.b))
        }
        fn aero_blocks(&mut self, _: &[f64], _: &mut EvalTimes) -> Result<Vec<DenseBlock>, SolverError> {
            Ok(vec![DenseBlock::new(0, 0, self.c.clone())])
        }
    }

    fn linear(scale: f64) -> Linear {
        let b = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.0, 0.0, 0.0],
            vec![1.0, 5.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 6.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 5.0, 1.0],
            vec![0.0, 0.0, 0.0, 1.0, 4.0],
        ])
        .unwrap();
        let c = DenseMatrix::from_rows(&[
            vec![0.3, -0.2, 0.1, 0.0, 0.2],
            vec![0.1, 0.4, 0.0, -0.3, 0.0],
            vec![0.0, 0.2, -0.5, 0.1, 0.1],
            vec![-0.2, 0.0, 0.1, 0.2, 0.3],
            vec![0.1, 0.1, 0.0, 0.2, -0.4],
        ])
        .unwrap();
        let c = DenseMatrix::from_row_major(5, 5, c.as_slice().iter().map(|v| v * scale).collect()).unwrap();
        Linear {
            b,
            c,
            rhs: vec![1.0, -2.0, 0.5, 3.0, 1.5],
        }
    }

    fn cfg(variant: Variant) -> NewtonConfig {
        NewtonConfig {
            tol: 1e-12,
            variant,
            record_iterates: true,
            ..NewtonConfig::default()
        }
    }

    #[test]
    fn forcing_values() {
        let v1 = ForcingSequence::variant1();
        let v2 = ForcingSequence::variant2();
        assert_eq!(v1.eta(0, 10.0), 0.5);
        assert_eq!(v1.eta(0, 1e-3), 1e-3);
        assert!((v2.eta(0, 10.0) - 5e-6).abs() < 1e-20);
        assert_eq!(v1.eta(3, 0.0), 1e-16);
        assert_eq!(ForcingSequence::constant(1e-12).eta(0, 7.0), 1e-12);
        assert!(ForcingSequence::constant(1.5).validate().is_err());
    }

    #[test]
    fn exact_newton_on_squares() {
        let (y, rep) = newton_exact(&mut Square, &[3.0, 3.0, 3.0], &cfg(Variant::Exact)).unwrap();
        assert!(rep.converged);
        let first: Vec<f64> = rep.iterates.iter().map(|v| v[0]).collect();
        assert!((first[1] - 13.0 / 6.0).abs() < 1e-14);
        assert!((first[2] - 2.00641).abs() < 1e-5);
        assert!((first[3] - 2.0000102).abs() < 1e-7);
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert_eq!(rep.newton_steps, rep.residual_history.len() - 1);
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let (_, rep) = newton_exact(&mut Square, &[2.0, 2.0, -2.0], &cfg(Variant::Exact)).unwrap();
        assert_eq!(rep.newton_steps, 0);
        assert!(rep.converged);
    }

    #[test]
    fn variants_coincide_without_aero() {
        let y0 = [3.0, 1.0, 5.0];
        let (_, e) = newton_exact(&mut Square, &y0, &cfg(Variant::Exact)).unwrap();
        let (_, q) = newton_quasi(&mut Square, &y0, &cfg(Variant::Quasi)).unwrap();
        let (_, i) = newton_inexact(&mut Square, &y0, &cfg(Variant::Inexact)).unwrap();
        assert_eq!(e.iterates, q.iterates);
        assert_eq!(e.iterates, i.iterates);
        assert_eq!(i.refinement_steps, i.newton_steps);
        assert!(i.refinements.iter().all(|r| r.linear_residuals[1] == 0.0));
    }

    #[test]
    fn quasi_rate_matches_spectral_radius() {
        let mut sys = linear(1.0);
        let (_, rep) = newton_quasi(&mut sys, &[0.0; 5], &cfg(Variant::Quasi)).unwrap();
        // spectral radius of B⁻¹C by power iteration on the dense product
        let jac = SplitJacobian::new(SparseMatrix::from_dense(&sys.b), vec![DenseBlock::new(0, 0, sys.c.clone())]).unwrap();
        let fact = factorize_sparse(&jac.structural).unwrap();
        let rho = estimate_contraction(&fact, &jac, 500, 1).unwrap();
        let h = &rep.residual_history;
        let rate = h[h.len() - 2] / h[h.len() - 3];
        assert!((rate - rho).abs() < 0.02 * rho, "rate {rate} rho {rho}");
        // exact Newton is exact on a linear system
        let (_, e) = newton_exact(&mut sys, &[0.0; 5], &cfg(Variant::Exact)).unwrap();
        assert_eq!(e.newton_steps, 1);
    }

    #[test]
    fn inexact_meets_forcing() {
        let mut sys = linear(1.0);
        let c = NewtonConfig {
            forcing: ForcingSequence::variant2(),
            ..cfg(Variant::Inexact)
        };
        let (_, rep) = newton_inexact(&mut sys, &[0.0; 5], &c).unwrap();
        assert!(rep.converged);
        assert!(rep.refinement_steps >= rep.newton_steps);
        for r in &rep.refinements {
            let last = *r.linear_residuals.last().unwrap();
            assert!(last <= r.eta * r.residual_norm || last < 1e-13 * r.residual_norm);
            for w in r.linear_residuals.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn refinement_stall_detected() {
        let mut sys = linear(8.0);
        let c = NewtonConfig {
            forcing: ForcingSequence::constant(1e-10),
            ..cfg(Variant::Inexact)
        };
        assert!(matches!(
            newton_inexact(&mut sys, &[0.0; 5], &c),
            Err(SolverError::RefinementStall { .. })
        ));
    }

    #[test]
    fn armijo_examples() {
        let id = |x: &[f64]| -> Result<Vec<f64>, SolverError> { Ok(x.to_vec()) };
        let y = [1.0, -2.0];
        assert_eq!(line_search_armijo(id, &y, &[-1.0, 2.0], 1e-4).unwrap(), 1.0);
        assert_eq!(line_search_armijo(id, &y, &[-3.0, 6.0], 0.5).unwrap(), 0.5);
        assert!(matches!(
            line_search_armijo(id, &y, &[1.0, -2.0], 1e-4),
            Err(SolverError::LineSearchFailed { .. })
        ));
    }

    #[test]
    fn armijo_damped_newton_converges() {
        let c = NewtonConfig {
            damping: Damping::Armijo,
            ..cfg(Variant::Exact)
        };
        let (y, rep) = newton_exact(&mut Square, &[0.3, 10.0, 2.5], &c).unwrap();
        assert!(rep.converged);
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn max_steps_returns_best() {
        let c = NewtonConfig {
            max_steps: 2,
            ..cfg(Variant::Exact)
        };
        match newton_exact(&mut Square, &[30.0, 30.0, 30.0], &c) {
            Err(SolverError::MaxStepsExceeded { best, report }) => {
                assert_eq!(report.newton_steps, 2);
                assert_eq!(best, report.iterates[2]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contraction_zero_without_aero() {
        let jac = SplitJacobian::new(SparseMatrix::identity(3), vec![]).unwrap();
        let fact = factorize_sparse(&jac.structural).unwrap();
        assert_eq!(estimate_contraction(&fact, &jac, 10, 0).unwrap(), 0.0);
    }
}
