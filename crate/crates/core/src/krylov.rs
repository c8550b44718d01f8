//! Preconditioned MINRES and residual bookkeeping.

use std::fmt::Write as _;
use std::time::Instant;

use crate::blocksparse::BlockSparseMatrix;
use crate::cefact::CeFactorization;
use crate::error::{CeError, Result};
use crate::scalar::{dot, norm2, Scalar};

/// Symmetric operator `y = A x`.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()>;
}

/// Symmetric positive definite `z = M⁻¹ r`.
pub trait Preconditioner<T> {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<()>;
}

impl<T: Scalar> LinearOperator<T> for BlockSparseMatrix<T> {
    fn dim(&self) -> usize {
        BlockSparseMatrix::dim(self)
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        self.matvec_into(x, y)
    }
}

/// The factorization as an approximate inverse of `A`.
impl<T: Scalar> Preconditioner<T> for CeFactorization<T> {
    fn apply_inverse(&self, r: &[T], z: &mut [T]) -> Result<()> {
        if r.len() != self.dim() || z.len() != self.dim() {
            return Err(CeError::LengthMismatch { expected: self.dim(), got: r.len() });
        }
        z.copy_from_slice(r);
        self.solve_in_place(z);
        Ok(())
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    pub n: usize,
    pub f: F,
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) -> Result<()> {
        (self.f)(x, y);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Relative residual estimate from the recurrence.
    pub recurrence: f64,
    /// `‖b − A x‖ / ‖b‖`, only filled where it was computed.
    pub true_residual: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "iter,recurrence_resid,true_resid,seconds";

impl IterationTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            let t = r.true_residual.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:e},{},{:e}", r.iter, r.recurrence, t, r.seconds);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(TRACE_HEADER) {
            return Err(CeError::Parse { line: 1, msg: "unexpected trace header".into() });
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let bad = || CeError::Parse { line: k + 2, msg: format!("bad trace row `{line}`") };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            rows.push(TraceRow {
                iter: f[0].parse().map_err(|_| bad())?,
                recurrence: f[1].parse().map_err(|_| bad())?,
                true_residual: if f[2].is_empty() { None } else { Some(f[2].parse().map_err(|_| bad())?) },
                seconds: f[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { rows })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Recurrence estimate at exit, relative to its initial value.
    pub final_residual: f64,
    /// `‖b − A x‖ / ‖b‖` at exit.
    pub true_residual: f64,
    pub seconds: f64,
    pub trace: IterationTrace,
}

pub const REPORT_HEADER: &str = "converged,iterations,final_residual,true_residual,seconds";

impl SolveReport {
    pub fn to_csv(&self) -> String {
        format!(
            "{REPORT_HEADER}\n{},{},{:e},{:e},{:e}\n",
            self.converged, self.iterations, self.final_residual, self.true_residual, self.seconds
        )
    }

    /// Inverse of [`SolveReport::to_csv`]; the trace is not part of the file.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_HEADER) {
            return Err(CeError::Parse { line: 1, msg: "unexpected report header".into() });
        }
        let line = lines.next().unwrap_or_default();
        let bad = || CeError::Parse { line: 2, msg: format!("bad report row `{line}`") };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 || lines.next().is_some() {
            return Err(bad());
        }
        Ok(Self {
            converged: f[0].parse().map_err(|_| bad())?,
            iterations: f[1].parse().map_err(|_| bad())?,
            final_residual: f[2].parse().map_err(|_| bad())?,
            true_residual: f[3].parse().map_err(|_| bad())?,
            seconds: f[4].parse().map_err(|_| bad())?,
            trace: IterationTrace::default(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinresOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: 1000 }
    }
}

/// Preconditioned MINRES (Paige–Saunders) from a zero initial guess.
///
/// Stops once the recurrence residual, measured in the `M⁻¹` norm, falls to
/// `tol` times its initial value. A Lanczos breakdown (`β = 0`) means the
/// Krylov space is invariant and the current iterate is exact.
pub fn minres<T: Scalar>(
    a: &dyn LinearOperator<T>,
    m: Option<&dyn Preconditioner<T>>,
    b: &[T],
    opts: &MinresOptions,
) -> Result<(Vec<T>, SolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(CeError::LengthMismatch { expected: n, got: b.len() });
    }
    let start = Instant::now();
    let precond = |r: &[T], z: &mut [T]| -> Result<()> {
        match m {
            Some(m) => {
                m.apply_inverse(r, z)?;
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(CeError::NonFinite);
                }
                Ok(())
            }
            None => {
                z.copy_from_slice(r);
                Ok(())
            }
        }
    };

    let mut x = vec![T::zero(); n];
    let mut r1 = b.to_vec();
    let mut y = vec![T::zero(); n];
    precond(&r1, &mut y)?;
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < T::zero() {
        return Err(CeError::IndefinitePreconditioner(beta1_sq.as_f64()));
    }
    let beta1 = beta1_sq.sqrt();
    let mut trace = IterationTrace::default();
    trace.rows.push(TraceRow { iter: 0, recurrence: 1.0, true_residual: None, seconds: 0.0 });
    if beta1 == T::zero() {
        let report = finish(a, b, &x, true, 0, 0.0, trace, start)?;
        return Ok((x, report));
    }

    let mut r2 = r1.clone();
    let mut v = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut w1 = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let (mut oldb, mut beta) = (T::zero(), beta1);
    let (mut dbar, mut epsln) = (T::zero(), T::zero());
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let tol = T::lit(opts.tol);
    let mut converged = false;
    let mut iterations = 0;
    let mut rel = 1.0;

    for itn in 1..=opts.maxit {
        iterations = itn;
        let s = T::one() / beta;
        for (vi, &yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        a.apply(&v, &mut y)?;
        if itn >= 2 {
            let c = beta / oldb;
            for (yi, &ri) in y.iter_mut().zip(&r1) {
                *yi -= c * ri;
            }
        }
        let alfa = dot(&v, &y);
        let c = alfa / beta;
        for (yi, &ri) in y.iter_mut().zip(&r2) {
            *yi -= c * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y)?;
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < T::zero() {
            return Err(CeError::IndefinitePreconditioner(beta_sq.as_f64()));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(T::epsilon());
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;

        let denom = T::one() / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for k in 0..n {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) * denom;
            x[k] += phi * w[k];
        }

        rel = (phibar / beta1).as_f64();
        trace.rows.push(TraceRow {
            iter: itn,
            recurrence: rel,
            true_residual: None,
            seconds: start.elapsed().as_secs_f64(),
        });
        if phibar <= tol * beta1 || beta == T::zero() {
            converged = true;
            break;
        }
    }
    let report = finish(a, b, &x, converged, iterations, rel, trace, start)?;
    Ok((x, report))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    a: &dyn LinearOperator<T>,
    b: &[T],
    x: &[T],
    converged: bool,
    iterations: usize,
    final_residual: f64,
    mut trace: IterationTrace,
    start: Instant,
) -> Result<SolveReport> {
    let res = relative_residual(a, x, b)?;
    if let Some(last) = trace.rows.last_mut() {
        last.true_residual = Some(res.value);
    }
    Ok(SolveReport {
        converged,
        iterations,
        final_residual,
        true_residual: res.value,
        seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// `‖A x − b‖ / ‖b‖`; when `b = 0` the plain norm `‖A x‖` is returned and flagged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub absolute: bool,
}

pub fn relative_residual<T: Scalar>(a: &dyn LinearOperator<T>, x: &[T], b: &[T]) -> Result<Residual> {
    let n = a.dim();
    if x.len() != n || b.len() != n {
        return Err(CeError::LengthMismatch { expected: n, got: if x.len() != n { x.len() } else { b.len() } });
    }
    let mut r = vec![T::zero(); n];
    a.apply(x, &mut r)?;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let num = norm2(&r).as_f64();
    let den = norm2(b).as_f64();
    Ok(if den == 0.0 { Residual { value: num, absolute: true } } else { Residual { value: num / den, absolute: false } })
}

/// `‖x − x*‖ / ‖x*‖`
pub fn error_vs_reference<T: Scalar>(x: &[T], reference: &[T]) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(CeError::LengthMismatch { expected: reference.len(), got: x.len() });
    }
    let d: Vec<T> = x.iter().zip(reference).map(|(&p, &q)| p - q).collect();
    let den = norm2(reference).as_f64();
    let num = norm2(&d).as_f64();
    Ok(if den == 0.0 { num } else { num / den })
}
