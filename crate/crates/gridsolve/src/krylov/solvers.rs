//! The four solver loops. Each records one relative residual per iteration
//! (BiCGSTAB per half step, GMRES per inner Arnoldi step), stops on
//! `||r|| / ||b|| <= tol`, and reports breakdown instead of dividing by a
//! vanishing inner product.

use super::{KrylovConfig, LinearOperator};
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::report::SolveReport;
use crate::scalar::Scalar;

/// Conjugate gradients for SPD operators. Violated definiteness surfaces as
/// breakdown or non-convergence, never silent garbage.
pub fn cg<S: Scalar, O: LinearOperator<S>>(
    op: &mut O,
    b: &O::Vector,
    x0: &O::Vector,
    cfg: &KrylovConfig,
) -> Result<(O::Vector, SolveReport)> {
    cfg.validate()?;
    let mut report = SolveReport::new("cg");
    let bnorm = op.norm(b)?.to_f64();
    if bnorm == 0.0 {
        report.converged = true;
        report.final_relres = 0.0;
        return Ok((op.zeros(), report));
    }
    let breakdown_eps = cfg.breakdown_for::<S>();
    let max_iters = cfg.max_iters_for(op.dim());

    let mut x = x0.clone();
    let mut ax = op.zeros();
    op.apply(&x, &mut ax)?;
    let mut r = b.clone();
    op.axpy(-S::ONE, &ax, &mut r)?;
    let mut rz = op.dot(&r, &r)?;
    let relres0 = rz.to_f64().sqrt() / bnorm;
    if relres0 <= cfg.tol {
        report.converged = true;
        report.final_relres = relres0;
        return Ok((x, report));
    }
    let mut p = r.clone();
    let mut ap = op.zeros();
    for _ in 0..max_iters {
        op.apply(&p, &mut ap)?;
        let pap = op.dot(&p, &ap)?;
        let pp = op.dot(&p, &p)?;
        if pap.to_f64() <= breakdown_eps * pp.to_f64() {
            report.breakdown = true;
            break;
        }
        let alpha = rz / pap;
        op.axpy(alpha, &p, &mut x)?;
        op.axpy(-alpha, &ap, &mut r)?;
        let rz_new = op.dot(&r, &r)?;
        let relres = rz_new.to_f64().sqrt() / bnorm;
        report.record(relres);
        if relres <= cfg.tol {
            report.converged = true;
            break;
        }
        let beta = rz_new / rz;
        // p <- r + beta p
        let mut pnew = r.clone();
        op.axpy(beta, &p, &mut pnew)?;
        p = pnew;
        rz = rz_new;
    }
    Ok((x, report))
}

/// Restarted GMRES(m): Arnoldi with modified Gram-Schmidt, Givens-rotation
/// least squares with the implicit residual norm available at every inner
/// step. Happy breakdown (exact solution inside the Krylov space) counts as
/// convergence.
pub fn gmres<S: Scalar, O: LinearOperator<S>>(
    op: &mut O,
    b: &O::Vector,
    x0: &O::Vector,
    cfg: &KrylovConfig,
) -> Result<(O::Vector, SolveReport)> {
    cfg.validate()?;
    let mut report = SolveReport::new("gmres");
    let bnorm = op.norm(b)?.to_f64();
    if bnorm == 0.0 {
        report.converged = true;
        report.final_relres = 0.0;
        return Ok((op.zeros(), report));
    }
    let breakdown_eps = cfg.breakdown_for::<S>();
    let max_iters = cfg.max_iters_for(op.dim());
    let m = cfg.restart_m;

    let mut x = x0.clone();
    let mut total_inner = 0usize;
    'outer: loop {
        let mut ax = op.zeros();
        op.apply(&x, &mut ax)?;
        let mut r = b.clone();
        op.axpy(-S::ONE, &ax, &mut r)?;
        let beta = op.norm(&r)?;
        let relres = beta.to_f64() / bnorm;
        if relres <= cfg.tol {
            // the explicit residual is the one the stopping test accepted
            report.final_relres = relres;
            report.converged = true;
            break 'outer;
        }
        if total_inner >= max_iters {
            break 'outer;
        }

        let mut basis: Vec<O::Vector> = Vec::with_capacity(m + 1);
        basis.push(op.scaled(S::ONE / beta, &r)?);
        let mut h = DenseMatrix::<S>::zeros(m + 1, m);
        let mut cs = vec![S::ZERO; m];
        let mut sn = vec![S::ZERO; m];
        let mut g = vec![S::ZERO; m + 1];
        g[0] = beta;

        let mut k_used = 0usize;
        let mut converged = false;
        for j in 0..m {
            if total_inner >= max_iters {
                break;
            }
            // Arnoldi step with modified Gram-Schmidt
            let mut w = op.zeros();
            op.apply(&basis[j], &mut w)?;
            for i in 0..=j {
                let hij = op.dot(&w, &basis[i])?;
                h.set(i, j, hij);
                op.axpy(-hij, &basis[i], &mut w)?;
            }
            let hj1 = op.norm(&w)?;
            let col_scale = {
                let mut s = hj1.to_f64() * hj1.to_f64();
                for i in 0..=j {
                    let v = h.get(i, j).to_f64();
                    s += v * v;
                }
                s.sqrt()
            };
            let happy = hj1.to_f64() <= breakdown_eps * col_scale;
            h.set(j + 1, j, hj1);
            if !happy {
                basis.push(op.scaled(S::ONE / hj1, &w)?);
            }

            // fold the new column into the existing rotations, then zero the
            // subdiagonal with a fresh rotation
            for i in 0..j {
                let t1 = cs[i] * h.get(i, j) + sn[i] * h.get(i + 1, j);
                let t2 = -sn[i] * h.get(i, j) + cs[i] * h.get(i + 1, j);
                h.set(i, j, t1);
                h.set(i + 1, j, t2);
            }
            let (hjj, hj1j) = (h.get(j, j), h.get(j + 1, j));
            let rnorm = (hjj * hjj + hj1j * hj1j).sqrt();
            if rnorm == S::ZERO {
                cs[j] = S::ONE;
                sn[j] = S::ZERO;
            } else {
                cs[j] = hjj / rnorm;
                sn[j] = hj1j / rnorm;
            }
            h.set(j, j, cs[j] * hjj + sn[j] * hj1j);
            h.set(j + 1, j, S::ZERO);
            let gj = g[j];
            g[j] = cs[j] * gj;
            g[j + 1] = -sn[j] * gj;

            total_inner += 1;
            k_used = j + 1;
            let relres_impl = g[j + 1].to_f64().abs() / bnorm;
            report.record(relres_impl);
            if happy || relres_impl <= cfg.tol {
                converged = true;
                break;
            }
        }

        // back-substitute R y = g and fold the correction into x
        if k_used > 0 {
            let mut y = vec![S::ZERO; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for jj in i + 1..k_used {
                    s -= h.get(i, jj) * y[jj];
                }
                y[i] = if h.get(i, i) == S::ZERO { S::ZERO } else { s / h.get(i, i) };
            }
            for (jj, yv) in y.iter().enumerate() {
                op.axpy(*yv, &basis[jj], &mut x)?;
            }
        }
        if converged {
            report.converged = true;
            break 'outer;
        }
        if total_inner >= max_iters {
            break 'outer;
        }
        // otherwise restart from the updated iterate
    }
    Ok((x, report))
}

/// BiCG: two mutually orthogonal residual sequences driven by A and A^T,
/// with the shadow residual seeded from the initial residual.
pub fn bicg<S: Scalar, O: LinearOperator<S>>(
    op: &mut O,
    b: &O::Vector,
    x0: &O::Vector,
    cfg: &KrylovConfig,
) -> Result<(O::Vector, SolveReport)> {
    if !op.supports_transpose() {
        return Err(crate::error::Error::InvalidInput(
            "bicg requires an operator with a transpose apply".into(),
        ));
    }
    cfg.validate()?;
    let mut report = SolveReport::new("bicg");
    let bnorm = op.norm(b)?.to_f64();
    if bnorm == 0.0 {
        report.converged = true;
        report.final_relres = 0.0;
        return Ok((op.zeros(), report));
    }
    let breakdown_eps = cfg.breakdown_for::<S>();
    let max_iters = cfg.max_iters_for(op.dim());

    let mut x = x0.clone();
    let mut ax = op.zeros();
    op.apply(&x, &mut ax)?;
    let mut r = b.clone();
    op.axpy(-S::ONE, &ax, &mut r)?;
    let relres0 = op.norm(&r)?.to_f64() / bnorm;
    if relres0 <= cfg.tol {
        report.converged = true;
        report.final_relres = relres0;
        return Ok((x, report));
    }
    let mut rt = r.clone();
    let mut p = r.clone();
    let mut pt = rt.clone();
    let mut rho = op.dot(&rt, &r)?;
    let mut q = op.zeros();
    let mut qt = op.zeros();
    for _ in 0..max_iters {
        op.apply(&p, &mut q)?;
        op.apply_transpose(&pt, &mut qt)?;
        let den = op.dot(&pt, &q)?;
        let scale = op.norm(&pt)?.to_f64() * op.norm(&q)?.to_f64();
        if den.to_f64().abs() <= breakdown_eps * scale {
            report.breakdown = true;
            break;
        }
        let alpha = rho / den;
        op.axpy(alpha, &p, &mut x)?;
        op.axpy(-alpha, &q, &mut r)?;
        op.axpy(-alpha, &qt, &mut rt)?;
        let relres = op.norm(&r)?.to_f64() / bnorm;
        report.record(relres);
        if relres <= cfg.tol {
            report.converged = true;
            break;
        }
        let rho_new = op.dot(&rt, &r)?;
        let scale = op.norm(&rt)?.to_f64() * op.norm(&r)?.to_f64();
        if rho_new.to_f64().abs() <= breakdown_eps * scale {
            report.breakdown = true;
            break;
        }
        let beta = rho_new / rho;
        let mut pnew = r.clone();
        op.axpy(beta, &p, &mut pnew)?;
        p = pnew;
        let mut ptnew = rt.clone();
        op.axpy(beta, &pt, &mut ptnew)?;
        pt = ptnew;
        rho = rho_new;
    }
    Ok((x, report))
}

/// BiCGSTAB with the stabilizing half step; residuals are recorded per half
/// iteration, matching the iteration counter.
pub fn bicgstab<S: Scalar, O: LinearOperator<S>>(
    op: &mut O,
    b: &O::Vector,
    x0: &O::Vector,
    cfg: &KrylovConfig,
) -> Result<(O::Vector, SolveReport)> {
    cfg.validate()?;
    let mut report = SolveReport::new("bicgstab");
    let bnorm = op.norm(b)?.to_f64();
    if bnorm == 0.0 {
        report.converged = true;
        report.final_relres = 0.0;
        return Ok((op.zeros(), report));
    }
    let breakdown_eps = cfg.breakdown_for::<S>();
    let max_iters = cfg.max_iters_for(op.dim());

    let mut x = x0.clone();
    let mut ax = op.zeros();
    op.apply(&x, &mut ax)?;
    let mut r = b.clone();
    op.axpy(-S::ONE, &ax, &mut r)?;
    let relres0 = op.norm(&r)?.to_f64() / bnorm;
    if relres0 <= cfg.tol {
        report.converged = true;
        report.final_relres = relres0;
        return Ok((x, report));
    }
    let rt = r.clone();
    let mut p = op.zeros();
    let mut v = op.zeros();
    let mut rho = S::ONE;
    let mut alpha = S::ONE;
    let mut omega = S::ONE;
    let mut first = true;
    while report.iterations < max_iters {
        let rho_new = op.dot(&rt, &r)?;
        let scale = op.norm(&rt)?.to_f64() * op.norm(&r)?.to_f64();
        if rho_new.to_f64().abs() <= breakdown_eps * scale {
            report.breakdown = true;
            break;
        }
        if first {
            p = r.clone();
            first = false;
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            // p <- r + beta (p - omega v)
            let mut t1 = p.clone();
            op.axpy(-omega, &v, &mut t1)?;
            let mut pnew = r.clone();
            op.axpy(beta, &t1, &mut pnew)?;
            p = pnew;
        }
        rho = rho_new;
        op.apply(&p, &mut v)?;
        let den = op.dot(&rt, &v)?;
        let scale = op.norm(&rt)?.to_f64() * op.norm(&v)?.to_f64();
        if den.to_f64().abs() <= breakdown_eps * scale {
            report.breakdown = true;
            break;
        }
        alpha = rho / den;
        let mut s = r.clone();
        op.axpy(-alpha, &v, &mut s)?;
        let snorm = op.norm(&s)?.to_f64() / bnorm;
        report.record(snorm);
        if snorm <= cfg.tol {
            op.axpy(alpha, &p, &mut x)?;
            report.converged = true;
            break;
        }
        if report.iterations >= max_iters {
            break;
        }
        let mut t = op.zeros();
        op.apply(&s, &mut t)?;
        let ts = op.dot(&t, &s)?;
        let tt = op.dot(&t, &t)?;
        let scale = tt.to_f64().sqrt() * op.norm(&s)?.to_f64();
        if tt == S::ZERO || ts.to_f64().abs() <= breakdown_eps * scale {
            // keep the half-step update; the stabilization direction is lost
            op.axpy(alpha, &p, &mut x)?;
            report.breakdown = true;
            break;
        }
        omega = ts / tt;
        op.axpy(alpha, &p, &mut x)?;
        op.axpy(omega, &s, &mut x)?;
        let mut rnew = s.clone();
        op.axpy(-omega, &t, &mut rnew)?;
        r = rnew;
        let relres = op.norm(&r)?.to_f64() / bnorm;
        report.record(relres);
        if relres <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    Ok((x, report))
}
