//! Bounded scalar minimisation (Brent's parabolic/golden-section method).

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `f` on `[lo, hi]`. Stops when the bracket half-width falls
/// below `2 * (rel_tol * |x| + abs_tol)`.
pub fn brent_minimize<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + abs_tol;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum {
                x,
                fx,
                iterations: iter,
                converged: true,
            };
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum {
        x,
        fx,
        iterations: max_iter,
        converged: false,
    }
}

/// Grid scan followed by Brent refinement around the best grid cell.
/// Returns the better of the refined point and the best grid point.
pub fn grid_then_brent<F>(mut f: F, lo: f64, hi: f64, grid: usize, rel_tol: f64, abs_tol: f64) -> (Minimum, usize)
where
    F: FnMut(f64) -> f64,
{
    assert!(grid >= 3 && hi > lo);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (0, f64::INFINITY);
    for i in 0..grid {
        let fx = f(lo + step * i as f64);
        if fx < best.1 {
            best = (i, fx);
        }
    }
    let i = best.0;
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = lo + step * (i + 1).min(grid - 1) as f64;
    let m = brent_minimize(&mut f, a, b, rel_tol, abs_tol, 200);
    let grid_x = lo + step * i as f64;
    if m.fx <= best.1 {
        (m, i)
    } else {
        (
            Minimum {
                x: grid_x,
                fx: best.1,
                iterations: m.iterations,
                converged: m.converged,
            },
            i,
        )
    }
}
