//! Grid peak picking and local refinement shared by the angle and
//! delay-Doppler searches.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` on `[a, b]` by golden-section search with a fixed number of
/// iterations, returning the best point seen.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, iters: usize) -> f64 {
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Box constraint for refinement.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl Bounds {
    fn clamp(&self, p: (f64, f64)) -> (f64, f64) {
        (p.0.clamp(self.lo.0, self.hi.0), p.1.clamp(self.lo.1, self.hi.1))
    }
}

/// One golden-section pass per axis around `start` (half-width `cell`),
/// followed by a Newton polish using central-difference derivatives.
/// `f` is the quantity to minimize (a MUSIC denominator).
pub fn refine_min<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64), cell: (f64, f64), bounds: Bounds) -> (f64, f64) {
    let (x0, y0) = start;
    let x = golden_section_min(
        |x| f(x, y0),
        (x0 - cell.0).max(bounds.lo.0),
        (x0 + cell.0).min(bounds.hi.0),
        48,
    );
    let y = golden_section_min(
        |y| f(x, y),
        (y0 - cell.1).max(bounds.lo.1),
        (y0 + cell.1).min(bounds.hi.1),
        48,
    );
    newton_polish(&f, (x, y), cell, bounds)
}

fn newton_polish<F: Fn(f64, f64) -> f64>(f: &F, start: (f64, f64), cell: (f64, f64), bounds: Bounds) -> (f64, f64) {
    let (hx, hy) = (cell.0 * 1e-3, cell.1 * 1e-3);
    let mut p = start;
    let mut fp = f(p.0, p.1);
    for _ in 0..12 {
        let (x, y) = p;
        let fxp = f(x + hx, y);
        let fxm = f(x - hx, y);
        let fyp = f(x, y + hy);
        let fym = f(x, y - hy);
        let gx = (fxp - fxm) / (2.0 * hx);
        let gy = (fyp - fym) / (2.0 * hy);
        let hxx = (fxp - 2.0 * fp + fxm) / (hx * hx);
        let hyy = (fyp - 2.0 * fp + fym) / (hy * hy);
        let hxy = (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)) / (4.0 * hx * hy);
        let det = hxx * hyy - hxy * hxy;
        if !(hxx > 0.0 && det > 0.0) {
            break;
        }
        let dx = -(hyy * gx - hxy * gy) / det;
        let dy = -(hxx * gy - hxy * gx) / det;
        if !(dx.abs() < cell.0 && dy.abs() < cell.1) {
            break;
        }
        let q = bounds.clamp((x + dx, y + dy));
        let fq = f(q.0, q.1);
        // below this scale value comparisons are rounding noise
        let tiny = dx.abs() < 1e-6 * cell.0 && dy.abs() < 1e-6 * cell.1;
        if !(fq < fp || tiny) {
            break;
        }
        p = q;
        fp = fq;
        if dx.abs() <= 1e-15 * (1.0 + x.abs()) && dy.abs() <= 1e-15 * (1.0 + y.abs()) {
            break;
        }
    }
    p
}

/// Row-major 2-D grid of values, first axis outer.
#[derive(Debug, Clone, Copy)]
pub struct GridShape {
    pub n1: usize,
    pub n2: usize,
    pub wrap1: bool,
    pub wrap2: bool,
}

impl GridShape {
    fn neighbour(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<usize> {
        let step = |v: usize, d: isize, n: usize, wrap: bool| -> Option<usize> {
            let w = v as isize + d;
            if (0..n as isize).contains(&w) {
                Some(w as usize)
            } else if wrap {
                Some(w.rem_euclid(n as isize) as usize)
            } else {
                None
            }
        };
        let a = step(i, di, self.n1, self.wrap1)?;
        let b = step(j, dj, self.n2, self.wrap2)?;
        Some(a * self.n2 + b)
    }

    fn distance(&self, a: usize, b: usize) -> usize {
        let d = |x: usize, y: usize, n: usize, wrap: bool| {
            let d = x.abs_diff(y);
            if wrap {
                d.min(n - d)
            } else {
                d
            }
        };
        d(a / self.n2, b / self.n2, self.n1, self.wrap1).max(d(a % self.n2, b % self.n2, self.n2, self.wrap2))
    }
}

/// The `k` largest 8-neighbourhood local maxima at mutual Chebyshev distance
/// of at least `min_sep` cells. Equal values are ordered by grid index, and
/// a cell only counts as a maximum against an equal neighbour of higher index.
pub fn pick_peaks(values: &[f64], shape: GridShape, k: usize, min_sep: usize) -> Vec<usize> {
    assert_eq!(values.len(), shape.n1 * shape.n2);
    let mut cands: Vec<usize> = (0..values.len())
        .filter(|&idx| {
            let (i, j) = (idx / shape.n2, idx % shape.n2);
            let v = values[idx];
            (-1isize..=1)
                .flat_map(|di| (-1isize..=1).map(move |dj| (di, dj)))
                .filter(|&d| d != (0, 0))
                .filter_map(|(di, dj)| shape.neighbour(i, j, di, dj))
                .all(|n| n == idx || if n < idx { v > values[n] } else { v >= values[n] })
        })
        .collect();
    cands.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut out: Vec<usize> = Vec::with_capacity(k);
    for c in cands {
        if out.len() == k {
            break;
        }
        if out.iter().all(|&o| shape.distance(o, c) >= min_sep) {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let x = golden_section_min(|x| (x - 0.3).powi(2), -1.0, 1.0, 60);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn refine_reaches_quadratic_minimum() {
        let f = |x: f64, y: f64| 1.0 + 3.0 * (x - 0.12).powi(2) + (y + 0.05).powi(2) + (x - 0.12) * (y + 0.05);
        let b = Bounds {
            lo: (-1.0, -1.0),
            hi: (1.0, 1.0),
        };
        let (x, y) = refine_min(f, (0.1, 0.0), (0.1, 0.1), b);
        assert!((x - 0.12).abs() < 1e-10 && (y + 0.05).abs() < 1e-10, "{x} {y}");
    }

    #[test]
    fn peaks_respect_wrap_and_separation() {
        let shape = GridShape {
            n1: 6,
            n2: 5,
            wrap1: true,
            wrap2: false,
        };
        let mut v = vec![0.0; 30];
        v[0] = 5.0; // (0,0)
        v[5 * 5] = 4.0; // (5,0): wrapped neighbour of (0,0)
        v[2 * 5 + 3] = 3.0;
        let p = pick_peaks(&v, shape, 3, 2);
        assert_eq!(p, vec![0, 13]);
    }

    #[test]
    fn plateau_yields_single_peak() {
        let shape = GridShape {
            n1: 4,
            n2: 4,
            wrap1: false,
            wrap2: false,
        };
        let v = vec![1.0; 16];
        assert_eq!(pick_peaks(&v, shape, 5, 1), vec![0]);
    }
}
