//! Random strictly feasible problems and a slow primal log-barrier solver
//! used as an independent reference.

use dicert_sdp::{LinearConstraint, LmiBlock, SdpProblem, SymSparse};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Generated {
    pub problem: SdpProblem,
    /// Strictly feasible point used to build the problem.
    pub y0: Vec<f64>,
}

pub fn random_sym(rng: &mut ChaCha8Rng, dim: usize, density: f64) -> SymSparse {
    let mut f = SymSparse::new();
    for r in 0..dim {
        for c in r..dim {
            if rng.random::<f64>() < density {
                f.push(r, c, rng.random_range(-1.0..1.0));
            }
        }
    }
    if f.is_empty() {
        f.push(0, 0, 1.0);
    }
    f.compact();
    f
}

pub fn random_problem(seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=30);
    let nblocks = rng.random_range(1..=3);
    let mut dims: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=20)).collect();
    // Enough matrix entries to pin down every variable.
    let capacity = |d: &Vec<usize>| d.iter().map(|k| k * (k + 1) / 2).sum::<usize>();
    while capacity(&dims) < n + 2 {
        dims[0] += 1;
    }
    let y0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = SdpProblem::new(n);
    let mut c = vec![0.0; n];
    for &dim in &dims {
        let mut b = LmiBlock::new(dim);
        for i in 0..n {
            b.terms.push((i, random_sym(&mut rng, dim, 0.4)));
        }
        // F0 = I - Σ y0_i F_i so that S(y0) = I.
        let mut f0 = SymSparse::new();
        for r in 0..dim {
            f0.push(r, r, 1.0);
        }
        for (i, f) in &b.terms {
            for &(r, cc, v) in &f.entries {
                f0.push(r, cc, -y0[*i] * v);
            }
        }
        f0.compact();
        b.constant = f0;
        // c = 𝒜*(X0) with X0 ≻ 0 keeps the problem bounded.
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let x0 = &g * g.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
        for (i, f) in &b.terms {
            c[*i] += f.inner(&x0);
        }
        p.blocks.push(b);
    }
    for _ in 0..rng.random_range(0..=2) {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(-1.0..1.0))).collect();
        let slack = rng.random_range(0.1..1.0);
        let row = LinearConstraint::new(coeffs, 0.0);
        let rhs = row.evaluate(&y0) - slack;
        let mult = rng.random_range(0.1..1.0);
        for &(i, a) in &row.coeffs {
            c[i] += mult * a;
        }
        p.inequalities.push(LinearConstraint::new(row.coeffs, rhs));
    }
    if n > 2 {
        for _ in 0..rng.random_range(0..=2) {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(-1.0..1.0))).collect();
            let row = LinearConstraint::new(coeffs, 0.0);
            let rhs = row.evaluate(&y0);
            let mult = rng.random_range(-1.0..1.0);
            for &(i, a) in &row.coeffs {
                c[i] += mult * a;
            }
            p.equalities.push(LinearConstraint::new(row.coeffs, rhs));
        }
    }
    p.objective = c;
    Generated { problem: p, y0 }
}

/// Damped Newton on `t·cᵀy − Σ log det S_k(y) − Σ log(g·y − h)` over the
/// affine set `A y = b`, with `t` increased geometrically.
pub fn barrier_oracle(p: &SdpProblem, y0: &[f64]) -> f64 {
    let n = p.num_vars;
    // Dense copies of every constraint matrix.
    let mut mats: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)> = Vec::new();
    for b in &p.blocks {
        let fs = (0..n)
            .map(|i| {
                b.terms
                    .iter()
                    .find(|t| t.0 == i)
                    .map(|t| t.1.to_dense(b.dim))
                    .unwrap_or_else(|| DMatrix::zeros(b.dim, b.dim))
            })
            .collect();
        mats.push((b.constant.to_dense(b.dim), fs));
    }
    for row in &p.inequalities {
        let mut fs = vec![DMatrix::zeros(1, 1); n];
        for &(i, a) in &row.coeffs {
            fs[i][(0, 0)] += a;
        }
        mats.push((DMatrix::from_element(1, 1, -row.rhs), fs));
    }
    // Null-space parametrization y = y0 + N z.
    let basis = if p.equalities.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let mut a: DMatrix<f64> = DMatrix::zeros(p.equalities.len(), n);
        for (j, row) in p.equalities.iter().enumerate() {
            for &(i, v) in &row.coeffs {
                a[(j, i)] += v;
            }
        }
        let full = a.transpose() * &a;
        let eig = nalgebra::SymmetricEigen::new(full);
        let cols: Vec<DVector<f64>> = (0..n)
            .filter(|&k| eig.eigenvalues[k].abs() < 1e-10)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    };
    let c = DVector::from_column_slice(&p.objective);
    let eval_s = |y: &DVector<f64>| -> Vec<DMatrix<f64>> {
        mats.iter()
            .map(|(f0, fs)| {
                let mut s = f0.clone();
                for (i, f) in fs.iter().enumerate() {
                    s += f * y[i];
                }
                s
            })
            .collect()
    };
    let barrier = |y: &DVector<f64>, t: f64| -> Option<f64> {
        let mut v = t * c.dot(y);
        for s in eval_s(y) {
            let ch = Cholesky::new(s)?;
            v -= 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        Some(v)
    };
    let nu: f64 = mats.iter().map(|m| m.0.nrows() as f64).sum();
    let mut y = DVector::from_column_slice(y0);
    let mut t = 1.0;
    while nu / t > 1e-10 {
        for _ in 0..200 {
            let ss = eval_s(&y);
            let mut grad = &c * t;
            let mut hess = DMatrix::zeros(n, n);
            for ((_, fs), s) in mats.iter().zip(&ss) {
                let sinv = s.clone().try_inverse().unwrap();
                let prods: Vec<DMatrix<f64>> = fs.iter().map(|f| &sinv * f).collect();
                for i in 0..n {
                    grad[i] -= prods[i].trace();
                    for j in 0..=i {
                        let v = (&prods[i] * &prods[j]).trace();
                        hess[(i, j)] += v;
                        hess[(j, i)] = hess[(i, j)];
                    }
                }
            }
            let gz = basis.transpose() * &grad;
            let hz = basis.transpose() * &hess * &basis;
            let dz = -hz.clone().lu().solve(&gz).unwrap();
            let decrement = -gz.dot(&dz);
            if decrement < 1e-14 {
                break;
            }
            let dy = &basis * dz;
            let f0 = barrier(&y, t).unwrap();
            let mut step = 1.0;
            loop {
                let cand = &y + &dy * step;
                if let Some(v) = barrier(&cand, t) {
                    if v <= f0 - 0.25 * step * decrement {
                        y = cand;
                        break;
                    }
                }
                step *= 0.5;
                assert!(step > 1e-20, "line search failed");
            }
        }
        t *= 8.0;
    }
    p.objective_value(y.as_slice())
}
