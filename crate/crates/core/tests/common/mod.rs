//! Classical scalar implementations on the one-dimensional torus, written
//! directly from the definitions: block averages by plain loops, stopping
//! times by comparison, dilations by center distance, the Hilbert transform
//! by a direct DFT.

#![allow(dead_code, clippy::needless_range_loop)]

use czlab_core::C64;

pub struct ScalarOracle {
    pub depth: u32,
    pub n: usize,
}

impl ScalarOracle {
    pub fn new(depth: u32) -> Self {
        Self { depth, n: 1 << depth }
    }

    fn block(&self, k: u32) -> usize {
        self.n >> k
    }

    /// Block averages at generation `k`, expanded to cells.
    pub fn average(&self, f: &[f64], k: u32) -> Vec<f64> {
        let b = self.block(k);
        let mut out = vec![0.0; self.n];
        for start in (0..self.n).step_by(b) {
            let mut s = 0.0;
            for x in start..start + b {
                s += f[x];
            }
            for x in start..start + b {
                out[x] = s / b as f64;
            }
        }
        out
    }

    /// `q_k(x) = 1` iff every average `f_j(x)`, `j ≤ k`, is at most `λ`.
    pub fn stopping(&self, f: &[f64], lambda: f64) -> Vec<Vec<f64>> {
        let mut q = vec![vec![1.0; self.n]];
        for k in 1..=self.depth {
            let a = self.average(f, k);
            let prev = q.last().unwrap().clone();
            q.push((0..self.n).map(|x| if prev[x] == 1.0 && a[x] <= lambda { 1.0 } else { 0.0 }).collect());
        }
        q
    }

    /// Classical good part: the average over each maximal cube, `f` elsewhere.
    pub fn good(&self, f: &[f64], lambda: f64) -> Vec<f64> {
        let q = self.stopping(f, lambda);
        let mut g = vec![0.0; self.n];
        for k in 1..=self.depth {
            let a = self.average(f, k);
            for x in 0..self.n {
                if q[k as usize - 1][x] == 1.0 && q[k as usize][x] == 0.0 {
                    g[x] = a[x];
                }
            }
        }
        for x in 0..self.n {
            if q[self.depth as usize][x] == 1.0 {
                g[x] = f[x];
            }
        }
        g
    }

    fn center(&self, x: usize) -> f64 {
        (x as f64 + 0.5) / self.n as f64
    }

    /// Whether cell `x` lies in the `factor`-fold dilation of cube `j` of
    /// generation `k` (closed wrapped ℓ∞ ball around the cube center).
    pub fn in_dilation(&self, x: usize, k: u32, j: usize, factor: f64) -> bool {
        let side = 1.0 / (1u64 << k) as f64;
        let c = (j as f64 + 0.5) * side;
        let d = (self.center(x) - c).abs();
        let d = d.min(1.0 - d);
        d <= factor * side / 2.0 + 1e-12
    }

    /// Cells inside `factor·Q` for some generation-`k` cube `Q` on which
    /// `marked` holds.
    pub fn dilate_marked(&self, k: u32, marked: &[bool], factor: f64) -> Vec<bool> {
        let b = self.block(k);
        let cubes: Vec<usize> = (0..1usize << k).filter(|&j| (j * b..(j + 1) * b).any(|x| marked[x])).collect();
        (0..self.n).map(|x| cubes.iter().any(|&j| self.in_dilation(x, k, j, factor))).collect()
    }

    /// Complement of the union of `9Q` over maximal cubes `Q`.
    pub fn zeta(&self, f: &[f64], lambda: f64) -> Vec<f64> {
        let q = self.stopping(f, lambda);
        let mut covered = vec![false; self.n];
        for k in 1..=self.depth {
            let maximal: Vec<bool> =
                (0..self.n).map(|x| q[k as usize - 1][x] == 1.0 && q[k as usize][x] == 0.0).collect();
            for (c, v) in covered.iter_mut().zip(self.dilate_marked(k, &maximal, 9.0)) {
                *c |= v;
            }
        }
        covered.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect()
    }

    /// Complement of the union of `9Q` over cubes of generation `k ≤ K − s`
    /// on which `q_k` vanishes.
    pub fn zeta_fs(&self, q: &[Vec<f64>], s: u32) -> Vec<f64> {
        let mut covered = vec![false; self.n];
        for k in 0..=self.depth - s {
            let off: Vec<bool> = q[k as usize].iter().map(|&v| v == 0.0).collect();
            for (c, v) in covered.iter_mut().zip(self.dilate_marked(k, &off, 9.0)) {
                *c |= v;
            }
        }
        covered.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect()
    }

    /// `Σ_{f,s}`: union over `1 ≤ k ≤ K − s` of `9Ω_k`.
    pub fn sigma(&self, f: &[f64], s: u32) -> Vec<bool> {
        let sup = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut out = vec![false; self.n];
        for k in 1..=self.depth - s {
            let hi = self.average(f, k + s);
            let lo = self.average(f, k + s - 1);
            let support: Vec<bool> = (0..self.n).map(|x| (hi[x] - lo[x]).abs() > 1e-12 * sup).collect();
            for (c, v) in out.iter_mut().zip(self.dilate_marked(k, &support, 9.0)) {
                *c |= v;
            }
        }
        out
    }

    /// Hilbert transform with symbol `−i sign(ν)`, Nyquist and zero removed,
    /// by a direct DFT.
    pub fn hilbert(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let tw: Vec<C64> =
            (0..n).map(|t| C64::from_polar(1.0, -2.0 * std::f64::consts::PI * t as f64 / n as f64)).collect();
        let hat: Vec<C64> = (0..n).map(|nu| (0..n).map(|x| tw[(nu * x) % n] * f[x]).sum()).collect();
        let sym = |nu: usize| {
            if nu == 0 || 2 * nu == n {
                C64::new(0.0, 0.0)
            } else if nu < n / 2 {
                C64::new(0.0, -1.0)
            } else {
                C64::new(0.0, 1.0)
            }
        };
        (0..n)
            .map(|x| {
                let v: C64 = (0..n).map(|nu| sym(nu) * hat[nu] * tw[(nu * x) % n].conj()).sum();
                v.re / n as f64
            })
            .collect()
    }

    /// `‖Hf‖_{L₂(outside Σ_{f,s})} / ‖f‖₂`.
    pub fn l2_residual(&self, f: &[f64], s: u32) -> f64 {
        let h = self.hilbert(f);
        let mask = self.sigma(f, s);
        let out: f64 = (0..self.n).filter(|&x| !mask[x]).map(|x| h[x] * h[x]).sum();
        let norm: f64 = f.iter().map(|v| v * v).sum();
        (out / norm).sqrt()
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
