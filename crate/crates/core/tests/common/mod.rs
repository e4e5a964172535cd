//! Reference implementations used as oracles. They share no code with the
//! library beyond plain data.
#![allow(dead_code)]

use pcosim::NetworkTopology;
use rand::Rng;

/// Dormand–Prince 5(4) with adaptive steps for `y' = g(x, y)` from `x0` to `x1`.
pub fn rk45(g: impl Fn(f64, f64) -> f64, x0: f64, y0: f64, x1: f64, tol: f64) -> f64 {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let (mut x, mut y) = (x0, y0);
    let mut h = ((x1 - x0) / 16.0).max(1e-6);
    while x < x1 {
        h = h.min(x1 - x);
        let mut k = [0.0; 7];
        for s in 0..7 {
            let ys = y + h * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = g(x + C[s] * h, ys);
        }
        let y5 = y + h * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
        let y4 = y + h * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
        let err = (y5 - y4).abs() / (tol * (1.0 + y5.abs()));
        if err <= 1.0 {
            x += h;
            y = y5;
        }
        h *= (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    y
}

/// Leaky integrate-and-fire potential from its defining ODE,
/// `df/dφ = −c f + I c`, `f(0) = 0`, on the given increasing grid.
pub fn lif_by_ode(current: f64, grid: &[f64]) -> Vec<f64> {
    let c = (current / (current - 1.0)).ln();
    let g = |_: f64, y: f64| -c * y + current * c;
    let mut out = Vec::with_capacity(grid.len());
    let (mut x, mut y) = (0.0, 0.0);
    for &p in grid {
        if p > x {
            y = rk45(g, x, y, p, 1e-13);
            x = p;
        }
        out.push(y);
    }
    out
}

/// Naive all-to-all simulator with the firing-before-arrival convention.
pub struct NaiveNetwork {
    pub current: f64,
    pub n: usize,
    pub tau: f64,
    pub eps: f64,
    pub t: f64,
    pub phases: Vec<f64>,
    /// (arrival time, source)
    pub pending: Vec<(f64, usize)>,
    /// Per-oscillator firing times.
    pub firings: Vec<Vec<f64>>,
}

const TIE: f64 = 1e-9;

impl NaiveNetwork {
    pub fn new(current: f64, tau: f64, eps: f64, phases: &[f64]) -> Self {
        NaiveNetwork {
            current,
            n: phases.len(),
            tau,
            eps,
            t: 0.0,
            phases: phases.to_vec(),
            pending: Vec::new(),
            firings: vec![Vec::new(); phases.len()],
        }
    }

    fn c(&self) -> f64 {
        (self.current / (self.current - 1.0)).ln()
    }

    fn f(&self, x: f64) -> f64 {
        self.current * (1.0 - (-self.c() * x).exp())
    }

    fn f_inv(&self, y: f64) -> f64 {
        -(1.0 - y / self.current).ln() / self.c()
    }

    fn fire(&mut self, i: usize) {
        self.phases[i] = 0.0;
        self.firings[i].push(self.t);
        self.pending.push((self.t + self.tau, i));
    }

    /// Processes the next event instant.
    pub fn step(&mut self) {
        let max_phase = self.phases.iter().copied().fold(0.0, f64::max);
        let t_fire = self.t + (1.0 - max_phase);
        let t_arr = self.pending.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let t_next = t_fire.min(t_arr);
        let dt = t_next - self.t;
        self.t = t_next;
        for p in &mut self.phases {
            *p += dt;
        }
        let mut fired = vec![false; self.n];
        for i in 0..self.n {
            if self.phases[i] >= 1.0 - TIE {
                fired[i] = true;
                self.fire(i);
            }
        }
        let (now, later): (Vec<_>, Vec<_>) = self.pending.iter().partition(|p| p.0 <= self.t + TIE);
        self.pending = later;
        if now.is_empty() {
            return;
        }
        let w = self.eps / (self.n - 1) as f64;
        let mut input = vec![0.0; self.n];
        for &(_, src) in &now {
            for (j, x) in input.iter_mut().enumerate() {
                if j != src {
                    *x += w;
                }
            }
        }
        for j in 0..self.n {
            if input[j] == 0.0 {
                continue;
            }
            let y = self.f(self.phases[j]) + input[j];
            if y >= 1.0 {
                if !fired[j] {
                    fired[j] = true;
                    self.fire(j);
                }
            } else {
                self.phases[j] = self.f_inv(y);
            }
        }
    }

    /// Phases equal and every pending volley reaches all oscillators equally.
    pub fn synchronized(&self) -> bool {
        let p0 = self.phases[0];
        if self.phases.iter().any(|p| (p - p0).abs() > 1e-7) {
            return false;
        }
        let mut times: Vec<f64> = self.pending.iter().map(|p| p.0).collect();
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= TIE);
        times.iter().all(|&t| {
            let senders = self.pending.iter().filter(|p| (p.0 - t).abs() <= TIE).count();
            senders == 0 || senders == self.n
        })
    }

    /// Runs until synchronized or `max_firings` total firings.
    pub fn run_until_sync(&mut self, max_firings: usize) -> bool {
        while self.firings.iter().map(Vec::len).sum::<usize>() < max_firings {
            self.step();
            if self.synchronized() {
                return true;
            }
        }
        false
    }

    pub fn run_firings(&mut self, total: usize) {
        while self.firings.iter().map(Vec::len).sum::<usize>() < total {
            self.step();
        }
    }
}

/// `f(τ) + ε` for the leaky integrate-and-fire map, computed independently.
pub fn lif_margin(current: f64, tau: f64, eps: f64) -> f64 {
    let c = (current / (current - 1.0)).ln();
    current * (1.0 - (-c * tau).exp()) + eps
}

/// `(τ, ε)` uniform on the region where `f(τ) + ε < 1 − margin`.
pub fn sample_a1<R: Rng>(rng: &mut R, margin: f64) -> (f64, f64) {
    loop {
        let (t, e) = (rng.random_range(0.01..0.99), rng.random_range(0.001..0.99));
        if lif_margin(1.05, t, e) < 1.0 - margin {
            return (t, e);
        }
    }
}

/// `(τ, ε)` uniform on the region where `f(τ) + ε > 1 + margin`.
pub fn sample_a2_interior<R: Rng>(rng: &mut R, margin: f64) -> (f64, f64) {
    loop {
        let (t, e) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
        if lif_margin(1.05, t, e) > 1.0 + margin {
            return (t, e);
        }
    }
}

/// Random positive in-weights from a random nonempty subset of `sources`,
/// summing to `eps`.
fn random_column<R: Rng>(rng: &mut R, sources: &[usize], eps: f64) -> Vec<(usize, f64)> {
    let mut picked: Vec<usize> = sources.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    if picked.is_empty() {
        picked.push(sources[rng.random_range(0..sources.len())]);
    }
    let raw: Vec<f64> = picked.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    picked.into_iter().zip(raw).map(|(k, r)| (k, eps * r / total)).collect()
}

/// Random valid custom topology. With `plant_pair`, oscillators 0 and 1 are
/// made a symmetric pair.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize, tau: f64, eps: f64, plant_pair: bool) -> NetworkTopology {
    let mut m = vec![vec![0.0; n]; n];
    for target in 0..n {
        let sources: Vec<usize> = (0..n).filter(|&k| k != target).collect();
        for (k, w) in random_column(rng, &sources, eps) {
            m[k][target] = w;
        }
    }
    if plant_pair && n >= 2 {
        for k in 2..n {
            m[k][1] = m[k][0];
        }
        m[0][1] = m[1][0];
    }
    NetworkTopology::custom(m, tau, eps).expect("generated topology is valid")
}
