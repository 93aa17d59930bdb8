use alloc::vec;
use alloc::vec::Vec;

/// Classical fixed-step fourth-order Runge–Kutta for autonomous systems
/// `x' = f(x)` of any dimension. Scratch buffers are reused between steps.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` in place by one step of size `h`.
    pub fn step<F>(&mut self, state: &mut [f64], h: f64, mut f: F)
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let n = state.len();
        debug_assert_eq!(n, self.k1.len());
        f(state, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            state[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}
