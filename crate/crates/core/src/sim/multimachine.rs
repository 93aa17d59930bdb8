//! Classical multi-machine model: constant EMF behind transient reactance,
//! constant-admittance loads, and the network Kron-reduced onto generator
//! internal nodes.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::ode::Rk4;
use super::{unwrap_phase, PmuRecord, SourceTag};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Shunt admittance (p.u.) placed at the faulted bus for the fault duration.
pub const FAULT_ADMITTANCE: Complex64 = Complex64::new(1.0e4, 0.0);

const SYNC_SPEED: f64 = 2.0 * PI * 60.0;

/// The branch whose current phasor is recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitoredLine {
    /// 1-based bus number at the metered end.
    pub from_bus: usize,
    /// 1-based bus number at the far end.
    pub to_bus: usize,
    /// Series admittance of the branch.
    pub series: Complex64,
    /// Half the line-charging admittance, applied at each end.
    pub shunt_half: Complex64,
}

/// A bus fault: 1-based bus number and duration in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    pub fault_bus: usize,
    pub duration: f64,
}

/// Parameters of a classical multi-machine system.
///
/// The full admittance matrix is ordered with the `n_gen` generator internal
/// nodes first, followed by the `n_bus` network buses.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiMachineCase {
    n_gen: usize,
    n_bus: usize,
    inertia: Vec<f64>,
    damping: Vec<f64>,
    mech_power: Vec<f64>,
    emf: Vec<f64>,
    delta0: Vec<f64>,
    y_full: ComplexMatrix,
    y_reduced: ComplexMatrix,
    monitored: MonitoredLine,
}

/// Kron-reduced view of the network for one topology.
struct Topology {
    y_red: ComplexMatrix,
    /// Maps internal EMF phasors to bus voltages.
    volt_map: ComplexMatrix,
}

/// Eliminates every node after the first `n_keep`, returning the reduced
/// admittance matrix and the map from kept-node voltages to eliminated-node
/// voltages (`-Y_bb⁻¹ Y_bk`).
pub fn kron_reduce(y: &ComplexMatrix, n_keep: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if y.rows != y.cols || n_keep == 0 || n_keep >= y.rows {
        return Err(Error::shape("kron reduction needs a square matrix and 0 < n_keep < n"));
    }
    let keep: Vec<usize> = (0..n_keep).collect();
    let elim: Vec<usize> = (n_keep..y.rows).collect();
    let y_kk = y.select(&keep, &keep);
    let y_ke = y.select(&keep, &elim);
    let y_ek = y.select(&elim, &keep);
    let y_ee = y.select(&elim, &elim);
    let solved = y_ee.solve(&y_ek)?;
    let y_red = y_kk.sub(&y_ke.matmul(&solved)?)?;
    let volt_map = solved.scale(Complex64::new(-1.0, 0.0));
    Ok((y_red, volt_map))
}

impl MultiMachineCase {
    /// Builds a case, deriving the reduced admittance from `y_full`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_gen: usize,
        n_bus: usize,
        inertia: Vec<f64>,
        damping: Vec<f64>,
        mech_power: Vec<f64>,
        emf: Vec<f64>,
        delta0: Vec<f64>,
        y_full: ComplexMatrix,
        monitored: MonitoredLine,
    ) -> Result<Self> {
        if n_gen == 0 || n_bus == 0 {
            return Err(Error::config("case needs at least one generator and one bus"));
        }
        for (name, v) in [
            ("M", &inertia),
            ("D", &damping),
            ("Pm", &mech_power),
            ("E", &emf),
            ("delta0", &delta0),
        ] {
            if v.len() != n_gen {
                return Err(Error::shape(alloc::format!(
                    "{name} has {} entries for {n_gen} generators",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(alloc::format!("{name} has non-finite entries")));
            }
        }
        if inertia.iter().any(|&m| m <= 0.0) {
            return Err(Error::config("inertia M must be positive"));
        }
        let n = n_gen + n_bus;
        if y_full.rows != n || y_full.cols != n {
            return Err(Error::shape(alloc::format!(
                "full admittance must be {n}x{n}, got {}x{}",
                y_full.rows,
                y_full.cols
            )));
        }
        for bus in [monitored.from_bus, monitored.to_bus] {
            if bus == 0 || bus > n_bus {
                return Err(Error::config(alloc::format!("monitored bus {bus} out of range")));
            }
        }
        let (y_reduced, _) = kron_reduce(&y_full, n_gen)?;
        Ok(MultiMachineCase {
            n_gen,
            n_bus,
            inertia,
            damping,
            mech_power,
            emf,
            delta0,
            y_full,
            y_reduced,
            monitored,
        })
    }

    /// The WSCC 3-machine, 9-bus system in classical form. Internal EMFs and
    /// load admittances follow the standard power-flow solution; mechanical
    /// powers are set to the electrical output at the initial angles so the
    /// undisturbed system is an exact equilibrium.
    pub fn wscc_ninebus() -> Self {
        let c = Complex64::new;
        let n_gen = 3;
        let n_bus = 9;
        let n = n_gen + n_bus;
        let mut y = ComplexMatrix::zeros(n, n);
        let node = |bus: usize| n_gen + bus - 1;
        let branch = |y: &mut ComplexMatrix, a: usize, b: usize, series: Complex64, half: Complex64| {
            y.add(a, a, series + half);
            y.add(b, b, series + half);
            y.add(a, b, -series);
            y.add(b, a, -series);
        };
        // (from, to, r, x, total charging b)
        let lines = [
            (1, 4, 0.0, 0.0576, 0.0),
            (2, 7, 0.0, 0.0625, 0.0),
            (3, 9, 0.0, 0.0586, 0.0),
            (4, 5, 0.010, 0.085, 0.176),
            (4, 6, 0.017, 0.092, 0.158),
            (5, 7, 0.032, 0.161, 0.306),
            (6, 9, 0.039, 0.170, 0.358),
            (7, 8, 0.0085, 0.072, 0.149),
            (8, 9, 0.0119, 0.1008, 0.209),
        ];
        let mut monitored = None;
        for &(a, b, r, x, bc) in &lines {
            let series = c(r, x).inv();
            let half = c(0.0, bc / 2.0);
            branch(&mut y, node(a), node(b), series, half);
            if (a, b) == (4, 6) {
                monitored = Some(MonitoredLine {
                    from_bus: 4,
                    to_bus: 6,
                    series,
                    shunt_half: half,
                });
            }
        }
        // (bus, P, Q, |V|) as constant admittance
        for &(bus, p, q, v) in &[(5, 1.25, 0.5, 0.9956), (6, 0.9, 0.3, 1.0127), (8, 1.0, 0.35, 1.0159)] {
            y.add(node(bus), node(bus), c(p, -q) / (v * v));
        }
        let xd_prime = [0.0608, 0.1198, 0.1813];
        for (g, &xd) in xd_prime.iter().enumerate() {
            let ys = c(0.0, xd).inv();
            branch(&mut y, g, node(g + 1), ys, c(0.0, 0.0));
        }

        let h = [23.64, 6.4, 3.01];
        let inertia: Vec<f64> = h.iter().map(|h| 2.0 * h / SYNC_SPEED).collect();
        let damping: Vec<f64> = inertia.iter().map(|m| 0.5 * m).collect();
        let emf = vec![1.0566, 1.0502, 1.0170];
        let delta0: Vec<f64> = [2.2717_f64, 19.7315, 13.1752]
            .iter()
            .map(|d| d.to_radians())
            .collect();

        let (y_red, _) = kron_reduce(&y, n_gen).expect("9-bus network is nonsingular");
        let mech_power = electrical_power(&y_red, &emf, &delta0);
        MultiMachineCase::new(
            n_gen,
            n_bus,
            inertia,
            damping,
            mech_power,
            emf,
            delta0,
            y,
            monitored.expect("line 4-6 present"),
        )
        .expect("built-in case is valid")
    }

    pub fn n_gen(&self) -> usize {
        self.n_gen
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    pub fn inertia(&self) -> &[f64] {
        &self.inertia
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn mech_power(&self) -> &[f64] {
        &self.mech_power
    }

    pub fn emf(&self) -> &[f64] {
        &self.emf
    }

    pub fn delta0(&self) -> &[f64] {
        &self.delta0
    }

    pub fn y_full(&self) -> &ComplexMatrix {
        &self.y_full
    }

    pub fn y_reduced(&self) -> &ComplexMatrix {
        &self.y_reduced
    }

    pub fn monitored(&self) -> &MonitoredLine {
        &self.monitored
    }

    fn topology(&self, fault_bus: Option<usize>) -> Result<Topology> {
        let mut y = self.y_full.clone();
        if let Some(bus) = fault_bus {
            let idx = self.n_gen + bus - 1;
            y.add(idx, idx, FAULT_ADMITTANCE);
        }
        let (y_red, volt_map) = kron_reduce(&y, self.n_gen)?;
        Ok(Topology { y_red, volt_map })
    }

    fn validate_fault(&self, fault: &FaultSpec) -> Result<()> {
        if fault.fault_bus == 0 || fault.fault_bus > self.n_bus {
            return Err(Error::config(alloc::format!(
                "fault bus {} is not in 1..={}",
                fault.fault_bus,
                self.n_bus
            )));
        }
        if !(fault.duration >= 0.0 && fault.duration.is_finite()) {
            return Err(Error::config("fault duration must be finite and non-negative"));
        }
        Ok(())
    }
}

fn electrical_power(y_red: &ComplexMatrix, emf: &[f64], delta: &[f64]) -> Vec<f64> {
    let phasors: Vec<Complex64> = emf
        .iter()
        .zip(delta)
        .map(|(&e, &d)| Complex64::from_polar(e, d))
        .collect();
    (0..phasors.len())
        .map(|i| {
            let current: Complex64 = (0..phasors.len()).map(|j| y_red.get(i, j) * phasors[j]).sum();
            (phasors[i] * current.conj()).re
        })
        .collect()
}

fn swing_rhs(case: &MultiMachineCase, topo: &Topology, state: &[f64], deriv: &mut [f64]) {
    let n = case.n_gen;
    let (delta, omega) = state.split_at(n);
    let pe = electrical_power(&topo.y_red, &case.emf, delta);
    for i in 0..n {
        deriv[i] = omega[i];
        deriv[n + i] =
            (case.mech_power[i] - pe[i] - case.damping[i] * omega[i]) / case.inertia[i];
    }
}

fn line_current(case: &MultiMachineCase, topo: &Topology, delta: &[f64]) -> Complex64 {
    let line = &case.monitored;
    let voltage = |bus: usize| -> Complex64 {
        (0..case.n_gen)
            .map(|g| topo.volt_map.get(bus - 1, g) * Complex64::from_polar(case.emf[g], delta[g]))
            .sum()
    };
    let v_from = voltage(line.from_bus);
    let v_to = voltage(line.to_bus);
    line.series * (v_from - v_to) + line.shunt_half * v_from
}

fn ensure_finite(state: &[f64], step: usize) -> Result<()> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::IntegrationDiverged { step })
    }
}

/// Simulates a bus fault from the pre-disturbance equilibrium and records the
/// monitored branch current from the instant the fault clears, for `horizon`
/// seconds at a spacing of `dt`.
pub fn simulate_ninebus(
    case: &MultiMachineCase,
    fault: &FaultSpec,
    dt: f64,
    horizon: f64,
) -> Result<PmuRecord> {
    simulate_multimachine_substeps(case, fault, dt, horizon, super::DEFAULT_SUBSTEPS)
}

pub(crate) fn simulate_multimachine_substeps(
    case: &MultiMachineCase,
    fault: &FaultSpec,
    dt: f64,
    horizon: f64,
    substeps: usize,
) -> Result<PmuRecord> {
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config("dt and horizon must be positive"));
    }
    case.validate_fault(fault)?;
    let samples = libm::round(horizon / dt) as usize;
    if samples < 2 {
        return Err(Error::config("horizon must cover at least two samples"));
    }
    let n = case.n_gen;
    let h = dt / substeps.max(1) as f64;
    let mut state = vec![0.0; 2 * n];
    state[..n].copy_from_slice(&case.delta0);
    let mut rk = Rk4::new(2 * n);

    if fault.duration > 0.0 {
        let faulted = case.topology(Some(fault.fault_bus))?;
        let fault_steps = libm::ceil(fault.duration / h - 1e-9).max(1.0) as usize;
        let hf = fault.duration / fault_steps as f64;
        for _ in 0..fault_steps {
            rk.step(&mut state, hf, |s, d| swing_rhs(case, &faulted, s, d));
        }
        ensure_finite(&state, 0)?;
    }

    let post = case.topology(None)?;
    let mut i_mag = Vec::with_capacity(samples);
    let mut i_phase = Vec::with_capacity(samples);
    for step in 0..samples {
        if step > 0 {
            for _ in 0..substeps.max(1) {
                rk.step(&mut state, h, |s, d| swing_rhs(case, &post, s, d));
            }
            ensure_finite(&state, step)?;
        }
        let current = line_current(case, &post, &state[..n]);
        i_mag.push(current.norm());
        i_phase.push(current.arg());
    }
    unwrap_phase(&mut i_phase);
    PmuRecord::new(dt, i_mag, i_phase, SourceTag::Simulated)
}
