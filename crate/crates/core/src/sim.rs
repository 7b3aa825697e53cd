//! Dense statevector simulation of parameterized circuits.
//!
//! Qubit `q` is bit `q` of the basis index (little-endian), so on two qubits
//! basis index 1 is `|q1=0, q0=1>`. Rotations follow `R_a(t) = exp(-i t A / 2)`
//! and `ROT(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi)`.
//!
//! Expectations are exact. Gradients come from two independent routes: the
//! two-term parameter-shift rule (one pair of circuit runs per weight
//! occurrence) and an adjoint reverse sweep (a constant number of state
//! passes regardless of the weight count).

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

const NORM_TOL: f64 = 1e-10;

/// Where a rotation angle comes from when the circuit is run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Fixed(f64),
    /// Index into the data vector (an encoded feature).
    Data(usize),
    /// Index into the trainable weight vector.
    Weight(usize),
}

impl Param {
    #[inline]
    fn resolve(self, data: &[f64], weights: &[f64]) -> f64 {
        match self {
            Param::Fixed(a) => a,
            Param::Data(m) => data[m],
            Param::Weight(j) => weights[j],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One gate of a circuit. Rotation angles are bound to a [`Param`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateOp {
    Rx { qubit: usize, angle: Param },
    Ry { qubit: usize, angle: Param },
    Rz { qubit: usize, angle: Param },
    Rot {
        qubit: usize,
        phi: Param,
        theta: Param,
        omega: Param,
    },
    Cnot { control: usize, target: usize },
    H { qubit: usize },
}

impl GateOp {
    /// Number of angles this gate consumes.
    pub fn arity(&self) -> usize {
        match self {
            GateOp::Rx { .. } | GateOp::Ry { .. } | GateOp::Rz { .. } => 1,
            GateOp::Rot { .. } => 3,
            GateOp::Cnot { .. } | GateOp::H { .. } => 0,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Rx { qubit, .. }
            | GateOp::Ry { qubit, .. }
            | GateOp::Rz { qubit, .. }
            | GateOp::Rot { qubit, .. }
            | GateOp::H { qubit } => vec![qubit],
            GateOp::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn params(&self) -> Vec<Param> {
        match *self {
            GateOp::Rx { angle, .. } | GateOp::Ry { angle, .. } | GateOp::Rz { angle, .. } => {
                vec![angle]
            }
            GateOp::Rot {
                phi, theta, omega, ..
            } => vec![phi, theta, omega],
            GateOp::Cnot { .. } | GateOp::H { .. } => Vec::new(),
        }
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::Index(format!(
                    "gate {self:?} targets qubit {q} on a {n_qubits}-qubit register"
                )));
            }
        }
        if let GateOp::Cnot { control, target } = *self {
            if control == target {
                return Err(Error::Index(format!(
                    "CNOT needs two distinct qubits, got {control} twice"
                )));
            }
        }
        Ok(())
    }

    /// Expand into single-angle primitives; `ROT` becomes `RZ, RY, RZ`.
    fn lower(&self, out: &mut Vec<Prim>) {
        match *self {
            GateOp::Rx { qubit, angle } => out.push(Prim::Rot(Axis::X, qubit, angle)),
            GateOp::Ry { qubit, angle } => out.push(Prim::Rot(Axis::Y, qubit, angle)),
            GateOp::Rz { qubit, angle } => out.push(Prim::Rot(Axis::Z, qubit, angle)),
            GateOp::Rot {
                qubit,
                phi,
                theta,
                omega,
            } => {
                out.push(Prim::Rot(Axis::Z, qubit, phi));
                out.push(Prim::Rot(Axis::Y, qubit, theta));
                out.push(Prim::Rot(Axis::Z, qubit, omega));
            }
            GateOp::Cnot { control, target } => out.push(Prim::Cnot(control, target)),
            GateOp::H { qubit } => out.push(Prim::H(qubit)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Prim {
    Rot(Axis, usize, Param),
    Cnot(usize, usize),
    H(usize),
}

/// A normalized `n`-qubit pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap explicit amplitudes; length must be `2^n` and the norm 1.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Size(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_register(n_qubits)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Apply one gate with its angles already resolved (`angles.len()` must
    /// equal the gate's arity).
    pub fn apply(&mut self, gate: &GateOp, angles: &[f64]) -> Result<()> {
        gate.check(self.n_qubits)?;
        if angles.len() != gate.arity() {
            return Err(Error::Arity {
                what: "angles",
                expected: gate.arity(),
                got: angles.len(),
            });
        }
        match *gate {
            GateOp::Rx { qubit, .. } => rotate(&mut self.amps, Axis::X, qubit, angles[0]),
            GateOp::Ry { qubit, .. } => rotate(&mut self.amps, Axis::Y, qubit, angles[0]),
            GateOp::Rz { qubit, .. } => rotate(&mut self.amps, Axis::Z, qubit, angles[0]),
            GateOp::Rot { qubit, .. } => {
                rotate(&mut self.amps, Axis::Z, qubit, angles[0]);
                rotate(&mut self.amps, Axis::Y, qubit, angles[1]);
                rotate(&mut self.amps, Axis::Z, qubit, angles[2]);
            }
            GateOp::Cnot { control, target } => cnot(&mut self.amps, control, target),
            GateOp::H { qubit } => hadamard(&mut self.amps, qubit),
        }
        Ok(())
    }

    /// `<Z_q>`.
    pub fn expval_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(z_expectation(&self.amps, qubit))
    }

    /// `<Z_q>` for every qubit.
    pub fn expvals_z(&self) -> Vec<f64> {
        (0..self.n_qubits)
            .map(|q| z_expectation(&self.amps, q))
            .collect()
    }
}

fn check_register(n_qubits: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::Size(format!(
            "register of {n_qubits} qubits outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Size(format!(
            "fidelity between {} and {} qubit states",
            a.n_qubits, b.n_qubits
        )));
    }
    let overlap: Complex64 = a
        .amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(overlap.norm_sqr().min(1.0))
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

#[inline]
fn pairs(dim: usize, qubit: usize, mut f: impl FnMut(usize, usize)) {
    let mask = 1usize << qubit;
    let mut base = 0;
    while base < dim {
        for i in base..base + mask {
            f(i, i | mask);
        }
        base += mask << 1;
    }
}

fn rotate(amps: &mut [Complex64], axis: Axis, qubit: usize, theta: f64) {
    let (s, c) = (theta * 0.5).sin_cos();
    let dim = amps.len();
    match axis {
        Axis::X => pairs(dim, qubit, |i0, i1| {
            let (a, b) = (amps[i0], amps[i1]);
            // [[c, -is], [-is, c]]
            amps[i0] = Complex64::new(c * a.re + s * b.im, c * a.im - s * b.re);
            amps[i1] = Complex64::new(c * b.re + s * a.im, c * b.im - s * a.re);
        }),
        Axis::Y => pairs(dim, qubit, |i0, i1| {
            let (a, b) = (amps[i0], amps[i1]);
            amps[i0] = a * c - b * s;
            amps[i1] = a * s + b * c;
        }),
        Axis::Z => {
            let lo = Complex64::new(c, -s);
            let hi = Complex64::new(c, s);
            pairs(dim, qubit, |i0, i1| {
                amps[i0] *= lo;
                amps[i1] *= hi;
            })
        }
    }
}

fn cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let cmask = 1usize << control;
    pairs(amps.len(), target, |i0, i1| {
        if i0 & cmask != 0 {
            amps.swap(i0, i1);
        }
    });
}

fn hadamard(amps: &mut [Complex64], qubit: usize) {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    pairs(amps.len(), qubit, |i0, i1| {
        let (a, b) = (amps[i0], amps[i1]);
        amps[i0] = (a + b) * r;
        amps[i1] = (a - b) * r;
    });
}

fn z_expectation(amps: &[Complex64], qubit: usize) -> f64 {
    let mut acc = 0.0;
    pairs(amps.len(), qubit, |i0, i1| {
        acc += amps[i0].norm_sqr() - amps[i1].norm_sqr();
    });
    acc
}

/// `Im <lambda| G |phi>` for the Pauli generator `G` on `qubit`.
fn generator_overlap_im(lambda: &[Complex64], phi: &[Complex64], axis: Axis, qubit: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    pairs(phi.len(), qubit, |i0, i1| match axis {
        Axis::X => acc += lambda[i0].conj() * phi[i1] + lambda[i1].conj() * phi[i0],
        Axis::Y => acc += lambda[i0].conj() * (-i * phi[i1]) + lambda[i1].conj() * (i * phi[i0]),
        Axis::Z => acc += lambda[i0].conj() * phi[i0] - lambda[i1].conj() * phi[i1],
    });
    acc.im
}

fn apply_prim(amps: &mut [Complex64], prim: Prim, data: &[f64], weights: &[f64], sign: f64) {
    match prim {
        Prim::Rot(axis, q, p) => rotate(amps, axis, q, sign * p.resolve(data, weights)),
        Prim::Cnot(c, t) => cnot(amps, c, t),
        Prim::H(q) => hadamard(amps, q),
    }
}

// ---------------------------------------------------------------------------
// Circuits
// ---------------------------------------------------------------------------

/// An ordered gate list over `n_qubits` with `n_data` data slots and
/// `n_weights` trainable weight slots. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_data: usize,
    n_weights: usize,
    gates: Vec<GateOp>,
    prims: Vec<Prim>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_data: usize, n_weights: usize, gates: Vec<GateOp>) -> Result<Self> {
        check_register(n_qubits)?;
        let mut prims = Vec::with_capacity(gates.len() * 2);
        for g in &gates {
            g.check(n_qubits)?;
            for p in g.params() {
                match p {
                    Param::Data(m) if m >= n_data => {
                        return Err(Error::Index(format!(
                            "data slot {m} out of range ({n_data} slots)"
                        )))
                    }
                    Param::Weight(j) if j >= n_weights => {
                        return Err(Error::Index(format!(
                            "weight slot {j} out of range ({n_weights} slots)"
                        )))
                    }
                    _ => {}
                }
            }
            g.lower(&mut prims);
        }
        Ok(Self {
            n_qubits,
            n_data,
            n_weights,
            gates,
            prims,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    fn check_inputs(&self, data: &[f64], weights: &[f64]) -> Result<()> {
        if data.len() != self.n_data {
            return Err(Error::Arity {
                what: "data values",
                expected: self.n_data,
                got: data.len(),
            });
        }
        if weights.len() != self.n_weights {
            return Err(Error::Arity {
                what: "weights",
                expected: self.n_weights,
                got: weights.len(),
            });
        }
        Ok(())
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    fn evolve(&self, amps: &mut [Complex64], data: &[f64], weights: &[f64]) {
        for &p in &self.prims {
            apply_prim(amps, p, data, weights, 1.0);
        }
    }

    /// Apply every gate in order to `|0...0>`.
    pub fn run(&self, data: &[f64], weights: &[f64]) -> Result<StateVector> {
        self.check_inputs(data, weights)?;
        let mut state = StateVector::zero(self.n_qubits)?;
        self.evolve(&mut state.amps, data, weights);
        Ok(state)
    }

    pub fn expval_z(&self, data: &[f64], weights: &[f64], qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let state = self.run(data, weights)?;
        Ok(z_expectation(&state.amps, qubit))
    }

    pub fn expvals_all(&self, data: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(data, weights)?.expvals_z())
    }

    /// Gradient of `<Z_qubit>` by the two-term shift rule, one shifted pair
    /// per gate occurrence of each weight slot.
    pub fn grad_parameter_shift(&self, data: &[f64], weights: &[f64], qubit: usize) -> Result<Vec<f64>> {
        self.check_inputs(data, weights)?;
        self.check_qubit(qubit)?;
        let mut grad = vec![0.0; self.n_weights];
        let mut scratch = vec![Complex64::new(0.0, 0.0); 1 << self.n_qubits];
        for (k, prim) in self.prims.iter().enumerate() {
            if let Prim::Rot(_, _, Param::Weight(j)) = *prim {
                grad[j] += self.shift_term(&mut scratch, k, data, weights, qubit);
            }
        }
        Ok(grad)
    }

    /// Shift-rule derivative of `<Z_qubit>` with respect to one weight slot.
    pub fn shift_derivative(&self, data: &[f64], weights: &[f64], qubit: usize, slot: usize) -> Result<f64> {
        self.check_inputs(data, weights)?;
        self.check_qubit(qubit)?;
        if slot >= self.n_weights {
            return Err(Error::Index(format!("weight slot {slot} >= {}", self.n_weights)));
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); 1 << self.n_qubits];
        let mut d = 0.0;
        for (k, prim) in self.prims.iter().enumerate() {
            if matches!(*prim, Prim::Rot(_, _, Param::Weight(j)) if j == slot) {
                d += self.shift_term(&mut scratch, k, data, weights, qubit);
            }
        }
        Ok(d)
    }

    fn shift_term(&self, scratch: &mut [Complex64], k: usize, data: &[f64], weights: &[f64], qubit: usize) -> f64 {
        let mut eval = |shift: f64| {
            scratch.fill(Complex64::new(0.0, 0.0));
            scratch[0] = Complex64::new(1.0, 0.0);
            for (idx, &p) in self.prims.iter().enumerate() {
                match p {
                    Prim::Rot(axis, q, par) if idx == k => {
                        rotate(scratch, axis, q, par.resolve(data, weights) + shift)
                    }
                    _ => apply_prim(scratch, p, data, weights, 1.0),
                }
            }
            z_expectation(scratch, qubit)
        };
        let plus = eval(FRAC_PI_2);
        let minus = eval(-FRAC_PI_2);
        0.5 * (plus - minus)
    }

    pub fn grad_adjoint(&self, data: &[f64], weights: &[f64], qubit: usize) -> Result<Vec<f64>> {
        self.check_qubit(qubit)?;
        let mut coeffs = vec![0.0; self.n_qubits];
        coeffs[qubit] = 1.0;
        self.grad_adjoint_weighted(data, weights, &coeffs)
    }

    /// Gradient of `sum_q coeffs[q] <Z_q>` by an adjoint reverse sweep.
    pub fn grad_adjoint_weighted(&self, data: &[f64], weights: &[f64], coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(data, weights)?;
        if coeffs.len() != self.n_qubits {
            return Err(Error::Arity {
                what: "observable coefficients",
                expected: self.n_qubits,
                got: coeffs.len(),
            });
        }
        let mut grad = vec![0.0; self.n_weights];
        if self.n_weights == 0 {
            return Ok(grad);
        }
        let mut phi = StateVector::zero(self.n_qubits)?.amps;
        self.evolve(&mut phi, data, weights);
        let mut lambda: Vec<Complex64> = phi
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let w: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(q, c)| if i >> q & 1 == 0 { *c } else { -*c })
                    .sum();
                a * w
            })
            .collect();
        for &prim in self.prims.iter().rev() {
            if let Prim::Rot(axis, q, Param::Weight(j)) = prim {
                // d<O>/dt = 2 Re <lambda| (-i/2) G |phi> = Im <lambda| G |phi>
                grad[j] += generator_overlap_im(&lambda, &phi, axis, q);
            }
            apply_prim(&mut phi, prim, data, weights, -1.0);
            apply_prim(&mut lambda, prim, data, weights, -1.0);
        }
        Ok(grad)
    }

    /// Number of gates whose angle is bound to data slot `m`.
    pub fn data_slot_uses(&self, m: usize) -> usize {
        self.prims
            .iter()
            .filter(|p| matches!(p, Prim::Rot(_, _, Param::Data(d)) if *d == m))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_state() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let s = StateVector::zero(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        let s = StateVector::zero(4).unwrap();
        assert_eq!(s.amplitudes().len(), 16);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0, 0.0)));
    }

    #[test]
    fn register_bounds() {
        assert!(matches!(StateVector::zero(0), Err(Error::Size(_))));
        assert!(matches!(StateVector::zero(13), Err(Error::Size(_))));
        assert!(StateVector::zero(12).is_ok());
    }

    #[test]
    fn identity_rotation() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&GateOp::H { qubit: 1 }, &[]).unwrap();
        let before = s.clone();
        s.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(0.0) }, &[0.0]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn ry_pi_flips() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(PI) }, &[PI]).unwrap();
        assert!(close(s.amplitudes()[1].norm(), 1.0, 1e-12));
        assert!(close(s.expval_z(0).unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn cnot_truth_table() {
        let mut amps = vec![c(0.0, 0.0); 4];
        amps[1] = c(1.0, 0.0);
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.apply(&GateOp::Cnot { control: 0, target: 1 }, &[]).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        // control clear: untouched
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&GateOp::Cnot { control: 0, target: 1 }, &[]).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
    }

    #[test]
    fn gate_errors() {
        let mut s = StateVector::zero(2).unwrap();
        let err = s.apply(&GateOp::H { qubit: 2 }, &[]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
        let err = s.apply(&GateOp::Cnot { control: 1, target: 1 }, &[]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
        let err = s.apply(&GateOp::Rx { qubit: 0, angle: Param::Fixed(0.0) }, &[]).unwrap_err();
        assert!(matches!(err, Error::Arity { .. }));
    }

    #[test]
    fn run_examples() {
        let empty = Circuit::new(2, 0, 0, vec![]).unwrap();
        let s = empty.run(&[], &[]).unwrap();
        assert_eq!(s, StateVector::zero(2).unwrap());

        let circ = Circuit::new(2, 1, 0, vec![GateOp::Ry { qubit: 0, angle: Param::Data(0) }]).unwrap();
        let s = circ.run(&[PI / 2.0], &[]).unwrap();
        let r = (PI / 4.0).cos();
        let a = s.amplitudes();
        // qubit 0 is the low bit
        assert!(close(a[0].re, r, 1e-12) && close(a[1].re, (PI / 4.0).sin(), 1e-12));
        assert!(a[2].norm() < 1e-15 && a[3].norm() < 1e-15);

        assert!(matches!(circ.run(&[], &[]), Err(Error::Arity { .. })));
        assert!(matches!(circ.run(&[0.0], &[1.0]), Err(Error::Arity { .. })));
    }

    #[test]
    fn slot_validation() {
        let err = Circuit::new(1, 1, 0, vec![GateOp::Rx { qubit: 0, angle: Param::Weight(0) }]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
        let err = Circuit::new(1, 0, 1, vec![GateOp::Rx { qubit: 0, angle: Param::Data(0) }]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
    }

    #[test]
    fn expval_examples() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.expval_z(0).unwrap(), 1.0);
        assert!(matches!(s.expval_z(1), Err(Error::Index(_))));

        // <Z> = cos(theta) for RY(theta)|0>, from the amplitudes (cos t/2, sin t/2)
        let theta = 1.0f64;
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(theta) }, &[theta]).unwrap();
        let (a0, a1) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        assert!(close(s.expval_z(0).unwrap(), a0 * a0 - a1 * a1, 1e-14));
        assert!(close(s.expval_z(0).unwrap(), 0.540_302_305_868_139_8, 1e-12));
    }

    #[test]
    fn expvals_all_examples() {
        let c3 = Circuit::new(3, 0, 0, vec![]).unwrap();
        assert_eq!(c3.expvals_all(&[], &[]).unwrap(), vec![1.0, 1.0, 1.0]);
        let c2 = Circuit::new(2, 0, 0, vec![GateOp::Ry { qubit: 1, angle: Param::Fixed(PI) }]).unwrap();
        let v = c2.expvals_all(&[], &[]).unwrap();
        assert!(close(v[0], 1.0, 1e-12) && close(v[1], -1.0, 1e-12));
    }

    #[test]
    fn shift_rule_single_ry() {
        let circ = Circuit::new(1, 0, 1, vec![GateOp::Ry { qubit: 0, angle: Param::Weight(0) }]).unwrap();
        let g = circ.grad_parameter_shift(&[], &[PI / 2.0], 0).unwrap();
        assert!(close(g[0], -1.0, 1e-12));
        let g = circ.grad_parameter_shift(&[], &[0.0], 0).unwrap();
        assert!(close(g[0], 0.0, 1e-12));
        let a = circ.grad_adjoint(&[], &[PI / 2.0], 0).unwrap();
        assert!(close(a[0], -1.0, 1e-12));
    }

    #[test]
    fn shared_weight_slot_sums() {
        // RY(w) RY(w) = RY(2w): d cos(2w)/dw = -2 sin(2w)
        let gates = vec![
            GateOp::Ry { qubit: 0, angle: Param::Weight(0) },
            GateOp::Ry { qubit: 0, angle: Param::Weight(0) },
        ];
        let circ = Circuit::new(1, 0, 1, gates).unwrap();
        let w: f64 = 0.3;
        let expect = -2.0 * (2.0 * w).sin();
        assert!(close(circ.grad_parameter_shift(&[], &[w], 0).unwrap()[0], expect, 1e-12));
        assert!(close(circ.grad_adjoint(&[], &[w], 0).unwrap()[0], expect, 1e-12));
    }

    #[test]
    fn empty_weight_gradient() {
        let circ = Circuit::new(2, 1, 0, vec![GateOp::Ry { qubit: 0, angle: Param::Data(0) }]).unwrap();
        assert!(circ.grad_adjoint(&[0.4], &[], 0).unwrap().is_empty());
        assert!(circ.grad_parameter_shift(&[0.4], &[], 0).unwrap().is_empty());
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::zero(1).unwrap();
        assert!(close(fidelity(&zero, &zero).unwrap(), 1.0, 1e-15));
        let mut one = zero.clone();
        one.apply(&GateOp::Rx { qubit: 0, angle: Param::Fixed(PI) }, &[PI]).unwrap();
        assert!(fidelity(&zero, &one).unwrap() < 1e-15);
        let mut half = zero.clone();
        half.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(PI / 2.0) }, &[PI / 2.0]).unwrap();
        assert!(close(fidelity(&zero, &half).unwrap(), 0.5, 1e-12));
        assert!(matches!(fidelity(&zero, &StateVector::zero(2).unwrap()), Err(Error::Size(_))));
    }

    #[test]
    fn fidelity_ignores_global_phase() {
        let mut a = StateVector::zero(2).unwrap();
        a.apply(&GateOp::H { qubit: 0 }, &[]).unwrap();
        a.apply(&GateOp::Rx { qubit: 1, angle: Param::Fixed(0.7) }, &[0.7]).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let b = StateVector::from_amplitudes(a.amplitudes().iter().map(|x| x * phase).collect()).unwrap();
        let mut probe = StateVector::zero(2).unwrap();
        probe.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(0.9) }, &[0.9]).unwrap();
        let fa = fidelity(&probe, &a).unwrap();
        let fb = fidelity(&probe, &b).unwrap();
        assert!(close(fa, fb, 1e-14));
        assert!(close(fa, fidelity(&a, &probe).unwrap(), 1e-14));
    }

    #[test]
    fn hadamard_then_rz_matches_matrix() {
        // RZ(t) H |0> = (e^{-it/2}, e^{it/2}) / sqrt 2
        let t = 0.8;
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&GateOp::H { qubit: 0 }, &[]).unwrap();
        s.apply(&GateOp::Rz { qubit: 0, angle: Param::Fixed(t) }, &[t]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let a = s.amplitudes();
        assert!((a[0] - Complex64::from_polar(r, -t / 2.0)).norm() < 1e-14);
        assert!((a[1] - Complex64::from_polar(r, t / 2.0)).norm() < 1e-14);
    }

    #[test]
    fn rot_is_rz_ry_rz() {
        let (phi, theta, omega) = (0.3, 1.1, -0.7);
        let mut a = StateVector::zero(1).unwrap();
        a.apply(&GateOp::H { qubit: 0 }, &[]).unwrap();
        let mut b = a.clone();
        let rot = GateOp::Rot {
            qubit: 0,
            phi: Param::Fixed(phi),
            theta: Param::Fixed(theta),
            omega: Param::Fixed(omega),
        };
        a.apply(&rot, &[phi, theta, omega]).unwrap();
        b.apply(&GateOp::Rz { qubit: 0, angle: Param::Fixed(phi) }, &[phi]).unwrap();
        b.apply(&GateOp::Ry { qubit: 0, angle: Param::Fixed(theta) }, &[theta]).unwrap();
        b.apply(&GateOp::Rz { qubit: 0, angle: Param::Fixed(omega) }, &[omega]).unwrap();
        assert_eq!(a, b);
    }
}
