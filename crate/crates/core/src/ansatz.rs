//! Encoding blocks, trainable templates and the three circuit compositions.
//!
//! A model is `W(1)` followed by `L` repetitions of `[S(x), W(l+1)]`, where
//! `S(x)` is a layer of `RY(x_m)` encodings. The parallel composition keeps
//! one copy of the encoding per layer on `M` qubits; the super-parallel one
//! stacks `L` copies vertically on `M * L` qubits; the non-reuploading one
//! encodes once, after the first block, and then applies `L` blocks.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sim::{Axis, Circuit, GateOp, Param, MAX_QUBITS};

/// CNOT-to-rotation ratio of the random template.
pub const RANDOM_ROTATION_RATIO: f64 = 1.0 / 3.0;

/// Repetitions of the dense template; 5 * 3n = 60 weights per block on 4
/// qubits, the closest match to a 64-per-block budget.
pub const DENSE_REPETITIONS: usize = 5;

/// Layout seed used for the random template unless overridden.
pub const DEFAULT_LAYOUT_SEED: u64 = 1234;

/// Trainable block template.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    /// `ROT` on every qubit, then a CNOT ring whose range cycles per block.
    StronglyEntangling,
    /// `RX` on every qubit, then a nearest-neighbour CNOT ring.
    BasicEntangler,
    /// `RY` on every qubit, then an open CNOT chain.
    CustomLayers,
    /// Randomly placed single-axis rotations plus a fraction of CNOTs.
    RandomLayers { rotation_ratio: f64 },
    /// `repetitions` rounds of `[ROT on every qubit, CNOT ring]`.
    DenseBlock { repetitions: usize },
}

impl AnsatzKind {
    pub fn random() -> Self {
        AnsatzKind::RandomLayers {
            rotation_ratio: RANDOM_ROTATION_RATIO,
        }
    }

    pub fn dense() -> Self {
        AnsatzKind::DenseBlock {
            repetitions: DENSE_REPETITIONS,
        }
    }

    /// Short name used on the command line and in reports.
    pub fn name(&self) -> &'static str {
        match self {
            AnsatzKind::StronglyEntangling => "strongly",
            AnsatzKind::BasicEntangler => "basic",
            AnsatzKind::CustomLayers => "custom",
            AnsatzKind::RandomLayers { .. } => "random",
            AnsatzKind::DenseBlock { .. } => "dense",
        }
    }

    /// Weights in one block on `n_qubits`.
    pub fn params_per_block(&self, n_qubits: usize) -> usize {
        match *self {
            AnsatzKind::StronglyEntangling => 3 * n_qubits,
            AnsatzKind::BasicEntangler | AnsatzKind::CustomLayers => n_qubits,
            AnsatzKind::RandomLayers { .. } => n_qubits,
            AnsatzKind::DenseBlock { repetitions } => 3 * n_qubits * repetitions,
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "strongly" | "strongly_entangling" => AnsatzKind::StronglyEntangling,
            "basic" | "basic_entangler" => AnsatzKind::BasicEntangler,
            "custom" | "custom_layers" => AnsatzKind::CustomLayers,
            "random" | "random_layers" => AnsatzKind::random(),
            "dense" | "dense_block" => AnsatzKind::dense(),
            other => return Err(Error::Descriptor(format!("unknown ansatz '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchitectureKind {
    Parallel,
    SuperParallel,
    NonReuploading,
}

impl ArchitectureKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArchitectureKind::Parallel => "parallel",
            ArchitectureKind::SuperParallel => "super",
            ArchitectureKind::NonReuploading => "nonreup",
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "parallel" => ArchitectureKind::Parallel,
            "super" | "super_parallel" | "superparallel" => ArchitectureKind::SuperParallel,
            "nonreup" | "non_reuploading" | "nonreuploading" => ArchitectureKind::NonReuploading,
            other => return Err(Error::Descriptor(format!("unknown architecture '{other}'"))),
        })
    }
}

/// Everything needed to build a model circuit.
///
/// `kernel` is the number of encoded features `M`; `seed` fixes the layout
/// of the random template and is ignored by the deterministic ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub ansatz: AnsatzKind,
    pub architecture: ArchitectureKind,
    pub kernel: usize,
    pub layers: usize,
    pub seed: u64,
}

impl ModelDescriptor {
    pub fn new(ansatz: AnsatzKind, architecture: ArchitectureKind, kernel: usize, layers: usize) -> Self {
        Self {
            ansatz,
            architecture,
            kernel,
            layers,
            seed: DEFAULT_LAYOUT_SEED,
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self.architecture {
            ArchitectureKind::SuperParallel => self.kernel * self.layers,
            ArchitectureKind::Parallel | ArchitectureKind::NonReuploading => self.kernel,
        }
    }

    /// Trainable blocks: `W(1)` plus one per layer.
    pub fn n_blocks(&self) -> usize {
        self.layers + 1
    }

    pub fn n_weights(&self) -> usize {
        self.n_blocks() * self.ansatz.params_per_block(self.n_qubits())
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.layers == 0 {
            return Err(Error::Descriptor(format!(
                "kernel ({}) and layers ({}) must be at least 1",
                self.kernel, self.layers
            )));
        }
        let n = self.n_qubits();
        if n > MAX_QUBITS {
            return Err(Error::Descriptor(format!(
                "{} architecture with kernel {} and {} layers needs {n} qubits (max {MAX_QUBITS})",
                self.architecture, self.kernel, self.layers
            )));
        }
        match self.ansatz {
            AnsatzKind::RandomLayers { rotation_ratio } if !(0.0..1.0).contains(&rotation_ratio) => {
                Err(Error::Descriptor(format!("rotation ratio {rotation_ratio} outside [0, 1)")))
            }
            AnsatzKind::DenseBlock { repetitions: 0 } => {
                Err(Error::Descriptor("dense block needs at least one repetition".into()))
            }
            _ => Ok(()),
        }
    }

    /// Check this descriptor against an explicit qubit count.
    pub fn check_qubits(&self, n_qubits: usize) -> Result<()> {
        if self.n_qubits() != n_qubits {
            return Err(Error::Descriptor(format!(
                "{} architecture with kernel {} and {} layers uses {} qubits, not {n_qubits}",
                self.architecture,
                self.kernel,
                self.layers,
                self.n_qubits()
            )));
        }
        Ok(())
    }
}

/// `M * repeats` `RY` gates; the gate on qubit `r * M + m` reads feature `m`.
pub fn build_encoding(features: usize, vertical_repeats: usize) -> Vec<GateOp> {
    (0..vertical_repeats)
        .flat_map(|r| {
            (0..features).map(move |m| GateOp::Ry {
                qubit: r * features + m,
                angle: Param::Data(m),
            })
        })
        .collect()
}

fn ring(n_qubits: usize, range: usize, out: &mut Vec<GateOp>) {
    match n_qubits {
        0 | 1 => {}
        // a two-qubit ring of range 1 collapses to a single CNOT
        2 if range == 1 => out.push(GateOp::Cnot { control: 0, target: 1 }),
        n => out.extend((0..n).map(|q| GateOp::Cnot {
            control: q,
            target: (q + range) % n,
        })),
    }
}

fn rot_layer(n_qubits: usize, next: &mut usize, out: &mut Vec<GateOp>) {
    for qubit in 0..n_qubits {
        let j = *next;
        *next += 3;
        out.push(GateOp::Rot {
            qubit,
            phi: Param::Weight(j),
            theta: Param::Weight(j + 1),
            omega: Param::Weight(j + 2),
        });
    }
}

/// One trainable block whose weight slots start at `first_slot`.
///
/// Returns the gates and the number of weight slots consumed. The random
/// template draws its layout from the stream keyed by `(seed, block_index)`.
pub fn build_trainable_block(
    kind: AnsatzKind,
    n_qubits: usize,
    block_index: usize,
    seed: u64,
    first_slot: usize,
) -> (Vec<GateOp>, usize) {
    let mut gates = Vec::new();
    let mut next = first_slot;
    match kind {
        AnsatzKind::StronglyEntangling => {
            rot_layer(n_qubits, &mut next, &mut gates);
            if n_qubits > 1 {
                let range = block_index % (n_qubits - 1) + 1;
                gates.extend((0..n_qubits).map(|q| GateOp::Cnot {
                    control: q,
                    target: (q + range) % n_qubits,
                }));
            }
        }
        AnsatzKind::BasicEntangler => {
            for qubit in 0..n_qubits {
                gates.push(GateOp::Rx {
                    qubit,
                    angle: Param::Weight(next),
                });
                next += 1;
            }
            ring(n_qubits, 1, &mut gates);
        }
        AnsatzKind::CustomLayers => {
            for qubit in 0..n_qubits {
                gates.push(GateOp::Ry {
                    qubit,
                    angle: Param::Weight(next),
                });
                next += 1;
            }
            gates.extend((0..n_qubits.saturating_sub(1)).map(|q| GateOp::Cnot {
                control: q,
                target: q + 1,
            }));
        }
        AnsatzKind::RandomLayers { rotation_ratio } => {
            let mut rng = substream(seed, block_index as u64);
            // placeholder weight index 0; renumbered after shuffling
            let mut ops: Vec<GateOp> = (0..n_qubits)
                .map(|_| {
                    let qubit = rng.random_range(0..n_qubits);
                    let angle = Param::Weight(0);
                    match [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)] {
                        Axis::X => GateOp::Rx { qubit, angle },
                        Axis::Y => GateOp::Ry { qubit, angle },
                        Axis::Z => GateOp::Rz { qubit, angle },
                    }
                })
                .collect();
            if n_qubits > 1 {
                let n_cnots = (n_qubits as f64 * rotation_ratio + 1e-9).floor() as usize;
                for _ in 0..n_cnots {
                    let control = rng.random_range(0..n_qubits);
                    let mut target = rng.random_range(0..n_qubits - 1);
                    if target >= control {
                        target += 1;
                    }
                    ops.push(GateOp::Cnot { control, target });
                }
            }
            ops.shuffle(&mut rng);
            for op in &mut ops {
                match op {
                    GateOp::Rx { angle, .. } | GateOp::Ry { angle, .. } | GateOp::Rz { angle, .. } => {
                        *angle = Param::Weight(next);
                        next += 1;
                    }
                    _ => {}
                }
            }
            gates = ops;
        }
        AnsatzKind::DenseBlock { repetitions } => {
            for _ in 0..repetitions {
                rot_layer(n_qubits, &mut next, &mut gates);
                ring(n_qubits, 1, &mut gates);
            }
        }
    }
    (gates, next - first_slot)
}

/// Assemble the full model circuit for `desc`.
pub fn build_architecture(desc: &ModelDescriptor) -> Result<Circuit> {
    desc.validate()?;
    let n = desc.n_qubits();
    let mut gates = Vec::new();
    let mut slots = 0;
    let mut push_block = |gates: &mut Vec<GateOp>, block: usize| {
        let (g, used) = build_trainable_block(desc.ansatz, n, block, desc.seed, slots);
        slots += used;
        gates.extend(g);
    };
    push_block(&mut gates, 0);
    match desc.architecture {
        ArchitectureKind::Parallel | ArchitectureKind::SuperParallel => {
            let repeats = if desc.architecture == ArchitectureKind::SuperParallel {
                desc.layers
            } else {
                1
            };
            for l in 1..=desc.layers {
                gates.extend(build_encoding(desc.kernel, repeats));
                push_block(&mut gates, l);
            }
        }
        ArchitectureKind::NonReuploading => {
            gates.extend(build_encoding(desc.kernel, 1));
            for l in 1..=desc.layers {
                push_block(&mut gates, l);
            }
        }
    }
    debug_assert_eq!(slots, desc.n_weights());
    Circuit::new(n, desc.kernel, slots, gates)
}

/// Degrees of freedom `(2D + 1)^M` of a degree-`D` series in `M` variables.
pub fn dof(degree: u32, features: u32) -> Result<u64> {
    if features == 0 {
        return Err(Error::Range("dof needs at least one feature".into()));
    }
    (2 * u64::from(degree) + 1)
        .checked_pow(features)
        .ok_or_else(|| Error::Range(format!("(2*{degree}+1)^{features} overflows u64")))
}

/// Degree the encoding layout can reach: `L` for parallel, `L^2` for
/// super-parallel.
pub fn expected_degree(desc: &ModelDescriptor) -> Result<usize> {
    match desc.architecture {
        ArchitectureKind::Parallel => Ok(desc.layers),
        ArchitectureKind::SuperParallel => Ok(desc.layers * desc.layers),
        ArchitectureKind::NonReuploading => Err(Error::Descriptor(
            "no expected-degree formula for the non-reuploading architecture".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<AnsatzKind> {
        vec![
            AnsatzKind::StronglyEntangling,
            AnsatzKind::BasicEntangler,
            AnsatzKind::CustomLayers,
            AnsatzKind::random(),
            AnsatzKind::dense(),
        ]
    }

    #[test]
    fn encoding_layout() {
        let e = build_encoding(2, 1);
        assert_eq!(
            e,
            vec![
                GateOp::Ry { qubit: 0, angle: Param::Data(0) },
                GateOp::Ry { qubit: 1, angle: Param::Data(1) },
            ]
        );
        let e = build_encoding(2, 2);
        assert_eq!(e.len(), 4);
        assert_eq!(e[2], GateOp::Ry { qubit: 2, angle: Param::Data(0) });
        assert_eq!(e[3], GateOp::Ry { qubit: 3, angle: Param::Data(1) });
        assert_eq!(build_encoding(1, 1), vec![GateOp::Ry { qubit: 0, angle: Param::Data(0) }]);
    }

    #[test]
    fn block_parameter_counts() {
        let (g, p) = build_trainable_block(AnsatzKind::StronglyEntangling, 4, 0, 0, 0);
        assert_eq!(p, 12);
        assert_eq!(g.len(), 8);
        assert_eq!(3 * p, 36);
        let (_, p) = build_trainable_block(AnsatzKind::BasicEntangler, 4, 0, 0, 0);
        assert_eq!((p, 3 * p), (4, 12));
        let (_, p) = build_trainable_block(AnsatzKind::CustomLayers, 4, 0, 0, 0);
        assert_eq!(p, 4);
        let (_, p) = build_trainable_block(AnsatzKind::dense(), 4, 0, 0, 0);
        assert_eq!(p, 60);
    }

    #[test]
    fn random_block_shape() {
        let (g, p) = build_trainable_block(AnsatzKind::random(), 4, 0, 1234, 0);
        assert_eq!(p, 4);
        let cnots = g.iter().filter(|op| matches!(op, GateOp::Cnot { .. })).count();
        assert_eq!(cnots, 1);
        assert_eq!(g.len(), 5);
        let again = build_trainable_block(AnsatzKind::random(), 4, 0, 1234, 0);
        assert_eq!(g, again.0);
        let (g6, _) = build_trainable_block(AnsatzKind::random(), 6, 2, 1234, 0);
        assert_eq!(g6.iter().filter(|op| matches!(op, GateOp::Cnot { .. })).count(), 2);
        let other_block = build_trainable_block(AnsatzKind::random(), 4, 1, 1234, 0).0;
        let other_seed = build_trainable_block(AnsatzKind::random(), 4, 0, 99, 0).0;
        assert!(other_block != g || other_seed != g);
    }

    #[test]
    fn strongly_range_schedule() {
        let targets = |block| {
            build_trainable_block(AnsatzKind::StronglyEntangling, 4, block, 0, 0)
                .0
                .iter()
                .filter_map(|g| match g {
                    GateOp::Cnot { control: 0, target } => Some(*target),
                    _ => None,
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(targets(0), vec![1]);
        assert_eq!(targets(1), vec![2]);
        assert_eq!(targets(2), vec![3]);
        assert_eq!(targets(3), vec![1]);
    }

    #[test]
    fn architecture_examples() {
        let d = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 2);
        assert_eq!(build_architecture(&d).unwrap().n_qubits(), 4);

        let d = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, 4);
        let c = build_architecture(&d).unwrap();
        assert_eq!((c.n_qubits(), c.n_weights()), (8, 120));

        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 4);
        let c = build_architecture(&d).unwrap();
        assert_eq!((c.n_qubits(), c.n_weights()), (2, 10));
        // slot audit: every weight slot referenced exactly once
        let mut seen = vec![0; c.n_weights()];
        for g in c.gates() {
            for p in g.params() {
                if let Param::Weight(j) = p {
                    seen[j] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&k| k == 1));
    }

    #[test]
    fn weight_audit_all_kinds() {
        for kind in all_kinds() {
            for arch in [ArchitectureKind::Parallel, ArchitectureKind::SuperParallel, ArchitectureKind::NonReuploading] {
                for layers in 1..=3 {
                    let d = ModelDescriptor::new(kind, arch, 2, layers);
                    let c = build_architecture(&d).unwrap();
                    let n = c.n_qubits();
                    let per_block = match kind {
                        AnsatzKind::StronglyEntangling => 3 * n,
                        AnsatzKind::DenseBlock { repetitions } => 3 * n * repetitions,
                        _ => n,
                    };
                    assert_eq!(c.n_weights(), per_block * (layers + 1), "{kind} {arch} L={layers}");
                    let expect_q = if arch == ArchitectureKind::SuperParallel { 2 * layers } else { 2 };
                    assert_eq!(n, expect_q);
                    let uses = match arch {
                        ArchitectureKind::SuperParallel => layers * layers,
                        ArchitectureKind::Parallel => layers,
                        ArchitectureKind::NonReuploading => 1,
                    };
                    assert_eq!(c.data_slot_uses(0), uses);
                    assert_eq!(c.data_slot_uses(1), uses);
                }
            }
        }
    }

    #[test]
    fn descriptor_errors() {
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::SuperParallel, 4, 4);
        assert!(matches!(build_architecture(&d), Err(Error::Descriptor(_))));
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::Parallel, 2, 0);
        assert!(matches!(build_architecture(&d), Err(Error::Descriptor(_))));
        let d = ModelDescriptor::new(AnsatzKind::BasicEntangler, ArchitectureKind::SuperParallel, 2, 3);
        assert!(d.check_qubits(6).is_ok());
        assert!(matches!(d.check_qubits(4), Err(Error::Descriptor(_))));
    }

    #[test]
    fn determinism() {
        for kind in all_kinds() {
            let d = ModelDescriptor::new(kind, ArchitectureKind::SuperParallel, 2, 3);
            assert_eq!(build_architecture(&d).unwrap(), build_architecture(&d).unwrap());
        }
    }

    #[test]
    fn dof_values() {
        assert_eq!(dof(4, 2).unwrap(), 81);
        assert_eq!(dof(3, 2).unwrap(), 49);
        assert_eq!(dof(0, 3).unwrap(), 1);
        assert!(matches!(dof(1_000_000, 10), Err(Error::Range(_))));
    }

    #[test]
    fn expected_degrees() {
        let sp = |l| ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::SuperParallel, 2, l);
        assert_eq!(expected_degree(&sp(2)).unwrap(), 4);
        assert_eq!(expected_degree(&sp(3)).unwrap(), 9);
        let p = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::Parallel, 2, 4);
        assert_eq!(expected_degree(&p).unwrap(), 4);
        let nr = ModelDescriptor::new(AnsatzKind::StronglyEntangling, ArchitectureKind::NonReuploading, 2, 4);
        assert!(expected_degree(&nr).is_err());
    }

    #[test]
    fn descriptor_json_shape() {
        let d = ModelDescriptor::new(AnsatzKind::random(), ArchitectureKind::SuperParallel, 2, 2);
        let v = serde_json::to_value(d).unwrap();
        for key in ["ansatz", "architecture", "kernel", "layers", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: ModelDescriptor = serde_json::from_value(v).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn names_parse() {
        for kind in all_kinds() {
            assert_eq!(kind.name().parse::<AnsatzKind>().unwrap(), kind);
        }
        assert!("nope".parse::<AnsatzKind>().is_err());
        assert_eq!("super".parse::<ArchitectureKind>().unwrap(), ArchitectureKind::SuperParallel);
    }
}
