use crate::circuits::circuit::{BlockSpan, Gate, GateKind, ParamCircuit, SlotCoord};
use crate::qsim::QubitLayout;
use crate::{Error, Result};

/// Default number of (Ry, Ry, CiRX) repetitions per feedback block.
pub const DEFAULT_BLOCK_DEPTH: usize = 5;

/// Hardware-efficient brickwork ansatz over the full register.
///
/// Each of the `depth` units is an Ry layer on every qubit followed by a CNOT
/// layer on even bonds (even units) or odd bonds (odd units), control on the
/// lower index. A closing Ry layer follows. Slot `l·n + q` is the Ry of
/// layer `l` on qubit `q`. Gates are emitted bond by bond so that each bond's
/// rotations and CNOT are adjacent in program order.
pub fn build_hardware_efficient(layout: &QubitLayout, depth: usize) -> Result<ParamCircuit> {
    hardware_efficient(layout.n_qubits(), depth)
}

pub fn hardware_efficient(n: usize, depth: usize) -> Result<ParamCircuit> {
    if depth == 0 || n == 0 {
        return Err(Error::InvalidSpec(
            "hardware-efficient ansatz needs depth >= 1 and at least one qubit".into(),
        ));
    }
    let mut gates = Vec::new();
    let ry = |l: usize, q: usize| Gate {
        kind: GateKind::Ry,
        targets: vec![q],
        slot: Some(l * n + q),
    };
    for l in 0..depth {
        let mut covered = vec![false; n];
        let mut a = l % 2;
        while a + 1 < n {
            gates.push(ry(l, a));
            gates.push(ry(l, a + 1));
            gates.push(Gate {
                kind: GateKind::Cnot,
                targets: vec![a, a + 1],
                slot: None,
            });
            covered[a] = true;
            covered[a + 1] = true;
            a += 2;
        }
        for q in (0..n).filter(|&q| !covered[q]) {
            gates.push(ry(l, q));
        }
    }
    for q in 0..n {
        gates.push(ry(depth, q));
    }
    let slots = (0..=depth)
        .flat_map(|l| (0..n).map(move |q| SlotCoord { layer: l, qubit: q }))
        .collect();
    Ok(ParamCircuit::from_parts(n, gates, slots, Vec::new()))
}

/// Parameters per feedback block.
pub fn block_params(block_depth: usize) -> usize {
    3 * block_depth + 2
}

/// Feedback ansatz on the system qubits (system-local indices).
///
/// One two-qubit block per adjacent system pair, all even bonds first and
/// then all odd bonds. A block on `(a, b)` is `block_depth` repetitions of
/// `Ry(a) Ry(b) CiRX` closed by `Ry(a) Ry(b)`, with the CiRX control
/// alternating `a→b`, `b→a`, `a→b`, ...
pub fn build_feedback_ansatz(layout: &QubitLayout, block_depth: usize) -> Result<ParamCircuit> {
    feedback_ansatz(layout.n_system(), block_depth)
}

pub fn feedback_ansatz(n: usize, block_depth: usize) -> Result<ParamCircuit> {
    if block_depth == 0 || n < 2 {
        return Err(Error::InvalidSpec(
            "feedback ansatz needs block_depth >= 1 and two system qubits".into(),
        ));
    }
    let pairs = (0..n - 1).step_by(2).chain((1..n - 1).step_by(2));
    let mut gates = Vec::new();
    let mut slots = Vec::new();
    let mut blocks = Vec::new();
    for (bi, a) in pairs.enumerate() {
        let b = a + 1;
        let offset = slots.len();
        let mut push = |kind: GateKind, targets: Vec<usize>| {
            let coord = SlotCoord {
                layer: bi,
                qubit: *targets.iter().min().expect("nonempty"),
            };
            gates.push(Gate {
                kind,
                targets,
                slot: Some(slots.len()),
            });
            slots.push(coord);
        };
        for r in 0..block_depth {
            push(GateKind::Ry, vec![a]);
            push(GateKind::Ry, vec![b]);
            // alternating the control makes the block reach all of SU(4)
            let pair = if r % 2 == 0 { vec![a, b] } else { vec![b, a] };
            push(GateKind::Cirx, pair);
        }
        push(GateKind::Ry, vec![a]);
        push(GateKind::Ry, vec![b]);
        blocks.push(BlockSpan {
            qubits: (a, b),
            slot_offset: offset,
            n_slots: block_params(block_depth),
        });
    }
    Ok(ParamCircuit::from_parts(n, gates, slots, blocks))
}
