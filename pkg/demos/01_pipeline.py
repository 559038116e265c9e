"""Walk one program through every stage of the compiler.

Run with ``python3 demos/01_pipeline.py``.  The program prepares a qubit in
|0>, sends it through a Hadamard and entangles it with a second fresh qubit.
"""

import numpy as np

from goiqc.circuit import serialize
from goiqc.cpm import QCRegister, interp_circuit, mix
from goiqc.derivation import infer
from goiqc.extcircuit import serialize_ext, tau
from goiqc.refeval import QuantumClosure, closure_mix, eval_full
from goiqc.syntax import parse_term, pretty_type
from goiqc.tokenmachine import input_env, run

SOURCE = r"(\f.\x. CNOT (f x, new (zero *))) H (new (zero *))"

term = parse_term(SOURCE)
d = infer(term)
print("type:", pretty_type(d.type))

# The token machine walks the typing derivation and emits gates as tokens meet them.
result = run(d, "sync-first")
print("\nextended circuit:\n" + serialize_ext(result.circuit))

env_in = input_env(result.config)
circuit = tau(result.circuit, env_in)
print("flattened circuit:\n" + serialize(circuit, env_in))

empty = mix(QCRegister.make([], np.ones(1), {}))
state = interp_circuit(circuit, env_in)(empty)
print("density matrix of the output:\n", np.round(state.blocks[0].real, 3))

# An independent check: reduce the term directly and compare.
reference = closure_mix(eval_full(QuantumClosure.of(term)), d)
print("trace distance to the reduction semantics:", state.trace_distance(reference))
