"""Turn classically controlled branches into a plain circuit.

Both branches run one after the other on shadow copies of the wires.  A
controlled swap driven by the guard bit decides which copy ends up on the
real wires, so the result never branches on a classical bit.
"""

from goiqc.circuit import Ite, gate, seq, serialize, size
from goiqc.cpm import interp_circuit, max_map_difference
from goiqc.ite_elim import eliminate
from goiqc.syntax import BIT, QBIT

env = {"g": BIT, "q": QBIT}
circuit = Ite("g", seq(gate("H", ["q"], ["q"]), gate("T", ["q"], ["q"])), gate("S", ["q"], ["q"]))
flat = eliminate(circuit, env)

print("with a conditional:\n" + serialize(circuit, env))
print("without:\n" + serialize(flat, env))
print("sizes:", size(circuit), "->", size(flat))
print("largest difference between the two maps:",
      max_map_difference(interp_circuit(circuit, env), interp_circuit(flat, env)))
