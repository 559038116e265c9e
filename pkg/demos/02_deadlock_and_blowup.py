"""Why synchronous compilation needs a dependency analysis, and why it is worth it.

A term that applies ``S`` and ``T`` in an order chosen by a coin flip makes
the synchronous machine wait on itself.  The colored dependency graph sees
the cycle before the machine ever runs.  On terms where synchronization is
possible, it keeps circuits linear where the asynchronous machine doubles
them at every conditional.
"""

from goiqc.circuit import size
from goiqc.colorgraph import color_infer, is_acyclic
from goiqc.corpus import RUW, chain
from goiqc.derivation import infer
from goiqc.syntax import parse_term
from goiqc.tokenmachine import compile_derivation, run

d = infer(parse_term(RUW))
_, graph = color_infer(d)
acyclic, cycle = is_acyclic(graph)
print("dependency graph:\n" + graph.to_dot())
print("acyclic:", acyclic, "cycle:", " -> ".join(map(str, cycle + cycle[:1])))
print("synchronous-only run deadlocks:", run(d, "sync-only").deadlocked)
print("sync-first falls back and finishes:", not run(d, "sync-first").deadlocked)

print("\nnested conditionals, circuit size per mode")
print(f"{'depth':>5} {'async-only':>11} {'sync-first':>11}")
for n in range(1, 7):
    dn = infer(chain(n))
    a = size(compile_derivation(dn, "async-only")[0])
    s = size(compile_derivation(dn, "sync-first")[0])
    print(f"{n:>5} {a:>11} {s:>11}")
