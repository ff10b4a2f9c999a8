"""Ranking operator choices: which summary of the data earns its rank?

Four descriptions of coin-flip data, from empty (normalization only) to
saturated (one projector per entity).  The score trades the projection's
fit against the freedom the description leaves: too coarse wastes fit,
too fine wastes rank.  Data generated from a single-rate coin should
crown the single-rate element.
"""

import math

from totem import (
    Distribution,
    identity_op,
    make_element,
    marginal_op,
    sample_multinomial,
    select_element,
    uniform,
)
from totem.closed_forms import (
    binomial_projection_closed_form,
    coin_element,
    coin_space,
    k_marginal_element,
)

L, N = 3, 10_000
space = coin_space(L)
reference = uniform(space)

candidates = {
    "normalization only": make_element([identity_op(space)]),
    "mean success rate": coin_element(space),
    "count spectrum": k_marginal_element(space),
    "saturated": make_element(
        [marginal_op(space, [d.name for d in space.domains], list(e))
         for e in space.admissible_entities()],
        mode="auto-reduce",
    ),
}
name_of = {element.fingerprint: name for name, element in candidates.items()}

generator = binomial_projection_closed_form(L, 0.7, space)
counts = sample_multinomial(generator, N, seed=33)
f = Distribution.from_counts(space, counts, N)

reports = select_element(reference, list(candidates.values()), f, N)
print(f"N = {N}, data from a single 0.7-rate coin; log N = {math.log(N):.2f}\n")
print(f"{'element':>20}  {'rank D':>6}  {'kernel':>6}  {'N*divergence':>12}  {'score':>10}")
for report in reports:
    name = name_of[report.element_fingerprint]
    d = space.n_admissible - report.kernel_dim
    print(f"{name:>20}  {d:>6}  {report.kernel_dim:>6}  "
          f"{report.n * report.divergence:>12.2f}  {report.score:>10.2f}")
print(f"\nwinner: {name_of[reports[0].element_fingerprint]}")
