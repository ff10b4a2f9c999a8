"""One coin, L flips per subject: fit the mean success rate and update it.

Walks the basic pipeline on the smallest interesting space: declare the
entity space of head/tail sequences, summarize simulated data by its mean
success rate, project the uniform reference onto the family matching that
rate, and read off the exponential-family multiplier.  Day two repeats the
measurement; projecting the day-one fit onto the day-two family simply
replaces the rate.
"""

import numpy as np

from totem import (
    Distribution,
    Totemplex,
    binomial_projection_closed_form,
    max_norm_distance,
    newton_project,
    sample_multinomial,
    uniform,
)
from totem.closed_forms import coin_element, coin_space

L, N = 4, 5_000
space = coin_space(L)
element = coin_element(space)
reference = uniform(space)

print(f"entity space: {space.n_entities} head/tail sequences of length {L}")

# day one: subjects flip a 0.65 coin
generator = binomial_projection_closed_form(L, 0.65, space)
counts = sample_multinomial(generator, N, seed=11)
day1 = Distribution.from_counts(space, counts, N)
eta1 = element.operators[1].expectation(day1)
print(f"day 1: N={N}, observed mean success rate {eta1:.4f}")

fit1 = newton_project(reference, Totemplex(element, day1))
print(f"  projection converged in {fit1.iterations} iterations, "
      f"residual {fit1.residual:.2e}")
print(f"  multiplier on the success-rate operator: {fit1.multipliers[1]:+.4f}")
print(f"  closed form L*log(eta/(1-eta)):          "
      f"{L * np.log(eta1 / (1 - eta1)):+.4f}")

# day two: the coin drifted to 0.55
counts2 = sample_multinomial(binomial_projection_closed_form(L, 0.55, space), N, seed=12)
day2 = Distribution.from_counts(space, counts2, N)
eta2 = element.operators[1].expectation(day2)
print(f"day 2: observed mean success rate {eta2:.4f}")

# using day 1's fit as the new reference only swaps the rate
updated = newton_project(fit1.distribution, Totemplex(element, day2))
fresh = newton_project(reference, Totemplex(element, day2))
print(f"  update-from-day-1 vs fresh-from-uniform fit agree to "
      f"{max_norm_distance(updated.distribution, fresh.distribution):.2e}")
