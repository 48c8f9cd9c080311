"""jwass: joint-Wasserstein domain-invariant representation learning.

The package has three faces that share one set of primitives:

- a trainer that aligns two domains' learned representations with a
  class-dependent (or joint, or marginal) Wasserstein critic,
- an exact optimal-transport oracle on empirical joint distributions,
  used as the evaluation metric and as ground truth in tests,
- a verification suite that checks every inequality the method rests on
  against that oracle, instance by instance.
"""

__version__ = "0.1.0"
