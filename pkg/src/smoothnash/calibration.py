"""Constants tuned empirically for desk-scale instances.

The sparsity and sample-size formulas carry unspecified constants. The
library defaults are 1.0, which gives sizes far beyond exhaustive search at
typical accuracies. The values below were chosen on held-out random games and
are used by the command-line tool and the acceptance suite; any run remains
gated by full-information verification.
"""

# find_weak: k = ceil(c1 m log(8m/sigma) / eps^2); 0.01 starts at k = 1 or 2
# for eps around 0.3, and escalation doubles from there.
WEAK_C1 = 0.01

# bimatrix_strong: k = ceil(2 c1 log(2/sigma) / (eps/4)^2).
BIMATRIX_C1 = 0.001

# general_strong: k = ceil(4 c m log(m/sigma) / (eps/(2m))^2).
GENERAL_C = 0.0003

# query_equilibrium: sparsity t and deviation sample size N.
QUERY_C1 = 0.001
QUERY_C2 = 0.05
