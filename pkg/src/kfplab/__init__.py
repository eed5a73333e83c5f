"""kfplab: a numerical laboratory for kinetic Fokker-Planck equations.

Solves d_t f + v . grad_x f = div_v (A grad_v f) on a periodic-in-x,
bounded-in-v slab with merely measurable elliptic coefficient fields A,
and measures the local regularity gains (energy, integrability, fractional
x-regularity, sup bounds, oscillation decay) that the hypoelliptic structure
is expected to produce, as scale-free cylinder-to-cylinder ratios.
"""

__version__ = "0.1.0"
