"""Exact exponent bookkeeping: every bound below is a Fraction."""

from fractions import Fraction

from geodesic_amp_lab.amplifier_model import conditional_exponents
from geodesic_amp_lab.cli import exponent_table

for name in ("period-a", "period-b", "onspec", "offspec", "main"):
    lines, _ = exponent_table(name)
    print("\n".join(lines), end="\n\n")

print("conditional on a Hecke eigenvalue bound with exponent theta:")
for theta in (Fraction(0), Fraction(7, 64), Fraction(1, 4), Fraction(49, 100)):
    c = conditional_exponents(theta)
    print(f"  theta = {str(theta):>6}: L2 exponent {c.l2}, beta = t^{c.beta_choice}, "
          f"period bound t^{c.period_t} beta^{c.period_beta}")
