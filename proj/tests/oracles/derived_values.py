"""High-precision reference values frozen into the C++ unit and acceptance tests.

Run: python3 tests/oracles/derived_values.py
"""
from mpmath import mp, mpf, exp, log, sqrt

mp.dps = 40

# softmax(1, -1)
z = exp(1) + exp(-1)
print("softmax(1,-1)       =", exp(1) / z, exp(-1) / z)

# single-subgroup pairing loss: anchor = positive = (1,0), one negative (0,1)
dp, dn = mpf(1), mpf(0)
den = exp(dp) + exp(dn)
q, qn = exp(dp) / den, exp(dn) / den
print("olp loss            =", -log(q))
print("olp grad            =", (q - 1), qn)

# restricted softmax cross-entropy, two pooled classes, scores (2, 0), label first
print("hep two-class       =", -log(exp(2) / (exp(2) + exp(0))))

# cosine-center softmax, lambda = 10, own center matched, one orthogonal center
lam = 10
print("c2hep matched       =", -log(exp(lam) / (exp(lam) + exp(0))))

# center update (1,0) with (0,1), phi = 0.5
raw = (mpf("0.5"), mpf("0.5"))
n = sqrt(raw[0] ** 2 + raw[1] ** 2)
print("center update       =", raw[0] / n, raw[1] / n)

# average precision, relevant at ranks 1 and 3
print("ap ranks {1,3}      =", (mpf(1) / 1 + mpf(2) / 3) / 2)
