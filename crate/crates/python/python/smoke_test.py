"""Smoke test for the gqf extension module: python3 smoke_test.py"""
import json

import gqf

form = gqf.diagonal(["1", "1"], ["1"], tau=1)
system = gqf.descend(form)
assert json.loads(gqf.lift(system)) == json.loads(form), "descend/lift round trip"
print("descended forms:", json.loads(system)["forms"])

s_gamma = gqf.s_sum(form, ["3"], "0", ["0", "0"])
s_moebius = gqf.s_sum(form, ["3"], "0", ["0", "0"], moebius=True)
assert abs(s_gamma - s_moebius) < 1e-6 * max(1.0, abs(s_gamma)), (s_gamma, s_moebius)
print("S_(3)(0; 0) =", s_gamma)

obstructed = gqf.diagonal(["3"] * 5, ["3"])
report = json.loads(gqf.predict(obstructed, "1", 8.0, p_max=5, samples=20000))
assert report["obstructed"], "expected a local obstruction at p = 3"

try:
    gqf.descend('{"n": 2, "coeffs": [{"i": 0, "j": 0, "tau": 0, "tau\'": 0, "value": ["1", "x"]}]}')
except ValueError as e:
    print("malformed form rejected:", e)
else:
    raise AssertionError("malformed form accepted")

print("gqf", gqf.__version__, "smoke test OK")
