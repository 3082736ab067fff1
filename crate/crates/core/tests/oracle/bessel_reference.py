# Reference values for the Bessel K tests, evaluated with mpmath at 40
# significant digits. Output is pasted into tests/bessel_accuracy.rs.
import mpmath as mp

mp.mp.dps = 40

nus = [0.05, 0.2, 0.5, 0.77, 1.0, 1.3, 2.5, 3.7, 7.25, 12.0, 19.9]
xs = [1e-6, 1e-3, 0.05, 0.7, 1.0, 1.999, 2.0, 3.3, 10.0, 47.0, 180.0, 699.0]

for nu in nus:
    for x in xs:
        v = mp.besselk(mp.mpf(repr(nu)), mp.mpf(repr(x)))
        print(f"    ({nu!r}, {x!r}, {mp.nstr(v, 20)}),")

# Matern derivative oracle: d/dnu of x^nu K_nu(x) / (Gamma(nu) 2^(nu-1))
def matern(nu, x):
    return x**nu * mp.besselk(nu, x) / (mp.gamma(nu) * 2**(nu - 1))

print("// (nu, x, dM/dnu)")
for nu in [0.3, 0.5, 1.3, 2.5]:
    for x in [0.1, 0.9, 2.7]:
        d = mp.diff(lambda t: matern(t, mp.mpf(repr(x))), mp.mpf(repr(nu)))
        print(f"    ({nu!r}, {x!r}, {mp.nstr(d, 20)}),")
