"""Reference values of E_{a,b}(z) by the defining series in high precision.

Run: python3 ml_oracle.py > ml_values.txt
Columns: alpha beta z value
"""
import mpmath as mp



def ml(a, b, z, terms=20000):
    # the largest term is about exp(|z|^(1/a)); carry that many extra digits
    mp.mp.dps = 80 + int(abs(float(z)) ** (1.0 / float(a)) / 2.3)
    a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
    s = mp.mpf(0)
    for k in range(terms):
        t = z**k / mp.gamma(a * k + b)
        s += t
        if k > 50 and abs(t) < mp.mpf(10) ** (-60) * max(abs(s), mp.mpf(10) ** (-100)):
            break
    return s


CASES = []
for a in ["0.6", "0.7", "0.9", "1"]:
    for b_off in ["0", "1", "2"]:
        b = str(mp.mpf(a) + int(b_off))
        for z in ["-50", "-20", "-8", "-3", "-1.5", "-1", "-0.3", "0.5", "2"]:
            CASES.append((a, b, z))
CASES += [("0.5", "1", "-1"), ("0.7", "0.7", "-3"), ("0.7", "1", "-3"), ("0.7", "1.5", "-6"),
          ("0.8", "0.35", "-4"), ("0.55", "0.55", "-12"), ("0.95", "0.95", "-30"),
          ("0.3", "1", "-5"), ("1", "0.5", "-7")]

if __name__ == "__main__":
    for a, b, z in CASES:
        v = ml(a, b, z)
        print(a, mp.nstr(mp.mpf(b), 17), z, mp.nstr(v, 25))
