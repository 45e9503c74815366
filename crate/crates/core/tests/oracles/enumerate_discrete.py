"""Exact effects of a discrete SCM by enumeration in rational arithmetic.

Usage: python3 enumerate_discrete.py fixtures/cpt-A.json
"""
import json
import sys
from fractions import Fraction as F


def load(path):
    spec = json.load(open(path))["discrete"]
    conv = lambda v: F(str(v))
    p_x = [conv(v) for v in spec["p_x"]]
    p_s2 = [conv(v) for v in spec["p_s2_given_x"]]
    p_m = [[[conv(v) for v in row] for row in block] for block in spec["p_m_given_sx"]]
    p_y = [[[conv(v) for v in row] for row in block] for block in spec["p_y_given_smx"]]
    return p_x, p_s2, p_m, p_y


def effects(p_x, p_s2, p_m, p_y):
    nx, nm = len(p_x), len(p_m[0][0])
    p_s = lambda x, s: p_s2[x] if s == 1 else 1 - p_s2[x]

    def p_x_given(s):
        joint = [p_x[x] * p_s(x, s) for x in range(nx)]
        z = sum(joint)
        return [j / z for j in joint]

    # brute force over the joint distribution for E[Y | s]
    def observed(s):
        num = den = F(0)
        for x in range(nx):
            for m in range(nm):
                w = p_x[x] * p_s(x, s) * p_m[s][x][m]
                num += w * p_y[s][x][m]
                den += w
        return num / den

    inner = lambda s, sm, x: sum(p_m[sm][x][m] * p_y[s][x][m] for m in range(nm))
    px = [p_x_given(0), p_x_given(1)]
    q = lambda s, sm, c: sum(px[c][x] * inner(s, sm, x) for x in range(nx))
    q_all = lambda s, sm: sum(p_x[x] * inner(s, sm, x) for x in range(nx))
    tv = observed(1) - observed(0)
    assert tv == q(1, 1, 1) - q(0, 0, 0)
    out = {
        "tv": tv,
        "ctf_de": q(1, 0, 0) - q(0, 0, 0),
        "ctf_ie": q(1, 0, 0) - q(1, 1, 0),
        "ctf_se": q(1, 1, 0) - q(1, 1, 1),
        "nde": q_all(1, 0) - q_all(0, 0),
        "nie": q_all(0, 1) - q_all(0, 0),
    }
    assert out["tv"] == out["ctf_de"] - out["ctf_ie"] - out["ctf_se"]
    return out


if __name__ == "__main__":
    for k, v in effects(*load(sys.argv[1])).items():
        print(f"{k} = {v} = {float(v)!r}")
