#!/usr/bin/env python3
"""Reference values for the Rust test suite, computed with mpmath.

Run `python3 tools/refvals.py` and paste the printed constants into the
tests that cite them.  Everything here is independent of the Rust code:
plain arbitrary-precision evaluations of the defining formulas.
"""

import mpmath as mp

mp.mp.dps = 40


def p(label, value):
    print(f"{label:58s} {mp.nstr(value, 22)}")


print("== log-gamma / digamma ==")
for x in ["0.5", "7.3", "23.7", "41.5", "1.0", "2.0"]:
    p(f"lngamma({x})", mp.log(abs(mp.gamma(mp.mpf(x)))))
p("lngamma(-0.5) (|Gamma|)", mp.log(abs(mp.gamma(mp.mpf("-0.5")))))
p("sign Gamma(-0.5)", mp.sign(mp.gamma(mp.mpf("-0.5"))))
p("lngamma(-2.3) (|Gamma|)", mp.log(abs(mp.gamma(mp.mpf("-2.3")))))
p("sign Gamma(-2.3)", mp.sign(mp.gamma(mp.mpf("-2.3"))))
for x in ["0.25", "3.7", "17.0", "-1.3"]:
    p(f"digamma({x})", mp.digamma(mp.mpf(x)))

print("== 2F1 ==")


def f21(a, b, c, z):
    return mp.hyp2f1(mp.mpf(a), mp.mpf(b), mp.mpf(c), mp.mpf(z))


# kappa=5 parameters (a,b,c) = (4/5, 1/5, 8/5)
p("2F1(4/5,1/5,8/5; 0.3)", f21("0.8", "0.2", "1.6", "0.3"))
p("2F1(4/5,1/5,8/5; 0.77)", f21("0.8", "0.2", "1.6", "0.77"))
p("2F1(4/5,1/5,8/5; 1)", f21("0.8", "0.2", "1.6", "1"))
p("Gauss ratio kappa=5", mp.gamma(mp.mpf("1.6")) * mp.gamma(mp.mpf("0.6"))
  / (mp.gamma(mp.mpf("0.8")) * mp.gamma(mp.mpf("1.4"))))
# kappa=10/3: (a,b,c) = (6/5, -1/5, 12/5)
p("2F1(6/5,-1/5,12/5; 0.62)", f21("1.2", "-0.2", "2.4", "0.62"))
# kappa=8/3 parameters: (3/2, -1/2, 3); c-a-b = 2 (log case)
p("2F1(3/2,-1/2,3; 0.75)", f21("1.5", "-0.5", "3", "0.75"))
p("2F1(3/2,-1/2,3; 0.98)", f21("1.5", "-0.5", "3", "0.98"))
p("2F1(3/2,-1/2,3; 1)", f21("1.5", "-0.5", "3", "1"))
p("32/(15 pi)", 32 / (15 * mp.pi))
# kappa=8 parameters: (1/2, 1/2, 1); c-a-b = 0 (log case)
p("2F1(1/2,1/2,1; 0.7)", f21("0.5", "0.5", "1", "0.7"))
# second 2F1 family used by the sign-structure ratio: (4/k, 12/k-1, 8/k)
p("2F1(4/5,7/5,8/5; 0.3) [kappa=5]", f21("0.8", "1.4", "1.6", "0.3"))
p("2F1(5/3,4,10/3; 0.85) [kappa=12/5]", f21("5/3", "4", "10/3", "0.85"))
# near-integer c-a-b (averaging diagnostics): c-a-b = 2 + 1e-3
p("2F1(3/2,-1/2,3.001; 0.75)", f21("1.5", "-0.5", "3.001", "0.75"))

print("== kappa constants ==")


def nu(k):
    return -2 * mp.cos(4 * mp.pi / k)


def big_c(k):
    return nu(k) / (4 * mp.sin(4 * mp.pi / k) ** 2) \
        * mp.gamma(2 - 8 / k) / mp.gamma(1 - 4 / k) ** 2


for ks in ["3.3", "5", "7.2", "10/3", "7", "3", "16/3", "6", "3.5", "2.2"]:
    k = mp.mpf(ks) if "/" not in ks else mp.mpf(ks.split("/")[0]) / mp.mpf(ks.split("/")[1])
    p(f"nu({ks})", nu(k))
    p(f"C({ks})", big_c(k))
    p(f"Chat({ks})", 4 * mp.sin(4 * mp.pi / k) ** 2 * big_c(k))
p("C(8/3) limit", mp.limit(lambda e: big_c(mp.mpf(8) / 3 + e), 0))
p("C(kappa)/nu(kappa) at kappa->8", mp.limit(lambda e: big_c(8 - e) / nu(8 - e), 0))
p("nu'(8) [d nu/d kappa at 8]", mp.diff(nu, 8))
p("-pi/8", -mp.pi / 8)

print("== Appendix-A style closed forms ==")
for ks in ["3.3", "5", "7.2"]:
    k = mp.mpf(ks)
    val = 4 * mp.sin(4 * mp.pi / k) ** 2 * mp.gamma(1 - 4 / k) ** 2 / mp.gamma(2 - 8 / k)
    p(f"nu/C({ks}) = 4sin^2 G^2/G", val)
k = mp.mpf(5)
a3 = 4 * mp.sin(4 * mp.pi / k) ** 2 * (1 - nu(k) ** 2) * mp.expjpi(16 / k) \
    * mp.gamma(12 / k - 1) * mp.gamma(1 - 4 / k) / mp.gamma(8 / k)
p("A3(5) re", mp.re(a3))
p("A3(5) im", mp.im(a3))
a4 = (1 - mp.expjpi(-8 / k)) * mp.gamma(1 - 4 / k) * mp.gamma(8 / k - 1) / mp.gamma(4 / k)
p("A4(5) re", mp.re(a4))
p("A4(5) im", mp.im(a4))

print("== pfaffian oracle ==")
# 4x4 antisymmetric with entries 1/(x_j - x_i), x = (0,1,2,4):
# pf = a12*a34 - a13*a24 + a14*a23
x = [mp.mpf(t) for t in (0, 1, 2, 4)]
e = lambda i, j: 1 / (x[j] - x[i])
p("pf 1/(xj-xi), x=(0,1,2,4)", e(0, 1) * e(2, 3) - e(0, 2) * e(1, 3) + e(0, 3) * e(1, 2))

print("== N=2 closed-form partition functions ==")


def f1_const(k):
    # 2F1(4/k, 1-4/k, 8/k; 1) by the Gauss summation formula
    return mp.gamma(8 / k) * mp.gamma(8 / k - 1) / (mp.gamma(4 / k) * mp.gamma(12 / k - 1))


def chi_of(x):
    return (x[1] - x[0]) * (x[3] - x[2]) / ((x[2] - x[0]) * (x[3] - x[1]))


def z_pair(k, x):
    # links {1,2},{3,4}
    h = (6 - k) / (2 * k)
    chi = chi_of(x)
    return ((x[1] - x[0]) * (x[3] - x[2])) ** (-2 * h) * (1 - chi) ** (2 / k) \
        * mp.hyp2f1(4 / k, 1 - 4 / k, 8 / k, 1 - chi) / f1_const(k)


def z_rainbow(k, x):
    # links {1,4},{2,3}
    h = (6 - k) / (2 * k)
    chi = chi_of(x)
    return ((x[3] - x[0]) * (x[2] - x[1])) ** (-2 * h) * chi ** (2 / k) \
        * mp.hyp2f1(4 / k, 1 - 4 / k, 8 / k, chi) / f1_const(k)


x0 = [mp.mpf(t) for t in (0, 1, 2, 3)]
for ks in ["5", "10/3", "7", "16/3", "6", "3.5", "2.2", "4"]:
    k = mp.mpf(ks) if "/" not in ks else mp.mpf(ks.split("/")[0]) / mp.mpf(ks.split("/")[1])
    p(f"F1({ks}) = 2F1(4/k,1-4/k,8/k;1)", f1_const(k))
p("Z_pair(5, x=(0,1,2,3))", z_pair(5, x0))
p("Z_rainbow(5, x=(0,1,2,3))", z_rainbow(5, x0))
xh = [mp.mpf(t) for t in ("0", "1", "1.5", "3")]
p("chi of (0,1,1.5,3)", chi_of(xh))
p("Z_pair(5, x=(0,1,1.5,3))", z_pair(5, xh))
p("Z_rainbow(5, x=(0,1,1.5,3))", z_rainbow(5, xh))
p("F_pair(5, x=(0,1,2,3))", nu(5) ** 2 * z_pair(5, x0) + nu(5) * z_rainbow(5, x0))
p("F_rainbow(5, x=(0,1,2,3))", nu(5) * z_pair(5, x0) + nu(5) ** 2 * z_rainbow(5, x0))
# Cardy check: nu(6)=1 and F == 1 for every pattern, so Z_pair + Z_rainbow == 1
p("Z_pair+Z_rainbow at kappa=6", z_pair(6, x0) + z_rainbow(6, x0))

print("== three-point function z3 ==")


def z3(k, xi, x3, x4):
    return (x4 - x3) ** (2 / k) * ((x3 - xi) * (x4 - xi)) ** (1 - 8 / k) / f1_const(k)


p("z3(5; 0,1,2)", z3(mp.mpf(5), mp.mpf(0), mp.mpf(1), mp.mpf(2)))
p("z3(5; 0.3,1.1,2.7)", z3(mp.mpf(5), mp.mpf("0.3"), mp.mpf("1.1"), mp.mpf("2.7")))
p("(nu(5)^2-1)*z3(5; 0,1,2)", (nu(5) ** 2 - 1) * z3(mp.mpf(5), mp.mpf(0), mp.mpf(1), mp.mpf(2)))
k83 = mp.mpf(8) / 3
p("z3(8/3; 0,1,2)", z3(k83, mp.mpf(0), mp.mpf(1), mp.mpf(2)))
p("(15 pi/32)*(x4-x3)^(3/4)((x3-xi)(x4-xi))^-2 at (0,1,2)",
  15 * mp.pi / 32 * 1 ** mp.mpf("0.75") * (1 * 2) ** (-2))

print("== renormalized family at kappa=8/3 (N=2) ==")
# Fhat_beta^(8/3) = sum_alpha Mhat(alpha,beta) Z_alpha^(8/3); at N=2 Mhat swaps
p("Fhat_pair(8/3, x=(0,1,2,3)) = Z_rainbow(8/3)", z_rainbow(k83, x0))
p("Fhat_rainbow(8/3, x=(0,1,2,3)) = Z_pair(8/3)", z_pair(k83, x0))
p("Fhat_pair(8/3, x=(0,1,1.5,3))", z_rainbow(k83, xh))
p("Fhat_rainbow(8/3, x=(0,1,1.5,3))", z_pair(k83, xh))
# direct slope route oracle: -k^2/(8 pi sin(4pi/k)) * d/dk' F at k'=8/3
const83 = -k83 ** 2 / (8 * mp.pi * mp.sin(4 * mp.pi / k83))
p("renorm const at 8/3 [k^2/(8pi)]", const83)


def f_pair_k(kp, x):
    return nu(kp) ** 2 * z_pair(kp, x) + nu(kp) * z_rainbow(kp, x)


def f_rainbow_k(kp, x):
    return nu(kp) * z_pair(kp, x) + nu(kp) ** 2 * z_rainbow(kp, x)


p("slope-route Fhat_pair(8/3, x0)", const83 * mp.diff(lambda kp: f_pair_k(kp, x0), k83))
p("slope-route Fhat_rainbow(8/3, x0)", const83 * mp.diff(lambda kp: f_rainbow_k(kp, x0), k83))

print("== renormalized family at kappa=8 ==")
# Zhat_alpha^(8) = lim Z_alpha(k')/(8-k')^(N-1);  Fhat_beta^(8) = sum Mhat Zhat
zhat8_pair = mp.limit(lambda e: z_pair(8 - e, x0) / e, 0)
zhat8_rbw = mp.limit(lambda e: z_rainbow(8 - e, x0) / e, 0)
p("Zhat8_pair(x=(0,1,2,3))", zhat8_pair)
p("Zhat8_rainbow(x=(0,1,2,3))", zhat8_rbw)
p("Fhat8_pair(x=(0,1,2,3)) = Zhat8_rainbow", zhat8_rbw)
p("Fhat8_rainbow(x=(0,1,2,3)) = Zhat8_pair", zhat8_pair)
p("Fhat8 N=1 exponent check (x2-x1)^(1/4) at (0,2)", mp.mpf(2) ** mp.mpf("0.25"))
p("Fhat8_pair via (8/pi) F(k')/(8-k')^2",
  mp.limit(lambda e: 8 / mp.pi * f_pair_k(8 - e, x0) / e ** 2, 0))
p("Fhat8_rainbow via (8/pi) F(k')/(8-k')^2",
  mp.limit(lambda e: 8 / mp.pi * f_rainbow_k(8 - e, x0) / e ** 2, 0))

print("== sign structure ==")


def g_ratio(k, z):
    return mp.hyp2f1(4 / k, 12 / k - 1, 8 / k, z) / mp.hyp2f1(4 / k, 12 / k - 1, 8 / k, 1 - z)


for ks, guess in [("2.2", "0.6"), ("12/5", "0.5"), ("1.7", "0.5"), ("2.6", "0.5")]:
    k = mp.mpf(ks) if "/" not in ks else mp.mpf(ks.split("/")[0]) / mp.mpf(ks.split("/")[1])
    root = mp.findroot(lambda z: g_ratio(k, z) - 2 * mp.cos(4 * mp.pi / k), mp.mpf(guess))
    p(f"z({ks}) root of G = 2cos(4pi/k)", root)
# F_pair sign flip at kappa=2.2: configs on both sides of z(2.2)
k22 = mp.mpf("2.2")


def x_for_chi(chi):
    # x = (0, 1, x3, x3 + 1): chi = 1/x3^2, so x3 = 1/sqrt(chi) (> 1 required)
    t = 1 / mp.sqrt(chi)
    return [mp.mpf(0), mp.mpf(1), t, t + 1]


for chi_s in ["0.3", "0.9"]:
    xc = x_for_chi(mp.mpf(chi_s))
    p(f"x3 for chi={chi_s} (x=(0,1,x3,x3+1))", xc[2])
    p(f"F_pair(2.2) at chi={chi_s}", f_pair_k(k22, xc))

print("== kappa=16/3 spin representation (N=2) ==")


def spin_f(pattern, x):
    # pattern: list of (a,b) 0-based index pairs
    pref = mp.mpf(1)
    for (a, b) in pattern:
        pref *= abs(x[b] - x[a]) ** (-mp.mpf(1) / 8)
    total = mp.mpf(0)
    n = len(pattern)
    for bits in range(2 ** n):
        sg = [1 if (bits >> s) & 1 else -1 for s in range(n)]
        term = mp.mpf(1)
        for s in range(n):
            for t in range(s + 1, n):
                a_s, b_s = pattern[s]
                a_t, b_t = pattern[t]
                r = abs(x[a_t] - x[a_s]) * abs(x[b_s] - x[b_t]) \
                    / (abs(x[b_t] - x[a_s]) * abs(x[b_s] - x[a_t]))
                term *= r ** (mp.mpf(sg[s] * sg[t]) / 4)
        total += term
    return pref * mp.sqrt(total)


k163 = mp.mpf(16) / 3
p("spin F_pair(16/3, x=(0,1,2,3))", spin_f([(0, 1), (2, 3)], x0))
p("hyp  F_pair(16/3, x=(0,1,2,3))", f_pair_k(k163, x0))
p("spin F_rainbow(16/3, x=(0,1,2,3))", spin_f([(0, 3), (1, 2)], x0))
p("hyp  F_rainbow(16/3, x=(0,1,2,3))", f_rainbow_k(k163, x0))

print("== kappa=3 pfaffian closed form (N=2) ==")
x24 = [mp.mpf(t) for t in (0, 1, 2, 4)]
pf_val = 1 / (x24[1] - x24[0]) / (x24[3] - x24[2]) \
    - 1 / (x24[2] - x24[0]) / (x24[3] - x24[1]) \
    + 1 / (x24[3] - x24[0]) / (x24[2] - x24[1])
p("pf(1/(xj-xi)) x=(0,1,2,4)", pf_val)
p("hyp F_rainbow(3, x=(0,1,2,4))", f_rainbow_k(3, x24))
# the pfaffian equals F for the rainbow? or every beta? compare pair too:
p("hyp F_pair(3, x=(0,1,2,4))", f_pair_k(3, x24))

print("== kappa=4 closed forms ==")
p("F_pair(4, x=(0,1,2,3)) = 7/sqrt(3)", f_pair_k(4, x0))
p("Z_pair(4, x=(0,1,2,3)) = sqrt(3)/2", z_pair(4, x0))
p("Z_rainbow(4, x=(0,1,2,3)) = 1/(2 sqrt 3)", z_rainbow(4, x0))

print("== fused N=2 reference ==")
for ks in ["5", "4.5", "6.5"]:
    k = mp.mpf(ks)
    v = (nu(k) ** 2 - 1) * z3(k, mp.mpf("0.2"), mp.mpf("1.3"), mp.mpf("2.1"))
    p(f"fused_F({ks}; xi=0.2, x=(1.3,2.1))", v)
