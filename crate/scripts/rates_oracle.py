"""Independent evaluation of the closed-form rates, unit constants.

Prints `name convexity H lambda B sigma M K R value` lines that are frozen
into crates/core/tests/rates_regression.rs. Uses mpmath at 50 digits so the
frozen values carry no float rounding of their own.
"""

from mpmath import mp, mpf, sqrt, cbrt, exp, log

mp.dps = 50


def general(name, H, B, s, M, K, R):
    N = M * K * R
    if name == "minibatch":
        return H * B**2 / R + s * B / sqrt(N)
    if name == "thumb_twiddling":
        return H * B**2 / R + s * B / sqrt(M * R)
    if name == "stich2018":
        return H * B**2 / R ** (mpf(2) / 3) + H * B**2 / (K * R) ** (mpf(3) / 5) + s * B / sqrt(N)
    if name == "stich2019":
        return H * B**2 * M / R + s * B / sqrt(N)
    if name == "khaled":
        return s**2 * M / (H * R) + (H**2 * B**2 + s**2) / (H * sqrt(N))
    if name == "local_upper":
        a = H * B**2 / (K * R) + s * B / sqrt(N) + cbrt(H * s**2 * B**4) / (cbrt(K) * R ** (mpf(2) / 3))
        b = H * B**2 / (K * R) + s * B / sqrt(K * R)
        return min(a, b)
    if name == "local_lower":
        return min(cbrt(H) * cbrt(s**2) * B ** (mpf(4) / 3) / (K * R) ** (mpf(2) / 3), H * B**2) + s * B / sqrt(N)
    if name == "local_quadratic":
        return H * B**2 / (K * R) + s * B / sqrt(N)
    if name == "local_acsa_quadratic":
        return H * B**2 / (K * R) ** 2 + s * B / sqrt(N)
    if name == "serial":
        return H * B**2 / (K * R) + s * B / sqrt(K * R)
    raise KeyError(name)


def strongly_convex(name, H, lam, B, s, M, K, R):
    N = M * K * R
    g = H**2 * B**2 + s**2
    if name == "minibatch":
        return H * B**2 * exp(-lam * R / (4 * H)) + s**2 / (lam * N)
    if name == "thumb_twiddling":
        return H * B**2 * exp(-lam * R / (4 * H)) + s**2 / (lam * M * R)
    if name == "stich2018":
        return (s**2 / (lam * N) + H * s**2 / (lam**2 * M * K**2 * R**2) + H * g / (lam**2 * R**2)
                + H**3 * g / (lam**4 * K**3 * R**3) + g / (lam * R**3))
    if name == "stich2019":
        return H * K * M * B**2 * exp(-lam * R / (10 * H * M)) + s**2 / (lam * N)
    if name == "khaled":
        return H * B**2 / (K * R) ** 2 + H * s**2 / (lam**2 * N) + H**2 * s**2 / (lam**3 * K * R**2)
    if name == "local_upper":
        e = H * B**2 * exp(-lam * K * R / (4 * H))
        a = e + s**2 / (lam * N) + H * s**2 * log(9 + lam * K * R / H) / (lam**2 * K * R**2)
        return min(a, e + s**2 / (lam * K * R))
    if name == "local_lower":
        first = min(cbrt(H) * cbrt(s**2) * B ** (mpf(4) / 3) / (K * R) ** (mpf(2) / 3),
                    H * s**2 / (lam**2 * K**2 * R**2), H * B**2)
        return first + min(s * B / sqrt(N), s**2 / (lam * N))
    if name == "local_quadratic":
        return H * B**2 * exp(-lam * K * R / (4 * H)) + s**2 / (lam * N)
    if name == "local_acsa_quadratic":
        return H * B**2 / (K * R) ** 2 + s**2 / (lam * N)
    if name == "serial":
        return H * B**2 * exp(-lam * K * R / (4 * H)) + s**2 / (lam * K * R)
    raise KeyError(name)


CASES = [
    ("minibatch", "general", 1, 0, 1, 1, 1, 1, 1),
    ("minibatch", "general", 2, 0, 3, 0.5, 16, 4, 10),
    ("thumb_twiddling", "general", 1, 0, 1, 1, 8, 2, 5),
    ("stich2018", "general", 1, 0, 1, 1, 100, 10, 10),
    ("stich2019", "general", 1.5, 0, 2, 1, 7, 3, 11),
    ("khaled", "general", 1, 0, 1, 1, 4, 5, 6),
    ("local_upper", "general", 1, 0, 1, 1, 256, 2, 64),
    ("local_upper", "general", 1, 0, 1, 1e-3, 100, 10, 10),
    ("local_lower", "general", 1, 0, 1, 1, 256, 512, 4),
    ("local_quadratic", "general", 3, 0, 0.5, 2, 10, 20, 30),
    ("local_acsa_quadratic", "general", 1, 0, 1, 1, 10, 200, 100),
    ("serial", "general", 1, 0, 1, 1, 1, 6, 7),
    ("minibatch", "strongly_convex", 1, 0.1, 1, 1, 10, 5, 40),
    ("thumb_twiddling", "strongly_convex", 2, 0.5, 1, 1, 3, 3, 3),
    ("stich2018", "strongly_convex", 1, 0.05, 1, 1, 10, 10, 10),
    ("stich2019", "strongly_convex", 1, 0.2, 1, 1, 4, 8, 100),
    ("khaled", "strongly_convex", 1, 0.25, 2, 1, 2, 4, 8),
    ("local_upper", "strongly_convex", 1, 0.01, 1, 1, 50, 20, 5),
    ("local_lower", "strongly_convex", 1, 0.0625, 1, 1, 16, 2, 64),
    ("serial", "strongly_convex", 4, 1, 1, 2, 1, 3, 9),
]


def main():
    for name, conv, H, lam, B, s, M, K, R in CASES:
        H, lam, B, s, M, K, R = (mpf(v) for v in (H, lam, B, s, M, K, R))
        v = general(name, H, B, s, M, K, R) if conv == "general" else strongly_convex(name, H, lam, B, s, M, K, R)
        print(name, conv, *(mp.nstr(x, 17) for x in (H, lam, B, s, M, K, R)), mp.nstr(v, 20))


if __name__ == "__main__":
    main()
