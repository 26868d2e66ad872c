"""Single-site Wegner ratio R(E0, E1) by adaptive scipy quadrature of both
dual integrals. Frozen into tests/test_wegner.cpp."""
import numpy as np
from scipy import integrate

E0, E1, c = 0.5 + 0.3j, 0.7, 1.0


def cquad(f, a, b, c_, d):
    re = integrate.dblquad(lambda v, u: f(u, v).real, a, b, c_, d, epsabs=1e-12)[0]
    im = integrate.dblquad(lambda v, u: f(u, v).imag, a, b, c_, d, epsabs=1e-12)[0]
    return re + 1j * im


def sb(n):
    def f(x, th):
        y = np.exp(1j * th)
        return (np.exp(-n / 2 * c * (x * x - y * y)) * n * (1 + c * x * y)
                * (x * np.exp(1j * E0 * x)) ** n * (y * np.exp(1j * E1 * y)) ** (-n) / x / (2 * np.pi))
    return cquad(f, 0, 30, 0, 2 * np.pi)


def hs(n):
    def f(x, s):
        y = 1j * s
        return (-np.exp(-n / 2 / c * (x * x - y * y)) * n * (1 - (x - E0) * (y - E1) / c)
                * (y - E1) ** (n - 1) / (x - E0) ** (n + 1) / (2 * np.pi))
    return cquad(f, -12, 12, -12, 12)


if __name__ == "__main__":
    for n in (1, 2, 3):
        a, b = sb(n), hs(n)
        print(n, repr(a), repr(b), abs(a - b))
