import numpy as np
import pytest

from spillnet.var import companion_spectral_radius

CRITERIA: list[str] = []


def record(tag: str, ok: bool | None, detail: str) -> None:
    """ok=None marks a skipped criterion."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    CRITERIA.append(f"{status} [{tag}] {detail}")


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)


def random_spd(rng, m, cond_floor=0.1):
    a = rng.standard_normal((m, m))
    return a @ a.T / m + cond_floor * np.eye(m)


def random_stable_phi(rng, m, p, radius=0.9):
    phi = rng.uniform(-1, 1, size=(p, m, m)) / m
    r = companion_spectral_radius(phi)
    if r >= radius:
        phi *= radius / r * 0.99
    return phi


def simulate_var(rng, phi, sigma, t_len, c=None, burn=500):
    p, m, _ = phi.shape
    chol = np.linalg.cholesky(sigma)
    c = np.zeros(m) if c is None else c
    y = np.zeros((burn + t_len + p, m))
    e = rng.standard_normal((burn + t_len, m)) @ chol.T
    for t in range(burn + t_len):
        y[t + p] = c + sum(phi[l] @ y[t + p - 1 - l] for l in range(p)) + e[t]
    return y[p + burn :]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
