import numpy as np
import pytest

from tmx.datagen import DatasetConfig, gen_transmission, propagate, sample_inputs, shift_dataset
from tmx.model import CouplingMatrix, SampleSet, assemble_M
from tmx.pseudolikelihood import FVariant

VARIANTS = [FVariant("InfInf"), FVariant("ZeroInf"), FVariant("ZeroOne"), FVariant("SymUnit"),
            FVariant("SymUnit", 0.5)]


def random_model(rng, w=2, jitter=0.3, beta_range=(1.0, 5.0)):
    """Block-form coupling matrix with every structural entry perturbed."""
    h = w * w
    t = rng.uniform(0, 1, (h, h))
    t /= t.sum(axis=1, keepdims=True)
    m = assemble_M(t, rng.uniform(*beta_range, size=h))
    noise = rng.normal(0, jitter, m.entries.shape)
    entries = m.entries + np.triu(noise, 1) + np.triu(noise, 1).T
    # keep every A_i comfortably positive
    np.fill_diagonal(entries, -np.abs(np.diag(m.entries)) - rng.uniform(0.5, 2.0, m.n))
    return CouplingMatrix(entries, m.mask)


def random_samples(rng, n, m, shifted):
    x = rng.uniform(0, 1, (m, n))
    ds = SampleSet.from_array(x)
    return shift_dataset(ds) if shifted else ds


def central_diff(f, x, rel_step=6e-6):
    """Central differences with a step proportional to each coordinate."""
    g = np.empty_like(x)
    for k in range(x.size):
        h = rel_step * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (f(xp) - f(xm)) / (2 * h)
    return g


def small_dataset(w=2, s=0.5, m=2000, sigma=0.0, seed=0, shifted=True):
    cfg = DatasetConfig(w=w, s=s, m_samples=m, sigma_noise=sigma, seed=seed)
    t = gen_transmission(w, s, seed)
    ds = propagate(t, sample_inputs(cfg), sigma, True, seed)
    return t, (shift_dataset(ds) if shifted else ds)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
