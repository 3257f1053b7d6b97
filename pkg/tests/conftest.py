import numpy as np
import pytest

import freqattack as fa

TRAIN_SEED = 11
MODEL_SEED = 7
TRAIN_RNG_SEED = 12


@pytest.fixture(scope="session")
def trained_setup():
    """Builtin MLP trained on the synthetic dataset; shared across tests."""
    train_ds = fa.synthetic_dataset(600, seed=TRAIN_SEED)
    model = fa.init_model(train_ds.images.shape[1:], train_ds.num_classes, seed=MODEL_SEED)
    model, history = fa.train(
        model, train_ds, epochs=20, lr=0.05, rng=fa.make_rng(TRAIN_RNG_SEED)
    )
    return model, train_ds, history


@pytest.fixture(scope="session")
def trained_model(trained_setup):
    return trained_setup[0]


@pytest.fixture(scope="session")
def eval_dataset(trained_model):
    """Held-out synthetic images the trained model classifies correctly."""
    ds = fa.synthetic_dataset(90, seed=21)
    probs = fa.whitebox.forward_batch(trained_model, ds.images)
    correct = np.flatnonzero(np.argmax(probs, axis=1) == ds.labels)
    return ds.subset(correct)


@pytest.fixture(scope="session")
def checkpoint_dir(trained_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt")
    fa.save_checkpoint(path, trained_model)
    return path


class ConstantOracle:
    """No-signal oracle: same probability vector for every input."""

    def __init__(self, probs, input_shape=(32, 32, 3)):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.classes = len(self.probs)
        self.input_shape = input_shape
        self.queries = 0

    def query(self, x):
        self.queries += 1
        return self.probs.copy()


class FlipOracle:
    """Confidence 0.9 for class y on the exact reference image, 0.1 on
    anything that differs."""

    def __init__(self, x_ref, y, classes=3):
        self.x_ref = np.asarray(x_ref, dtype=np.float64)
        self.y = y
        self.classes = classes
        self.input_shape = self.x_ref.shape
        self.queries = 0

    def query(self, x):
        self.queries += 1
        p_y = 0.9 if np.array_equal(x, self.x_ref) else 0.1
        probs = np.full(self.classes, (1.0 - p_y) / (self.classes - 1))
        probs[self.y] = p_y
        return probs


class FailingOracle:
    """Raises a transport error after a given number of good queries."""

    def __init__(self, inner, fail_after):
        self.inner = inner
        self.fail_after = fail_after
        self.classes = inner.classes
        self.input_shape = inner.input_shape

    @property
    def queries(self):
        return self.inner.queries

    def query(self, x):
        if self.inner.queries >= self.fail_after:
            raise fa.oracle.OracleTransportError("synthetic transport failure")
        return self.inner.query(x)
