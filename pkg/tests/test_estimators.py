import dataclasses

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gfscma.config import ConfigError, SystemConfig, ebn0_to_noise_var
from gfscma.estimators import BPGAEPReceiver, BPMFReceiver, GenieMPAReceiver, check_frame
from gfscma.frame import generate_frame
from conftest import System


@pytest.fixture(scope="module")
def frame():
    sys_ = System(SystemConfig(B=3, N=6, K=12, N_s=16, lambda_activity=4.0, noise_var=ebn0_to_noise_var(14.0, 4)))
    return generate_frame(sys_.config, sys_.pattern, sys_.codebook, sys_.pilots, np.random.default_rng(3))


class TestCheckFrame:
    def test_type(self):
        with pytest.raises(TypeError):
            check_frame(np.zeros((3, 3)))

    def test_shape_and_finite(self, frame):
        with pytest.raises(ConfigError):
            check_frame(dataclasses.replace(frame, Y=frame.Y[:, :-1]))
        bad = frame.Y.copy()
        bad[0, 0, 0] = np.nan
        with pytest.raises(ConfigError):
            check_frame(dataclasses.replace(frame, Y=bad))
        assert check_frame(frame) is frame


@pytest.mark.parametrize("cls", [BPGAEPReceiver, BPMFReceiver, GenieMPAReceiver])
class TestEstimators:
    def test_fit_attributes(self, cls, frame):
        est = cls().fit(frame)
        cfg = frame.config
        assert est.h_hat_.shape == frame.H.shape
        assert est.active_.shape == (cfg.K,)
        assert est.symbol_posteriors_.shape == (cfg.B, cfg.N_s, cfg.K, cfg.M + 1)
        assert est.llr_.shape == frame.bits.shape
        assert est.n_iter_ >= 1 and est.n_ops_ > 0

    def test_predict_matches_output(self, cls, frame):
        est = cls()
        np.testing.assert_array_equal(est.predict(frame), est.output_.bits)

    def test_predict_unfitted(self, cls):
        with pytest.raises(NotFittedError):
            cls().predict()

    def test_score_high_at_good_snr(self, cls, frame):
        assert cls().score(frame) > 0.9

    def test_clone_and_params(self, cls):
        est = cls()
        params = est.get_params()
        assert clone(est).get_params() == params


def test_overrides_reach_config(frame):
    est = BPGAEPReceiver(max_iters=2, tol=0.0).fit(frame)
    assert est.n_iter_ == 2
    assert BPGAEPReceiver().set_params(damping=0.8).damping == 0.8


def test_genie_recovers_channel(frame):
    est = GenieMPAReceiver().fit(frame)
    np.testing.assert_array_equal(est.h_hat_, frame.H)
    np.testing.assert_array_equal(est.active_, frame.active)
